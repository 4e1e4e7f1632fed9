//! Distances, PCA and seeded random streams.
//!
//! Random streams are ChaCha8 (`rand_chacha`): 256-bit key, 64-bit stream
//! id and a block counter, so a `(seed, stream)` pair names one fixed
//! sequence on every platform and build.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Dataset, Embedding, Init};

pub type RngStream = ChaCha8Rng;

#[inline]
pub fn squared_distance(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (a, b) in p.iter().zip(q) {
        let d = a - b;
        acc += d * d;
    }
    acc
}

#[inline]
pub fn euclidean_distance(p: &[f64], q: &[f64]) -> f64 {
    squared_distance(p, q).sqrt()
}

pub fn seeded_rng(seed: u64) -> RngStream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for worker `index`, derived from the run seed.
pub fn split_rng(seed: u64, index: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Top-2 principal directions of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    /// Two unit-norm rows of length `m` (the second is zero when `m = 1`).
    pub components: [Vec<f64>; 2],
    pub mean: Vec<f64>,
    /// Population variance captured along each component.
    pub explained: [f64; 2],
}

/// Dense eigendecomposition of the covariance up to this many features,
/// power iteration above.
pub const PCA_DENSE_MAX_DIM: usize = 1000;
const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaSolver {
    Auto,
    Dense,
    Power,
}

pub fn pca_fit(data: &Dataset) -> Result<PcaBasis> {
    pca_fit_with(data, PcaSolver::Auto)
}

pub fn pca_fit_with(data: &Dataset, solver: PcaSolver) -> Result<PcaBasis> {
    let (n, m) = (data.n(), data.m());
    if n < 2 {
        return Err(Error::TooFewPoints { n });
    }
    let mut mean = vec![0.0; m];
    for i in 0..n {
        for (acc, v) in mean.iter_mut().zip(data.row(i)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);

    let mut total = 0.0;
    for i in 0..n {
        total += squared_distance(data.row(i), &mean);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateData);
    }

    let use_dense = match solver {
        PcaSolver::Auto => m <= PCA_DENSE_MAX_DIM,
        PcaSolver::Dense => true,
        PcaSolver::Power => false,
    };
    let (mut comps, explained) = if use_dense { dense_top2(data, &mean) } else { power_top2(data, &mean) };
    for c in comps.iter_mut() {
        fix_sign(c);
    }
    Ok(PcaBasis { components: comps, mean, explained })
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn covariance(data: &Dataset, mean: &[f64]) -> DMatrix<f64> {
    let (n, m) = (data.n(), data.m());
    const BLOCK: usize = 2048;
    let mut cov = DMatrix::<f64>::zeros(m, m);
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let block = DMatrix::from_fn(end - start, m, |r, c| data.row(start + r)[c] - mean[c]);
        cov += block.tr_mul(&block);
        start = end;
    }
    cov / n as f64
}

fn dense_top2(data: &Dataset, mean: &[f64]) -> ([Vec<f64>; 2], [f64; 2]) {
    let m = data.m();
    let eig = SymmetricEigen::new(covariance(data, mean));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let pick = |k: usize| -> (Vec<f64>, f64) {
        match order.get(k) {
            Some(&idx) => (eig.eigenvectors.column(idx).iter().copied().collect(), eig.eigenvalues[idx].max(0.0)),
            None => (vec![0.0; m], 0.0),
        }
    };
    let (c0, e0) = pick(0);
    let (c1, e1) = pick(1);
    ([c0, c1], [e0, e1])
}

/// `C v` without materialising the covariance.
fn cov_apply(data: &Dataset, mean: &[f64], v: &[f64]) -> Vec<f64> {
    let n = data.n();
    let mut out = vec![0.0; v.len()];
    for i in 0..n {
        let row = data.row(i);
        let mut proj = 0.0;
        for ((x, mu), w) in row.iter().zip(mean).zip(v) {
            proj += (x - mu) * w;
        }
        for ((o, x), mu) in out.iter_mut().zip(row).zip(mean) {
            *o += proj * (x - mu);
        }
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
    out
}

fn power_top2(data: &Dataset, mean: &[f64]) -> ([Vec<f64>; 2], [f64; 2]) {
    let m = data.m();
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut values = [0.0; 2];
    for k in 0..2.min(m) {
        // Deterministic, non-axis-aligned start.
        let mut v = DVector::from_fn(m, |i, _| 1.0 + (i as f64 * 0.618_033_988_75 + k as f64 * 0.5).fract());
        deflate(v.as_mut_slice(), &found);
        v.normalize_mut();
        let mut lambda = 0.0;
        for _ in 0..POWER_MAX_ITERS {
            let mut w = DVector::from_vec(cov_apply(data, mean, v.as_slice()));
            deflate(w.as_mut_slice(), &found);
            lambda = w.norm();
            if lambda == 0.0 {
                break;
            }
            w /= lambda;
            let delta = (&w - &v).norm();
            v = w;
            if delta < POWER_TOL {
                break;
            }
        }
        values[k] = lambda;
        found.push(v.as_slice().to_vec());
    }
    while found.len() < 2 {
        found.push(vec![0.0; m]);
    }
    let c1 = found.pop().unwrap();
    let c0 = found.pop().unwrap();
    ([c0, c1], values)
}

fn deflate(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
    }
}

/// `(points - mean) · componentsᵀ`.
pub fn pca_project(basis: &PcaBasis, data: &Dataset) -> Result<Embedding> {
    if basis.mean.len() != data.m() {
        return Err(Error::DimensionMismatch { expected: basis.mean.len(), found: data.m() });
    }
    let mut flat = Vec::with_capacity(2 * data.n());
    for i in 0..data.n() {
        let row = data.row(i);
        for comp in &basis.components {
            let mut acc = 0.0;
            for ((x, mu), c) in row.iter().zip(&basis.mean).zip(comp) {
                acc += (x - mu) * c;
            }
            flat.push(acc);
        }
    }
    Embedding::from_vec(data.n(), flat)
}

/// Starting coordinates for an iterative method. PCA falls back to a
/// uniform draw in `[-1, 1]²` when the data has no variance.
pub fn initial_embedding(data: &Dataset, init: Init, rng: &mut RngStream) -> Embedding {
    if init == Init::Pca {
        match pca_fit(data).and_then(|basis| pca_project(&basis, data)) {
            Ok(e) => return e,
            Err(err) => log::warn!("PCA initialisation unavailable ({err}), using random init"),
        }
    }
    let flat = (0..2 * data.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Embedding::from_vec(data.n(), flat).expect("2n values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_dataset;
    use ndarray::Array2;
    use rand::RngCore;
    use rand_distr::{Distribution, StandardNormal};

    fn dataset(n: usize, m: usize, seed: u64, f: impl Fn(&mut RngStream, usize) -> f64) -> Dataset {
        let mut rng = seeded_rng(seed);
        let raw = Array2::from_shape_fn((n, m), |(_, c)| f(&mut rng, c));
        validate_dataset(raw, None).unwrap()
    }

    #[test]
    fn three_four_five() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]), 0.0);
    }

    #[test]
    fn distance_matches_naive_loop() {
        let mut rng = seeded_rng(3);
        for _ in 0..100 {
            let p: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
            let q: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut s = 0.0;
            for i in 0..10 {
                s += (p[i] - q[i]).powi(2);
            }
            assert!((euclidean_distance(&p, &q) - s.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_inequality() {
        let mut rng = seeded_rng(4);
        for _ in 0..1000 {
            let v: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let (a, b, c) = (&v[0], &v[1], &v[2]);
            assert!(euclidean_distance(a, c) <= euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-9);
        }
    }

    #[test]
    fn pca_on_x_axis() {
        let raw = Array2::from_shape_fn((6, 2), |(r, c)| if c == 0 { r as f64 - 2.0 } else { 0.0 });
        let d = validate_dataset(raw, None).unwrap();
        let b = pca_fit(&d).unwrap();
        assert!((b.components[0][0].abs() - 1.0).abs() < 1e-12);
        assert!(b.components[0][1].abs() < 1e-12);
        assert!(b.explained[1].abs() < 1e-12);
    }

    #[test]
    fn pca_duplicate_point_is_degenerate() {
        let raw = Array2::from_shape_fn((10, 3), |(_, c)| c as f64 + 0.5);
        let d = validate_dataset(raw, None).unwrap();
        assert!(matches!(pca_fit(&d), Err(Error::DegenerateData)));
    }

    /// Cyclic Jacobi eigenvalues of a small symmetric matrix; test-only oracle.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    #[test]
    fn isotropic_gaussian_has_balanced_variances() {
        let d = dataset(1000, 5, 11, |rng, _| rng.sample::<f64, _>(StandardNormal));
        let b = pca_fit(&d).unwrap();
        let ratio = b.explained[0] / b.explained[1];
        assert!((0.8..=1.25).contains(&ratio), "ratio {ratio}");

        let mean = &b.mean;
        let mut cov = vec![vec![0.0; 5]; 5];
        for i in 0..d.n() {
            let r = d.row(i);
            for p in 0..5 {
                for q in 0..5 {
                    cov[p][q] += (r[p] - mean[p]) * (r[q] - mean[q]) / d.n() as f64;
                }
            }
        }
        let ev = jacobi_eigenvalues(cov);
        assert!((ev[0] - b.explained[0]).abs() < 1e-9 * ev[0]);
        assert!((ev[1] - b.explained[1]).abs() < 1e-9 * ev[0]);
    }

    #[test]
    fn power_iteration_agrees_with_dense_solver() {
        let scales = [5.0, 3.0, 1.0, 0.5, 0.2, 0.1];
        let d = dataset(400, 6, 12, |rng, c| scales[c] * rng.sample::<f64, _>(StandardNormal));
        let dense = pca_fit_with(&d, PcaSolver::Dense).unwrap();
        let power = pca_fit_with(&d, PcaSolver::Power).unwrap();
        for k in 0..2 {
            assert!((dense.explained[k] - power.explained[k]).abs() < 1e-6 * dense.explained[0]);
            for (a, b) in dense.components[k].iter().zip(&power.components[k]) {
                assert!((a - b).abs() < 1e-5, "component {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn components_are_orthonormal_and_sorted() {
        let d = dataset(300, 8, 13, |rng, c| (c as f64 + 1.0) * rng.random_range(-1.0..1.0));
        let b = pca_fit(&d).unwrap();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        assert!((dot(&b.components[0], &b.components[0]) - 1.0).abs() < 1e-8);
        assert!((dot(&b.components[1], &b.components[1]) - 1.0).abs() < 1e-8);
        assert!(dot(&b.components[0], &b.components[1]).abs() < 1e-8);
        assert!(b.explained[0] >= b.explained[1] && b.explained[1] >= 0.0);
    }

    #[test]
    fn projection_centres_and_matches_explained_variance() {
        let d = dataset(500, 4, 14, |rng, c| (4 - c) as f64 * rng.sample::<f64, _>(StandardNormal));
        let b = pca_fit(&d).unwrap();
        let mean_ds = validate_dataset(Array2::from_shape_fn((4, 4), |(_, c)| b.mean[c]), None).unwrap();
        let e = pca_project(&b, &mean_ds).unwrap();
        assert!(e.as_slice().iter().all(|v| v.abs() < 1e-12));

        let proj = pca_project(&b, &d).unwrap();
        for a in 0..2 {
            let var: f64 = (0..d.n()).map(|i| proj.point(i)[a].powi(2)).sum::<f64>() / d.n() as f64;
            assert!((var - b.explained[a]).abs() < 1e-6 * b.explained[a]);
        }
    }

    #[test]
    fn identity_basis_on_2d_data_returns_centred_input() {
        let d = dataset(20, 2, 15, |rng, _| rng.random_range(-3.0..3.0));
        let basis = PcaBasis { components: [vec![1.0, 0.0], vec![0.0, 1.0]], mean: vec![0.5, -0.25], explained: [1.0, 1.0] };
        let e = pca_project(&basis, &d).unwrap();
        for i in 0..20 {
            assert!((e.point(i)[0] - (d.row(i)[0] - 0.5)).abs() < 1e-15);
            assert!((e.point(i)[1] - (d.row(i)[1] + 0.25)).abs() < 1e-15);
        }
        let wrong = PcaBasis { mean: vec![0.0; 3], ..basis };
        assert!(matches!(pca_project(&wrong, &d), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pca_beats_random_rank2_projections() {
        let d = dataset(300, 6, 16, |rng, c| (c as f64 * 0.7 + 0.3) * rng.sample::<f64, _>(StandardNormal));
        let b = pca_fit(&d).unwrap();
        let recon_err = |comps: &[Vec<f64>; 2]| -> f64 {
            let mut err = 0.0;
            for i in 0..d.n() {
                let x: Vec<f64> = d.row(i).iter().zip(&b.mean).map(|(a, m)| a - m).collect();
                let mut r = x.clone();
                for c in comps {
                    let dot: f64 = x.iter().zip(c).map(|(a, b)| a * b).sum();
                    r.iter_mut().zip(c).for_each(|(v, cc)| *v -= dot * cc);
                }
                err += r.iter().map(|v| v * v).sum::<f64>();
            }
            err
        };
        let best = recon_err(&b.components);
        let mut rng = seeded_rng(99);
        for _ in 0..10 {
            let mut u: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.iter_mut().for_each(|v| *v /= nu);
            let mut w: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let dot: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(&u).for_each(|(a, b)| *a -= dot * b);
            let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            w.iter_mut().for_each(|v| *v /= nw);
            assert!(best <= recon_err(&[u, w]) + 1e-9);
        }
    }

    #[test]
    fn rng_streams_are_reproducible() {
        let mut a = seeded_rng(42);
        let mut b = seeded_rng(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = seeded_rng(1);
        let mut d = seeded_rng(2);
        let same = (0..100).filter(|_| c.next_u64() == d.next_u64()).count();
        assert!(same < 100);
        let mut s0 = split_rng(7, 0);
        let mut s1 = split_rng(7, 1);
        assert_ne!(s0.next_u64(), s1.next_u64());
    }

    #[test]
    fn uniform_draws_are_centred() {
        let mut rng = seeded_rng(5);
        let mean: f64 = (0..100_000).map(|_| rng.random::<f64>()).sum::<f64>() / 1e5;
        assert!((0.49..=0.51).contains(&mean));
    }
}
