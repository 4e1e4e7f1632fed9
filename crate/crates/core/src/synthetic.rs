//! Seeded synthetic datasets used by the benchmark command and the tests.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{seeded_rng, RngStream};
use crate::types::{validate_dataset, Dataset};

fn build(points: Array2<f64>, labels: Option<Vec<String>>) -> Dataset {
    validate_dataset(points, labels).expect("generators emit finite data with n >= 4")
}

fn normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard normal cloud in `m` dimensions.
pub fn gaussian_blob(n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    build(Array2::from_shape_fn((n, m), |_| normal(&mut rng)), None)
}

/// Two unit-variance Gaussians whose centres are `separation` apart along
/// the first axis; points alternate between the clusters.
pub fn two_clusters(n: usize, m: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let pts = Array2::from_shape_fn((n, m), |(r, c)| {
        let shift = if c == 0 && r % 2 == 1 { separation } else { 0.0 };
        shift + normal(&mut rng)
    });
    let labels = (0..n).map(|r| (r % 2).to_string()).collect();
    build(pts, Some(labels))
}

/// Gaussian mixture with `macros` well separated groups, each made of `subs`
/// tighter sub-clusters. Labels are `macro.sub`.
pub fn hierarchical_mixture(n: usize, macros: usize, subs: usize, m: usize, seed: u64) -> Dataset {
    const MACRO_SPREAD: f64 = 20.0;
    const SUB_SPREAD: f64 = 4.0;
    const NOISE: f64 = 1.0;
    let mut rng = seeded_rng(seed);
    let macro_centres: Vec<Vec<f64>> = (0..macros).map(|_| (0..m).map(|_| MACRO_SPREAD * normal(&mut rng)).collect()).collect();
    let sub_centres: Vec<Vec<f64>> = (0..macros * subs)
        .map(|s| macro_centres[s / subs].iter().map(|c| c + SUB_SPREAD * normal(&mut rng)).collect())
        .collect();
    let total = macros * subs;
    let mut pts = Array2::zeros((n, m));
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let s = r % total;
        for c in 0..m {
            pts[[r, c]] = sub_centres[s][c] + NOISE * normal(&mut rng);
        }
        labels.push(format!("{}.{}", s / subs, s % subs));
    }
    build(pts, Some(labels))
}

/// Swiss roll in 3-D; the label is the position along the roll.
pub fn swiss_roll(n: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let mut pts = Array2::zeros((n, 3));
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * rng.random::<f64>());
        let h = 21.0 * rng.random::<f64>();
        pts[[r, 0]] = t * t.cos() + 0.1 * normal(&mut rng);
        pts[[r, 1]] = h;
        pts[[r, 2]] = t * t.sin() + 0.1 * normal(&mut rng);
        labels.push(format!("{t:.3}"));
    }
    build(pts, Some(labels))
}

/// Uniform points in the unit hypercube `[0, 1]^m`.
pub fn uniform_hypercube(n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    build(Array2::from_shape_fn((n, m), |_| rng.random::<f64>()), None)
}

/// Gaussian whose axis `c` has standard deviation `0.8^c`.
pub fn anisotropic_gaussian(n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    build(Array2::from_shape_fn((n, m), |(_, c)| 0.8f64.powi(c as i32) * normal(&mut rng)), None)
}

/// Points on a plane embedded in `m ≥ 2` dimensions by a fixed rotation.
pub fn planar(n: usize, m: usize, seed: u64) -> Dataset {
    assert!(m >= 2);
    let mut rng = seeded_rng(seed);
    let u: Vec<f64> = (0..m).map(|c| if c % 2 == 0 { 1.0 } else { 0.5 }).collect();
    let mut v: Vec<f64> = (0..m).map(|c| if c % 3 == 0 { -0.5 } else { 1.0 }).collect();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(b, a)| *b -= dot * a);
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut pts = Array2::zeros((n, m));
    for r in 0..n {
        let (s, t) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for c in 0..m {
            pts[[r, c]] = s * u[c] + t * v[c];
        }
    }
    build(pts, None)
}
