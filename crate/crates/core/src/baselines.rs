//! Reference embeddings: SMACOF metric MDS, PCA, and the exact pairwise
//! stress they are judged by.

use crate::error::{Error, Result};
use crate::linalg::{euclidean_distance, initial_embedding, pca_fit, pca_project, seeded_rng};
use crate::parallel::Workers;
use crate::types::{Dataset, Embedding, RunConfig};

/// O(n²) evaluators refuse larger inputs.
pub const PAIRWISE_MAX_N: usize = 20_000;
/// HD distances are cached as a dense matrix up to this many points.
pub const HD_CACHE_MAX_N: usize = 4096;
/// Relative slack allowed on SMACOF's monotone stress decrease.
pub const MONOTONE_SLACK: f64 = 1e-9;

fn ld_dist(ld: &[f64], i: usize, j: usize) -> f64 {
    let dx = ld[2 * i] - ld[2 * j];
    let dy = ld[2 * i + 1] - ld[2 * j + 1];
    (dx * dx + dy * dy).sqrt()
}

/// Per-row sums `(Σ δd, Σ d², Σ δ², Σ (δ−d)²)`, reduced in row order.
fn pair_sums(dataset: &Dataset, embedding: &Embedding, workers: &Workers) -> Result<[f64; 4]> {
    let n = dataset.n();
    if n > PAIRWISE_MAX_N {
        return Err(Error::TooLarge { what: "pairwise stress", n, cap: PAIRWISE_MAX_N });
    }
    if embedding.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: embedding.n() });
    }
    let ld = embedding.as_slice();
    let rows = workers.map(n, |i| {
        let mut s = [0.0; 4];
        for j in (i + 1)..n {
            let h = euclidean_distance(dataset.row(i), dataset.row(j));
            let l = ld_dist(ld, i, j);
            s[0] += h * l;
            s[1] += l * l;
            s[2] += h * h;
            s[3] += (h - l) * (h - l);
        }
        s
    });
    let mut tot = [0.0; 4];
    for r in rows {
        for k in 0..4 {
            tot[k] += r[k];
        }
    }
    Ok(tot)
}

fn pair_count(n: usize) -> f64 {
    (n * (n - 1) / 2) as f64
}

/// `(1 / C(n,2)) · Σ_{i<j} (δ_ij − d_ij)²`.
pub fn pairwise_stress(dataset: &Dataset, embedding: &Embedding) -> Result<f64> {
    pairwise_stress_with(dataset, embedding, &Workers::sequential())
}

pub fn pairwise_stress_with(dataset: &Dataset, embedding: &Embedding, workers: &Workers) -> Result<f64> {
    Ok(pair_sums(dataset, embedding, workers)?[3] / pair_count(dataset.n()))
}

/// Pairwise stress after rescaling the embedding by the factor that
/// minimises it. Returns `(stress, factor)`. Embeddings from scale-free
/// objectives are compared to metric ones this way.
pub fn scaled_pairwise_stress(dataset: &Dataset, embedding: &Embedding, workers: &Workers) -> Result<(f64, f64)> {
    let [hl, ll, hh, _] = pair_sums(dataset, embedding, workers)?;
    if ll == 0.0 {
        return Ok((hh / pair_count(dataset.n()), 1.0));
    }
    let alpha = hl / ll;
    let stress = (hh - 2.0 * alpha * hl + alpha * alpha * ll).max(0.0);
    Ok((stress / pair_count(dataset.n()), alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmacofState {
    pub coords: Embedding,
    /// Raw stress `Σ_{i<j} (δ_ij − d_ij)²` of `coords`.
    pub stress: f64,
    pub iteration: usize,
}

enum HdDistances<'a> {
    Cached { n: usize, d: Vec<f64> },
    OnTheFly(&'a Dataset),
}

impl<'a> HdDistances<'a> {
    fn new(dataset: &'a Dataset, workers: &Workers) -> Self {
        let n = dataset.n();
        if n > HD_CACHE_MAX_N {
            return HdDistances::OnTheFly(dataset);
        }
        let rows = workers.map(n, |i| (0..n).map(|j| euclidean_distance(dataset.row(i), dataset.row(j))).collect::<Vec<_>>());
        HdDistances::Cached { n, d: rows.concat() }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            HdDistances::Cached { n, d } => d[i * n + j],
            HdDistances::OnTheFly(ds) => euclidean_distance(ds.row(i), ds.row(j)),
        }
    }
}

/// One pass over all pairs at `ld`: returns the raw stress of `ld` and its
/// Guttman transform `X⁺_i = (1/n) Σ_{j≠i} (δ_ij/d_ij)(x_i − x_j)`.
/// Coincident LD pairs contribute nothing to the transform.
fn guttman_pass(hd: &HdDistances, ld: &[f64], workers: &Workers) -> (f64, Vec<f64>) {
    let n = ld.len() / 2;
    let rows = workers.map(n, |i| {
        let (xi, yi) = (ld[2 * i], ld[2 * i + 1]);
        let (mut ax, mut ay, mut s) = (0.0, 0.0, 0.0);
        for j in 0..n {
            if j == i {
                continue;
            }
            let dx = xi - ld[2 * j];
            let dy = yi - ld[2 * j + 1];
            let d = (dx * dx + dy * dy).sqrt();
            let h = hd.get(i, j);
            s += (h - d) * (h - d);
            if d > 0.0 {
                let r = h / d;
                ax += r * dx;
                ay += r * dy;
            }
        }
        (s, [ax / n as f64, ay / n as f64])
    });
    let mut stress = 0.0;
    let mut next = Vec::with_capacity(2 * n);
    for (s, p) in rows {
        stress += s;
        next.extend_from_slice(&p);
    }
    (0.5 * stress, next)
}

fn raw_stress(hd: &HdDistances, ld: &[f64]) -> f64 {
    let n = ld.len() / 2;
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = hd.get(i, j) - ld_dist(ld, i, j);
            s += r * r;
        }
    }
    s
}

impl SmacofState {
    pub fn new(dataset: &Dataset, coords: Embedding) -> Result<Self> {
        if coords.n() != dataset.n() {
            return Err(Error::DimensionMismatch { expected: dataset.n(), found: coords.n() });
        }
        let stress = raw_stress(&HdDistances::OnTheFly(dataset), coords.as_slice());
        Ok(SmacofState { coords, stress, iteration: 0 })
    }
}

/// One Guttman transform.
pub fn smacof_step(dataset: &Dataset, state: &SmacofState) -> SmacofState {
    let hd = HdDistances::OnTheFly(dataset);
    let (_, next) = guttman_pass(&hd, state.coords.as_slice(), &Workers::sequential());
    let stress = raw_stress(&hd, &next);
    SmacofState {
        coords: Embedding::from_vec(dataset.n(), next).expect("2n values"),
        stress,
        iteration: state.iteration + 1,
    }
}

/// SMACOF iterations from `init`. Stops when the relative stress decrease
/// falls below `tol` (pass `f64::NEG_INFINITY` to always run `max_iter`
/// steps) or the stress reaches zero. Returns the final coordinates and the
/// stress of every visited configuration.
pub fn smacof_trajectory(
    dataset: &Dataset,
    init: Embedding,
    max_iter: usize,
    tol: f64,
    workers: &Workers,
) -> Result<(Embedding, Vec<f64>)> {
    let n = dataset.n();
    if n > PAIRWISE_MAX_N {
        return Err(Error::TooLarge { what: "SMACOF", n, cap: PAIRWISE_MAX_N });
    }
    if init.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: init.n() });
    }
    let hd = HdDistances::new(dataset, workers);
    let mut x = init.as_slice().to_vec();
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..max_iter {
        let (stress, next) = guttman_pass(&hd, &x, workers);
        if let Some(&prev) = history.last() {
            debug_assert!(stress <= prev + MONOTONE_SLACK * prev.max(1.0), "SMACOF stress rose: {prev} -> {stress}");
            history.push(stress);
            if stress < 1e-12 || (prev - stress) / prev < tol {
                break;
            }
        } else {
            history.push(stress);
            if stress < 1e-12 {
                break;
            }
        }
        x = next;
    }
    Ok((Embedding::from_vec(n, x).expect("2n values"), history))
}

pub fn run_smacof(dataset: &Dataset, config: &RunConfig) -> Result<Embedding> {
    let mut rng = seeded_rng(config.seed);
    let init = initial_embedding(dataset, config.init, &mut rng);
    let workers = Workers::new(config.workers);
    Ok(smacof_trajectory(dataset, init, config.iterations(), config.smacof_tol, &workers)?.0)
}

/// Projection onto the top two principal components.
pub fn run_pca(dataset: &Dataset) -> Result<Embedding> {
    pca_project(&pca_fit(dataset)?, dataset)
}
