//! Quartet decomposition of the metric-MDS stress.
//!
//! Each iteration splits the points into disjoint groups of four. Within a
//! quartet every pairwise distance is divided by the sum of the quartet's six
//! distances, in both spaces, and the squared differences of these relative
//! distances form the quartet stress. Its gradient only involves the four
//! points of the quartet, so one iteration costs O(n) and the quartets of a
//! partition can be processed independently.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{euclidean_distance, RngStream};
use crate::parallel::Workers;
use crate::types::{Dataset, Embedding};

/// Every HD and LD distance is floored here before any division.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// The six pairs of a quartet, in the order `ij, ik, il, jk, jl, kl`.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Largest dataset accepted by the brute-force `C(n, 4)` stress evaluators.
pub const FULL_STRESS_MAX_N: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuartetPartition {
    pub quartets: Vec<[usize; 4]>,
    /// The last `n mod 4` indices of the permutation.
    pub leftover: Vec<usize>,
}

/// Uniformly random partition of `0..n` into `⌊n/4⌋` disjoint quartets.
pub fn partition_into_quartets(n: usize, rng: &mut RngStream) -> Result<QuartetPartition> {
    if n < 4 {
        return Err(Error::TooFewPoints { n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let full = 4 * (n / 4);
    let quartets = perm[..full].chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
    Ok(QuartetPartition { quartets, leftover: perm[full..].to_vec() })
}

/// Distances of one quartet and everything derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuartetWorkspace {
    pub idx: [usize; 4],
    pub hd_dists: [f64; 6],
    pub hd_sum: f64,
    pub ld_dists: [f64; 6],
    pub ld_sum: f64,
    pub hd_rel: [f64; 6],
    pub ld_rel: [f64; 6],
}

impl QuartetWorkspace {
    /// Fills the workspace from HD rows and a flat `n × 2` coordinate slice.
    #[inline]
    pub fn compute(dataset: &Dataset, ld: &[f64], idx: [usize; 4]) -> Self {
        let mut hd_dists = [0.0; 6];
        let mut ld_dists = [0.0; 6];
        for (p, &(a, b)) in PAIRS.iter().enumerate() {
            let (ia, ib) = (idx[a], idx[b]);
            hd_dists[p] = euclidean_distance(dataset.row(ia), dataset.row(ib)).max(DISTANCE_FLOOR);
            let dx = ld[2 * ia] - ld[2 * ib];
            let dy = ld[2 * ia + 1] - ld[2 * ib + 1];
            ld_dists[p] = (dx * dx + dy * dy).sqrt().max(DISTANCE_FLOOR);
        }
        let hd_sum: f64 = hd_dists.iter().sum();
        let ld_sum: f64 = ld_dists.iter().sum();
        let hd_rel = hd_dists.map(|d| d / hd_sum);
        let ld_rel = ld_dists.map(|d| d / ld_sum);
        QuartetWorkspace { idx, hd_dists, hd_sum, ld_dists, ld_sum, hd_rel, ld_rel }
    }
}

pub fn quartet_distances(dataset: &Dataset, embedding: &Embedding, idx: [usize; 4]) -> QuartetWorkspace {
    QuartetWorkspace::compute(dataset, embedding.as_slice(), idx)
}

/// Relative-distance quartet stress `Σ (δ_rel − d_rel)²`.
#[inline]
pub fn quartet_stress(w: &QuartetWorkspace) -> f64 {
    w.hd_rel.iter().zip(&w.ld_rel).map(|(h, l)| (h - l) * (h - l)).sum()
}

/// Absolute-distance quartet stress `Σ (δ − d)²`.
pub fn absolute_quartet_stress(w: &QuartetWorkspace) -> f64 {
    w.hd_dists.iter().zip(&w.ld_dists).map(|(h, l)| (h - l) * (h - l)).sum()
}

/// Gradient of [`quartet_stress`] with respect to the four LD points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuartetGradient {
    pub grads: [[f64; 2]; 4],
}

pub fn quartet_gradient(w: &QuartetWorkspace, embedding: &Embedding) -> QuartetGradient {
    gradient_at(w, embedding.as_slice())
}

/// For pair `p = (a, b)` and each member `q`, the derivative of `Δ_rel²` is
/// `2(d_rel − δ_rel)/S · (direct − d_rel · Σ_{b≠q} u_qb)` where `direct` is
/// the unit vector towards `q` from its partner when `q ∈ p` and zero
/// otherwise, and `u_qb = (x_q − x_b)/d_qb`.
#[inline]
pub fn gradient_at(w: &QuartetWorkspace, ld: &[f64]) -> QuartetGradient {
    let x: [[f64; 2]; 4] = w.idx.map(|i| [ld[2 * i], ld[2 * i + 1]]);
    // unit[p] points from the second member of pair p to the first.
    let mut unit = [[0.0; 2]; 6];
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        let d = w.ld_dists[p];
        unit[p] = [(x[a][0] - x[b][0]) / d, (x[a][1] - x[b][1]) / d];
    }
    let mut unit_sum = [[0.0; 2]; 4];
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        for c in 0..2 {
            unit_sum[a][c] += unit[p][c];
            unit_sum[b][c] -= unit[p][c];
        }
    }

    let mut grads = [[0.0; 2]; 4];
    let mut global = 0.0;
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        let coef = 2.0 * (w.ld_rel[p] - w.hd_rel[p]) / w.ld_sum;
        global += coef * w.ld_rel[p];
        for c in 0..2 {
            grads[a][c] += coef * unit[p][c];
            grads[b][c] -= coef * unit[p][c];
        }
    }
    for q in 0..4 {
        for c in 0..2 {
            grads[q][c] -= global * unit_sum[q][c];
        }
    }
    QuartetGradient { grads }
}

/// Computes the quartet gradients of one partition (`perm[..4⌊n/4⌋]` taken
/// four at a time) at coordinates `ld` and writes them into `grads`.
/// Points outside the quartets get a zero gradient. Returns the summed
/// relative quartet stress.
pub fn partition_gradients(
    dataset: &Dataset,
    ld: &[f64],
    perm: &[usize],
    grads: &mut [f64],
    workers: &Workers,
) -> f64 {
    grads.iter_mut().for_each(|g| *g = 0.0);
    let full = 4 * (perm.len() / 4);
    let quartets = &perm[..full];
    let one = |chunk: &[usize]| {
        let idx = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let w = QuartetWorkspace::compute(dataset, ld, idx);
        (idx, gradient_at(&w, ld), quartet_stress(&w))
    };
    let mut stress = 0.0;
    if workers.is_parallel() {
        let results = workers.map(full / 4, |q| one(&quartets[4 * q..4 * q + 4]));
        for (idx, g, s) in results {
            scatter(grads, idx, &g);
            stress += s;
        }
    } else {
        for chunk in quartets.chunks_exact(4) {
            let (idx, g, s) = one(chunk);
            scatter(grads, idx, &g);
            stress += s;
        }
    }
    stress
}

#[inline]
fn scatter(grads: &mut [f64], idx: [usize; 4], g: &QuartetGradient) {
    for (q, &i) in idx.iter().enumerate() {
        grads[2 * i] = g.grads[q][0];
        grads[2 * i + 1] = g.grads[q][1];
    }
}

/// Which distances the brute-force quartet stress is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressVariant {
    Absolute,
    Relative,
}

/// Mean of `(1/6)·L` over all `C(n, 4)` quartets. For the absolute variant
/// this equals the pairwise mean squared distance error.
pub fn full_quartet_stress(dataset: &Dataset, embedding: &Embedding, variant: StressVariant) -> Result<f64> {
    let n = dataset.n();
    if n > FULL_STRESS_MAX_N {
        return Err(Error::TooLarge { what: "brute-force quartet stress", n, cap: FULL_STRESS_MAX_N });
    }
    if embedding.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: embedding.n() });
    }
    let ld = embedding.as_slice();
    let mut total = 0.0;
    let mut count = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                for l in (k + 1)..n {
                    let w = QuartetWorkspace::compute(dataset, ld, [i, j, k, l]);
                    total += match variant {
                        StressVariant::Absolute => absolute_quartet_stress(&w),
                        StressVariant::Relative => quartet_stress(&w),
                    } / 6.0;
                    count += 1;
                }
            }
        }
    }
    Ok(total / count as f64)
}

/// Exact relative stress over every quartet; a diagnostic for small `n`.
pub fn full_relative_stress(dataset: &Dataset, embedding: &Embedding) -> Result<f64> {
    full_quartet_stress(dataset, embedding, StressVariant::Relative)
}
