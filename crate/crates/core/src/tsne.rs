//! Multi-scale t-SNE similarities and exact gradients.
//!
//! High-dimensional similarities are Gaussian conditionals calibrated per
//! point to a target perplexity, symmetrised and normalised, then averaged
//! over several perplexities. The low-dimensional kernel is Student-t with
//! one degree of freedom. Gradients are exact (O(n²) per evaluation); the
//! similarities are either dense or restricted to a kNN graph.

use crate::error::{Error, Result};
use crate::linalg::squared_distance;
use crate::parallel::Workers;
use crate::quality::ranked_neighbors;
use crate::types::{Dataset, Embedding, SimilarityMode};

pub const MAX_BISECTION_STEPS: usize = 200;
/// Relative perplexity error the bisection aims for.
const TARGET_TOL: f64 = 1e-10;
/// Relative perplexity error below which a row counts as calibrated.
pub const ACCEPT_TOL: f64 = 1e-5;
/// kNN similarities keep this many neighbours per unit of the largest perplexity.
pub const KNN_PER_PERPLEXITY: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedRow {
    pub probs: Vec<f64>,
    /// Gaussian precision `β = 1/(2σ²)` applied to squared distances.
    pub beta: f64,
    pub perplexity: f64,
    pub converged: bool,
}

/// Gaussian conditional similarities of one point to the others, with the
/// precision found by bisection so that `exp(entropy)` equals `perplexity`.
/// Rows that cannot reach the target (for instance when all distances are
/// equal) fall back to the uniform row with `converged = false`.
pub fn calibrate_row(dists: &[f64], perplexity: f64) -> Result<CalibratedRow> {
    let k = dists.len();
    if !(perplexity >= 1.0 && perplexity <= k as f64) {
        return Err(Error::InvalidConfig(format!("perplexity {perplexity} outside [1, {k}]")));
    }
    let sq: Vec<f64> = dists.iter().map(|d| d * d).collect();
    let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = sq.iter().map(|s| s - min).collect();
    let mean = shifted.iter().sum::<f64>() / k as f64;
    let target = perplexity.ln();

    let mut probs = vec![0.0; k];
    let entropy = |beta: f64, probs: &mut [f64]| -> f64 {
        let mut z = 0.0;
        for (p, s) in probs.iter_mut().zip(&shifted) {
            *p = (-beta * s).exp();
            z += *p;
        }
        let mut weighted = 0.0;
        for (p, s) in probs.iter_mut().zip(&shifted) {
            *p /= z;
            weighted += *p * s;
        }
        z.ln() + beta * weighted
    };

    let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut best = (f64::INFINITY, beta);
    for _ in 0..MAX_BISECTION_STEPS {
        let h = entropy(beta, &mut probs);
        let rel = (h.exp() - perplexity).abs() / perplexity;
        if rel < best.0 {
            best = (rel, beta);
        }
        if rel <= TARGET_TOL {
            break;
        }
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (lo + hi);
        }
    }
    let beta = best.1;
    let h = entropy(beta, &mut probs);
    let achieved = h.exp();
    if best.0 <= ACCEPT_TOL {
        return Ok(CalibratedRow { probs, beta, perplexity: achieved, converged: true });
    }
    log::warn!("perplexity calibration did not converge (target {perplexity}, best {achieved}); using a uniform row");
    Ok(CalibratedRow { probs: vec![1.0 / k as f64; k], beta: 0.0, perplexity: k as f64, converged: false })
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse { row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64> },
}

/// Symmetric joint similarities with zero diagonal and unit grand sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    perplexities: Vec<f64>,
    storage: Storage,
    unconverged_rows: usize,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perplexities(&self) -> &[f64] {
        &self.perplexities
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Rows (over all perplexities) that fell back to uniform.
    pub fn unconverged_rows(&self) -> usize {
        self.unconverged_rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(p) => p[i * self.n + j],
            Storage::Sparse { row_ptr, cols, vals } => {
                let r = row_ptr[i]..row_ptr[i + 1];
                match cols[r.clone()].binary_search(&j) {
                    Ok(pos) => vals[r.start + pos],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Non-zero entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Dense(p) => {
                p[i * self.n..(i + 1) * self.n].iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect()
            }
            Storage::Sparse { row_ptr, cols, vals } => {
                (row_ptr[i]..row_ptr[i + 1]).map(|e| (cols[e], vals[e])).collect()
            }
        }
    }

    pub fn total(&self) -> f64 {
        match &self.storage {
            Storage::Dense(p) => p.iter().sum(),
            Storage::Sparse { vals, .. } => vals.iter().sum(),
        }
    }
}

/// Averaged, symmetrised similarities over `perplexities`.
pub fn multiscale_similarities(
    dataset: &Dataset,
    perplexities: &[f64],
    mode: SimilarityMode,
    workers: &Workers,
) -> Result<SimilarityMatrix> {
    let n = dataset.n();
    if perplexities.is_empty() {
        return Err(Error::InvalidConfig("no perplexity given".into()));
    }
    for &p in perplexities {
        if !(p >= 1.0 && p < n as f64 - 1.0) {
            return Err(Error::InvalidConfig(format!("perplexity {p} outside [1, n - 1) for n = {n}")));
        }
    }
    if mode.use_knn(n) {
        knn_similarities(dataset, perplexities, workers)
    } else {
        dense_similarities(dataset, perplexities, workers)
    }
}

fn dense_similarities(dataset: &Dataset, perplexities: &[f64], workers: &Workers) -> Result<SimilarityMatrix> {
    let n = dataset.n();
    // Row i holds distances to every j != i, in index order.
    let dist_rows: Vec<Vec<f64>> = workers.map(n, |i| {
        let xi = dataset.row(i);
        (0..n).filter(|&j| j != i).map(|j| squared_distance(xi, dataset.row(j)).sqrt()).collect()
    });
    let mut joint = vec![0.0; n * n];
    let mut unconverged = 0;
    let scale = 1.0 / (2.0 * n as f64 * perplexities.len() as f64);
    for &perp in perplexities {
        let rows = workers.map(n, |i| calibrate_row(&dist_rows[i], perp));
        let mut cond = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            unconverged += usize::from(!row.converged);
            for (slot, p) in (0..n).filter(|&j| j != i).zip(row.probs) {
                cond[i * n + slot] = p;
            }
        }
        for i in 0..n {
            for j in 0..n {
                joint[i * n + j] += (cond[i * n + j] + cond[j * n + i]) * scale;
            }
        }
    }
    let total: f64 = joint.iter().sum();
    joint.iter_mut().for_each(|v| *v /= total);
    Ok(SimilarityMatrix { n, perplexities: perplexities.to_vec(), storage: Storage::Dense(joint), unconverged_rows: unconverged })
}

fn knn_similarities(dataset: &Dataset, perplexities: &[f64], workers: &Workers) -> Result<SimilarityMatrix> {
    let n = dataset.n();
    let max_perp = perplexities.iter().copied().fold(0.0, f64::max);
    let k = ((KNN_PER_PERPLEXITY * max_perp).ceil() as usize).clamp(1, n - 1);
    let neighbors: Vec<Vec<(f64, usize)>> = workers.map(n, |i| ranked_neighbors(dataset, i, k));
    let dists: Vec<Vec<f64>> = neighbors.iter().map(|r| r.iter().map(|(d2, _)| d2.sqrt()).collect()).collect();

    let scale = 1.0 / (2.0 * n as f64 * perplexities.len() as f64);
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * n * k * perplexities.len());
    let mut unconverged = 0;
    for &perp in perplexities {
        let perp = perp.min(k as f64);
        let rows = workers.map(n, |i| calibrate_row(&dists[i], perp));
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            unconverged += usize::from(!row.converged);
            for ((_, j), p) in neighbors[i].iter().zip(row.probs) {
                triplets.push((i, *j, p * scale));
                triplets.push((*j, i, p * scale));
            }
        }
    }
    triplets.sort_by_key(|t| (t.0, t.1));

    let mut row_ptr = vec![0usize; n + 1];
    let mut cols = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut last: Option<(usize, usize)> = None;
    for (i, j, v) in triplets {
        if last == Some((i, j)) {
            *vals.last_mut().unwrap() += v;
        } else {
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let total: f64 = vals.iter().sum();
    vals.iter_mut().for_each(|v| *v /= total);
    Ok(SimilarityMatrix {
        n,
        perplexities: perplexities.to_vec(),
        storage: Storage::Sparse { row_ptr, cols, vals },
        unconverged_rows: unconverged,
    })
}

/// Repulsive sums of one row over all points, self included (the caller
/// removes the self term): `(Σ w, Σ w²·dx, Σ w²·dy)` with `w = 1/(1+d²)`.
#[inline]
fn repulsion_row(xi: f64, yi: f64, xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let mut z = [0.0f64; 4];
    let mut rx = [0.0f64; 4];
    let mut ry = [0.0f64; 4];
    let mut cx = xs.chunks_exact(4);
    let mut cy = ys.chunks_exact(4);
    for (bx, by) in (&mut cx).zip(&mut cy) {
        for l in 0..4 {
            let dx = xi - bx[l];
            let dy = yi - by[l];
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            let w2 = w * w;
            z[l] += w;
            rx[l] += w2 * dx;
            ry[l] += w2 * dy;
        }
    }
    for (x, y) in cx.remainder().iter().zip(cy.remainder()) {
        let dx = xi - x;
        let dy = yi - y;
        let w = 1.0 / (1.0 + dx * dx + dy * dy);
        z[0] += w;
        rx[0] += w * w * dx;
        ry[0] += w * w * dy;
    }
    ((z[0] + z[1]) + (z[2] + z[3]), (rx[0] + rx[1]) + (rx[2] + rx[3]), (ry[0] + ry[1]) + (ry[2] + ry[3]))
}

/// Attractive sum `Σ_j p_ij·w_ij·(x_i − x_j)` of one row.
#[inline]
fn attraction_row(p: &SimilarityMatrix, i: usize, xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let (xi, yi) = (xs[i], ys[i]);
    let (mut ax, mut ay) = (0.0, 0.0);
    let mut add = |j: usize, pij: f64| {
        let dx = xi - xs[j];
        let dy = yi - ys[j];
        let w = pij / (1.0 + dx * dx + dy * dy);
        ax += w * dx;
        ay += w * dy;
    };
    match &p.storage {
        Storage::Dense(v) => {
            for (j, &pij) in v[i * p.n..(i + 1) * p.n].iter().enumerate() {
                if pij != 0.0 {
                    add(j, pij);
                }
            }
        }
        Storage::Sparse { row_ptr, cols, vals } => {
            for e in row_ptr[i]..row_ptr[i + 1] {
                add(cols[e], vals[e]);
            }
        }
    }
    (ax, ay)
}

/// Exact KL gradient `4 Σ_j (α·p_ij − q_ij)·w_ij·(x_i − x_j)` written into
/// `out` (flat `n × 2`); `α` is the exaggeration factor. Returns the
/// Student-t normaliser `Z = Σ_{i≠j} w_ij`.
pub fn tsne_gradient_into(
    p: &SimilarityMatrix,
    ld: &[f64],
    exaggeration: f64,
    out: &mut [f64],
    workers: &Workers,
) -> f64 {
    let n = p.n;
    let xs: Vec<f64> = ld.iter().step_by(2).copied().collect();
    let ys: Vec<f64> = ld.iter().skip(1).step_by(2).copied().collect();
    const ROWS: usize = 64;
    let mut per_row = vec![[0.0f64; 5]; n];
    workers.for_each_chunk(&mut per_row, ROWS, |c, chunk| {
        for (off, slot) in chunk.iter_mut().enumerate() {
            let i = c * ROWS + off;
            let (z, rx, ry) = repulsion_row(xs[i], ys[i], &xs, &ys);
            let (ax, ay) = attraction_row(p, i, &xs, &ys);
            *slot = [z - 1.0, rx, ry, ax, ay];
        }
    });
    let z: f64 = per_row.iter().map(|r| r[0]).sum();
    for (i, r) in per_row.iter().enumerate() {
        out[2 * i] = 4.0 * (exaggeration * r[3] - r[1] / z);
        out[2 * i + 1] = 4.0 * (exaggeration * r[4] - r[2] / z);
    }
    z
}

pub fn tsne_gradient(p: &SimilarityMatrix, embedding: &Embedding) -> Result<Vec<f64>> {
    if embedding.n() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, found: embedding.n() });
    }
    let mut out = vec![0.0; 2 * p.n];
    tsne_gradient_into(p, embedding.as_slice(), 1.0, &mut out, &Workers::sequential());
    Ok(out)
}

/// Student-t normaliser `Σ_{i≠j} (1 + d²_ij)⁻¹`.
fn student_z(ld: &[f64]) -> f64 {
    let n = ld.len() / 2;
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = ld[2 * i] - ld[2 * j];
                let dy = ld[2 * i + 1] - ld[2 * j + 1];
                z += 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
    }
    z
}

/// `KL(P ‖ Q)` over the non-zero entries of `P`.
pub fn kl_divergence(p: &SimilarityMatrix, embedding: &Embedding) -> f64 {
    let ld = embedding.as_slice();
    let z = student_z(ld);
    let mut kl = 0.0;
    for i in 0..p.n {
        for (j, pij) in p.row(i) {
            if pij > 0.0 {
                let dx = ld[2 * i] - ld[2 * j];
                let dy = ld[2 * i + 1] - ld[2 * j + 1];
                let q = 1.0 / ((1.0 + dx * dx + dy * dy) * z);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

/// Student-t similarities `q_ij` as a dense matrix (diagnostics only).
pub fn student_similarities(embedding: &Embedding) -> Vec<f64> {
    let ld = embedding.as_slice();
    let n = embedding.n();
    let z = student_z(ld);
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = ld[2 * i] - ld[2 * j];
                let dy = ld[2 * i + 1] - ld[2 * j + 1];
                q[i * n + j] = 1.0 / ((1.0 + dx * dx + dy * dy) * z);
            }
        }
    }
    q
}
