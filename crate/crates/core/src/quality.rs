//! Neighbourhood-preservation quality: `Q_NX(K)`, `R_NX(K)` and the
//! `1/K`-weighted area under the `R_NX` curve.
//!
//! Neighbours are exact Euclidean neighbours. Distance ties are broken by
//! ascending point index in both spaces, so every curve is reproducible.

use crate::error::{Error, Result};
use crate::linalg::squared_distance;
use crate::parallel::Workers;
use crate::types::{Dataset, Embedding};

#[derive(Debug, Clone, PartialEq)]
pub struct QualityCurve {
    /// `1..=n-2`.
    pub k_values: Vec<usize>,
    pub q_nx: Vec<f64>,
    pub r_nx: Vec<f64>,
    pub auc: f64,
}

impl QualityCurve {
    pub fn from_qnx(q_nx: Vec<f64>) -> Self {
        let r_nx = rnx_curve(&q_nx);
        let auc = auc_log_k(&r_nx);
        QualityCurve { k_values: (1..=q_nx.len()).collect(), q_nx, r_nx, auc }
    }

    pub fn n(&self) -> usize {
        self.q_nx.len() + 2
    }

    /// Mean of `R_NX(K)` over `k_lo..=k_hi` (clamped to the curve).
    pub fn mean_rnx(&self, k_lo: usize, k_hi: usize) -> f64 {
        let lo = k_lo.max(1);
        let hi = k_hi.min(self.r_nx.len());
        if lo > hi {
            return f64::NAN;
        }
        self.r_nx[lo - 1..hi].iter().sum::<f64>() / (hi - lo + 1) as f64
    }
}

/// The `k` nearest neighbours of point `i` as `(squared distance, index)`,
/// nearest first, self excluded.
pub fn ranked_neighbors(data: &Dataset, i: usize, k: usize) -> Vec<(f64, usize)> {
    let n = data.n();
    let xi = data.row(i);
    let mut cand: Vec<(f64, usize)> =
        (0..n).filter(|&j| j != i).map(|j| (squared_distance(xi, data.row(j)), j)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(cand.len());
    if k < cand.len() && k > 0 {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.truncate(k);
    cand.sort_unstable_by(cmp);
    cand
}

/// Exact `k_max`-nearest-neighbour lists for every point.
pub fn knn_sets(data: &Dataset, k_max: usize, workers: &Workers) -> Result<Vec<Vec<usize>>> {
    let n = data.n();
    if k_max > n - 1 {
        return Err(Error::InvalidConfig(format!("k_max {k_max} exceeds n - 1 = {}", n - 1)));
    }
    Ok(workers.map(n, |i| ranked_neighbors(data, i, k_max).into_iter().map(|(_, j)| j).collect()))
}

/// Adds, for one point, `1` at `max(rank_hd(j), rank_ld(j))` for each other
/// point `j`. Prefix sums of these counts give the neighbourhood
/// intersections for every `K` at once. `rank_buf` is scratch of length `n`.
fn accumulate_point(hd: &[usize], ld: &[usize], rank_buf: &mut [usize], counts: &mut [u64]) {
    let n = rank_buf.len();
    rank_buf.iter_mut().for_each(|r| *r = n);
    for (r, &j) in hd.iter().enumerate() {
        rank_buf[j] = r + 1;
    }
    for (r, &j) in ld.iter().enumerate() {
        let joint = rank_buf[j].max(r + 1);
        if joint < counts.len() {
            counts[joint] += 1;
        }
    }
}

fn qnx_from_counts(counts: &[u64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n - 2);
    let mut running = 0u64;
    for k in 1..=n - 2 {
        running += counts[k];
        out.push(running as f64 / (n as f64 * k as f64));
    }
    out
}

/// `Q_NX(K)` for `K = 1..=n-2` from neighbour lists of length at least `n-2`.
pub fn qnx_curve(hd_neighbors: &[Vec<usize>], ld_neighbors: &[Vec<usize>]) -> Result<Vec<f64>> {
    let n = hd_neighbors.len();
    if ld_neighbors.len() != n {
        return Err(Error::RowCountMismatch { left: n, right: ld_neighbors.len() });
    }
    if n < 4 {
        return Err(Error::TooFewPoints { n });
    }
    let mut counts = vec![0u64; n - 1];
    let mut buf = vec![0usize; n];
    for (h, l) in hd_neighbors.iter().zip(ld_neighbors) {
        if h.len() < n - 2 || l.len() < n - 2 {
            return Err(Error::InvalidConfig("neighbour lists must hold at least n - 2 entries".into()));
        }
        accumulate_point(h, l, &mut buf, &mut counts);
    }
    Ok(qnx_from_counts(&counts, n))
}

/// `R_NX(K) = ((n−1)·Q_NX(K) − K) / (n−1−K)` with `n = q_nx.len() + 2`.
pub fn rnx_curve(q_nx: &[f64]) -> Vec<f64> {
    let n1 = (q_nx.len() + 1) as f64;
    q_nx.iter()
        .enumerate()
        .map(|(idx, &q)| {
            let k = (idx + 1) as f64;
            (n1 * q - k) / (n1 - k)
        })
        .collect()
}

/// `(Σ 1/K)⁻¹ · Σ R_NX(K)/K`.
pub fn auc_log_k(r_nx: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (idx, r) in r_nx.iter().enumerate() {
        let w = 1.0 / (idx + 1) as f64;
        num += w * r;
        den += w;
    }
    num / den
}

/// Full quality curve of `ld` against `hd` without materialising neighbour
/// lists: memory stays O(n) per worker.
pub fn quality_curve(hd: &Dataset, ld: &Embedding, workers: &Workers) -> Result<QualityCurve> {
    let n = hd.n();
    if ld.n() != n {
        return Err(Error::RowCountMismatch { left: n, right: ld.n() });
    }
    if n < 4 {
        return Err(Error::TooFewPoints { n });
    }
    let ld_data = ld.to_dataset();
    const BLOCK: usize = 32;
    let blocks = n.div_ceil(BLOCK);
    let partial = workers.map(blocks, |b| {
        let mut counts = vec![0u64; n - 1];
        let mut buf = vec![0usize; n];
        for i in (b * BLOCK)..((b + 1) * BLOCK).min(n) {
            let h: Vec<usize> = ranked_neighbors(hd, i, n - 1).into_iter().map(|(_, j)| j).collect();
            let l: Vec<usize> = ranked_neighbors(&ld_data, i, n - 1).into_iter().map(|(_, j)| j).collect();
            accumulate_point(&h, &l, &mut buf, &mut counts);
        }
        counts
    });
    let mut counts = vec![0u64; n - 1];
    for p in partial {
        counts.iter_mut().zip(p).for_each(|(c, v)| *c += v);
    }
    Ok(QualityCurve::from_qnx(qnx_from_counts(&counts, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;
    use crate::types::validate_dataset;
    use ndarray::Array2;
    use rand::Rng;
    use std::collections::HashSet;

    fn ds(n: usize, m: usize, f: impl FnMut((usize, usize)) -> f64) -> Dataset {
        validate_dataset(Array2::from_shape_fn((n, m), f), None).unwrap()
    }

    #[test]
    fn collinear_nearest_neighbour() {
        let d = ds(4, 1, |(r, _)| [0.0, 1.0, 3.0, 10.0][r]);
        let nn = knn_sets(&d, 1, &Workers::sequential()).unwrap();
        assert_eq!(nn[1], vec![0]);
    }

    #[test]
    fn duplicates_break_ties_by_index() {
        let d = ds(5, 2, |(r, _)| if r == 0 { 0.0 } else { 1.0 });
        let nn = knn_sets(&d, 4, &Workers::sequential()).unwrap();
        assert_eq!(nn[0], vec![1, 2, 3, 4]);
        assert_eq!(nn[3], vec![1, 2, 4, 0]);
        assert!(knn_sets(&d, 5, &Workers::sequential()).is_err());
    }

    #[test]
    fn knn_matches_full_sort() {
        let mut rng = seeded_rng(1);
        let d = ds(100, 3, |_| rng.random_range(-1.0..1.0));
        let nn = knn_sets(&d, 10, &Workers::new(2)).unwrap();
        for i in 0..100 {
            let mut all: Vec<(f64, usize)> =
                (0..100).filter(|&j| j != i).map(|j| (squared_distance(d.row(i), d.row(j)), j)).collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let expect: Vec<usize> = all.iter().take(10).map(|p| p.1).collect();
            assert_eq!(nn[i], expect);
        }
    }

    #[test]
    fn identical_spaces_score_one() {
        let mut rng = seeded_rng(2);
        let d = ds(50, 2, |_| rng.random_range(-1.0..1.0));
        let e = Embedding::from_array(d.points().clone()).unwrap();
        let c = quality_curve(&d, &e, &Workers::sequential()).unwrap();
        assert!(c.q_nx.iter().all(|&q| (q - 1.0).abs() < 1e-15));
        assert!(c.r_nx.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        assert!((c.auc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn four_points_reversed_order() {
        // HD on a line at 0, 1, 3, 7; LD reverses the neighbour order of every point.
        // HD 2-NN: 0:{1,2} 1:{0,2} 2:{1,0} 3:{2,1}
        let hd = vec![vec![1, 2, 3], vec![0, 2, 3], vec![1, 0, 3], vec![2, 1, 0]];
        let ld = vec![vec![3, 2, 1], vec![3, 2, 0], vec![3, 0, 1], vec![0, 1, 2]];
        // |∩| at K=2: 0:{1,2}∩{3,2}=1, 1:{0,2}∩{3,2}=1, 2:{1,0}∩{3,0}=1, 3:{2,1}∩{0,1}=1 → 4/(4·2)
        // K=1: 0:{1}∩{3}=0, 1:{0}∩{3}=0, 2:{1}∩{3}=0, 3:{2}∩{0}=0
        let q = qnx_curve(&hd, &ld).unwrap();
        assert_eq!(q, vec![0.0, 0.5]);
    }

    #[test]
    fn incremental_matches_naive_per_k() {
        let mut rng = seeded_rng(3);
        for n in [6, 37, 120] {
            let hd = ds(n, 4, |_| rng.random_range(-1.0..1.0));
            let ld = ds(n, 2, |_| rng.random_range(-1.0..1.0));
            let w = Workers::sequential();
            let hn = knn_sets(&hd, n - 1, &w).unwrap();
            let ln = knn_sets(&ld, n - 1, &w).unwrap();
            let q = qnx_curve(&hn, &ln).unwrap();
            for k in 1..=n - 2 {
                let mut tot = 0usize;
                for i in 0..n {
                    let a: HashSet<_> = hn[i][..k].iter().collect();
                    tot += ln[i][..k].iter().filter(|j| a.contains(j)).count();
                }
                assert_eq!(q[k - 1], tot as f64 / (n as f64 * k as f64));
            }
            let streamed = quality_curve(&hd, &Embedding::from_array(ld.points().clone()).unwrap(), &Workers::new(3)).unwrap();
            assert_eq!(streamed.q_nx, q);
        }
    }

    #[test]
    fn rnx_algebra() {
        let n = 10usize;
        let ones = vec![1.0; n - 2];
        assert!(rnx_curve(&ones).iter().all(|&r| (r - 1.0).abs() < 1e-15));
        let random: Vec<f64> = (1..=n - 2).map(|k| k as f64 / (n - 1) as f64).collect();
        assert!(rnx_curve(&random).iter().all(|&r| r.abs() < 1e-15));
        // N = 5, K = 2, Q = 0.75 → 0.5
        assert!((rnx_curve(&[0.5, 0.75, 0.9])[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn auc_values() {
        assert!((auc_log_k(&[1.0; 20]) - 1.0).abs() < 1e-15);
        assert_eq!(auc_log_k(&[0.0; 20]), 0.0);
        assert!((auc_log_k(&[1.0, 0.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn auc_ignores_rigid_motion_and_scale() {
        let mut rng = seeded_rng(4);
        let hd = ds(80, 5, |_| rng.random_range(-1.0..1.0));
        let e = Embedding::from_vec(80, (0..160).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let w = Workers::sequential();
        let base = quality_curve(&hd, &e, &w).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let moved: Vec<f64> = e
            .as_slice()
            .chunks(2)
            .flat_map(|p| [7.0 * (c * p[0] - s * p[1]) + 2.0, 7.0 * (s * p[0] + c * p[1]) - 1.0])
            .collect();
        let other = quality_curve(&hd, &Embedding::from_vec(80, moved).unwrap(), &w).unwrap();
        assert_eq!(base.q_nx, other.q_nx);
    }

    #[test]
    fn relabelling_is_equivariant() {
        let mut rng = seeded_rng(5);
        let hd = ds(60, 3, |_| rng.random_range(-1.0..1.0));
        let e = Embedding::from_vec(60, (0..120).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let perm: Vec<usize> = (0..60).map(|i| (i * 7 + 3) % 60).collect();
        let hd2 = ds(60, 3, |(r, c)| hd.row(perm[r])[c]);
        let e2 = Embedding::from_vec(60, perm.iter().flat_map(|&p| e.point(p)).collect()).unwrap();
        let w = Workers::sequential();
        assert_eq!(quality_curve(&hd, &e, &w).unwrap().q_nx, quality_curve(&hd2, &e2, &w).unwrap().q_nx);
    }

    #[test]
    fn mismatched_rows_are_rejected() {
        let hd = ds(10, 2, |(r, c)| (r * 2 + c) as f64);
        assert!(matches!(
            quality_curve(&hd, &Embedding::zeros(9), &Workers::sequential()),
            Err(Error::RowCountMismatch { .. })
        ));
    }
}
