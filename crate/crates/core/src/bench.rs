//! Wall-clock scaling measurements on synthetic Gaussian data.

use std::time::Instant;

use crate::error::Result;
use crate::synthetic::gaussian_blob;
use crate::telemetry::NoTelemetry;
use crate::types::{Method, RunConfig};

/// Feature count of the generated benchmark data.
pub const BENCH_DIM: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub method: Method,
    pub iterations: usize,
    /// `(n, seconds)`; seconds is the fastest of the repeats.
    pub rows: Vec<(usize, f64)>,
    /// Least-squares slope of `ln seconds` against `ln n`; needs two sizes.
    pub slope: Option<f64>,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut s = String::from("n,seconds\n");
        for (n, t) in &self.rows {
            s += &format!("{n},{t:.6}\n");
        }
        if let Some(k) = self.slope {
            s += &format!("# method:{} iters:{} slope:{k:.4}\n", self.method, self.iterations);
        }
        s
    }
}

pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Times full runs of `config.method` at each size. SMACOF runs its whole
/// iteration budget (no early stop) so every size does the same number of
/// Guttman steps.
pub fn bench(sizes: &[usize], config: &RunConfig, repeats: usize) -> Result<BenchReport> {
    let mut config = config.clone();
    if config.method == Method::Smacof {
        config.smacof_tol = f64::NEG_INFINITY;
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let data = gaussian_blob(n, BENCH_DIM, config.seed);
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let t0 = Instant::now();
            crate::embed(&data, &config, &mut NoTelemetry)?;
            best = best.min(t0.elapsed().as_secs_f64());
        }
        log::info!("bench {} n={n}: {best:.3}s", config.method);
        rows.push((n, best));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, t)| (n as f64, t)).collect();
    Ok(BenchReport { method: config.method, iterations: config.iterations(), rows, slope: loglog_slope(&pts) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_laws() {
        for p in [1.0, 2.0, 0.5] {
            let pts: Vec<(f64, f64)> = [100.0, 300.0, 1000.0, 5000.0].iter().map(|&n: &f64| (n, 3e-4 * n.powf(p))).collect();
            assert!((loglog_slope(&pts).unwrap() - p).abs() < 1e-12);
        }
        assert_eq!(loglog_slope(&[(10.0, 1.0)]), None);
    }

    #[test]
    fn single_size_has_no_slope() {
        let cfg = RunConfig::new(Method::SquadMds).with_iterations(5);
        let r = bench(&[64], &cfg, 1).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.slope, None);
        assert_eq!(r.to_table().lines().count(), 2);
    }
}
