//! Blending quartet-MDS and t-SNE gradients.
//!
//! Each arm's `n × 2` gradient is divided by the standard deviation of its
//! per-point norms, then the two are mixed with their own decayed learning
//! rates and fed to a single Nesterov update. Standalone t-SNE is the same
//! loop with the quartet arm switched off.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{initial_embedding, seeded_rng};
use crate::optimizer::{clip_gradients, nesterov_step, partition_rng, Fitted, LrSchedule, OptimizerState};
use crate::parallel::Workers;
use crate::quartet::partition_gradients;
use crate::telemetry::{IterationRecord, NoTelemetry, Telemetry};
use crate::tsne::{multiscale_similarities, tsne_gradient_into};
use crate::types::{Dataset, Embedding, Init, Method, RunConfig};

/// Floor on the norm std used as a divisor.
pub const NORM_EPS: f64 = 1e-12;
/// Neighbour-embedding runs start from the initial layout rescaled to this
/// standard deviation along its first axis.
pub const NE_INIT_STD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendConfig {
    pub lr_mds: f64,
    pub lr_tsne: f64,
    pub eps: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        BlendConfig { lr_mds: 0.5, lr_tsne: 1.0, eps: NORM_EPS }
    }
}

impl BlendConfig {
    pub fn new(lr_mds: f64, lr_tsne: f64) -> Result<Self> {
        if !(lr_mds >= 0.0 && lr_tsne >= 0.0) || (lr_mds == 0.0 && lr_tsne == 0.0) {
            return Err(Error::InvalidConfig(format!("bad blend rates mds={lr_mds} tsne={lr_tsne}")));
        }
        Ok(BlendConfig { lr_mds, lr_tsne, eps: NORM_EPS })
    }
}

/// Per-arm learning-rate schedules. `eta0` may be zero here, which switches
/// the arm off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSchedules {
    pub mds: LrSchedule,
    pub tsne: LrSchedule,
}

impl ArmSchedules {
    /// Both arms share the decay shape `b / (a·t + b)`.
    pub fn shared(cfg: &BlendConfig, a: f64, b: f64) -> Self {
        ArmSchedules { mds: LrSchedule { eta0: cfg.lr_mds, a, b }, tsne: LrSchedule { eta0: cfg.lr_tsne, a, b } }
    }
}

/// Mean and population standard deviation of the per-point norms of a flat
/// `n × 2` gradient.
pub fn norm_stats(grads: &[f64]) -> (f64, f64) {
    let n = grads.len() / 2;
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut sum = 0.0;
    for p in grads.chunks_exact(2) {
        sum += p[0].hypot(p[1]);
    }
    let mean = sum / n as f64;
    let mut var = 0.0;
    for p in grads.chunks_exact(2) {
        let d = p[0].hypot(p[1]) - mean;
        var += d * d;
    }
    (mean, (var / n as f64).sqrt())
}

/// Divides every row by `max(std of row norms, eps)` in place and returns
/// the divisor.
pub fn normalize_by_norm_std(grads: &mut [f64], eps: f64) -> f64 {
    let (_, std) = norm_stats(grads);
    let div = std.max(eps);
    grads.iter_mut().for_each(|g| *g /= div);
    div
}

/// `η_tsne(t)·normalize(g_tsne) + η_mds(t)·normalize(g_mds)`. Both inputs
/// are normalised in place; the divisors are returned as `(mds, tsne)`.
pub fn blend(
    g_mds: &mut [f64],
    g_tsne: &mut [f64],
    cfg: &BlendConfig,
    t: usize,
    schedules: &ArmSchedules,
    out: &mut [f64],
) -> (f64, f64) {
    assert_eq!(g_mds.len(), g_tsne.len());
    assert_eq!(g_mds.len(), out.len());
    let s_mds = normalize_by_norm_std(g_mds, cfg.eps);
    let s_tsne = normalize_by_norm_std(g_tsne, cfg.eps);
    let (e_mds, e_tsne) = (schedules.mds.at(t), schedules.tsne.at(t));
    for ((o, m), ts) in out.iter_mut().zip(g_mds.iter()).zip(g_tsne.iter()) {
        *o = e_tsne * ts + e_mds * m;
    }
    (s_mds, s_tsne)
}

/// Starting layout for neighbour-embedding runs: the usual initialisation
/// rescaled to [`NE_INIT_STD`] along its first axis.
pub fn neighbor_embedding_init(dataset: &Dataset, init: Init, seed: u64) -> Embedding {
    let mut rng = seeded_rng(seed);
    let e = initial_embedding(dataset, init, &mut rng);
    let n = e.n() as f64;
    let xs = e.as_slice().iter().step_by(2);
    let mean = xs.clone().sum::<f64>() / n;
    let std = (xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if std > 0.0 {
        e.scaled(NE_INIT_STD / std)
    } else {
        e
    }
}

pub fn run_hybrid(dataset: &Dataset, config: &RunConfig) -> Result<Embedding> {
    let init = neighbor_embedding_init(dataset, config.init, config.seed);
    Ok(hybrid_from(dataset, config, init, &mut NoTelemetry)?.embedding)
}

/// Standalone t-SNE: the blended loop with the quartet arm off and
/// `lr_tsne` as the (normalised) step size.
pub fn run_tsne(dataset: &Dataset, config: &RunConfig) -> Result<Embedding> {
    let init = neighbor_embedding_init(dataset, config.init, config.seed);
    Ok(hybrid_from(dataset, config, init, &mut NoTelemetry)?.embedding)
}

/// Runs the blended optimisation from `init`. With `config.method == Tsne`
/// the quartet arm is disabled whatever `lr_mds` says.
pub fn hybrid_from(
    dataset: &Dataset,
    config: &RunConfig,
    init: Embedding,
    telemetry: &mut dyn Telemetry,
) -> Result<Fitted> {
    config.validate(dataset.n())?;
    let n = dataset.n();
    if init.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: init.n() });
    }
    let lr_mds = if config.method == Method::Tsne { 0.0 } else { config.lr_mds };
    let cfg = BlendConfig::new(lr_mds, config.lr_tsne)?;
    let workers = Workers::new(config.workers);
    let iterations = config.iterations();
    let schedules = ArmSchedules::shared(&cfg, config.decay_a(), config.decay_b);

    let p = if cfg.lr_tsne > 0.0 {
        Some(multiscale_similarities(dataset, &config.perplexities, config.similarity, &workers)?)
    } else {
        None
    };

    let mut state = OptimizerState::new(2 * n, LrSchedule::constant(1.0), config.gamma, iterations)?;
    let mut rng = partition_rng(config.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut g_mds = vec![0.0; 2 * n];
    let mut g_tsne = vec![0.0; 2 * n];
    let quartet_count = n / 4;
    let mut embedding = init;

    for _ in 0..iterations {
        perm.shuffle(&mut rng);
        let t = state.t;
        let exaggeration = if config.method == Method::Tsne && t < config.exaggeration_iters { config.exaggeration } else { 1.0 };
        let mut stats = (f64::NAN, 0.0, 0.0);
        nesterov_step(embedding.as_slice_mut(), &mut state, |look, out| {
            if cfg.lr_mds > 0.0 {
                let s = partition_gradients(dataset, look, &perm, &mut g_mds, &workers);
                if config.clip {
                    clip_gradients(&mut g_mds, &perm[..4 * quartet_count]);
                }
                stats.0 = s / quartet_count as f64;
            } else {
                g_mds.iter_mut().for_each(|g| *g = 0.0);
            }
            match &p {
                Some(p) => {
                    tsne_gradient_into(p, look, exaggeration, &mut g_tsne, &workers);
                }
                None => g_tsne.iter_mut().for_each(|g| *g = 0.0),
            }
            let (s_mds, s_tsne) = blend(&mut g_mds, &mut g_tsne, &cfg, t, &schedules, out);
            stats.1 = s_mds;
            stats.2 = s_tsne;
        })?;
        telemetry.record(&IterationRecord {
            iteration: t,
            lr: schedules.tsne.at(t).max(schedules.mds.at(t)),
            mean_grad_norm: norm_stats(&state.velocity).0,
            sampled_stress: stats.0,
            extra: vec![("norm_std_mds", stats.1), ("norm_std_tsne", stats.2)],
        });
    }

    let mut resolved = vec![
        ("lr_mds", format!("{:e}", cfg.lr_mds)),
        ("lr_tsne", format!("{:e}", cfg.lr_tsne)),
        ("decay_a", format!("{:e}", config.decay_a())),
        ("decay_b", format!("{:e}", config.decay_b)),
        ("gamma", format!("{:e}", config.gamma)),
        ("iterations", iterations.to_string()),
    ];
    if let Some(p) = &p {
        resolved.push(("similarity_storage", if p.is_sparse() { "knn" } else { "dense" }.to_string()));
        resolved.push(("unconverged_rows", p.unconverged_rows().to_string()));
    }
    Ok(Fitted { embedding, resolved })
}
