//! Nesterov-momentum SGD and the standalone SQuaD-MDS loop.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hybrid::{norm_stats, normalize_by_norm_std};
use crate::linalg::{initial_embedding, seeded_rng};
use crate::parallel::Workers;
use crate::quartet::partition_gradients;
use crate::telemetry::{IterationRecord, NoTelemetry, Telemetry};
use crate::types::{Dataset, Embedding, RunConfig};

/// Default initial step of raw-gradient SQuaD-MDS is this times the squared
/// span of the initial embedding. Quartet gradients scale like 1/span, so
/// the resulting moves are a fixed fraction of the layout size.
pub const DEFAULT_RAW_ETA_PER_SPAN2: f64 = 0.5;
/// Default initial step of normalised-gradient SQuaD-MDS, per unit span.
pub const DEFAULT_NORMALIZED_ETA_PER_SPAN: f64 = 0.05;
/// Per-point gradients above this many stds of the norm distribution are clipped.
pub const CLIP_STDS: f64 = 10.0;

/// `η(t) = eta0 · b / (a·t + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub eta0: f64,
    pub a: f64,
    pub b: f64,
}

impl LrSchedule {
    pub fn new(eta0: f64, a: f64, b: f64) -> Result<Self> {
        if !(eta0 > 0.0 && a >= 0.0 && b > 0.0) {
            return Err(Error::InvalidConfig(format!("bad schedule eta0={eta0} a={a} b={b}")));
        }
        Ok(LrSchedule { eta0, a, b })
    }

    pub fn constant(eta0: f64) -> Self {
        LrSchedule { eta0, a: 0.0, b: 1.0 }
    }

    #[inline]
    pub fn at(&self, t: usize) -> f64 {
        self.eta0 * self.b / (self.a * t as f64 + self.b)
    }
}

pub fn lr_at(schedule: &LrSchedule, t: usize) -> f64 {
    schedule.at(t)
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub velocity: Vec<f64>,
    pub t: usize,
    pub schedule: LrSchedule,
    pub gamma: f64,
    pub max_iters: usize,
    lookahead: Vec<f64>,
    grad: Vec<f64>,
}

impl OptimizerState {
    /// State for `len` parameters with zero initial velocity.
    pub fn new(len: usize, schedule: LrSchedule, gamma: f64, max_iters: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) || max_iters == 0 {
            return Err(Error::InvalidConfig(format!("need 0 <= gamma < 1 and max_iters >= 1 (gamma={gamma})")));
        }
        Ok(OptimizerState {
            velocity: vec![0.0; len],
            t: 0,
            schedule,
            gamma,
            max_iters,
            lookahead: vec![0.0; len],
            grad: vec![0.0; len],
        })
    }

    pub fn lr(&self) -> f64 {
        self.schedule.at(self.t)
    }
}

/// One Nesterov update:
///
/// ```text
/// v_t = γ·v_{t−1} − η(t)·∇J(θ_{t−1} + γ·v_{t−1})
/// θ_t = θ_{t−1} + v_t
/// ```
///
/// `grad_fn(lookahead, out)` must write the gradient at `lookahead` into `out`.
pub fn nesterov_step<F>(theta: &mut [f64], state: &mut OptimizerState, grad_fn: F) -> Result<()>
where
    F: FnOnce(&[f64], &mut [f64]),
{
    debug_assert_eq!(theta.len(), state.velocity.len());
    let gamma = state.gamma;
    for ((l, x), v) in state.lookahead.iter_mut().zip(theta.iter()).zip(&state.velocity) {
        *l = x + gamma * v;
    }
    grad_fn(&state.lookahead, &mut state.grad);
    let eta = state.schedule.at(state.t);
    let mut finite = true;
    for ((x, v), g) in theta.iter_mut().zip(state.velocity.iter_mut()).zip(&state.grad) {
        *v = gamma * *v - eta * g;
        *x += *v;
        finite &= x.is_finite();
    }
    if !finite {
        return Err(Error::NonFiniteUpdate { iteration: state.t });
    }
    state.t += 1;
    Ok(())
}

/// Scales down rows whose norm exceeds `CLIP_STDS` × the std of the norms of
/// `rows` (the points that actually received a gradient).
pub(crate) fn clip_gradients(grads: &mut [f64], rows: &[usize]) {
    if rows.is_empty() {
        return;
    }
    let (mut sum, mut sum2) = (0.0, 0.0);
    for &i in rows {
        let nrm = grads[2 * i].hypot(grads[2 * i + 1]);
        sum += nrm;
        sum2 += nrm * nrm;
    }
    let k = rows.len() as f64;
    let mean = sum / k;
    let std = (sum2 / k - mean * mean).max(0.0).sqrt();
    if std == 0.0 {
        return;
    }
    let cap = CLIP_STDS * std;
    for &i in rows {
        let nrm = grads[2 * i].hypot(grads[2 * i + 1]);
        if nrm > cap {
            let s = cap / nrm;
            grads[2 * i] *= s;
            grads[2 * i + 1] *= s;
        }
    }
}

/// Initial learning rate derived from the initial embedding when none is set.
pub fn default_eta0(init: &Embedding, normalized: bool) -> f64 {
    let span = init.span();
    let span = if span > 0.0 { span } else { 1.0 };
    if normalized {
        DEFAULT_NORMALIZED_ETA_PER_SPAN * span
    } else {
        DEFAULT_RAW_ETA_PER_SPAN2 * span * span
    }
}

/// Result of an iterative run plus the resolved hyperparameters.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub embedding: Embedding,
    pub resolved: Vec<(&'static str, String)>,
}

pub fn run_squad_mds(dataset: &Dataset, config: &RunConfig) -> Result<Embedding> {
    let mut rng = seeded_rng(config.seed);
    let init = initial_embedding(dataset, config.init, &mut rng);
    Ok(squad_mds_from(dataset, config, init, &mut NoTelemetry)?.embedding)
}

/// SQuaD-MDS starting from `init`. The quartet permutation stream is seeded
/// from `config.seed` independently of how `init` was produced.
pub fn squad_mds_from(
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
    let workers = Workers::new(config.workers);
    let iterations = config.iterations();
    let eta0 = config.eta0.unwrap_or_else(|| default_eta0(&init, config.normalize_mds));
    let schedule = LrSchedule::new(eta0, config.decay_a(), config.decay_b)?;
    let mut state = OptimizerState::new(2 * n, schedule, config.gamma, iterations)?;
    let mut rng = partition_rng(config.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut embedding = init;
    let quartet_count = n / 4;

    for _ in 0..iterations {
        perm.shuffle(&mut rng);
        let lr = state.lr();
        let t = state.t;
        let mut record = None;
        nesterov_step(embedding.as_slice_mut(), &mut state, |look, grads| {
            let stress = partition_gradients(dataset, look, &perm, grads, &workers);
            if config.clip {
                clip_gradients(grads, &perm[..4 * quartet_count]);
            }
            if config.normalize_mds {
                normalize_by_norm_std(grads, crate::hybrid::NORM_EPS);
            }
            record = Some((stress / quartet_count as f64, norm_stats(grads).0));
        })?;
        if let Some((stress, mean_norm)) = record {
            telemetry.record(&IterationRecord {
                iteration: t,
                lr,
                mean_grad_norm: mean_norm,
                sampled_stress: stress,
                extra: Vec::new(),
            });
        }
    }

    Ok(Fitted {
        embedding,
        resolved: vec![
            ("eta0", format!("{eta0:e}")),
            ("decay_a", format!("{:e}", config.decay_a())),
            ("decay_b", format!("{:e}", config.decay_b)),
            ("gamma", format!("{:e}", config.gamma)),
            ("iterations", iterations.to_string()),
        ],
    })
}

/// The quartet-sampling stream. Kept separate from the initialisation
/// stream so that a fixed seed samples the same partitions whatever init
/// was used.
pub(crate) fn partition_rng(seed: u64) -> crate::linalg::RngStream {
    crate::linalg::split_rng(seed, 0x5155_4144)
}
