//! SQuaD-MDS: stochastic quartet descent for metric multidimensional
//! scaling, its blend with t-SNE, the SMACOF and PCA baselines, and
//! neighbourhood-preservation quality curves.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod hybrid;
pub mod io;
pub mod linalg;
pub mod optimizer;
pub mod parallel;
pub mod plot;
pub mod quality;
pub mod quartet;
pub mod synthetic;
pub mod telemetry;
pub mod tsne;
pub mod types;

pub use error::{Error, Result};
pub use optimizer::Fitted;
pub use types::{Dataset, Embedding, Init, Method, RunConfig};

use telemetry::{IterationRecord, Telemetry};

/// Runs `config.method` on `dataset` from the initialisation the method
/// defaults to.
pub fn embed(dataset: &Dataset, config: &RunConfig, telemetry: &mut dyn Telemetry) -> Result<Fitted> {
    config.validate(dataset.n())?;
    match config.method {
        Method::SquadMds => {
            let mut rng = linalg::seeded_rng(config.seed);
            let init = linalg::initial_embedding(dataset, config.init, &mut rng);
            optimizer::squad_mds_from(dataset, config, init, telemetry)
        }
        Method::Hybrid | Method::Tsne => {
            let init = hybrid::neighbor_embedding_init(dataset, config.init, config.seed);
            hybrid::hybrid_from(dataset, config, init, telemetry)
        }
        Method::Smacof => {
            let mut rng = linalg::seeded_rng(config.seed);
            let init = linalg::initial_embedding(dataset, config.init, &mut rng);
            let workers = parallel::Workers::new(config.workers);
            let (embedding, history) =
                baselines::smacof_trajectory(dataset, init, config.iterations(), config.smacof_tol, &workers)?;
            let pairs = (dataset.n() * (dataset.n() - 1) / 2) as f64;
            for (t, s) in history.iter().enumerate() {
                telemetry.record(&IterationRecord {
                    iteration: t,
                    lr: 1.0,
                    mean_grad_norm: f64::NAN,
                    sampled_stress: s / pairs,
                    extra: Vec::new(),
                });
            }
            Ok(Fitted {
                embedding,
                resolved: vec![
                    ("iterations", config.iterations().to_string()),
                    ("smacof_steps", history.len().to_string()),
                    ("smacof_tol", format!("{:e}", config.smacof_tol)),
                ],
            })
        }
        Method::Pca => Ok(Fitted { embedding: baselines::run_pca(dataset)?, resolved: Vec::new() }),
    }
}
