//! Domain types shared by every algorithm: the validated input matrix, the
//! 2-D embedding under optimisation and the run configuration.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Validated high-dimensional input: an `n × m` matrix of finite values
/// with optional per-point labels. Labels are carried for display only.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn m(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    /// Row-major backing storage (always standard layout).
    pub fn as_slice(&self) -> &[f64] {
        self.points.as_slice().expect("dataset is kept in standard layout")
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.as_slice()[i * m..(i + 1) * m]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn into_parts(self) -> (Array2<f64>, Option<Vec<String>>) {
        (self.points, self.labels)
    }

    /// Same points, labels dropped.
    pub fn without_labels(&self) -> Dataset {
        Dataset { points: self.points.clone(), labels: None }
    }
}

/// Checks the dataset invariants and takes ownership of the matrix.
pub fn validate_dataset(raw: Array2<f64>, labels: Option<Vec<String>>) -> Result<Dataset> {
    if raw.nrows() == 0 || raw.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if raw.nrows() < 4 {
        return Err(Error::TooFewPoints { n: raw.nrows() });
    }
    for ((row, col), v) in raw.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    if let Some(l) = &labels {
        if l.len() != raw.nrows() {
            return Err(Error::DimensionMismatch { expected: raw.nrows(), found: l.len() });
        }
    }
    let points = if raw.is_standard_layout() { raw } else { raw.as_standard_layout().into_owned() };
    Ok(Dataset { points, labels })
}

/// `n × 2` low-dimensional coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    coords: Array2<f64>,
}

impl Embedding {
    pub fn zeros(n: usize) -> Self {
        Embedding { coords: Array2::zeros((n, 2)) }
    }

    pub fn from_vec(n: usize, flat: Vec<f64>) -> Result<Self> {
        if flat.len() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, found: flat.len() });
        }
        let coords = Array2::from_shape_vec((n, 2), flat).expect("length checked");
        Ok(Embedding { coords })
    }

    pub fn from_array(coords: Array2<f64>) -> Result<Self> {
        if coords.ncols() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: coords.ncols() });
        }
        let coords = if coords.is_standard_layout() { coords } else { coords.as_standard_layout().into_owned() };
        Ok(Embedding { coords })
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn coords(&self) -> &Array2<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice().expect("embedding is kept in standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        self.coords.as_slice_mut().expect("embedding is kept in standard layout")
    }

    #[inline]
    pub fn point(&self, i: usize) -> [f64; 2] {
        let s = self.as_slice();
        [s[2 * i], s[2 * i + 1]]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    /// Largest extent along either axis.
    pub fn span(&self) -> f64 {
        let s = self.as_slice();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in s.chunks_exact(2) {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }

    pub fn scaled(&self, c: f64) -> Embedding {
        Embedding { coords: &self.coords * c }
    }

    /// View the embedding as a (label-free) dataset, e.g. to feed it back
    /// into a quality computation.
    pub fn to_dataset(&self) -> Dataset {
        Dataset { points: self.coords.clone(), labels: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    SquadMds,
    Hybrid,
    Tsne,
    Smacof,
    Pca,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::SquadMds, Method::Hybrid, Method::Tsne, Method::Smacof, Method::Pca];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SquadMds => "squad-mds",
            Method::Hybrid => "hybrid",
            Method::Tsne => "tsne",
            Method::Smacof => "smacof",
            Method::Pca => "pca",
        }
    }

    /// Iteration budget used when none is configured.
    pub fn default_iterations(self) -> usize {
        match self {
            Method::SquadMds => 5000,
            Method::Hybrid | Method::Tsne => 750,
            Method::Smacof => 300,
            Method::Pca => 0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Pca,
    Random,
}

impl Init {
    pub fn as_str(self) -> &'static str {
        match self {
            Init::Pca => "pca",
            Init::Random => "random",
        }
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Init::Pca),
            "random" => Ok(Init::Random),
            _ => Err(Error::InvalidConfig(format!("unknown init '{s}'"))),
        }
    }
}

/// How high-dimensional similarities are stored for the t-SNE arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMode {
    /// Full `n × n` matrix.
    Dense,
    /// Restricted to the `3 × max perplexity` nearest neighbours of each point.
    Knn,
    /// Dense up to [`SimilarityMode::AUTO_DENSE_MAX`] points, kNN above.
    Auto,
}

impl SimilarityMode {
    pub const AUTO_DENSE_MAX: usize = 3000;

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMode::Dense => "dense",
            SimilarityMode::Knn => "knn",
            SimilarityMode::Auto => "auto",
        }
    }

    pub fn use_knn(self, n: usize) -> bool {
        match self {
            SimilarityMode::Dense => false,
            SimilarityMode::Knn => true,
            SimilarityMode::Auto => n > Self::AUTO_DENSE_MAX,
        }
    }
}

impl FromStr for SimilarityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(SimilarityMode::Dense),
            "knn" => Ok(SimilarityMode::Knn),
            "auto" => Ok(SimilarityMode::Auto),
            _ => Err(Error::InvalidConfig(format!("unknown similarity mode '{s}'"))),
        }
    }
}

/// Every knob of a run. `None` fields are resolved from the data at run
/// time; the resolved values are what ends up in the run manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub seed: u64,
    pub iterations: Option<usize>,
    /// Initial learning rate of the quartet arm in the hybrid blend.
    pub lr_mds: f64,
    /// Initial learning rate of the t-SNE arm (hybrid and standalone t-SNE).
    pub lr_tsne: f64,
    pub perplexities: Vec<f64>,
    pub init: Init,
    /// Worker threads; 1 is the sequential path.
    pub workers: usize,
    /// Standalone SQuaD-MDS initial learning rate; `None` derives it from
    /// the span of the initial embedding.
    pub eta0: Option<f64>,
    /// Decay slope `a` of `eta0 · b / (a·t + b)`; `None` means `9 / T`.
    pub decay_a: Option<f64>,
    pub decay_b: f64,
    pub gamma: f64,
    /// Clip per-point quartet gradients at 10× the std of their norms.
    pub clip: bool,
    /// Divide the quartet gradient by the std of its per-point norms before
    /// stepping (the hybrid's normalisation applied to the standalone run).
    pub normalize_mds: bool,
    pub similarity: SimilarityMode,
    /// Early exaggeration factor for standalone t-SNE (1 disables it).
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub smacof_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::SquadMds,
            seed: 0,
            iterations: None,
            lr_mds: 0.5,
            lr_tsne: 1.0,
            perplexities: vec![4.0, 50.0],
            init: Init::Pca,
            workers: 1,
            eta0: None,
            decay_a: None,
            decay_b: 1.0,
            gamma: 0.9,
            clip: true,
            normalize_mds: false,
            similarity: SimilarityMode::Auto,
            exaggeration: 1.0,
            exaggeration_iters: 250,
            smacof_tol: 1e-4,
        }
    }
}

impl RunConfig {
    pub fn new(method: Method) -> Self {
        RunConfig { method, ..Default::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = Some(iterations);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn iterations(&self) -> usize {
        self.iterations.unwrap_or_else(|| self.method.default_iterations())
    }

    pub fn decay_a(&self) -> f64 {
        self.decay_a.unwrap_or_else(|| 9.0 / self.iterations().max(1) as f64)
    }

    /// Checks the config against a dataset of `n` points.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lr_mds >= 0.0 && self.lr_tsne >= 0.0) {
            return bad("learning rates must be non-negative".into());
        }
        if self.method == Method::Hybrid && self.lr_mds == 0.0 && self.lr_tsne == 0.0 {
            return bad("hybrid needs at least one non-zero learning rate".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.decay_b > 0.0) || self.decay_a.is_some_and(|a| !(a >= 0.0)) {
            return bad("decay constants need a >= 0 and b > 0".into());
        }
        if self.eta0.is_some_and(|e| !(e > 0.0)) {
            return bad("eta0 must be positive".into());
        }
        if self.method != Method::Pca && self.iterations() == 0 {
            return bad("iteration budget must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1".into());
        }
        if matches!(self.method, Method::Hybrid | Method::Tsne) {
            if self.perplexities.is_empty() {
                return bad("at least one perplexity is required".into());
            }
            for &p in &self.perplexities {
                if !(p >= 1.0 && p < (n as f64 - 1.0)) {
                    return bad(format!("perplexity {p} outside [1, n - 1) for n = {n}"));
                }
            }
        }
        if !(self.exaggeration >= 1.0) {
            return bad("exaggeration must be >= 1".into());
        }
        Ok(())
    }
}
