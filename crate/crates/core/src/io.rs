//! Matrix files, embedding and curve output, and run manifests.
//!
//! Delimited text uses 17 significant digits so every f64 survives a text
//! round trip. The raw format is a 16-byte header (`n`, `m` as little-endian
//! u64) followed by `n·m` little-endian f64 in row-major order.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quality::QualityCurve;
use crate::types::{validate_dataset, Dataset, Embedding, Init, Method, RunConfig, SimilarityMode};

pub const RAW_HEADER_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Delimited,
    Raw,
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delimited" | "csv" | "tsv" | "text" => Ok(MatrixFormat::Delimited),
            "raw" | "raw-f64" => Ok(MatrixFormat::Raw),
            _ => Err(Error::InvalidConfig(format!("unknown matrix format '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Last,
}

impl FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(LabelColumn::Last),
            "first" => Ok(LabelColumn::Index(0)),
            _ => s
                .parse()
                .map(LabelColumn::Index)
                .map_err(|_| Error::InvalidConfig(format!("label column must be 'first', 'last' or an index, got '{s}'"))),
        }
    }
}

/// Options of the delimited reader. With no delimiter set, a comma is used
/// if the first data line has one, then a tab, then runs of whitespace.
/// Blank lines and lines starting with `#` are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelimitedOptions {
    pub delimiter: Option<char>,
    pub header: bool,
    pub label_column: Option<LabelColumn>,
}

fn split_fields(line: &str, delim: Option<char>) -> Vec<&str> {
    match delim {
        Some(c) => line.split(c).map(str::trim).collect(),
        None => line.split_whitespace().collect(),
    }
}

fn detect_delimiter(line: &str) -> Option<char> {
    [',', '\t', ';'].into_iter().find(|&c| line.contains(c))
}

/// Parses delimited text into points and optional labels.
pub fn read_delimited<R: BufRead>(reader: R, opts: &DelimitedOptions) -> Result<(Array2<f64>, Option<Vec<String>>)> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut delim = opts.delimiter;
    let mut detected = opts.delimiter.is_some();
    let mut header_pending = opts.header;
    let mut rows = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse { line: lineno, col: 0, msg: e.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !detected {
            delim = detect_delimiter(trimmed);
            detected = true;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields = split_fields(trimmed, delim);
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::RaggedRows { line: lineno, expected: w, found: fields.len() });
            }
            _ => {}
        }
        let label_idx = opts.label_column.map(|l| match l {
            LabelColumn::Index(i) => i,
            LabelColumn::Last => fields.len().saturating_sub(1),
        });
        if let Some(li) = label_idx {
            if li >= fields.len() {
                return Err(Error::Parse { line: lineno, col: li + 1, msg: "label column out of range".into() });
            }
        }
        for (c, f) in fields.iter().enumerate() {
            if Some(c) == label_idx {
                labels.push(f.to_string());
                continue;
            }
            let v: f64 = f.parse().map_err(|_| Error::Parse { line: lineno, col: c + 1, msg: format!("not a number: '{f}'") })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyMatrix);
    }
    let m = values.len() / rows;
    if m == 0 {
        return Err(Error::EmptyMatrix);
    }
    let points = Array2::from_shape_vec((rows, m), values).expect("row widths checked");
    Ok((points, opts.label_column.map(|_| labels)))
}

pub fn read_raw<R: Read>(mut reader: R) -> Result<Array2<f64>> {
    let bad = |msg: String| Error::Parse { line: 0, col: 0, msg };
    let mut header = [0u8; RAW_HEADER_BYTES];
    reader.read_exact(&mut header).map_err(|_| bad("raw file shorter than its 16-byte header".into()))?;
    let n = u64::from_le_bytes(header[..8].try_into().unwrap()) as usize;
    let m = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
    if n == 0 || m == 0 {
        return Err(Error::EmptyMatrix);
    }
    let len = n.checked_mul(m).and_then(|l| l.checked_mul(8)).ok_or_else(|| bad(format!("header {n}x{m} overflows")))?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body).map_err(|e| bad(e.to_string()))?;
    if body.len() != len {
        return Err(bad(format!("header declares {n}x{m} values ({len} bytes), body has {} bytes", body.len())));
    }
    let values = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    Ok(Array2::from_shape_vec((n, m), values).expect("length checked"))
}

/// Reads and validates a dataset.
pub fn load_matrix(path: &Path, format: MatrixFormat, opts: &DelimitedOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (points, labels) = match format {
        MatrixFormat::Delimited => read_delimited(BufReader::new(file), opts)?,
        MatrixFormat::Raw => (read_raw(BufReader::new(file))?, None),
    };
    validate_dataset(points, labels)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes the points of `data` (labels are not written).
pub fn write_matrix(path: &Path, data: &Array2<f64>, format: MatrixFormat) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| -> std::io::Result<()> {
        match format {
            MatrixFormat::Raw => {
                w.write_all(&(data.nrows() as u64).to_le_bytes())?;
                w.write_all(&(data.ncols() as u64).to_le_bytes())?;
                for v in data.iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            MatrixFormat::Delimited => {
                for row in data.rows() {
                    let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                    writeln!(w, "{}", line.join(","))?;
                }
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Embedding as `x,y[,label]` rows.
pub fn write_embedding(path: &Path, embedding: &Embedding, labels: Option<&[String]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != embedding.n() {
            return Err(Error::RowCountMismatch { left: embedding.n(), right: l.len() });
        }
    }
    let mut w = create(path)?;
    let res = (|| -> std::io::Result<()> {
        for i in 0..embedding.n() {
            let [x, y] = embedding.point(i);
            match labels {
                Some(l) => writeln!(w, "{x:.16e},{y:.16e},{}", l[i])?,
                None => writeln!(w, "{x:.16e},{y:.16e}")?,
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads an embedding file of two coordinate columns; a third (label)
/// column is ignored.
pub fn load_embedding(path: &Path) -> Result<Embedding> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let probe = DelimitedOptions::default();
    let (points, _) = match read_delimited(BufReader::new(file), &probe) {
        Err(Error::Parse { col: 3, .. }) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let opts = DelimitedOptions { label_column: Some(LabelColumn::Index(2)), ..probe };
            read_delimited(BufReader::new(file), &opts)?
        }
        other => other?,
    };
    let points = match points.ncols() {
        2 => points,
        3 => points.slice(ndarray::s![.., ..2]).to_owned(),
        found => return Err(Error::DimensionMismatch { expected: 2, found }),
    };
    let e = Embedding::from_array(points)?;
    if let Some((row, col)) = first_non_finite(e.as_slice()) {
        return Err(Error::NonFinite { row, col });
    }
    Ok(e)
}

fn first_non_finite(flat: &[f64]) -> Option<(usize, usize)> {
    flat.iter().position(|v| !v.is_finite()).map(|p| (p / 2, p % 2))
}

/// Curve rows `K,Q_NX,R_NX` preceded by a comment-style summary record, so
/// the file also loads as a plain matrix.
pub fn write_curve(path: &Path, curve: &QualityCurve) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "# n:{} auc:{:.16e}", curve.n(), curve.auc)?;
        writeln!(w, "# k,q_nx,r_nx")?;
        for ((k, q), r) in curve.k_values.iter().zip(&curve.q_nx).zip(&curve.r_nx) {
            writeln!(w, "{k},{q:.16e},{r:.16e}")?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// SHA-256 over `n`, `m` and the little-endian bytes of the points.
pub fn fingerprint(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((dataset.n() as u64).to_le_bytes());
    h.update((dataset.m() as u64).to_le_bytes());
    for v in dataset.as_slice() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Ordered `key:value` records, one per line. Values run to the end of the
/// line and may contain `:`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}:{v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or_else(|| Error::Manifest(format!("line {} has no ':'", i + 1)))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key).ok_or_else(|| Error::Manifest(format!("missing key '{key}'")))?;
        v.parse().map_err(|_| Error::Manifest(format!("bad value for '{key}': '{v}'")))
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None | Some("auto") => Ok(None),
            Some(_) => self.parsed(key).map(Some),
        }
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn auto<T: Display>(v: Option<T>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

/// Records every field of `config`. Floats use Rust's shortest exact
/// representation, so parsing them back yields identical bits.
pub fn record_config(m: &mut Manifest, config: &RunConfig) {
    m.set("method", config.method);
    m.set("seed", config.seed);
    m.set("iters", config.iterations());
    m.set("lr_mds", config.lr_mds);
    m.set("lr_tsne", config.lr_tsne);
    m.set("perplexities", join_f64(&config.perplexities));
    m.set("init", config.init.as_str());
    m.set("workers", config.workers);
    m.set("eta0", auto(config.eta0));
    m.set("decay_a", auto(config.decay_a));
    m.set("decay_b", config.decay_b);
    m.set("gamma", config.gamma);
    m.set("clip", config.clip);
    m.set("normalize_mds", config.normalize_mds);
    m.set("similarity", config.similarity.as_str());
    m.set("exaggeration", config.exaggeration);
    m.set("exaggeration_iters", config.exaggeration_iters);
    m.set("smacof_tol", config.smacof_tol);
}

/// Inverse of [`record_config`].
pub fn config_from_manifest(m: &Manifest) -> Result<RunConfig> {
    let perplexities = m
        .get("perplexities")
        .ok_or_else(|| Error::Manifest("missing key 'perplexities'".into()))?
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Manifest(format!("bad perplexity '{s}'"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunConfig {
        method: m.parsed::<Method>("method")?,
        seed: m.parsed("seed")?,
        iterations: Some(m.parsed("iters")?),
        lr_mds: m.parsed("lr_mds")?,
        lr_tsne: m.parsed("lr_tsne")?,
        perplexities,
        init: m.parsed::<Init>("init")?,
        workers: m.parsed("workers")?,
        eta0: m.optional("eta0")?,
        decay_a: m.optional("decay_a")?,
        decay_b: m.parsed("decay_b")?,
        gamma: m.parsed("gamma")?,
        clip: m.parsed("clip")?,
        normalize_mds: m.parsed("normalize_mds")?,
        similarity: m.parsed::<SimilarityMode>("similarity")?,
        exaggeration: m.parsed("exaggeration")?,
        exaggeration_iters: m.parsed("exaggeration_iters")?,
        smacof_tol: m.parsed("smacof_tol")?,
    })
}
