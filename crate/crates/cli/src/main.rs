//! `squadmds`: embed, score, benchmark and plot from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
//! Failures print one `key:value` error record to stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use squadmds::io::{self, DelimitedOptions, LabelColumn, Manifest, MatrixFormat};
use squadmds::parallel::{default_worker_count, Workers};
use squadmds::telemetry::{LineTelemetry, NoTelemetry, Telemetry};
use squadmds::types::SimilarityMode;
use squadmds::{Dataset, Error, Init, Method, RunConfig};

#[derive(Parser)]
#[command(name = "squadmds", version, about = "Quartet-descent MDS, t-SNE blends and quality curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a data matrix into two dimensions.
    Embed(EmbedArgs),
    /// Q_NX / R_NX curves and AUC of an embedding.
    Quality(QualityArgs),
    /// Time full runs on synthetic data of growing size.
    Bench(BenchArgs),
    /// Render an embedding file as an SVG scatter plot.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Input matrix format.
    #[arg(long, default_value = "delimited", value_parser = parse_format)]
    format: MatrixFormat,
    /// Skip the first data line.
    #[arg(long)]
    header: bool,
    /// Column holding point labels: `first`, `last` or a 0-based index.
    #[arg(long, value_parser = parse_label_column)]
    label_column: Option<LabelColumn>,
    /// Field delimiter; detected from the first data line when omitted.
    #[arg(long)]
    delimiter: Option<char>,
}

impl InputArgs {
    fn options(&self) -> DelimitedOptions {
        DelimitedOptions { delimiter: self.delimiter, header: self.header, label_column: self.label_column }
    }

    fn record(&self, m: &mut Manifest, input: &Path) {
        m.set("input", input.display());
        m.set("format", if self.format == MatrixFormat::Raw { "raw" } else { "delimited" });
        m.set("header", self.header);
        m.set(
            "label_column",
            match self.label_column {
                None => "none".to_string(),
                Some(LabelColumn::Last) => "last".to_string(),
                Some(LabelColumn::Index(i)) => i.to_string(),
            },
        );
        m.set("delimiter", self.delimiter.map_or("auto".to_string(), |c| format!("{:?}", c)));
    }

    fn from_manifest(m: &Manifest) -> Result<(PathBuf, Self), Error> {
        let get = |k: &str| m.get(k).ok_or_else(|| Error::Manifest(format!("missing key '{k}'")));
        let label_column = match get("label_column")? {
            "none" => None,
            s => Some(s.parse()?),
        };
        let delimiter = match get("delimiter")? {
            "auto" => None,
            s => Some(parse_quoted_char(s).ok_or_else(|| Error::Manifest(format!("bad delimiter {s}")))?),
        };
        let header = get("header")?.parse().map_err(|_| Error::Manifest("bad header flag".into()))?;
        Ok((PathBuf::from(get("input")?), InputArgs { format: get("format")?.parse()?, header, label_column, delimiter }))
    }
}

fn parse_quoted_char(s: &str) -> Option<char> {
    let inner = s.strip_prefix('\'')?.strip_suffix('\'')?;
    match inner {
        "\\t" => Some('\t'),
        "\\'" => Some('\''),
        "\\\\" => Some('\\'),
        _ => {
            let mut c = inner.chars();
            let first = c.next()?;
            c.next().is_none().then_some(first)
        }
    }
}

fn parse_format(s: &str) -> Result<MatrixFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_label_column(s: &str) -> Result<LabelColumn, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct EmbedArgs {
    /// Data matrix, one point per row.
    #[arg(long, required_unless_present = "from_manifest")]
    input: Option<PathBuf>,
    #[command(flatten)]
    input_args: InputArgs,
    #[arg(long, default_value = "squad-mds")]
    method: Method,
    /// Iteration budget; the method's default when omitted.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    lr_mds: f64,
    #[arg(long, default_value_t = 1.0)]
    lr_tsne: f64,
    #[arg(long, default_value = "4,50", value_delimiter = ',')]
    perplexities: Vec<f64>,
    #[arg(long, default_value = "pca")]
    init: Init,
    /// Worker threads; defaults to SQUADMDS_WORKERS or the core count.
    #[arg(long)]
    workers: Option<usize>,
    /// Initial SQuaD-MDS learning rate; derived from the init when omitted.
    #[arg(long)]
    eta0: Option<f64>,
    /// Divide quartet gradients by the std of their norms before stepping.
    #[arg(long)]
    normalize_mds: bool,
    /// Disable clipping of outlying quartet gradients.
    #[arg(long)]
    no_clip: bool,
    /// t-SNE similarity storage: dense, knn or auto.
    #[arg(long, default_value = "auto")]
    similarity: SimilarityMode,
    /// Early exaggeration factor for standalone t-SNE.
    #[arg(long, default_value_t = 1.0)]
    exaggeration: f64,
    #[arg(long, default_value_t = 250)]
    exaggeration_iters: usize,
    /// Output embedding file.
    #[arg(long)]
    output: PathBuf,
    /// Run manifest; `<output>.manifest` when omitted.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Write per-iteration records here.
    #[arg(long)]
    telemetry: Option<PathBuf>,
    /// Record every k-th iteration.
    #[arg(long, default_value_t = 1)]
    telemetry_every: usize,
    /// Also render the embedding as SVG.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Replay a previous run; every run setting comes from the manifest.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct QualityArgs {
    /// High-dimensional data.
    #[arg(long)]
    hd: PathBuf,
    #[command(flatten)]
    input_args: InputArgs,
    /// Embedding file (two columns, optional label column).
    #[arg(long)]
    ld: PathBuf,
    /// Curve output (`K,Q_NX,R_NX` rows).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value = "squad-mds")]
    method: Method,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Runs per size; the fastest counts.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Write the table here as well as to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Embedding file; a third column is used as labels.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => 1,
        Error::NonFiniteUpdate { .. } => 3,
        _ => 2,
    }
}

fn load(path: &Path, input: &InputArgs) -> Result<Dataset, Error> {
    io::load_matrix(path, input.format, &input.options())
}

fn workers_or_default(w: Option<usize>) -> usize {
    w.unwrap_or_else(default_worker_count)
}

fn embed(args: EmbedArgs) -> Result<(), Failure> {
    let (input, input_args, config) = match &args.from_manifest {
        Some(path) => {
            let m = Manifest::read(path)?;
            let (input, input_args) = InputArgs::from_manifest(&m)?;
            (input, input_args, io::config_from_manifest(&m)?)
        }
        None => {
            let config = RunConfig {
                method: args.method,
                seed: args.seed,
                iterations: args.iters,
                lr_mds: args.lr_mds,
                lr_tsne: args.lr_tsne,
                perplexities: args.perplexities.clone(),
                init: args.init,
                workers: workers_or_default(args.workers),
                eta0: args.eta0,
                decay_a: None,
                normalize_mds: args.normalize_mds,
                clip: !args.no_clip,
                similarity: args.similarity,
                exaggeration: args.exaggeration,
                exaggeration_iters: args.exaggeration_iters,
                ..RunConfig::new(args.method)
            };
            let input = args.input.clone().ok_or_else(|| Failure::Usage("--input is required".into()))?;
            (input, args.input_args.clone(), config)
        }
    };

    let t0 = Instant::now();
    let data = load(&input, &input_args)?;
    config.validate(data.n())?;
    let t_load = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let fitted = match &args.telemetry {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            let mut sink = LineTelemetry::new(BufWriter::new(file), args.telemetry_every.max(1));
            let fitted = squadmds::embed(&data, &config, &mut sink as &mut dyn Telemetry)?;
            sink.into_inner().flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
            fitted
        }
        None => squadmds::embed(&data, &config, &mut NoTelemetry)?,
    };
    let t_embed = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    io::write_embedding(&args.output, &fitted.embedding, data.labels())?;
    if let Some(svg) = &args.plot {
        squadmds::plot::plot_svg(&fitted.embedding, data.labels(), svg)?;
    }
    let t_write = t2.elapsed().as_secs_f64();

    let mut m = Manifest::new();
    m.set("version", env!("CARGO_PKG_VERSION"));
    input_args.record(&mut m, &input);
    m.set("n", data.n());
    m.set("m", data.m());
    m.set("dataset_sha256", io::fingerprint(&data));
    io::record_config(&mut m, &config);
    for (k, v) in &fitted.resolved {
        m.set(&format!("resolved.{k}"), v);
    }
    m.set("output", args.output.display());
    m.set("time.load_s", format!("{t_load:.6}"));
    m.set("time.embed_s", format!("{t_embed:.6}"));
    m.set("time.write_s", format!("{t_write:.6}"));
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".manifest");
        PathBuf::from(p)
    });
    m.write(&manifest_path)?;
    Ok(())
}

fn quality(args: QualityArgs) -> Result<(), Failure> {
    let hd = load(&args.hd, &args.input_args)?;
    let ld = io::load_embedding(&args.ld)?;
    if ld.n() != hd.n() {
        return Err(Error::RowCountMismatch { left: hd.n(), right: ld.n() }.into());
    }
    let workers = Workers::new(workers_or_default(args.workers));
    let curve = squadmds::quality::quality_curve(&hd, &ld, &workers)?;
    if let Some(out) = &args.output {
        io::write_curve(out, &curve)?;
    }
    println!("auc:{:.12}", curve.auc);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    if args.sizes.is_empty() {
        return Err(Failure::Usage("--sizes needs at least one size".into()));
    }
    let mut config = RunConfig::new(args.method).with_seed(args.seed).with_workers(workers_or_default(args.workers));
    config.iterations = args.iters;
    let report = squadmds::bench::bench(&args.sizes, &config, args.repeats)?;
    let table = report.to_table();
    print!("{table}");
    if let Some(out) = &args.output {
        std::fs::write(out, &table).map_err(|e| Error::Io { path: out.clone(), source: e })?;
    }
    Ok(())
}

fn plot(args: PlotArgs) -> Result<(), Failure> {
    let ld = io::load_embedding(&args.input)?;
    let text = std::fs::read_to_string(&args.input).map_err(|e| Error::Io { path: args.input.clone(), source: e })?;
    let labels: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split(',').nth(2).map(|s| s.trim().to_string()))
        .collect();
    let labels = (labels.len() == ld.n()).then_some(labels);
    squadmds::plot::plot_svg(&ld, labels.as_deref(), &args.output)?;
    Ok(())
}

fn report(kind: &str, code: u8, message: &str) -> ExitCode {
    let message = message.replace('\n', " ");
    eprintln!("error kind:{kind} exit:{code} message:{}", message.trim());
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return report("usage", 1, &e.kind().to_string());
        }
    };
    let result = match cli.command {
        Command::Embed(a) => embed(a),
        Command::Quality(a) => quality(a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => report("usage", 1, &msg),
        Err(Failure::Run(e)) => report(e.kind(), exit_code(&e), &e.to_string()),
    }
}
