//! `maxplus` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 parse or schema error,
//! 3 non-lattice degrees, 4 invalid kept fraction.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use maxplus::compress::{CompressionReport, DEFAULT_SUBSET, REPORT_SCHEMA_VERSION};
use maxplus::ggp::{r_sweep, BarrierOptions, DirectApproxOptions, ShiftedInstance};
use maxplus::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const EXIT_RUNTIME: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_LATTICE: u8 = 3;
const EXIT_FRACTION: u8 = 4;

#[derive(Parser)]
#[command(name = "maxplus", version, about = "Tropical division and ReLU network compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Divide one polynomial by another.
    Divide {
        p: PathBuf,
        d: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Divide by several divisors in sequence.
    DivideMulti {
        p: PathBuf,
        #[arg(required = true)]
        divisors: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Exact division through the geometric-programming formulation.
    GgpDivide {
        p: PathBuf,
        d: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Approximate division with a slack penalty weight R.
    DirectApprox {
        p: PathBuf,
        d: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Penalty weight when no sweep is given.
        #[arg(long, default_value_t = 1e6)]
        regularization: f64,
        /// Comma-separated penalty weights, e.g. "1e0,1e2,1e4".
        #[arg(long)]
        ggp_r_sweep: Option<String>,
        #[arg(long)]
        ggp_beta: Option<f64>,
        #[arg(long)]
        ggp_max_iters: Option<usize>,
    },
    /// Train a two-layer ReLU classifier.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 200)]
        hidden: usize,
        #[command(flatten)]
        opt: TrainArgs,
        /// Early-stopping patience in epochs on a 20% validation split.
        #[arg(long)]
        patience: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compress a trained model to a fraction of its hidden units.
    Compress {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Optional held-out set recorded in the report.
        #[arg(long)]
        test: Option<String>,
        #[arg(long)]
        fraction: f64,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Dataset tag recorded in the report.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Repeatedly halve the hidden layer with retraining in between.
    Iterate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 2)]
        halvings: usize,
        #[command(flatten)]
        opt: TrainArgs,
        #[arg(short, long)]
        out: PathBuf,
        /// Per-step accuracies as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the accuracy of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Tabulate compression reports as CSV on stdout.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    /// idx:<images>,<labels> | mnist:<dir>/<train|t10k> | csv:<path> | synth:n=..,d=..,sep=..,seed=..
    #[arg(long)]
    data: String,
    /// Keep two digit classes, e.g. "3,6".
    #[arg(long, conflicts_with = "even_odd")]
    digits: Option<String>,
    #[arg(long)]
    even_odd: bool,
    /// Random subset size drawn with --seed.
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
}

impl TrainArgs {
    fn config(&self, seed: u64, patience: Option<usize>) -> TrainConfig {
        TrainConfig { epochs: self.epochs, batch_size: self.batch_size, learning_rate: self.lr, seed, patience }
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonLattice { .. } => EXIT_LATTICE,
            Error::Parse(_) | Error::Json(_) | Error::Csv(_) => EXIT_PARSE,
            _ => EXIT_RUNTIME,
        };
        Self::new(code, e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::new(EXIT_RUNTIME, e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Divide { p, d, out } => cmd_divide(&p, &d, &out),
        Command::DivideMulti { p, divisors, out } => cmd_divide_multi(&p, &divisors, &out),
        Command::GgpDivide { p, d, out } => cmd_ggp_divide(&p, &d, &out),
        Command::DirectApprox { p, d, out, regularization, ggp_r_sweep, ggp_beta, ggp_max_iters } => {
            let mut opts = DirectApproxOptions::default();
            if let Some(b) = ggp_beta {
                opts.beta0 = b;
            }
            if let Some(n) = ggp_max_iters {
                opts.max_iters = n;
            }
            cmd_direct_approx(&p, &d, &out, regularization, ggp_r_sweep.as_deref(), &opts)
        }
        Command::Train { data, hidden, opt, patience, out } => {
            let set = load_data(&data)?;
            let net = train(&init_net(set.dim(), hidden, data.seed)?, &set, &opt.config(data.seed, patience))?;
            println!("train accuracy: {:.4}", accuracy(&net, &set)?);
            write_atomic(&out, net.to_json().as_bytes())
        }
        Command::Compress { model, data, test, fraction, out, report, tag } => {
            cmd_compress(&model, &data, test.as_deref(), fraction, &out, &report, tag)
        }
        Command::Iterate { model, data, halvings, opt, out, report } => {
            let net = read_model(&model)?;
            let set = load_data(&data)?;
            let outcome = iterative_compress(&net, &set, &set, halvings, &opt.config(data.seed, None), data.seed)?;
            for step in &outcome.steps {
                println!("hidden {}: train accuracy {:.4}", step.hidden, step.accuracy);
            }
            if let Some(path) = report {
                write_json(&path, &outcome.steps)?;
            }
            write_atomic(&out, outcome.net.to_json().as_bytes())
        }
        Command::Eval { model, data } => {
            let net = read_model(&model)?;
            let set = load_data(&data)?;
            let acc = accuracy(&net, &set)?;
            let line = serde_json::json!({ "samples": set.len(), "accuracy": acc });
            println!("{line}");
            Ok(())
        }
        Command::Report { reports } => cmd_report(&reports),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::from)
}

/// Reads polynomial JSON. Non-integer degrees are accepted here and rejected
/// by the operations that need lattice degrees.
fn read_poly(path: &Path) -> CliResult<TropicalPolynomial> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_PARSE, anyhow!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> CliResult<TwoLayerNet> {
    let text = read_text(path)?;
    TwoLayerNet::from_json(&text).map_err(|e| Failure::new(EXIT_PARSE, anyhow!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes).context("writing output")?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Largest `p - (q ⊙ d)` on a grid over `[-5, 5]^dim` (random points above
/// two dimensions).
fn max_gap(p: &TropicalPolynomial, q: &TropicalPolynomial, d: &TropicalPolynomial) -> CliResult<f64> {
    let dim = p.dim();
    let points: Vec<Vec<f64>> = match dim {
        1 => (0..=1000).map(|k| vec![-5.0 + k as f64 / 100.0]).collect(),
        2 => (0..=100).flat_map(|a| (0..=100).map(move |b| vec![-5.0 + a as f64 / 10.0, -5.0 + b as f64 / 10.0])).collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            (0..1000).map(|_| (0..dim).map(|_| rng.random_range(-5.0..=5.0)).collect()).collect()
        }
    };
    let mut gap = f64::NEG_INFINITY;
    for x in &points {
        gap = gap.max(p.eval(x)? - q.eval(x)? - d.eval(x)?);
    }
    Ok(gap)
}

fn cmd_divide(p_path: &Path, d_path: &Path, out: &Path) -> CliResult<()> {
    let (p, d) = (read_poly(p_path)?, read_poly(d_path)?);
    let res = divide(&p, &d)?;
    let gap = max_gap(&p, &res.quotient_polynomial(), &d)?;
    println!("exact: {}", res.exact);
    println!("max gap p - (q + d) on grid: {gap:.6e}");
    write_json(out, &res.to_json())
}

fn cmd_divide_multi(p_path: &Path, d_paths: &[PathBuf], out: &Path) -> CliResult<()> {
    let p = read_poly(p_path)?;
    let divisors = d_paths.iter().map(|d| read_poly(d)).collect::<CliResult<Vec<_>>>()?;
    let res = divide_multi(&p, &divisors)?;
    println!("remainder terms: {}", res.remainder.len());
    write_json(out, &res.to_json())
}

#[derive(Serialize)]
struct GgpJson {
    quotient: TropicalPolynomial,
    outer_iterations: usize,
    newton_steps: usize,
    duality_gap: f64,
}

fn cmd_ggp_divide(p_path: &Path, d_path: &Path, out: &Path) -> CliResult<()> {
    let (p, d) = (read_poly(p_path)?, read_poly(d_path)?);
    let sol = solve_division_ggp(&GgpDivisionProblem::new(&p, &d)?, &BarrierOptions::default())?;
    println!("barrier: {} outer iterations, duality gap {:.3e}", sol.report.outer_iterations, sol.report.duality_gap);
    write_json(
        out,
        &GgpJson {
            quotient: sol.quotient.to_polynomial(),
            outer_iterations: sol.report.outer_iterations,
            newton_steps: sol.report.newton_steps,
            duality_gap: sol.report.duality_gap,
        },
    )
}

#[derive(Serialize)]
struct DirectJson {
    regularization: f64,
    quotient: TropicalPolynomial,
    goal0: f64,
    goal1: f64,
    goal2_log: f64,
    max_slack: f64,
    iterations: usize,
}

fn parse_sweep(spec: &str) -> CliResult<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Failure::new(EXIT_PARSE, anyhow!("--ggp-r-sweep entry {s:?}: {e}")))
        })
        .collect()
}

fn cmd_direct_approx(
    p_path: &Path,
    d_path: &Path,
    out: &Path,
    regularization: f64,
    sweep: Option<&str>,
    opts: &DirectApproxOptions,
) -> CliResult<()> {
    let (p, d) = (read_poly(p_path)?, read_poly(d_path)?);
    let instance = ShiftedInstance::new(&p, &d)?;
    if let Some(spec) = sweep {
        let report = r_sweep(&instance, &parse_sweep(spec)?, opts)?;
        for e in &report.entries {
            println!("R = {:e}: goal0 {:.6e}, max slack {:.6}", e.regularization, e.goal0, e.max_slack);
        }
        return write_json(out, &report);
    }
    let sol = solve_direct_approx(&DirectApproxProblem::new(instance, regularization)?, opts)?;
    println!("goal0 {:.6e}, max slack {:.6}", sol.goal0, sol.max_slack());
    write_json(
        out,
        &DirectJson {
            regularization,
            quotient: sol.quotient.to_polynomial(),
            goal0: sol.goal0,
            goal1: sol.goal1,
            goal2_log: sol.goal2_log,
            max_slack: sol.max_slack(),
            iterations: sol.trace.len(),
        },
    )
}

fn labeling(args: &DataArgs) -> CliResult<Option<Labeling>> {
    if args.even_odd {
        return Ok(Some(Labeling::EvenOdd));
    }
    let Some(spec) = &args.digits else { return Ok(None) };
    let digits: Vec<u8> = spec
        .split(',')
        .map(|s| s.trim().parse::<u8>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Failure::new(EXIT_PARSE, anyhow!("--digits {spec:?}: {e}")))?;
    match digits[..] {
        [a, b] if a != b => Ok(Some(Labeling::Pair(a, b))),
        _ => Err(Failure::new(EXIT_PARSE, anyhow!("--digits needs two distinct classes, got {spec:?}"))),
    }
}

fn parse_synth(body: &str) -> CliResult<Dataset> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for kv in body.split(',') {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::new(EXIT_PARSE, anyhow!("synth field {kv:?} needs key=value")))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |k: &str, default: &str| -> CliResult<f64> {
        let v = fields.get(k).copied().unwrap_or(default);
        v.parse::<f64>().map_err(|e| Failure::new(EXIT_PARSE, anyhow!("synth {k}={v:?}: {e}")))
    };
    if let Some(k) = fields.keys().find(|k| !["n", "d", "sep", "seed"].contains(k)) {
        return Err(Failure::new(EXIT_PARSE, anyhow!("unknown synth field {k:?}")));
    }
    Ok(synth_gaussians(get("n", "1000")? as usize, get("d", "2")? as usize, get("sep", "2")?, get("seed", "0")? as u64)?)
}

fn load_spec(spec: &str, labeling: Option<Labeling>) -> CliResult<Dataset> {
    let (kind, body) =
        spec.split_once(':').ok_or_else(|| Failure::new(EXIT_PARSE, anyhow!("data spec {spec:?} lacks a kind prefix")))?;
    Ok(match kind {
        "idx" => {
            let (img, lbl) = body
                .split_once(',')
                .ok_or_else(|| Failure::new(EXIT_PARSE, anyhow!("idx spec needs <images>,<labels>")))?;
            load_idx(Path::new(img), Path::new(lbl), labeling)?
        }
        "mnist" => {
            let (dir, split) =
                body.rsplit_once('/').ok_or_else(|| Failure::new(EXIT_PARSE, anyhow!("mnist spec needs <dir>/<train|t10k>")))?;
            let prefix = match split {
                "train" => "train",
                "t10k" | "test" => "t10k",
                other => return Err(Failure::new(EXIT_PARSE, anyhow!("unknown MNIST split {other:?}"))),
            };
            let dir = Path::new(dir);
            load_idx(
                &dir.join(format!("{prefix}-images-idx3-ubyte")),
                &dir.join(format!("{prefix}-labels-idx1-ubyte")),
                labeling,
            )?
        }
        "csv" => load_csv(Path::new(body), labeling)?,
        "synth" => parse_synth(body)?,
        other => return Err(Failure::new(EXIT_PARSE, anyhow!("unknown data kind {other:?}"))),
    })
}

fn load_data(args: &DataArgs) -> CliResult<Dataset> {
    let set = load_spec(&args.data, labeling(args)?)?;
    match args.subset {
        Some(n) if n < set.len() => Ok(set.subsample(n, args.seed)?),
        Some(n) => {
            if n > set.len() {
                eprintln!("warning: --subset {n} exceeds the {} available samples; using all", set.len());
            }
            Ok(set)
        }
        None => Ok(set),
    }
}

fn cmd_compress(
    model: &Path,
    data: &DataArgs,
    test: Option<&str>,
    fraction: f64,
    out: &Path,
    report_path: &Path,
    tag: Option<String>,
) -> CliResult<()> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Failure::new(EXIT_FRACTION, anyhow!("--fraction must lie in (0, 1], got {fraction}")));
    }
    let net = read_model(model)?;
    let args = DataArgs { subset: Some(data.subset.unwrap_or(DEFAULT_SUBSET)), ..data.clone() };
    let set = load_data(&args)?;
    let (small, mut report): (TwoLayerNet, CompressionReport) = compress(&net, &set, fraction, data.seed)?;
    report.dataset = tag.unwrap_or_else(|| data.data.clone());
    report.model = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    println!("accuracy before {:.4}, after {:.4} (samples)", report.accuracy_before, report.accuracy_after);
    if let Some(spec) = test {
        let test_set = load_spec(spec, labeling(data)?)?;
        let (before, after) = (accuracy(&net, &test_set)?, accuracy(&small, &test_set)?);
        println!("test accuracy before {before:.4}, after {after:.4}");
        report.test_accuracy_before = Some(before);
        report.test_accuracy_after = Some(after);
    }
    write_atomic(out, small.to_json().as_bytes())?;
    write_json(report_path, &report)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Rows are (dataset, kept fraction); columns are model tags; cells hold the
/// test accuracy after compression when recorded, else the sample accuracy.
fn cmd_report(paths: &[PathBuf]) -> CliResult<()> {
    if paths.is_empty() {
        return Err(Failure::new(EXIT_PARSE, anyhow!("no reports given")));
    }
    let mut reports = Vec::with_capacity(paths.len());
    for path in paths {
        let text = read_text(path)?;
        let r: CompressionReport =
            serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_PARSE, anyhow!("{}: {e}", path.display())))?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Failure::new(
                EXIT_PARSE,
                anyhow!("{}: schema version {} (expected {REPORT_SCHEMA_VERSION})", path.display(), r.schema_version),
            ));
        }
        reports.push(r);
    }
    let models: BTreeSet<&str> = reports.iter().map(|r| r.model.as_str()).collect();
    // Fractions sort descending within each dataset.
    let mut table: BTreeMap<(&str, std::cmp::Reverse<u64>), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in &reports {
        let cell = r.test_accuracy_after.unwrap_or(r.accuracy_after);
        let key = (r.dataset.as_str(), std::cmp::Reverse(r.kept_fraction.to_bits()));
        table.entry(key).or_default().insert(r.model.as_str(), cell);
    }
    let mut out = String::from("dataset,kept_fraction");
    for m in &models {
        out.push(',');
        out.push_str(&csv_field(m));
    }
    out.push('\n');
    for ((dataset, frac), cells) in &table {
        out.push_str(&format!("{},{}", csv_field(dataset), f64::from_bits(frac.0)));
        for m in &models {
            out.push(',');
            if let Some(v) = cells.get(m) {
                out.push_str(&format!("{v:.6}"));
            }
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}
