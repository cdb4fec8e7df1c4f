use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ccf::data::{load_csv, load_features, Role, Schema};
use ccf::eval::{cross_validate, ensemble_size_sweep, CvConfig};
use ccf::forest;
use ccf::synth::{self, CompoundParams, CorrParams, HillValleyParams};
use ccf::{Criterion, Dataset, Forest, ForestConfig, Mode};

#[derive(Parser)]
#[command(name = "ccf", version, about = "Canonical correlation forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest and write the model file.
    Train {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict classes for the rows of a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Prediction CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate a forest configuration.
    Crossval {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        cv: CvArgs,
        /// Per-fold report CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic or transformed dataset (CSV plus schema).
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Cross-validate several modes on correlation-augmented copies of a dataset.
    CorrExperiment {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        cv: CvArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,100,10000")]
        kappas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "ccf,rf")]
        modes: Vec<Mode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Class probabilities on a regular grid for a two-feature model.
    Surface {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error against ensemble size, read off prefixes of one large ensemble.
    SweepTrees {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        cv: CvArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,5,15,50,200")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        rf_trees: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenKind {
    Spirals {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = synth::DEFAULT_SPIRAL_NOISE)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Original plus shifted replica, each with an injected correlated feature.
    Compound {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long, default_value_t = 2000.0)]
        beta: f64,
        #[arg(long, default_value_t = 100.0)]
        kappa: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Standardised data with one injected correlated feature.
    Augmented {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    HillValley {
        #[arg(long, default_value_t = 1212)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        length: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Defaults to the data path with a `.schema` extension.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    InfoGain,
    Gini,
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long, default_value_t = 500)]
    trees: usize,
    #[arg(long, default_value = "ccf")]
    mode: Mode,
    /// Features sampled per node (default ceil(log2 D + 1)).
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long, value_enum, default_value_t = CriterionArg::InfoGain)]
    criterion: CriterionArg,
    /// CCA rank tolerance.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Make a leaf when a bootstrap sample is degenerate instead of falling
    /// back to the node data.
    #[arg(long)]
    leaf_on_degenerate: bool,
}

impl ForestArgs {
    fn config(&self, default_epsilon: f64) -> ForestConfig {
        ForestConfig {
            n_trees: self.trees,
            lambda: self.lambda,
            mode: self.mode,
            criterion: match self.criterion {
                CriterionArg::InfoGain => Criterion::InfoGain,
                CriterionArg::Gini => Criterion::Gini,
            },
            epsilon: self.epsilon.unwrap_or(default_epsilon),
            seed: self.seed,
            leaf_on_degenerate: self.leaf_on_degenerate,
        }
    }
}

#[derive(Args)]
struct CvArgs {
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Train on one fold, test on the others.
    #[arg(long)]
    inverted: bool,
    /// Uniformly random folds instead of stratified ones.
    #[arg(long)]
    unstratified: bool,
}

impl CvArgs {
    fn config(&self, seed: u64) -> CvConfig {
        CvConfig {
            folds: self.folds,
            repeats: self.repeats,
            inverted: self.inverted,
            stratified: !self.unstratified,
            seed,
        }
    }
}

/// Errors caused by the user's input rather than by a bug.
fn is_input_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        if let Some(e) = e.downcast_ref::<ccf::Error>() {
            use ccf::Error::*;
            return matches!(
                e,
                Io { .. }
                    | Parse { .. }
                    | Schema(_)
                    | Config(_)
                    | Version(_)
                    | Model(_)
                    | SingleClass(_)
                    | TooFewRows { .. }
                    | Shape(_)
            );
        }
        e.downcast_ref::<UsageError>().is_some() || e.downcast_ref::<std::io::Error>().is_some()
    })
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(if is_input_error(&e) { 2 } else { 1 })
        }
    }
}

/// The error chain joined by ": ", skipping causes already spelled out by
/// the message above them.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CCF_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| usage(format!("CCF_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn schema_path(input: &DataArgs) -> PathBuf {
    input
        .schema
        .clone()
        .unwrap_or_else(|| input.data.with_extension("schema"))
}

fn load(input: &DataArgs) -> anyhow::Result<Dataset> {
    let path = schema_path(input);
    let schema = Schema::from_file(&path).with_context(|| "reading schema")?;
    Ok(load_csv(&input.data, &schema)?)
}

/// Writes via a temporary file in the destination directory and renames it
/// into place.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| ccf::Error::Io { path: path.to_path_buf(), source: e })?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| ccf::Error::Io { path: path.to_path_buf(), source: e })?;
    tmp.persist(path)
        .map_err(|e| ccf::Error::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn write_dataset(out: &Path, ds: &Dataset) -> anyhow::Result<()> {
    write_atomic(out, &ds.to_csv())?;
    let schema = out.with_extension("schema");
    write_atomic(&schema, &ds.schema.to_text())?;
    println!(
        "wrote {} rows, {} features, {} classes to {} (schema {})",
        ds.n_rows(),
        ds.n_features(),
        ds.n_classes(),
        out.display(),
        schema.display()
    );
    Ok(())
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Train { input, forest, out } => {
            let ds = load(&input)?;
            let cfg = forest.config(ccf::cca::DEFAULT_EPSILON);
            let start = Instant::now();
            let model = forest::train(&ds, &cfg)?;
            let secs = start.elapsed().as_secs_f64();
            write_atomic(&out, &model.to_json()?)?;
            println!(
                "trained {} trees ({}, lambda {}) in {secs:.2}s; model written to {}",
                model.n_trees(),
                cfg.mode,
                model.lambda,
                out.display()
            );
        }
        Command::Predict { model, data, out } => {
            let model = Forest::load(&model)?;
            let table = load_features::<f64>(&data, &model.schema)?;
            let classes = model.schema.class_names();
            let mut csv = String::from("row,predicted");
            for c in classes {
                let _ = write!(csv, ",p_{c}");
            }
            csv.push('\n');
            let mut preds = Vec::with_capacity(table.x.rows());
            for (i, row) in table.x.iter_rows().enumerate() {
                let p = model.predict_proba(row)?;
                let y = forest::argmax(&p);
                preds.push(y);
                let _ = write!(csv, "{i},{}", classes[y]);
                for v in p {
                    let _ = write!(csv, ",{v}");
                }
                csv.push('\n');
            }
            emit(out.as_deref(), &csv)?;
            if let Some(truth) = &table.labels {
                eprintln!("error {:.2}% on {} rows", ccf::eval::error_pct(&preds, truth), truth.len());
            }
        }
        Command::Crossval { input, forest, cv, out } => {
            let ds = load(&input)?;
            let cfg = forest.config(ccf::cca::DEFAULT_EPSILON);
            let report = cross_validate(&ds, &cfg, &cv.config(forest.seed))?;
            if let Some(p) = &out {
                write_atomic(p, &report.to_csv())?;
            }
            println!("{}", report.summary());
        }
        Command::Gen { kind } => gen(kind)?,
        Command::CorrExperiment {
            input,
            forest,
            cv,
            kappas,
            modes,
            out,
        } => {
            let ds = load(&input)?;
            // correlated copies need a tight rank tolerance
            let base = forest.config(1e-12);
            let mut csv = String::from("kappa,mode,mean_error_pct,std_error_pct,mean_kappa\n");
            for &kappa in &kappas {
                let aug = synth::corr_augment_dataset(&ds, &CorrParams { kappa, seed: forest.seed })?;
                for &mode in &modes {
                    let report = cross_validate(&aug, &base.with_mode(mode), &cv.config(forest.seed))?;
                    let (m, s) = report.error_summary();
                    let _ = writeln!(csv, "{kappa},{mode},{m},{s},{}", report.mean_kappa());
                    eprintln!("kappa {kappa}: {}", report.summary());
                }
            }
            emit(out.as_deref(), &csv)?;
        }
        Command::Surface { model, grid, out } => {
            let model = Forest::load(&model)?;
            write_atomic(&out, &surface(&model, grid)?)?;
            println!("wrote {}x{grid} grid to {}", grid, out.display());
        }
        Command::SweepTrees {
            input,
            forest,
            cv,
            sizes,
            rf_trees,
            out,
        } => {
            let ds = load(&input)?;
            let cfg = forest.config(ccf::cca::DEFAULT_EPSILON);
            let report = ensemble_size_sweep(&ds, &cfg, &sizes, rf_trees, &cv.config(forest.seed))?;
            emit(out.as_deref(), &report.to_csv())?;
        }
    }
    Ok(())
}

fn gen(kind: GenKind) -> anyhow::Result<()> {
    match kind {
        GenKind::Spirals {
            n,
            classes,
            noise,
            seed,
            out,
        } => write_dataset(&out, &synth::gen_spirals(n, classes, noise, seed)?),
        GenKind::Compound {
            input,
            beta,
            kappa,
            seed,
            out,
        } => {
            let ds = load(&input)?;
            write_dataset(&out, &synth::make_compound(&ds, &CompoundParams { kappa, beta }, seed)?)
        }
        GenKind::Augmented {
            input,
            kappa,
            seed,
            out,
        } => {
            let ds = load(&input)?;
            write_dataset(&out, &synth::corr_augment_dataset(&ds, &CorrParams { kappa, seed })?)
        }
        GenKind::HillValley {
            n,
            length,
            noise,
            seed,
            out,
        } => write_dataset(
            &out,
            &synth::gen_hill_valley(&HillValleyParams {
                n_rows: n,
                length,
                noise,
                seed,
            })?,
        ),
    }
}

/// Grid CSV over the training range of both features, padded by 10%.
fn surface(model: &Forest, grid: usize) -> anyhow::Result<String> {
    let features: Vec<_> = model.schema.feature_columns().collect();
    if features.len() != 2 || features.iter().any(|c| c.role != Role::Ordinal) || model.n_encoded() != 2 {
        bail!(usage(format!(
            "surface export needs a model with exactly 2 ordinal features, this one has {}",
            features.len()
        )));
    }
    if grid < 2 {
        bail!(usage("grid size must be at least 2"));
    }
    let axis = |j: usize| -> Vec<f64> {
        let (lo, hi) = (model.feature_min[j], model.feature_max[j]);
        let pad = if hi > lo { 0.1 * (hi - lo) } else { 1.0 };
        let (lo, hi) = (lo - pad, hi + pad);
        (0..grid)
            .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
            .collect()
    };
    let (xs, ys) = (axis(0), axis(1));
    let mut csv = format!("{},{}", features[0].name, features[1].name);
    for c in model.schema.class_names() {
        let _ = write!(csv, ",p_{c}");
    }
    csv.push_str(",argmax\n");
    for &y in &ys {
        for &x in &xs {
            let p = model.predict_proba(&[x, y])?;
            let _ = write!(csv, "{x},{y}");
            for v in &p {
                let _ = write!(csv, ",{v}");
            }
            let _ = writeln!(csv, ",{}", model.schema.class_names()[forest::argmax(&p)]);
        }
    }
    Ok(csv)
}
