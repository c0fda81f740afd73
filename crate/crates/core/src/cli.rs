//! Command-line front end: `stats`, `extract` and `run`.
//!
//! Exit codes: 0 success, 1 other failure, 2 input or configuration error,
//! 3 degenerate extraction, 4 training divergence.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{default_hyper_params, parse_list, parse_scale, parse_weighting, ExperimentConfig, Mode, TrustSourceKind};
use crate::dataset::{dataset_stats, load_ratings, load_trust, RatingScale, TrustEdgeList};
use crate::error::Error;
use crate::eval::{
    compare_trust_sources, comparison_table, cross_validate, threshold_sweep, write_aggregate_csv,
    write_metrics_csv, write_sweep_csv, write_timing_csv, EvalReport, TrustSource,
};
use crate::models::{KnnParams, ModelKind, ModelSpec};
use crate::trust::ExtractionConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "trustrec", version, about = "Implicit trust extraction and trust-aware rating prediction")]
pub struct Cli {
    /// Worker threads for parallel folds and distance scans (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print user/item/rating counts, density and mean rating.
    Stats(StatsArgs),
    /// Build the Hellinger trust graph and write it as an edge list.
    Extract(ExtractArgs),
    /// Cross-validate models and write metric CSVs.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Rating file: `user item rating` per line.
    #[arg(long)]
    pub ratings: PathBuf,
    /// Explicit trust file: `truster trustee [weight]` per line.
    #[arg(long)]
    pub trust: Option<PathBuf>,
    /// Rating scale as `min,max`.
    #[arg(long, default_value = "1,5")]
    pub scale: String,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Rating file: `user item rating` per line.
    #[arg(long)]
    pub ratings: PathBuf,
    /// Target mean number of trust neighbors per user.
    #[arg(long)]
    pub expected_degree: f64,
    /// Number of random user pairs for the distance fit (default: min(all pairs, 1e6)).
    #[arg(long)]
    pub sample: Option<usize>,
    /// Seed for the pair sample.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Edge-list output (default: stdout). Diagnostics go to stderr.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rating scale as `min,max`.
    #[arg(long, default_value = "1,5")]
    pub scale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrustSourceArg {
    None,
    Explicit,
    Hellinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Cv,
    Compare,
    Sweep,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment file; excludes the per-experiment flags below.
    #[arg(long, conflicts_with_all = [
        "ratings", "trust", "scale", "model", "factors", "iters", "lr", "reg", "reg_social",
        "reg_weighting", "folds", "trust_source", "expected_degree", "mode", "sweep_grid", "name",
    ])]
    pub config: Option<PathBuf>,
    /// Rating file: `user item rating` per line.
    #[arg(long, required_unless_present = "config")]
    pub ratings: Option<PathBuf>,
    /// Explicit trust file: `truster trustee [weight]` per line.
    #[arg(long)]
    pub trust: Option<PathBuf>,
    /// Rating scale as `min,max` (default 1,5).
    #[arg(long)]
    pub scale: Option<String>,
    /// Dataset label used in the CSVs.
    #[arg(long)]
    pub name: Option<String>,
    /// Model names, comma-separated or repeated (e.g. BiasedMF,SVD++,HellTrustSVD).
    #[arg(long, value_delimiter = ',', required_unless_present = "config")]
    pub model: Vec<String>,
    /// Latent dimension for factor models.
    #[arg(long)]
    pub factors: Option<usize>,
    /// Training epochs for factor models.
    #[arg(long)]
    pub iters: Option<usize>,
    /// SGD learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// L2 regularization λ.
    #[arg(long)]
    pub reg: Option<f64>,
    /// Trust-term weight λ_t for TrustSVD.
    #[arg(long)]
    pub reg_social: Option<f64>,
    /// L2 penalty scheme for SVD++/TrustSVD: uniform or frequency.
    #[arg(long)]
    pub reg_weighting: Option<String>,
    /// Cross-validation folds (default 5).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Top-level seed; overrides the config file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trust graph for TrustSVD (default: explicit with --trust, else none).
    #[arg(long, value_enum)]
    pub trust_source: Option<TrustSourceArg>,
    /// Target mean trust degree for Hellinger extraction (default 10).
    #[arg(long)]
    pub expected_degree: Option<f64>,
    /// cv: one row per model; compare: explicit vs Hellinger trust; sweep: vary the expected degree.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Expected degrees for sweep mode, comma-separated.
    #[arg(long)]
    pub sweep_grid: Option<String>,
    /// Output directory; overrides the config file's out.dir.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Maps an error chain to the documented exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return EXIT_INPUT;
    };
    match e.root() {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Empty(_)
        | Error::OutOfScale { .. }
        | Error::UnknownUser { .. }
        | Error::Config(_)
        | Error::Model(_) => EXIT_INPUT,
        Error::Degenerate(_) | Error::EmptyProfile(_) => EXIT_DEGENERATE,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", error_message(&e));
            exit_code(&e)
        }
    }
}

/// The error chain joined by ": ", skipping causes a parent already quotes.
fn error_message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let c = cause.to_string();
        if !msg.contains(&c) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&c);
        }
    }
    msg
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        anyhow::ensure!(j > 0, Error::Config("--jobs must be at least 1".into()));
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("building worker pool")?;
    pool.install(|| match cli.command {
        Command::Stats(a) => cmd_stats(&a),
        Command::Extract(a) => cmd_extract(&a),
        Command::Run(a) => cmd_run(&a),
    })
}

fn scale_arg(s: &str) -> anyhow::Result<RatingScale> {
    Ok(parse_scale(s)?)
}

pub fn cmd_stats(a: &StatsArgs) -> anyhow::Result<()> {
    let ds = load_ratings(&a.ratings, scale_arg(&a.scale)?)?;
    let stats = dataset_stats(&ds)?;
    let mut out = io::stdout().lock();
    write!(out, "{}", stats.key_values())?;
    if ds.duplicates() > 0 {
        writeln!(out, "duplicate_ratings={}", ds.duplicates())?;
    }
    if let Some(t) = &a.trust {
        let (list, warn) = load_trust(t, &ds)?;
        writeln!(out, "trust_edges={}", list.len())?;
        writeln!(out, "trust_density={:.6}", list.density())?;
        writeln!(out, "trust_symmetric={}", list.is_symmetric())?;
        if warn.total() > 0 {
            writeln!(
                out,
                "trust_dropped self_loops={} duplicates={} unknown_users={}",
                warn.self_loops, warn.duplicates, warn.unknown_users
            )?;
        }
    }
    Ok(())
}

pub fn cmd_extract(a: &ExtractArgs) -> anyhow::Result<()> {
    let ds = load_ratings(&a.ratings, scale_arg(&a.scale)?)?;
    let cfg = ExtractionConfig {
        expected_degree: a.expected_degree,
        sample_size: a.sample,
        seed: a.seed,
    };
    let x = crate::trust::extract_implicit_trust(&ds, &cfg)?;
    match &a.out {
        Some(path) => {
            let mut w = BufWriter::new(create(path)?);
            x.edges.write_to(ds.user_ids(), &mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            x.edges.write_to(ds.user_ids(), &mut w)?;
            w.flush()?;
        }
    }
    eprintln!("{}", x.diagnostics());
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<File> {
    File::create(path)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
        .map_err(Into::into)
}

/// Builds the experiment from flags (or the config file plus overrides)
/// and validates it; touches no files.
pub fn resolve_run_config(a: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let mut models = Vec::new();
            for name in &a.model {
                let kind: ModelKind = name.parse()?;
                let mut hp = default_hyper_params(kind);
                if let Some(v) = a.factors {
                    hp.factors = v;
                }
                if let Some(v) = a.iters {
                    hp.max_iter = v;
                }
                if let Some(v) = a.lr {
                    hp.learn_rate = v;
                }
                if let Some(v) = a.reg {
                    hp.reg = v;
                }
                if let Some(v) = a.reg_social {
                    hp.reg_social = v;
                }
                if let Some(v) = &a.reg_weighting {
                    hp.reg_weighting = Some(parse_weighting(v)?);
                }
                let spec = ModelSpec::new(kind).with_hp(hp).with_knn(KnnParams::default());
                spec.validate()?;
                models.push(spec);
            }
            ExperimentConfig {
                name: a.name.clone().unwrap_or_else(|| "dataset".into()),
                ratings: a.ratings.clone().expect("clap enforces --ratings"),
                trust: a.trust.clone(),
                scale: scale_arg(a.scale.as_deref().unwrap_or("1,5"))?,
                mode: match a.mode {
                    None | Some(ModeArg::Cv) => Mode::CrossValidate,
                    Some(ModeArg::Compare) => Mode::Compare,
                    Some(ModeArg::Sweep) => Mode::Sweep,
                },
                trust_source: match a.trust_source {
                    Some(TrustSourceArg::None) => TrustSourceKind::None,
                    Some(TrustSourceArg::Explicit) => TrustSourceKind::Explicit,
                    Some(TrustSourceArg::Hellinger) => TrustSourceKind::Hellinger,
                    None if a.trust.is_some() => TrustSourceKind::Explicit,
                    None => TrustSourceKind::None,
                },
                expected_degree: a.expected_degree.unwrap_or(crate::eval::DEFAULT_EXPECTED_DEGREE),
                sample_size: None,
                sweep_grid: match &a.sweep_grid {
                    Some(g) => parse_list(g)?,
                    None => crate::eval::DEFAULT_SWEEP_GRID.to_vec(),
                },
                folds: a.folds.unwrap_or(5),
                seed: 1,
                out_dir: PathBuf::from("results"),
                models,
            }
        }
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = &a.out_dir {
        cfg.out_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_run(a: &RunArgs) -> anyhow::Result<()> {
    let cfg = resolve_run_config(a)?;
    let ds = load_ratings(&cfg.ratings, cfg.scale)?;
    let explicit: Option<Arc<TrustEdgeList>> = match &cfg.trust {
        Some(p) => Some(Arc::new(load_trust(p, &ds)?.0)),
        None => None,
    };
    fs::create_dir_all(&cfg.out_dir).map_err(|source| Error::Io {
        path: cfg.out_dir.display().to_string(),
        source,
    })?;
    match cfg.mode {
        Mode::CrossValidate => {
            let source = match cfg.trust_source {
                TrustSourceKind::None => TrustSource::None,
                TrustSourceKind::Explicit => {
                    TrustSource::Explicit(explicit.clone().expect("validated: trust file present"))
                }
                TrustSourceKind::Hellinger => TrustSource::Hellinger {
                    expected_degree: cfg.expected_degree,
                    sample_size: cfg.sample_size,
                },
            };
            let mut reports = Vec::new();
            for spec in &cfg.models {
                let r = cross_validate(&ds, &cfg.name, spec, cfg.folds, cfg.seed, &source)
                    .with_context(|| format!("model {}", spec.name))?;
                println!("{r}");
                reports.push(r);
            }
            write_reports(&cfg.out_dir, &reports)?;
        }
        Mode::Compare => {
            let rows = compare_trust_sources(
                &ds,
                &cfg.name,
                explicit.expect("validated: trust file present"),
                cfg.expected_degree,
                &cfg.models,
                cfg.folds,
                cfg.seed,
            )?;
            let table = comparison_table(&rows);
            print!("{table}");
            write_file(&cfg.out_dir.join("comparison.csv"), |w| Ok(w.write_all(table.as_bytes())?))?;
            let reports: Vec<EvalReport> = rows
                .into_iter()
                .flat_map(|r| [r.explicit, r.implicit])
                .collect();
            write_reports(&cfg.out_dir, &reports)?;
        }
        Mode::Sweep => {
            let sweep = threshold_sweep(
                &ds,
                &cfg.name,
                &cfg.sweep_grid,
                &cfg.models[0],
                cfg.folds,
                cfg.seed,
            )?;
            for p in &sweep.points {
                match &p.error {
                    None => println!(
                        "E[deg]={} T={:.4} MAE={:.4} RMSE={:.4}",
                        p.expected_degree, p.threshold, p.mae_mean, p.rmse_mean
                    ),
                    Some(e) => println!("E[deg]={} failed: {e}", p.expected_degree),
                }
            }
            write_file(&cfg.out_dir.join("sweep.csv"), |w| Ok(write_sweep_csv(w, &sweep)?))?;
        }
    }
    Ok(())
}

fn write_reports(dir: &Path, reports: &[EvalReport]) -> anyhow::Result<()> {
    write_file(&dir.join("metrics.csv"), |w| Ok(write_metrics_csv(w, reports)?))?;
    write_file(&dir.join("aggregate.csv"), |w| Ok(write_aggregate_csv(w, reports)?))?;
    write_file(&dir.join("timing.csv"), |w| Ok(write_timing_csv(w, reports)?))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let mut w = BufWriter::new(create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}
