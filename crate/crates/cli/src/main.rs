use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fractvox::dataset::{parse_manifest, read_features, write_features};
use fractvox::eval::{parse_grid_csv, render_summary, synth_corpus};
use fractvox::pipeline::{PipelineConfig, PipelineError, et_params_kv, experiment, extract};

#[derive(Parser)]
#[command(name = "fractvox", version, about = "Speech biomarkers and one-class vs multi-class evaluation")]
struct Cli {
    /// Worker threads (defaults to all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract one feature row per recording listed in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Feature CSV to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = ["160", "320", "1280"])]
        window: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validate the experiment grid and save one model per cell.
    Experiment {
        #[arg(long)]
        features: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = ["ssf_ef", "ssf_ef_et", "ssf_ef_et_vhfd"])]
        featureset: Option<String>,
        #[arg(long, value_parser = ["multiclass_mlp", "oneclass_mlp", "oneclass_bagging"])]
        scheme: Option<String>,
        #[arg(long)]
        with_outliers: Option<bool>,
        #[arg(long)]
        folds: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a Gaussian CR/AD corpus in the feature CSV format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        n_target: usize,
        #[arg(long, default_value_t = 5)]
        n_outlier: usize,
        #[arg(long, default_value_t = 10)]
        dims: usize,
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a grid CSV as a table.
    Report {
        #[arg(long)]
        grid: PathBuf,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_usage() { Failure::Usage(e.to_string()) } else { Failure::Runtime(e.to_string()) }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load_config(common: &Common) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn set(cfg: &mut PipelineConfig, key: &str, value: Option<String>) -> Result<(), Failure> {
    if let Some(v) = value {
        cfg.set(key, &v)?;
    }
    Ok(())
}

fn run_extract(manifest: &Path, out: &Path, window: Option<String>, common: &Common) -> Result<(), Failure> {
    let mut cfg = load_config(common)?;
    set(&mut cfg, "window_points", window)?;
    cfg.validate()?;
    let entries = parse_manifest(manifest).map_err(runtime)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    eprintln!("extracting {} recordings (window {} points)", entries.len(), cfg.window.points());
    let outcome = extract(&entries, base, &cfg)?;
    write_features(out, &outcome.table).map_err(runtime)?;
    let et_path = out.with_extension("et.txt");
    std::fs::write(&et_path, et_params_kv(&outcome.et_params)).map_err(|e| runtime(format!("{}: {e}", et_path.display())))?;
    eprintln!("wrote {} rows to {}", outcome.table.len(), out.display());
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for (path, msg) in &outcome.failures {
        eprintln!("failed: {}: {msg}", path.display());
    }
    Err(Failure::Runtime(format!("{} of {} recordings failed", outcome.failures.len(), entries.len())))
}

#[allow(clippy::too_many_arguments)]
fn run_experiment(
    features: &Path,
    out: &Path,
    featureset: Option<String>,
    scheme: Option<String>,
    with_outliers: Option<bool>,
    folds: Option<usize>,
    common: &Common,
) -> Result<(), Failure> {
    let mut cfg = load_config(common)?;
    set(&mut cfg, "feature_set", featureset)?;
    set(&mut cfg, "scheme", scheme)?;
    set(&mut cfg, "with_outliers", with_outliers.map(|b| b.to_string()))?;
    set(&mut cfg, "folds", folds.map(|k| k.to_string()))?;
    cfg.out_dir = Some(out.to_path_buf());
    cfg.validate()?;
    let table = read_features(features).map_err(runtime)?;
    eprintln!("{} instances, {} cells, {} folds", table.len(), cfg.cells().len(), cfg.folds);
    let outcome = experiment(&table, &cfg, out)?;
    eprintln!("wrote {} grid rows to {}", outcome.reports.len(), out.join("grid.csv").display());
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for (cell, msg) in &outcome.failures {
        eprintln!("cell {} failed: {msg}", cell.slug());
    }
    Err(Failure::Runtime(format!("{} cells failed", outcome.failures.len())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Extract { manifest, out, window, common } => run_extract(&manifest, &out, window, &common),
        Command::Experiment { features, out, featureset, scheme, with_outliers, folds, common } => {
            run_experiment(&features, &out, featureset, scheme, with_outliers, folds, &common)
        }
        Command::Synth { out, n_target, n_outlier, dims, separation, seed } => {
            if dims == 0 || n_target + n_outlier == 0 {
                return Err(Failure::Usage("need dims >= 1 and at least one instance".into()));
            }
            write_features(&out, &synth_corpus(n_target, n_outlier, dims, separation, seed)).map_err(runtime)?;
            eprintln!("wrote {} rows to {}", n_target + n_outlier, out.display());
            Ok(())
        }
        Command::Report { grid, out } => {
            let text = std::fs::read_to_string(&grid).map_err(|e| runtime(format!("{}: {e}", grid.display())))?;
            let summary = render_summary(&parse_grid_csv(&text).map_err(runtime)?);
            match out {
                Some(path) => std::fs::write(&path, summary).map_err(|e| runtime(format!("{}: {e}", path.display()))),
                None => {
                    print!("{summary}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
