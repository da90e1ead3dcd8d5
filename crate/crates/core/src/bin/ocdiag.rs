use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ocdiag::diagnosis::DiagnosisConfig;
use ocdiag::experiments::{
    diagnose_dataset, export_window_features, generate_dataset, generate_scenario, sweep_csv, sweep_trees,
    train_and_evaluate,
};
use ocdiag::forest::{evaluate, parse_model, write_model, RandomForestModel};
use ocdiag::io::{DatasetFile, ExperimentConfig};
use ocdiag::sim::FaultEvent;
use ocdiag::{Error, Result};

/// Open-circuit switch fault diagnosis toolkit.
#[derive(Parser)]
#[command(name = "ocdiag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset, or a single scenario series with --fault.
    Gen {
        /// Fault event `<seconds>:<label>`, e.g. `0.04:101000`. Repeatable.
        #[arg(long = "fault", value_name = "T:LABEL")]
        faults: Vec<String>,
        /// Scenario length in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Scenario phase angle at t = 0, degrees.
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
        #[command(flatten)]
        shared: Shared,
    },
    /// Train a forest on a dataset and report held-out accuracy.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        trees: Option<usize>,
        /// Training rows; the rest are held out.
        #[arg(long)]
        train_count: Option<usize>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Accuracy and confusion matrix of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
    /// Cross-validated accuracy against the number of trees.
    SweepTrees {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,8,64,264")]
        counts: Vec<usize>,
        #[arg(long)]
        folds: Option<usize>,
        /// Use every row instead of the training split.
        #[arg(long)]
        all_rows: bool,
        #[command(flatten)]
        shared: Shared,
    },
    /// Stream diagnosis of every series; exits 1 if protection fires.
    Diagnose {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Append report records to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Known phase angle at t = 0 instead of estimating it.
        #[arg(long)]
        phase: Option<f64>,
        /// Include the fused label of every window.
        #[arg(long)]
        history: bool,
        #[command(flatten)]
        shared: Shared,
    },
    /// Per-period window features of every series as CSV.
    Features {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
}

fn load_config(shared: &Shared) -> Result<ExperimentConfig> {
    let cfg = match &shared.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Ok(match shared.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_fault(s: &str) -> Result<FaultEvent> {
    let (t, label) =
        s.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("fault {s:?} is not <seconds>:<label>")))?;
    let time = t.parse().map_err(|_| Error::InvalidArgument(format!("invalid fault time {t:?}")))?;
    Ok(FaultEvent::new(time, label.parse()?))
}

fn load_model(path: &Path) -> Result<RandomForestModel> {
    parse_model(&std::fs::read_to_string(path)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { faults, duration, phase, shared } => {
            let cfg = load_config(&shared)?;
            let data = if faults.is_empty() && duration.is_none() {
                generate_dataset(&cfg)?
            } else {
                let mut timeline = faults.iter().map(|f| parse_fault(f)).collect::<Result<Vec<_>>>()?;
                timeline.sort_by(|a, b| a.time.total_cmp(&b.time));
                let duration = duration.unwrap_or(0.2);
                generate_scenario(&cfg, &timeline, duration, phase, "scenario")?
            };
            emit(shared.out.as_deref(), &data.write_string()?)?;
            eprintln!("wrote {} rows in {} series", data.row_count(), data.blocks.len());
        }
        Command::Train { data, trees, train_count, shared } => {
            let cfg = load_config(&shared)?;
            let mut params = cfg.forest.clone();
            if let Some(n) = trees {
                params.n_trees = n;
            }
            let dataset = DatasetFile::load(&data)?;
            let outcome = train_and_evaluate(&dataset, &params, train_count.unwrap_or(cfg.dataset.train_samples))?;
            emit(shared.out.as_deref(), &write_model(&outcome.model)?)?;
            eprintln!("trained {} trees on {} rows", outcome.model.n_trees(), outcome.train_rows);
            if let Some((acc, confusion)) = outcome.held_out {
                eprintln!("held-out accuracy: {acc:.4} ({} rows)", confusion.total());
                eprint!("{confusion}");
            }
        }
        Command::Eval { model, data, shared } => {
            let model = load_model(&model)?;
            let set = DatasetFile::load(&data)?.to_training_set();
            let (acc, confusion) = evaluate(&model, &set)?;
            emit(shared.out.as_deref(), &format!("accuracy {acc:.4}\n{confusion}"))?;
        }
        Command::SweepTrees { data, counts, folds, all_rows, shared } => {
            let cfg = load_config(&shared)?;
            let mut set = DatasetFile::load(&data)?.to_training_set();
            if !all_rows && cfg.dataset.train_samples < set.len() {
                set = ocdiag::experiments::split_train_test(&set, cfg.dataset.train_samples, cfg.forest.seed)?.0;
            }
            let points = sweep_trees(&set, &counts, &cfg.forest, folds.unwrap_or(cfg.folds()))?;
            emit(shared.out.as_deref(), &sweep_csv(&points))?;
        }
        Command::Diagnose { model, data, report, phase, history, shared } => {
            let cfg = load_config(&shared)?;
            let diag = DiagnosisConfig { phase_deg: phase.or(cfg.diagnosis.phase_deg), ..cfg.diagnosis };
            let model = load_model(&model)?;
            let dataset = DatasetFile::load(&data)?;
            let reports = diagnose_dataset(&model, &dataset, &diag)?;

            let mut text = String::new();
            for (id, r) in &reports {
                let id = (!id.is_empty()).then_some(id.as_str());
                text.push_str(&r.to_record(id, history).to_string());
                text.push('\n');
            }
            emit(shared.out.as_deref(), &text)?;
            if let Some(path) = report {
                OpenOptions::new().create(true).append(true).open(path)?.write_all(text.as_bytes())?;
            }
            if reports.iter().any(|(_, r)| r.protection_signal) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Features { data, shared } => {
            let cfg = load_config(&shared)?;
            let dataset = DatasetFile::load(&data)?;
            let (csv, skipped) = export_window_features(&dataset, &cfg.features)?;
            emit(shared.out.as_deref(), &csv)?;
            if skipped > 0 {
                eprintln!("skipped {skipped} windows with undefined ratio indices");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
