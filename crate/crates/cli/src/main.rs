mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmdd_core::extractors::TextMode;
use mmdd_core::fusion::{FusionScheme, Modality};

use crate::config::{ConfigError, RunConfig};

/// Exit status for each failure class.
pub mod exit {
    pub const OTHER: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERIC: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "mmdd", version, about = "Multimodal deception detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a planted signal.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        subjects: Option<usize>,
        /// Planted signal strength for every modality, in noise standard deviations.
        #[arg(long)]
        strength: Option<f64>,
    },
    /// Train on the training subjects of fold 0 and save the model.
    Train(CommonArgs),
    /// Score a saved model on the held-out subjects of fold 0.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Model file written by `train` (default: <out>/model.bin).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Subject-wise k-fold cross-validation.
    Crossval {
        #[command(flatten)]
        common: CommonArgs,
        /// Also run the same configuration on label-free data.
        #[arg(long)]
        random_control: bool,
    },
    /// Render result tables from saved reports.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = MetricArg::Both)]
        metric: MetricArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Auc,
    Accuracy,
    Both,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest; replaces the configured data source.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Seed for data generation, fold assignment and training [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: .].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Folds trained in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Number of folds [default: 10].
    #[arg(long)]
    k: Option<usize>,
    /// unimodal:<modality>, concat or hadamard_concat.
    #[arg(long)]
    fusion: Option<FusionScheme>,
    /// Shorthand for --fusion unimodal:<modality>.
    #[arg(long, conflicts_with = "fusion")]
    modality: Option<Modality>,
    /// static or non-static.
    #[arg(long)]
    text_mode: Option<TextMode>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

impl CommonArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            c.data.manifest = Some(d.clone());
            c.data.synthetic = None;
        }
        c.seed = self.seed.or(c.seed);
        c.out = self.out.clone().or(c.out);
        c.jobs = self.jobs.or(c.jobs);
        c.k = self.k.or(c.k);
        if let Some(m) = self.modality {
            c.model.fusion = Some(FusionScheme::Unimodal(m));
        }
        c.model.fusion = self.fusion.or(c.model.fusion);
        c.model.text_mode = self.text_mode.or(c.model.text_mode);
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        Ok(c)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth {
            common,
            samples,
            subjects,
            strength,
        } => {
            let mut c = common.resolve()?;
            let mut spec = c.data.synthetic.take().unwrap_or_default();
            spec.samples = samples.unwrap_or(spec.samples);
            spec.subjects = subjects.unwrap_or(spec.subjects);
            if let Some(s) = strength {
                spec.strength = mmdd_core::data::SignalStrength::uniform(s);
            }
            c.data.synthetic = Some(spec);
            commands::synth(&c)
        }
        Command::Train(common) => commands::train(&common.resolve()?),
        Command::Eval { common, model } => {
            let c = common.resolve()?;
            let model = model.unwrap_or_else(|| c.out().join(commands::MODEL_FILE));
            commands::eval(&c, &model)
        }
        Command::Crossval { common, random_control } => commands::crossval(&common.resolve()?, random_control),
        Command::Report { reports, metric } => commands::report(&reports, metric),
    }
}

/// Maps an error onto its exit status by the first classifiable cause.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return exit::CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<mmdd_core::Error>() {
            return if e.is_numeric_error() {
                exit::NUMERIC
            } else if e.is_data_error() {
                exit::DATA
            } else {
                exit::CONFIG
            };
        }
    }
    exit::OTHER
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
