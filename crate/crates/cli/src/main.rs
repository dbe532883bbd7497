mod commands;
mod config;
mod error;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CommandDefaults, ConfigLayer, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "moce",
    version,
    about = "Mixture-of-Cox-experts survival modeling",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and score it on the held-out test split
    Train(TrainArgs),
    /// Average ELBO vs RT learning curves over many restarts
    CompareObjectives(CompareArgs),
    /// Compare analytic gradients with central finite differences
    Gradcheck(GradcheckArgs),
    /// Check bound, degeneracy, and sharp-gating properties on random instances
    Props(PropsArgs),
    /// Generate a synthetic dataset with known ground truth
    GenData(GenDataArgs),
    /// Score a saved model on a dataset
    Eval(EvalArgs),
}

#[derive(Args)]
struct SharedArgs {
    /// Configuration file with key = value lines
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Hyperparameter preset (metabric|gbsg|support)-(hard|soft)
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Master seed; splits, initialization, jitter, and resampling derive from it
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for all artifacts
    #[arg(long, value_name = "DIR", default_value = "moce-out")]
    out: PathBuf,
    /// Worker threads (0 = one per core)
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV column holding event/censoring times
    #[arg(long, value_name = "NAME")]
    time_col: Option<String>,
    /// CSV column holding the event indicator (1 observed, 0 censored)
    #[arg(long, value_name = "NAME")]
    event_col: Option<String>,
    /// Break tied event times with uniform jitter of this relative size
    #[arg(long, value_name = "EPS")]
    jitter: Option<f64>,
    /// Skip feature standardization
    #[arg(long)]
    no_standardize: bool,
    /// Skip the validation split and best-epoch selection
    #[arg(long)]
    no_validation: bool,
    /// Concordance tie handling: strict or half
    #[arg(long, value_name = "POLICY")]
    tie_policy: Option<String>,
    /// Bootstrap resamples for confidence bands
    #[arg(long, value_name = "B")]
    bootstrap: Option<usize>,
}

/// Applies a string-valued flag through the config parser so flag and file
/// values share one syntax and one error message.
fn set_key(layer: &mut ConfigLayer, key: &str, value: &str) -> Result<(), CliError> {
    layer
        .set(key, value)
        .map_err(|msg| CliError::Config(format!("--{}: {}", key.replace('_', "-"), msg)))
}

impl SharedArgs {
    fn layer(&self) -> Result<ConfigLayer, CliError> {
        let mut layer = ConfigLayer {
            seed: self.seed,
            jobs: self.jobs,
            time_col: self.time_col.clone(),
            event_col: self.event_col.clone(),
            jitter: self.jitter,
            bootstrap: self.bootstrap,
            ..ConfigLayer::default()
        };
        if self.no_standardize {
            layer.standardize = Some(false);
        }
        if self.no_validation {
            layer.validation = Some(false);
        }
        if let Some(policy) = &self.tie_policy {
            set_key(&mut layer, "tie_policy", policy)?;
        }
        Ok(layer)
    }

    fn resolve(&self, overlay: ConfigLayer, defaults: CommandDefaults) -> Result<RunConfig, CliError> {
        let mut flags = self.layer()?;
        flags.apply(overlay);
        RunConfig::resolve(
            self.preset.as_deref(),
            self.config.as_deref(),
            flags,
            defaults,
        )
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Training CSV (omit when using --synthetic)
    #[arg(long, value_name = "CSV")]
    data: Option<PathBuf>,
    /// Comma-separated feature column subset (default: all non-time/event columns)
    #[arg(long, value_name = "NAMES")]
    feature_cols: Option<String>,
    /// Draw a synthetic dataset instead of reading a CSV
    #[arg(long)]
    synthetic: bool,
    /// Synthetic subject count
    #[arg(long, value_name = "N")]
    synthetic_n: Option<usize>,
    /// Synthetic feature dimension
    #[arg(long, value_name = "D")]
    synthetic_features: Option<usize>,
    /// Synthetic ground-truth expert count
    #[arg(long, value_name = "K")]
    synthetic_experts: Option<usize>,
    /// Synthetic censoring fraction in [0, 1)
    #[arg(long, value_name = "FRAC")]
    synthetic_censoring: Option<f64>,
    /// Synthetic gating sharpness (scales the true gating weights)
    #[arg(long, value_name = "SCALE")]
    synthetic_separation: Option<f64>,
    /// Number of experts K
    #[arg(long, value_name = "K")]
    experts: Option<usize>,
    /// Gating hidden widths, comma separated; empty means linear gating
    #[arg(long, value_name = "W,W,...")]
    hidden: Option<String>,
    /// Gating activation: relu, selu, or sigmoid
    #[arg(long, value_name = "NAME")]
    activation: Option<String>,
    /// Standard deviation of the random initialization
    #[arg(long, value_name = "S")]
    init_scale: Option<f64>,
    /// Training objective: elbo or rt
    #[arg(long, value_name = "NAME")]
    objective: Option<String>,
    /// Optimizer: adam or rmsprop
    #[arg(long, value_name = "NAME")]
    optimizer: Option<String>,
    /// Optimizer step size
    #[arg(long, value_name = "LR")]
    learning_rate: Option<f64>,
    /// Full-batch training epochs
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// L2 penalty on expert coefficients
    #[arg(long, value_name = "W")]
    l2: Option<f64>,
    /// Epochs without validation improvement before stopping early
    #[arg(long, value_name = "N")]
    patience: Option<usize>,
    /// Training fraction of the data
    #[arg(long, value_name = "FRAC")]
    split_train: Option<f64>,
    /// Validation fraction of the data (test receives the rest)
    #[arg(long, value_name = "FRAC")]
    split_val: Option<f64>,
}

impl TrainArgs {
    fn layer(&self) -> Result<ConfigLayer, CliError> {
        let mut layer = ConfigLayer {
            data_csv: self.data.clone(),
            synthetic_n: self.synthetic_n,
            synthetic_features: self.synthetic_features,
            synthetic_experts: self.synthetic_experts,
            synthetic_censoring: self.synthetic_censoring,
            synthetic_separation: self.synthetic_separation,
            experts: self.experts,
            init_scale: self.init_scale,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2: self.l2,
            patience: self.patience,
            split_train: self.split_train,
            split_val: self.split_val,
            ..ConfigLayer::default()
        };
        if self.synthetic {
            layer.synthetic = Some(true);
        }
        if let Some(v) = &self.feature_cols {
            set_key(&mut layer, "feature_cols", v)?;
        }
        if let Some(v) = &self.hidden {
            set_key(&mut layer, "hidden", v)?;
        }
        if let Some(v) = &self.activation {
            set_key(&mut layer, "activation", v)?;
        }
        if let Some(v) = &self.objective {
            set_key(&mut layer, "objective", v)?;
        }
        if let Some(v) = &self.optimizer {
            set_key(&mut layer, "optimizer", v)?;
        }
        Ok(layer)
    }
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Random restarts per objective
    #[arg(long, value_name = "N")]
    restarts: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Number of experts K in the probe model
    #[arg(long, value_name = "K")]
    experts: Option<usize>,
    /// Gating hidden widths of the probe model
    #[arg(long, value_name = "W,W,...")]
    hidden: Option<String>,
    /// Gating activation of the probe model
    #[arg(long, value_name = "NAME")]
    activation: Option<String>,
    /// Feature dimension of the probe instances
    #[arg(long, value_name = "D")]
    features: Option<usize>,
    /// L2 penalty included in the checked objective
    #[arg(long, value_name = "W")]
    l2: Option<f64>,
    /// Corrupt one analytic gradient entry (negative control; must fail)
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

#[derive(Args)]
struct PropsArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Number of random instances
    #[arg(long, default_value_t = 1000, value_name = "N")]
    trials: usize,
    /// Restrict every instance to a single expert
    #[arg(long)]
    fix_k1: bool,
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Number of subjects
    #[arg(long, value_name = "N")]
    n: Option<usize>,
    /// Feature dimension
    #[arg(long, value_name = "D")]
    features: Option<usize>,
    /// Ground-truth expert count
    #[arg(long, value_name = "K")]
    true_experts: Option<usize>,
    /// Censoring fraction in [0, 1)
    #[arg(long, value_name = "FRAC")]
    censoring: Option<f64>,
    /// Gating sharpness (scales the true gating weights)
    #[arg(long, value_name = "SCALE")]
    separation: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Saved model file
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Dataset to score
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// Comma-separated feature column subset
    #[arg(long, value_name = "NAMES")]
    feature_cols: Option<String>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::CheckFailed(message)) => {
            eprintln!("{message}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.shared.resolve(args.layer()?, CommandDefaults::TRAIN)?;
            commands::train::run(&cfg, &args.shared.out)
        }
        Command::CompareObjectives(args) => {
            let mut layer = args.train.layer()?;
            layer.restarts = args.restarts;
            let cfg = args
                .train
                .shared
                .resolve(layer, CommandDefaults::COMPARE)?;
            commands::compare::run(&cfg, &args.train.shared.out)
        }
        Command::Gradcheck(args) => {
            let mut layer = ConfigLayer {
                experts: args.experts,
                synthetic_features: args.features,
                l2: args.l2,
                ..ConfigLayer::default()
            };
            if let Some(v) = &args.hidden {
                set_key(&mut layer, "hidden", v)?;
            }
            if let Some(v) = &args.activation {
                set_key(&mut layer, "activation", v)?;
            }
            let cfg = args.shared.resolve(layer, CommandDefaults::TRAIN)?;
            commands::gradcheck::run(&cfg, args.corrupt_gradient, &args.shared.out)
        }
        Command::Props(args) => {
            let cfg = args
                .shared
                .resolve(ConfigLayer::default(), CommandDefaults::TRAIN)?;
            let opts = commands::props::PropsOptions {
                trials: args.trials,
                fix_k1: args.fix_k1,
            };
            commands::props::run(&cfg, &opts, &args.shared.out)
        }
        Command::GenData(args) => {
            let layer = ConfigLayer {
                synthetic: Some(true),
                synthetic_n: args.n,
                synthetic_features: args.features,
                synthetic_experts: args.true_experts,
                synthetic_censoring: args.censoring,
                synthetic_separation: args.separation,
                ..ConfigLayer::default()
            };
            let cfg = args.shared.resolve(layer, CommandDefaults::TRAIN)?;
            commands::gen_data::run(&cfg, &args.shared.out)
        }
        Command::Eval(args) => {
            let mut layer = ConfigLayer {
                data_csv: Some(args.data.clone()),
                ..ConfigLayer::default()
            };
            if let Some(v) = &args.feature_cols {
                set_key(&mut layer, "feature_cols", v)?;
            }
            let cfg = args.shared.resolve(layer, CommandDefaults::TRAIN)?;
            commands::eval::run(&cfg, &args.model, &args.shared.out)
        }
    }
}
