//! Run configuration: layered key = value settings with presets.
//!
//! Precedence, lowest to highest: built-in defaults, `--preset`, `--config`
//! file, command-line flags. The resolved result is written verbatim into
//! every output directory so a run can be reproduced from its artifacts alone.

use std::io::Write;
use std::path::{Path, PathBuf};

use moce_core::{
    Activation, GatingKind, ModelSpec, ObjectiveKind, OptimizerKind, TiePolicy, TrainConfig,
};

use crate::error::CliError;

/// One partially specified configuration; `None` means "not set here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayer {
    pub data_csv: Option<PathBuf>,
    pub time_col: Option<String>,
    pub event_col: Option<String>,
    pub feature_cols: Option<Vec<String>>,
    pub jitter: Option<f64>,
    pub standardize: Option<bool>,
    pub split_train: Option<f64>,
    pub split_val: Option<f64>,
    pub validation: Option<bool>,
    pub synthetic: Option<bool>,
    pub synthetic_n: Option<usize>,
    pub synthetic_features: Option<usize>,
    pub synthetic_experts: Option<usize>,
    pub synthetic_censoring: Option<f64>,
    pub synthetic_separation: Option<f64>,
    pub experts: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub activation: Option<Activation>,
    pub init_scale: Option<f64>,
    pub objective: Option<ObjectiveKind>,
    pub optimizer: Option<OptimizerKind>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub l2: Option<f64>,
    pub patience: Option<usize>,
    pub seed: Option<u64>,
    pub tie_policy: Option<TiePolicy>,
    pub bootstrap: Option<usize>,
    pub restarts: Option<usize>,
    pub jobs: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $over:ident; $($field:ident),+ $(,)?) => {
        $(if $over.$field.is_some() { $base.$field = $over.$field; })+
    };
}

impl ConfigLayer {
    /// Overwrites fields of `self` with any that are set in `over`.
    pub fn apply(&mut self, over: ConfigLayer) {
        overlay!(self, over;
            data_csv, time_col, event_col, feature_cols, jitter, standardize,
            split_train, split_val, validation,
            synthetic, synthetic_n, synthetic_features, synthetic_experts,
            synthetic_censoring, synthetic_separation,
            experts, hidden, activation, init_scale,
            objective, optimizer, learning_rate, epochs, l2, patience, seed,
            tie_policy, bootstrap, restarts, jobs,
        );
    }

    pub fn from_file(path: &Path) -> Result<ConfigLayer, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses `key = value` lines; `#` starts a comment line, blank lines are
    /// skipped, unknown keys are rejected.
    pub fn parse(text: &str, origin: &str) -> Result<ConfigLayer, CliError> {
        let mut layer = ConfigLayer::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin}:{}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            layer
                .set(key, value)
                .map_err(|msg| CliError::Config(format!("{origin}:{}: {}", lineno + 1, msg)))?;
        }
        Ok(layer)
    }

    pub(crate) fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse()
                .map_err(|_| format!("invalid value '{}' for {}", v, key))
        }
        fn flag(key: &str, v: &str) -> Result<bool, String> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(format!("invalid value '{}' for {} (true/false)", v, key)),
            }
        }
        fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, String> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| format!("invalid entry '{}' in {}", p.trim(), key))
                })
                .collect()
        }
        match key {
            "data_csv" => {
                self.data_csv = if value.is_empty() {
                    Some(PathBuf::new())
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "time_col" => self.time_col = Some(value.to_string()),
            "event_col" => self.event_col = Some(value.to_string()),
            "feature_cols" => {
                self.feature_cols = Some(if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|s| s.trim().to_string()).collect()
                })
            }
            "jitter" => self.jitter = Some(num(key, value)?),
            "standardize" => self.standardize = Some(flag(key, value)?),
            "split_train" => self.split_train = Some(num(key, value)?),
            "split_val" => self.split_val = Some(num(key, value)?),
            "validation" => self.validation = Some(flag(key, value)?),
            "synthetic" => self.synthetic = Some(flag(key, value)?),
            "synthetic_n" => self.synthetic_n = Some(num(key, value)?),
            "synthetic_features" => self.synthetic_features = Some(num(key, value)?),
            "synthetic_experts" => self.synthetic_experts = Some(num(key, value)?),
            "synthetic_censoring" => self.synthetic_censoring = Some(num(key, value)?),
            "synthetic_separation" => self.synthetic_separation = Some(num(key, value)?),
            "experts" => self.experts = Some(num(key, value)?),
            "hidden" => self.hidden = Some(list(key, value)?),
            "activation" => {
                self.activation =
                    Some(value.parse::<Activation>().map_err(|e| e.to_string())?)
            }
            "init_scale" => self.init_scale = Some(num(key, value)?),
            "objective" => {
                self.objective =
                    Some(value.parse::<ObjectiveKind>().map_err(|e| e.to_string())?)
            }
            "optimizer" => {
                self.optimizer =
                    Some(value.parse::<OptimizerKind>().map_err(|e| e.to_string())?)
            }
            "learning_rate" => self.learning_rate = Some(num(key, value)?),
            "epochs" => self.epochs = Some(num(key, value)?),
            "l2" => self.l2 = Some(num(key, value)?),
            "patience" => self.patience = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "tie_policy" => {
                self.tie_policy =
                    Some(value.parse::<TiePolicy>().map_err(|e| e.to_string())?)
            }
            "bootstrap" => self.bootstrap = Some(num(key, value)?),
            "restarts" => self.restarts = Some(num(key, value)?),
            "jobs" => self.jobs = Some(num(key, value)?),
            _ => return Err(format!("unknown configuration key '{}'", key)),
        }
        Ok(())
    }
}

/// Hyperparameter presets mirroring the published per-dataset settings for
/// the hard- and soft-gating variants.
pub fn preset(name: &str) -> Result<ConfigLayer, CliError> {
    let mut layer = ConfigLayer {
        optimizer: Some(OptimizerKind::Adam),
        objective: Some(ObjectiveKind::Elbo),
        learning_rate: Some(0.001),
        epochs: Some(4000),
        ..ConfigLayer::default()
    };
    match name {
        "metabric-hard" => {
            layer.experts = Some(10);
            layer.hidden = Some(vec![9]);
        }
        "gbsg-hard" => {
            layer.experts = Some(12);
            layer.hidden = Some(Vec::new());
        }
        "support-hard" => {
            layer.experts = Some(10);
            layer.hidden = Some(vec![14, 14]);
        }
        "metabric-soft" => {
            layer.experts = Some(12);
            layer.hidden = Some(vec![9, 9]);
            layer.learning_rate = Some(0.0001);
        }
        "gbsg-soft" => {
            layer.experts = Some(5);
            layer.hidden = Some(vec![7]);
        }
        "support-soft" => {
            layer.experts = Some(5);
            layer.hidden = Some(vec![14]);
        }
        _ => {
            return Err(CliError::Config(format!(
                "unknown preset '{}' (expected one of {})",
                name,
                PRESET_NAMES.join(", ")
            )))
        }
    }
    Ok(layer)
}

pub const PRESET_NAMES: [&str; 6] = [
    "metabric-hard",
    "gbsg-hard",
    "support-hard",
    "metabric-soft",
    "gbsg-soft",
    "support-soft",
];

/// Fully resolved configuration; every field is concrete.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_csv: Option<PathBuf>,
    pub time_col: String,
    pub event_col: String,
    pub feature_cols: Vec<String>,
    pub jitter: f64,
    pub standardize: bool,
    pub split_train: f64,
    pub split_val: f64,
    pub validation: bool,
    pub synthetic: bool,
    pub synthetic_n: usize,
    pub synthetic_features: usize,
    pub synthetic_experts: usize,
    pub synthetic_censoring: f64,
    pub synthetic_separation: f64,
    pub experts: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub init_scale: f64,
    pub objective: ObjectiveKind,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub patience: usize,
    pub seed: u64,
    pub tie_policy: TiePolicy,
    pub bootstrap: usize,
    pub restarts: usize,
    pub jobs: usize,
}

/// Defaults that differ between subcommands.
#[derive(Debug, Clone, Copy)]
pub struct CommandDefaults {
    pub epochs: usize,
    /// Whether a validation split is carved out when the config doesn't say.
    pub validation: bool,
}

impl CommandDefaults {
    pub const TRAIN: CommandDefaults = CommandDefaults {
        epochs: 1000,
        validation: true,
    };
    /// Mirrors the published comparison protocol: 2000 epochs, and the full
    /// non-test portion goes to training since the curves track train/test.
    pub const COMPARE: CommandDefaults = CommandDefaults {
        epochs: 2000,
        validation: false,
    };
}

impl RunConfig {
    /// Applies precedence and fills every unset field with its default.
    pub fn resolve(
        preset_name: Option<&str>,
        config_file: Option<&Path>,
        flags: ConfigLayer,
        defaults: CommandDefaults,
    ) -> Result<RunConfig, CliError> {
        let mut layer = ConfigLayer::default();
        if let Some(name) = preset_name {
            layer.apply(preset(name)?);
        }
        if let Some(path) = config_file {
            layer.apply(ConfigLayer::from_file(path)?);
        }
        layer.apply(flags);

        let validation = layer.validation.unwrap_or(defaults.validation);
        let epochs = layer.epochs.unwrap_or(defaults.epochs);
        let cfg = RunConfig {
            data_csv: layer.data_csv.filter(|p| !p.as_os_str().is_empty()),
            time_col: layer.time_col.unwrap_or_else(|| "time".to_string()),
            event_col: layer.event_col.unwrap_or_else(|| "event".to_string()),
            feature_cols: layer.feature_cols.unwrap_or_default(),
            jitter: layer.jitter.unwrap_or(0.0),
            standardize: layer.standardize.unwrap_or(true),
            split_train: layer.split_train.unwrap_or(0.7),
            split_val: if validation {
                layer.split_val.unwrap_or(0.1)
            } else {
                0.0
            },
            validation,
            synthetic: layer.synthetic.unwrap_or(false),
            synthetic_n: layer.synthetic_n.unwrap_or(2000),
            synthetic_features: layer.synthetic_features.unwrap_or(5),
            synthetic_experts: layer.synthetic_experts.unwrap_or(2),
            synthetic_censoring: layer.synthetic_censoring.unwrap_or(0.2),
            synthetic_separation: layer.synthetic_separation.unwrap_or(4.0),
            experts: layer.experts.unwrap_or(2),
            hidden: layer.hidden.unwrap_or_default(),
            activation: layer.activation.unwrap_or(Activation::Relu),
            init_scale: layer.init_scale.unwrap_or(0.1),
            objective: layer.objective.unwrap_or(ObjectiveKind::Elbo),
            optimizer: layer.optimizer.unwrap_or(OptimizerKind::Adam),
            learning_rate: layer.learning_rate.unwrap_or(0.001),
            epochs,
            l2: layer.l2.unwrap_or(0.0),
            patience: layer.patience.unwrap_or(epochs),
            seed: layer.seed.unwrap_or(0),
            tie_policy: layer.tie_policy.unwrap_or(TiePolicy::Strict),
            bootstrap: layer.bootstrap.unwrap_or(250),
            restarts: layer.restarts.unwrap_or(100),
            jobs: layer.jobs.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let err = |msg: String| Err(CliError::Config(msg));
        if !(self.split_train > 0.0 && self.split_train < 1.0) {
            return err(format!("split_train = {} outside (0, 1)", self.split_train));
        }
        if !(self.split_val >= 0.0 && self.split_val < 1.0) {
            return err(format!("split_val = {} outside [0, 1)", self.split_val));
        }
        if self.split_train + self.split_val >= 1.0 {
            return err(format!(
                "split_train + split_val = {} leaves no test data",
                self.split_train + self.split_val
            ));
        }
        if self.validation && self.split_val == 0.0 {
            return err("split_val = 0 requires validation = false".to_string());
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return err(format!("jitter = {} must be a finite nonnegative value", self.jitter));
        }
        if self.experts == 0 {
            return err("experts must be at least 1".to_string());
        }
        if self.epochs == 0 {
            return err("epochs must be at least 1".to_string());
        }
        if self.restarts == 0 {
            return err("restarts must be at least 1".to_string());
        }
        if self.bootstrap < 2 {
            return err("bootstrap must be at least 2".to_string());
        }
        if self.synthetic_n < 2 {
            return err("synthetic_n must be at least 2".to_string());
        }
        if self.synthetic_features == 0 || self.synthetic_experts == 0 {
            return err("synthetic_features and synthetic_experts must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.synthetic_censoring) {
            return err(format!(
                "synthetic_censoring = {} outside [0, 1)",
                self.synthetic_censoring
            ));
        }
        if !(self.synthetic_separation.is_finite() && self.synthetic_separation >= 0.0) {
            return err("synthetic_separation must be finite and nonnegative".to_string());
        }
        Ok(())
    }

    pub fn gating_kind(&self) -> GatingKind {
        if self.hidden.is_empty() {
            GatingKind::Linear
        } else {
            GatingKind::Mlp {
                hidden: self.hidden.clone(),
                activation: self.activation,
            }
        }
    }

    pub fn model_spec(&self, n_features: usize) -> ModelSpec {
        ModelSpec {
            n_features,
            n_experts: self.experts,
            gating: self.gating_kind(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            objective: self.objective,
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2_experts: self.l2,
            seed: self.seed,
            patience: self.patience,
            init_scale: self.init_scale,
        }
    }

    /// Serializes every field; the output parses back to an identical config.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        fn join<T: std::fmt::Display>(xs: &[T]) -> String {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        writeln!(w, "# resolved moce configuration")?;
        writeln!(w)?;
        writeln!(w, "# data")?;
        writeln!(
            w,
            "data_csv = {}",
            self.data_csv
                .as_deref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        )?;
        writeln!(w, "time_col = {}", self.time_col)?;
        writeln!(w, "event_col = {}", self.event_col)?;
        writeln!(w, "feature_cols = {}", self.feature_cols.join(","))?;
        writeln!(w, "jitter = {}", self.jitter)?;
        writeln!(w, "standardize = {}", self.standardize)?;
        writeln!(w, "split_train = {}", self.split_train)?;
        writeln!(w, "split_val = {}", self.split_val)?;
        writeln!(w, "validation = {}", self.validation)?;
        writeln!(w)?;
        writeln!(w, "# synthetic data source")?;
        writeln!(w, "synthetic = {}", self.synthetic)?;
        writeln!(w, "synthetic_n = {}", self.synthetic_n)?;
        writeln!(w, "synthetic_features = {}", self.synthetic_features)?;
        writeln!(w, "synthetic_experts = {}", self.synthetic_experts)?;
        writeln!(w, "synthetic_censoring = {}", self.synthetic_censoring)?;
        writeln!(w, "synthetic_separation = {}", self.synthetic_separation)?;
        writeln!(w)?;
        writeln!(w, "# model")?;
        writeln!(w, "experts = {}", self.experts)?;
        writeln!(w, "hidden = {}", join(&self.hidden))?;
        writeln!(w, "activation = {}", self.activation.name())?;
        writeln!(w, "init_scale = {}", self.init_scale)?;
        writeln!(w)?;
        writeln!(w, "# training")?;
        writeln!(w, "objective = {}", self.objective.name())?;
        writeln!(w, "optimizer = {}", self.optimizer.name())?;
        writeln!(w, "learning_rate = {}", self.learning_rate)?;
        writeln!(w, "epochs = {}", self.epochs)?;
        writeln!(w, "l2 = {}", self.l2)?;
        writeln!(w, "patience = {}", self.patience)?;
        writeln!(w, "seed = {}", self.seed)?;
        writeln!(w)?;
        writeln!(w, "# evaluation")?;
        writeln!(w, "tie_policy = {}", self.tie_policy.name())?;
        writeln!(w, "bootstrap = {}", self.bootstrap)?;
        writeln!(w)?;
        writeln!(w, "# run")?;
        writeln!(w, "restarts = {}", self.restarts)?;
        writeln!(w, "jobs = {}", self.jobs)?;
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(dir.join("config.txt"), buf)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_flags(flags: ConfigLayer) -> RunConfig {
        RunConfig::resolve(None, None, flags, CommandDefaults::TRAIN).unwrap()
    }

    #[test]
    fn defaults_fill_everything() {
        let cfg = resolve_flags(ConfigLayer::default());
        assert_eq!(cfg.time_col, "time");
        assert_eq!(cfg.epochs, 1000);
        assert_eq!(cfg.patience, 1000);
        assert_eq!(cfg.bootstrap, 250);
        assert_eq!(cfg.split_val, 0.1);
        assert!(cfg.data_csv.is_none());
    }

    #[test]
    fn compare_defaults_use_longer_epochs() {
        let cfg =
            RunConfig::resolve(None, None, ConfigLayer::default(), CommandDefaults::COMPARE)
                .unwrap();
        assert_eq!(cfg.epochs, 2000);
        assert_eq!(cfg.restarts, 100);
        assert!(!cfg.validation);
        assert_eq!(cfg.split_val, 0.0);
    }

    #[test]
    fn preset_then_flags_precedence() {
        let flags = ConfigLayer {
            learning_rate: Some(0.5),
            ..ConfigLayer::default()
        };
        let cfg =
            RunConfig::resolve(Some("metabric-soft"), None, flags, CommandDefaults::TRAIN)
                .unwrap();
        assert_eq!(cfg.experts, 12);
        assert_eq!(cfg.hidden, vec![9, 9]);
        assert_eq!(cfg.epochs, 4000);
        assert_eq!(cfg.learning_rate, 0.5); // flag beats preset's 0.0001
    }

    #[test]
    fn config_file_sits_between_preset_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "experts = 3\nlearning_rate = 0.25\n# comment\n").unwrap();
        let flags = ConfigLayer {
            learning_rate: Some(0.125),
            ..ConfigLayer::default()
        };
        let cfg = RunConfig::resolve(
            Some("gbsg-hard"),
            Some(&path),
            flags,
            CommandDefaults::TRAIN,
        )
        .unwrap();
        assert_eq!(cfg.experts, 3); // file beats preset's 12
        assert_eq!(cfg.learning_rate, 0.125); // flag beats file
        assert_eq!(cfg.epochs, 4000); // preset survives where nothing overrides
    }

    #[test]
    fn every_preset_resolves() {
        for name in PRESET_NAMES {
            let cfg =
                RunConfig::resolve(Some(name), None, ConfigLayer::default(), CommandDefaults::TRAIN)
                    .unwrap();
            assert_eq!(cfg.epochs, 4000, "{name}");
            assert_eq!(cfg.optimizer, OptimizerKind::Adam, "{name}");
        }
        assert!(preset("gbsg").is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let flags = ConfigLayer {
            data_csv: Some(PathBuf::from("data/x.csv")),
            hidden: Some(vec![4, 2]),
            feature_cols: Some(vec!["a".into(), "b".into()]),
            learning_rate: Some(0.0001),
            validation: Some(false),
            seed: Some(99),
            ..ConfigLayer::default()
        };
        let cfg = resolve_flags(flags);
        let mut buf = Vec::new();
        cfg.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let reparsed = ConfigLayer::parse(&text, "round-trip").unwrap();
        let cfg2 = RunConfig::resolve(None, None, reparsed, CommandDefaults::TRAIN).unwrap();
        assert_eq!(cfg, cfg2);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(ConfigLayer::parse("no_such_key = 1", "t").is_err());
        assert!(ConfigLayer::parse("epochs = soon", "t").is_err());
        assert!(ConfigLayer::parse("standardize = yes", "t").is_err());
        assert!(ConfigLayer::parse("epochs 12", "t").is_err());
        // line numbers show up in messages
        let err = ConfigLayer::parse("seed = 1\nbogus = 2", "file.conf").unwrap_err();
        assert!(err.to_string().contains("file.conf:2"), "{err}");
    }

    #[test]
    fn restarts_zero_is_a_config_error() {
        let flags = ConfigLayer {
            restarts: Some(0),
            ..ConfigLayer::default()
        };
        let err = RunConfig::resolve(None, None, flags, CommandDefaults::COMPARE).unwrap_err();
        assert!(err.to_string().contains("restarts"));
    }

    #[test]
    fn hidden_layers_pick_the_gating_kind() {
        let cfg = resolve_flags(ConfigLayer::default());
        assert_eq!(cfg.gating_kind(), GatingKind::Linear);
        let cfg = resolve_flags(ConfigLayer {
            hidden: Some(vec![7]),
            activation: Some(Activation::Selu),
            ..ConfigLayer::default()
        });
        assert_eq!(
            cfg.gating_kind(),
            GatingKind::Mlp {
                hidden: vec![7],
                activation: Activation::Selu
            }
        );
    }
}
