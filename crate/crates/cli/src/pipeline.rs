//! Plumbing shared by the subcommands: data sourcing, split/standardize,
//! metric evaluation, and the on-disk output formats.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use moce_core::{
    bootstrap_ci, concordance_index, load_csv, split, standardize, BootstrapBand,
    ConcordanceResult, CsvSchema, EpochRecord, Standardizer, SurvivalDataset, SyntheticData,
    SyntheticSpec, TieBreak, ZeroVariancePolicy,
};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct PreparedData {
    pub train: SurvivalDataset,
    pub val: SurvivalDataset,
    pub test: SurvivalDataset,
    pub standardizer: Option<Standardizer>,
}

/// Materializes the configured data source (CSV file or synthetic draw).
pub fn load_dataset(cfg: &RunConfig) -> Result<SurvivalDataset, CliError> {
    if cfg.synthetic {
        return Ok(synthetic_data(cfg)?.1.dataset);
    }
    let path = cfg.data_csv.as_deref().ok_or_else(|| {
        CliError::Config("no data source: pass --data <csv> or use synthetic data".to_string())
    })?;
    let schema = CsvSchema {
        time_col: cfg.time_col.clone(),
        event_col: cfg.event_col.clone(),
        feature_cols: if cfg.feature_cols.is_empty() {
            None
        } else {
            Some(cfg.feature_cols.clone())
        },
    };
    let tie = if cfg.jitter > 0.0 {
        TieBreak::Jitter {
            eps: cfg.jitter,
            seed: cfg.seed,
        }
    } else {
        TieBreak::Fail
    };
    let (ds, _feature_names) = load_csv(path, &schema, tie)?;
    Ok(ds)
}

/// Draws the configured synthetic dataset, returning the generating spec so
/// callers can record the ground truth. The true parameters come from a
/// dedicated RNG stream so they are independent of the subject draws, and
/// `synthetic_separation` scales the gating weights (larger = sharper expert
/// regions).
pub fn synthetic_data(cfg: &RunConfig) -> Result<(SyntheticSpec, SyntheticData), CliError> {
    let (k, d) = (cfg.synthetic_experts, cfg.synthetic_features);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let normal = StandardNormal;
    let experts = Array2::from_shape_fn((k, d), |_| normal.sample(&mut rng));
    let gating = Array2::from_shape_fn((k, d), |_| {
        let v: f64 = normal.sample(&mut rng);
        v * cfg.synthetic_separation
    });
    let spec = SyntheticSpec {
        n_subjects: cfg.synthetic_n,
        experts,
        gating,
        censoring: cfg.synthetic_censoring,
        seed: cfg.seed,
    };
    let data = spec.generate()?;
    Ok((spec, data))
}

/// Splits per the config and, if enabled, standardizes with statistics fitted
/// on the training portion only.
pub fn split_and_standardize(
    cfg: &RunConfig,
    full: &SurvivalDataset,
) -> Result<PreparedData, CliError> {
    let (train_raw, val_raw, test_raw) = split(
        full,
        cfg.split_train,
        cfg.split_val,
        cfg.seed,
        !cfg.validation,
    )?;
    if !cfg.standardize {
        return Ok(PreparedData {
            train: train_raw,
            val: val_raw,
            test: test_raw,
            standardizer: None,
        });
    }
    let (train, stdzr) = standardize(&train_raw, ZeroVariancePolicy::Drop)?;
    let val = stdzr.apply(&val_raw)?;
    let test = stdzr.apply(&test_raw)?;
    Ok(PreparedData {
        train,
        val,
        test,
        standardizer: Some(stdzr),
    })
}

pub fn prepare(cfg: &RunConfig) -> Result<PreparedData, CliError> {
    let full = load_dataset(cfg)?;
    split_and_standardize(cfg, &full)
}

// -- metric output ----------------------------------------------------------

#[derive(Debug, Clone)]
pub enum MetricValue {
    Float(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for MetricValue {
    fn from(v: f64) -> Self {
        MetricValue::Float(v)
    }
}
impl From<usize> for MetricValue {
    fn from(v: usize) -> Self {
        MetricValue::Int(v as u64)
    }
}
impl From<u64> for MetricValue {
    fn from(v: u64) -> Self {
        MetricValue::Int(v)
    }
}
impl From<&str> for MetricValue {
    fn from(v: &str) -> Self {
        MetricValue::Text(v.to_string())
    }
}

/// Flat key-value record, written as a one-level JSON object with sorted keys.
#[derive(Debug, Default)]
pub struct Metrics {
    entries: BTreeMap<String, MetricValue>,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: &str, value: impl Into<MetricValue>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let mut first = true;
        for (key, value) in &self.entries {
            if !first {
                out.push_str(",\n");
            }
            first = false;
            out.push_str("  \"");
            out.push_str(key);
            out.push_str("\": ");
            match value {
                MetricValue::Float(v) => out.push_str(&format_float(*v)),
                MetricValue::Int(v) => out.push_str(&v.to_string()),
                MetricValue::Text(v) => {
                    out.push('"');
                    out.push_str(v);
                    out.push('"');
                }
            }
        }
        out.push_str("\n}\n");
        out
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::write(dir.join("metrics.json"), self.to_json())?;
        Ok(())
    }
}

fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{:.6}", v)
    } else {
        // JSON has no inf/nan literals; quote them
        format!("\"{}\"", v)
    }
}

/// Concordance point estimate plus its bootstrap band for one hazard mode.
pub struct ModeMetrics {
    pub result: ConcordanceResult,
    pub band: BootstrapBand,
}

pub fn evaluate_hazards(
    hazards: &[f64],
    ds: &SurvivalDataset,
    cfg: &RunConfig,
) -> Result<ModeMetrics, CliError> {
    let result = concordance_index(hazards, ds, cfg.tie_policy)?;
    let band = bootstrap_ci(hazards, ds, cfg.bootstrap, cfg.seed, cfg.tie_policy)?;
    Ok(ModeMetrics { result, band })
}

pub fn push_mode_metrics(metrics: &mut Metrics, prefix: &str, m: &ModeMetrics) {
    metrics.put(&format!("{prefix}_c_index"), m.result.c_index);
    metrics.put(&format!("{prefix}_ci_lower"), m.band.lower);
    metrics.put(&format!("{prefix}_ci_upper"), m.band.upper);
    metrics.put(
        &format!("{prefix}_comparable_pairs"),
        m.result.n_comparable,
    );
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "epoch,objective,val_cindex")?;
    for rec in history {
        match rec.val_cindex {
            Some(v) => writeln!(w, "{},{:.10e},{:.6}", rec.epoch, rec.objective, v)?,
            None => writeln!(w, "{},{:.10e},nan", rec.epoch, rec.objective)?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs `f` inside a rayon pool capped at `jobs` threads (0 = library default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}
