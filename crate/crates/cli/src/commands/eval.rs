use std::path::Path;

use moce_core::{HazardMode, MoceModel};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{self, Metrics};

pub fn run(cfg: &RunConfig, model_path: &Path, out: &Path) -> Result<(), CliError> {
    pipeline::ensure_dir(out)?;
    cfg.save(out)?;

    let (model, standardizer) = MoceModel::load(model_path)?;
    let raw = pipeline::load_dataset(cfg)?;
    // a standardizer stored with the model reflects its training-time feature
    // transform; apply it unless the user opted out
    let ds = match standardizer {
        Some(ref s) if cfg.standardize => s.apply(&raw)?,
        _ => raw,
    };

    let (hard, soft) = pipeline::with_jobs(cfg.jobs, || -> Result<_, CliError> {
        let hazards_hard = model.hazards(&ds, HazardMode::Hard)?;
        let hazards_soft = model.hazards(&ds, HazardMode::Soft)?;
        let hard = pipeline::evaluate_hazards(&hazards_hard, &ds, cfg)?;
        let soft = pipeline::evaluate_hazards(&hazards_soft, &ds, cfg)?;
        Ok((hard, soft))
    })??;

    let mut metrics = Metrics::new();
    metrics.put("n_subjects", ds.len());
    metrics.put("n_features", ds.dim());
    metrics.put("n_experts", model.n_experts());
    metrics.put("tie_policy", cfg.tie_policy.name());
    metrics.put("bootstrap_samples", cfg.bootstrap);
    pipeline::push_mode_metrics(&mut metrics, "hard", &hard);
    pipeline::push_mode_metrics(&mut metrics, "soft", &soft);
    metrics.save(out)?;

    println!(
        "c-index: hard {:.4} [{:.4}, {:.4}], soft {:.4} [{:.4}, {:.4}]",
        hard.result.c_index,
        hard.band.lower,
        hard.band.upper,
        soft.result.c_index,
        soft.band.lower,
        soft.band.upper,
    );
    println!("metrics written to {}", out.display());
    Ok(())
}
