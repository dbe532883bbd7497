use std::path::Path;

use moce_core::{train_new, HazardMode};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{self, Metrics};

pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    pipeline::ensure_dir(out)?;
    cfg.save(out)?;

    let data = pipeline::prepare(cfg)?;
    let spec = cfg.model_spec(data.train.dim());
    let train_cfg = cfg.train_config();
    println!(
        "training: {} experts, {} gating, objective {}, {} train / {} val / {} test",
        cfg.experts,
        if cfg.hidden.is_empty() { "linear".to_string() } else { format!("mlp {:?}", cfg.hidden) },
        cfg.objective.name(),
        data.train.len(),
        data.val.len(),
        data.test.len(),
    );

    let (result, hard, soft) = pipeline::with_jobs(cfg.jobs, || -> Result<_, CliError> {
        let result = train_new(spec.clone(), &data.train, &data.val, &train_cfg)?;
        let hazards_hard = result.model.hazards(&data.test, HazardMode::Hard)?;
        let hazards_soft = result.model.hazards(&data.test, HazardMode::Soft)?;
        let hard = pipeline::evaluate_hazards(&hazards_hard, &data.test, cfg)?;
        let soft = pipeline::evaluate_hazards(&hazards_soft, &data.test, cfg)?;
        Ok((result, hard, soft))
    })??;

    result
        .model
        .save(&out.join("model.txt"), data.standardizer.as_ref())?;
    pipeline::write_history(&out.join("history.csv"), &result.history)?;

    let mut metrics = Metrics::new();
    metrics.put("n_train", data.train.len());
    metrics.put("n_val", data.val.len());
    metrics.put("n_test", data.test.len());
    metrics.put("n_features", data.train.dim());
    metrics.put("n_experts", cfg.experts);
    metrics.put("objective", cfg.objective.name());
    metrics.put("tie_policy", cfg.tie_policy.name());
    metrics.put("bootstrap_samples", cfg.bootstrap);
    metrics.put("epochs_run", result.history.len());
    metrics.put(
        "final_objective",
        result.history.last().map(|r| r.objective).unwrap_or(f64::NAN),
    );
    if let Some(best) = result.best_epoch {
        metrics.put("best_epoch", best);
        if let Some(v) = result.history[best - 1].val_cindex {
            metrics.put("val_c_index_best", v);
        }
    }
    pipeline::push_mode_metrics(&mut metrics, "test_hard", &hard);
    pipeline::push_mode_metrics(&mut metrics, "test_soft", &soft);
    metrics.save(out)?;

    println!(
        "test c-index: hard {:.4} [{:.4}, {:.4}], soft {:.4} [{:.4}, {:.4}]",
        hard.result.c_index,
        hard.band.lower,
        hard.band.upper,
        soft.result.c_index,
        soft.band.lower,
        soft.band.upper,
    );
    println!("artifacts written to {}", out.display());
    Ok(())
}
