use std::io::{BufWriter, Write};
use std::path::Path;

use moce_core::{
    concordance_index, HazardMode, MoceModel, ModelSpec, ObjectiveKind, SurvivalDataset, Trainer,
};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{self, Metrics, PreparedData};

/// Trains both objectives from `restarts` seeded initializations and writes
/// the per-epoch hard-gating concordance curves, averaged over restarts.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    pipeline::ensure_dir(out)?;
    cfg.save(out)?;

    let data = pipeline::prepare(cfg)?;
    let spec = cfg.model_spec(data.train.dim());
    println!(
        "comparing objectives: {} restarts x {} epochs, {} train / {} test subjects",
        cfg.restarts,
        cfg.epochs,
        data.train.len(),
        data.test.len()
    );

    let kinds = [ObjectiveKind::Elbo, ObjectiveKind::Rt];
    let curves = pipeline::with_jobs(cfg.jobs, || -> Result<Vec<Vec<(f64, f64)>>, CliError> {
        kinds
            .iter()
            .map(|&kind| {
                let runs: Result<Vec<_>, CliError> = (0..cfg.restarts)
                    .into_par_iter()
                    .map(|restart| curve_for(cfg, &data, &spec, kind, restart as u64))
                    .collect();
                Ok(average(&runs?))
            })
            .collect()
    })??;
    let (elbo, rt) = (&curves[0], &curves[1]);

    let mut w = BufWriter::new(std::fs::File::create(out.join("curves.csv"))?);
    writeln!(w, "epoch,elbo_train,elbo_test,rt_train,rt_test")?;
    for epoch in 0..cfg.epochs {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6}",
            epoch + 1,
            elbo[epoch].0,
            elbo[epoch].1,
            rt[epoch].0,
            rt[epoch].1
        )?;
    }
    w.flush()?;

    let last = cfg.epochs - 1;
    let mut metrics = Metrics::new();
    metrics.put("restarts", cfg.restarts);
    metrics.put("epochs", cfg.epochs);
    metrics.put("final_elbo_train", elbo[last].0);
    metrics.put("final_elbo_test", elbo[last].1);
    metrics.put("final_rt_train", rt[last].0);
    metrics.put("final_rt_test", rt[last].1);
    metrics.save(out)?;

    println!(
        "final test c-index (mean over restarts): elbo {:.4}, rt {:.4}",
        elbo[last].1, rt[last].1
    );
    Ok(())
}

fn curve_for(
    cfg: &RunConfig,
    data: &PreparedData,
    spec: &ModelSpec,
    kind: ObjectiveKind,
    restart: u64,
) -> Result<Vec<(f64, f64)>, CliError> {
    let mut train_cfg = cfg.train_config();
    train_cfg.objective = kind;
    train_cfg.seed = cfg.seed.wrapping_add(restart);
    let model = MoceModel::random(spec.clone(), train_cfg.init_scale, train_cfg.seed)?;
    let mut trainer = Trainer::new(model, &data.train, &train_cfg)?;
    let mut curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        trainer.step()?;
        let on_train = hard_c_index(trainer.model(), &data.train, cfg)?;
        let on_test = hard_c_index(trainer.model(), &data.test, cfg)?;
        curve.push((on_train, on_test));
    }
    Ok(curve)
}

fn hard_c_index(
    model: &MoceModel,
    ds: &SurvivalDataset,
    cfg: &RunConfig,
) -> Result<f64, CliError> {
    let hazards = model.hazards(ds, HazardMode::Hard)?;
    Ok(concordance_index(&hazards, ds, cfg.tie_policy)?.c_index)
}

fn average(runs: &[Vec<(f64, f64)>]) -> Vec<(f64, f64)> {
    let epochs = runs.first().map(Vec::len).unwrap_or(0);
    let mut out = vec![(0.0, 0.0); epochs];
    for run in runs {
        for (epoch, &(a, b)) in run.iter().enumerate() {
            out[epoch].0 += a;
            out[epoch].1 += b;
        }
    }
    let n = runs.len() as f64;
    for v in &mut out {
        v.0 /= n;
        v.1 /= n;
    }
    out
}
