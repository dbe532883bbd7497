use std::path::Path;

use moce_core::{
    finite_diff_grad, grad_total_objective, total_objective, MoceModel, ObjectiveKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline;

const INSTANCES: u64 = 20;
const FD_STEP: f64 = 1e-5;
const THRESHOLD: f64 = 1e-4;

/// Compares analytic gradients against central finite differences on random
/// instances of the configured architecture. `corrupt` perturbs one analytic
/// entry first, as a negative control that must trip the threshold.
pub fn run(cfg: &RunConfig, corrupt: bool, out: &Path) -> Result<(), CliError> {
    pipeline::ensure_dir(out)?;
    cfg.save(out)?;

    let d = cfg.synthetic_features;
    let spec = cfg.model_spec(d);
    let mut report = vec![format!(
        "gradient check: {} instances, step {:e}, threshold {:e}",
        INSTANCES, FD_STEP, THRESHOLD
    )];
    let mut worst = 0.0f64;

    for i in 0..INSTANCES {
        let seed = cfg.seed.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        let ds = super::probe_dataset(12, d, 0.75, &mut rng)?;
        let model = MoceModel::random(spec.clone(), 0.4, seed)?;
        for kind in [ObjectiveKind::Elbo, ObjectiveKind::Rt] {
            let mut analytic = grad_total_objective(&model, &ds, kind, cfg.l2)?;
            if corrupt {
                analytic.experts[[0, 0]] += 0.01;
            }
            let numeric =
                finite_diff_grad(&model, |m| total_objective(m, &ds, kind, cfg.l2), FD_STEP)?;
            let err = analytic
                .values()
                .zip(numeric.values())
                .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1.0))
                .fold(0.0f64, f64::max);
            worst = worst.max(err);
            report.push(format!(
                "instance {:2} {:>4}: max rel err {:.3e}",
                i,
                kind.name(),
                err
            ));
        }
    }

    let pass = worst <= THRESHOLD;
    report.push(format!(
        "max relative error {:.3e} -> {}",
        worst,
        if pass { "PASS" } else { "FAIL" }
    ));
    let text = report.join("\n") + "\n";
    std::fs::write(out.join("gradcheck.txt"), &text)?;
    print!("{}", text);

    if pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "gradient check failed: max relative error {:.3e} exceeds {:e}",
            worst, THRESHOLD
        )))
    }
}
