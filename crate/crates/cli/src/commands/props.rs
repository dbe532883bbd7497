use std::path::Path;

use moce_core::{
    elbo, exact_loglik, phi_decomposition, rt_objective, GatingKind, MoceModel, ModelSpec,
    Subject, SurvivalDataset,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline;

const BOUND_SLACK: f64 = 1e-9;
const DEGENERACY_TOL: f64 = 1e-12;
const TAYLOR_TOL: f64 = 1e-3;

pub struct PropsOptions {
    pub trials: usize,
    /// Restrict every instance to a single expert; all objectives must then
    /// coincide with the plain Cox partial likelihood term.
    pub fix_k1: bool,
}

/// Checks the analytic ordering (lower bound <= exact <= neither, lower bound
/// <= ratio approximation), the single-expert degeneracy, and the sharp-gating
/// second-order accuracy on randomly drawn tiny instances.
pub fn run(cfg: &RunConfig, opts: &PropsOptions, out: &Path) -> Result<(), CliError> {
    if opts.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".to_string()));
    }
    pipeline::ensure_dir(out)?;
    cfg.save(out)?;

    let mut max_exact_gap = f64::NEG_INFINITY; // elbo - exact, must stay <= slack
    let mut max_rt_gap = f64::NEG_INFINITY; // elbo - rt
    let mut k1_gap = 0.0f64;
    let mut k1_trials = 0usize;
    let mut anchors = 0usize;

    for trial in 0..opts.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(100 + trial as u64);
        let n = rng.gen_range(2..=8);
        let d = rng.gen_range(1..=4);
        let k = if opts.fix_k1 { 1 } else { rng.gen_range(1..=3) };
        let ds = super::probe_dataset(n, d, 0.7, &mut rng)?;
        let spec = ModelSpec {
            n_features: d,
            n_experts: k,
            gating: GatingKind::Linear,
        };
        let experts = Array2::from_shape_fn((k, d), |_| rng.gen::<f64>() * 2.0 - 1.0);
        let gating = Array2::from_shape_fn((k, d), |_| rng.gen::<f64>() * 2.0 - 1.0);
        let model = MoceModel::from_parts(spec, experts, vec![gating])?;

        for i in 0..n {
            if !ds.subject(i).event_observed {
                continue;
            }
            anchors += 1;
            let exact = exact_loglik(&model, &ds, i)?;
            let rt = rt_objective(&model, &ds, i)?;
            let lower = elbo(&model, &ds, i)?;
            max_exact_gap = max_exact_gap.max(lower - exact);
            max_rt_gap = max_rt_gap.max(lower - rt);
            if k == 1 {
                let cph = cph_term(&model, &ds, i);
                let gap = (exact - rt)
                    .abs()
                    .max((exact - lower).abs())
                    .max((exact - cph).abs());
                k1_gap = k1_gap.max(gap);
            }
        }
        if k == 1 {
            k1_trials += 1;
        }
    }

    // sharp-gating instances: one event, near-deterministic gates, so the
    // second-order estimate must track the exact marginal factor
    let taylor_trials = (opts.trials / 10).max(1);
    let mut taylor_max = 0.0f64;
    let mut min_gate_max = 1.0f64;
    for t in 0..taylor_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(20_000 + t as u64);
        let (model, ds) = sharp_instance(&mut rng)?;
        for s in ds.subjects() {
            let probs = model.gating_probs_one(&s.covariates);
            let top = probs.iter().cloned().fold(0.0, f64::max);
            min_gate_max = min_gate_max.min(top);
        }
        let anchor = ds.sorted_order()[0];
        let decomposition = phi_decomposition(&model, &ds, anchor)?;
        let exact_prob = exact_loglik(&model, &ds, anchor)?.exp();
        let rel = (decomposition.second_order / exact_prob - 1.0).abs();
        taylor_max = taylor_max.max(rel);
    }

    let bound_exact_ok = max_exact_gap <= BOUND_SLACK;
    let bound_rt_ok = max_rt_gap <= BOUND_SLACK;
    let k1_ok = k1_gap <= DEGENERACY_TOL;
    let taylor_ok = taylor_max <= TAYLOR_TOL;
    let pass = bound_exact_ok && bound_rt_ok && k1_ok && taylor_ok;

    let verdict = |ok: bool| if ok { "ok" } else { "VIOLATED" };
    let report = format!(
        "property checks: {} trials, seed {}\n\
         anchors checked: {}\n\
         lower bound vs exact:   max gap {:+.3e} (allowed {:.0e}) {}\n\
         lower bound vs ratio:   max gap {:+.3e} (allowed {:.0e}) {}\n\
         single-expert collapse: {} trials, max spread {:.3e} (allowed {:.0e}) {}\n\
         sharp-gating 2nd order: {} instances, min top gate prob {:.6}, \
         max rel err {:.3e} (allowed {:.0e}) {}\n\
         result: {}\n",
        opts.trials,
        cfg.seed,
        anchors,
        max_exact_gap,
        BOUND_SLACK,
        verdict(bound_exact_ok),
        max_rt_gap,
        BOUND_SLACK,
        verdict(bound_rt_ok),
        k1_trials,
        k1_gap,
        DEGENERACY_TOL,
        verdict(k1_ok),
        taylor_trials,
        min_gate_max,
        taylor_max,
        TAYLOR_TOL,
        verdict(taylor_ok),
        if pass { "PASS" } else { "FAIL" },
    );
    std::fs::write(out.join("props.txt"), &report)?;
    print!("{}", report);

    if pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed(
            "property checks failed; see props.txt".to_string(),
        ))
    }
}

/// Cox partial-likelihood term of anchor `i` under the first expert.
fn cph_term(model: &MoceModel, ds: &SurvivalDataset, i: usize) -> f64 {
    let beta = model.experts().row(0);
    let score = |s: &Subject| -> f64 {
        beta.iter().zip(&s.covariates).map(|(b, x)| b * x).sum()
    };
    let members = ds.risk_set(i).expect("valid anchor").members;
    let scores: Vec<f64> = members.iter().map(|&j| score(ds.subject(j))).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    score(ds.subject(i)) - lse
}

/// K=2, d=1 instance with one observed event and near-deterministic gates:
/// covariates have magnitude >= 1 and the gating rows are +/-4, so every
/// subject's top expert probability exceeds 1/(1+e^-8) = 0.99966. Keeping the
/// gates this side of certainty leaves the second-order terms visible.
fn sharp_instance(rng: &mut ChaCha8Rng) -> Result<(MoceModel, SurvivalDataset), CliError> {
    let n = 4;
    let subjects: Vec<Subject> = (0..n)
        .map(|i| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            Subject {
                covariates: vec![sign * (1.0 + rng.gen::<f64>() * 0.5)],
                event_time: (i as f64 + 1.0) * 0.4 + rng.gen::<f64>() * 0.1,
                event_observed: i == 0,
            }
        })
        .collect();
    let ds = SurvivalDataset::new(subjects)?;
    let spec = ModelSpec {
        n_features: 1,
        n_experts: 2,
        gating: GatingKind::Linear,
    };
    let experts = Array2::from_shape_fn((2, 1), |_| rng.gen::<f64>() - 0.5);
    let gating = Array2::from_shape_vec((2, 1), vec![4.0, -4.0]).expect("2x1");
    let model = MoceModel::from_parts(spec, experts, vec![gating])?;
    Ok((model, ds))
}
