//! Analytic gradients of the `rt` and `elbo` totals, by reverse accumulation.
//!
//! Both totals share the structure `sum_{i in E} [ numerator_i - log D_i ]`
//! with `D_i = sum_{j in R(i)} A_j` and `A_j = sum_k g_jk exp(eta_jk)`. Because
//! risk sets are suffixes of the time ordering, every `log D_i` term touching
//! subject `j` is captured by the prefix sum `T_j = sum_{anchors i with
//! t_i <= t_j} 1 / D_i`, which turns the full gradient into two linear scans:
//!
//! * elbo: `dF/d eta_jk = [j in E] g_jk - w_jk T_j` and
//!   `dF/d g_jk  = [j in E] eta_jk - exp(eta_jk) T_j`
//! * rt: with `c_j = [j in E]/A_j - T_j`,
//!   `dF/d eta_jk = w_jk c_j` and `dF/d g_jk = exp(eta_jk) c_j`
//!
//! where `w_jk = g_jk exp(eta_jk)`. The gate gradient then backpropagates
//! through the softmax and any hidden layers; the expert gradient contracts
//! `dF/d eta` against the design matrix and adds the L2 term `-2 l2 beta`.

use ndarray::Array2;

use crate::dataset::SurvivalDataset;
use crate::error::{MoceError, Result};
use crate::model::{design_matrix, MoceModel, ParamSet};
use crate::objective::ObjectiveKind;

/// Gradient of `total_objective` (data term plus expert L2) with respect to
/// every parameter block, in model block order.
pub fn grad_total_objective(
    model: &MoceModel,
    ds: &SurvivalDataset,
    kind: ObjectiveKind,
    l2: f64,
) -> Result<ParamSet> {
    if kind == ObjectiveKind::Exact {
        return Err(MoceError::Validation(
            "the enumeration oracle has no analytic gradient; train with rt or elbo".into(),
        ));
    }
    if !(l2.is_finite() && l2 >= 0.0) {
        return Err(MoceError::Validation(format!(
            "l2 strength must be a finite non-negative real, got {}",
            l2
        )));
    }
    if ds.dim() != model.n_features() {
        return Err(MoceError::Dimension(format!(
            "dataset has {} features, model expects {}",
            ds.dim(),
            model.n_features()
        )));
    }
    ds.require_untied()?;
    if ds.n_uncensored() == 0 {
        return Err(MoceError::NoUncensoredSubjects);
    }

    let n = ds.len();
    let k = model.n_experts();
    let xs = design_matrix(ds);
    let eta = model.linear_predictors(&xs);
    let fwd = model.gating_forward(&xs);
    let gate = &fwd.probs;
    let exp_eta = eta.mapv(f64::exp);
    let weighted = gate * &exp_eta;
    let events: Vec<bool> = ds.subjects().iter().map(|s| s.event_observed).collect();

    // mixture means A_j, summed over experts in index order
    let mix: Vec<f64> = (0..n).map(|j| (0..k).map(|c| weighted[[j, c]]).sum()).collect();

    // suffix scan: risk-set denominators D_i at each uncensored anchor
    let ord = ds.sorted_order();
    let mut denom = vec![0.0; n];
    let mut suffix = 0.0;
    for &j in ord.iter().rev() {
        suffix += mix[j];
        if events[j] {
            denom[j] = suffix;
        }
    }
    // prefix scan: T_j accumulates 1/D_i over anchors no later than j
    let mut prefix = vec![0.0; n];
    let mut acc = 0.0;
    for &j in ord {
        if events[j] {
            acc += 1.0 / denom[j];
        }
        prefix[j] = acc;
    }

    let mut d_eta = Array2::zeros((n, k));
    let mut d_gate = Array2::zeros((n, k));
    match kind {
        ObjectiveKind::Elbo => {
            for j in 0..n {
                for c in 0..k {
                    let own = if events[j] { gate[[j, c]] } else { 0.0 };
                    d_eta[[j, c]] = own - weighted[[j, c]] * prefix[j];
                    let own = if events[j] { eta[[j, c]] } else { 0.0 };
                    d_gate[[j, c]] = own - exp_eta[[j, c]] * prefix[j];
                }
            }
        }
        ObjectiveKind::Rt => {
            for j in 0..n {
                let own = if events[j] { 1.0 / mix[j] } else { 0.0 };
                let coeff = own - prefix[j];
                for c in 0..k {
                    d_eta[[j, c]] = weighted[[j, c]] * coeff;
                    d_gate[[j, c]] = exp_eta[[j, c]] * coeff;
                }
            }
        }
        ObjectiveKind::Exact => unreachable!(),
    }

    // experts: contract against covariates, then the penalty term
    let mut experts = d_eta.t().dot(&xs);
    experts.scaled_add(-2.0 * l2, model.experts());

    // softmax backprop: d score_jc = g_jc (d g_jc - sum_k d g_jk g_jk)
    let mut dz = Array2::zeros((n, k));
    for j in 0..n {
        let mut dot = 0.0;
        for c in 0..k {
            dot += d_gate[[j, c]] * gate[[j, c]];
        }
        for c in 0..k {
            dz[[j, c]] = gate[[j, c]] * (d_gate[[j, c]] - dot);
        }
    }

    // hidden layers, output to input
    let layers = model.gating_layers();
    let act = model.hidden_activation();
    let mut gating: Vec<Array2<f64>> = (0..layers.len()).map(|_| Array2::zeros((0, 0))).collect();
    for l in (0..layers.len()).rev() {
        gating[l] = dz.t().dot(&fwd.layer_inputs[l]);
        if l > 0 {
            let mut da = dz.dot(&layers[l]);
            for ((j, u), v) in da.indexed_iter_mut() {
                *v *= act.derivative_from_output(fwd.layer_inputs[l][[j, u]]);
            }
            dz = da;
        }
    }

    let grad = ParamSet { experts, gating };
    for (name, block) in model.block_names().iter().zip(grad.blocks()) {
        if block.iter().any(|v| !v.is_finite()) {
            return Err(MoceError::NonFiniteGradient(format!(
                "non-finite gradient entries in block '{}'",
                name
            )));
        }
    }
    Ok(grad)
}
