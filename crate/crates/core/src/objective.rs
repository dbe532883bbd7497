//! Training objectives over risk sets.
//!
//! Three per-anchor quantities share the same inputs (per-subject, per-expert
//! linear predictors `eta` and gating probabilities `gate`):
//!
//! * `exact`: the log of the marginal factor `E_z[ exp(eta_i) / sum_{j in R(i)}
//!   exp(eta_j) ]` with independent per-subject gates, by full enumeration of
//!   expert assignments over the risk set (capped).
//! * `rt`: the ratio-of-expectations approximation `log E[exp(eta_i)] -
//!   log sum_j E[exp(eta_j)]`.
//! * `elbo`: the variational lower bound `E[eta_i] - log sum_j E[exp(eta_j)]`.
//!
//! Totals sum the per-anchor terms over uncensored subjects; the `rt`/`elbo`
//! totals run as a single O(nK) suffix scan over the time ordering. All sums
//! and scans use fixed orders so results are reproducible bit-for-bit.

use std::str::FromStr;

use ndarray::Array2;

use crate::dataset::SurvivalDataset;
use crate::error::{MoceError, Result};
use crate::model::{design_matrix, MoceModel};

/// Default bound on enumerated expert assignments per risk set.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// Probabilities are clamped here before any logarithm.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Enumerated marginal log-likelihood (oracle; exponential cost).
    Exact,
    /// Ratio-of-expectations approximation.
    Rt,
    /// Variational lower bound.
    Elbo,
}

impl ObjectiveKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Exact => "exact",
            ObjectiveKind::Rt => "rt",
            ObjectiveKind::Elbo => "elbo",
        }
    }
}

impl FromStr for ObjectiveKind {
    type Err = MoceError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ObjectiveKind::Exact),
            "rt" => Ok(ObjectiveKind::Rt),
            "elbo" => Ok(ObjectiveKind::Elbo),
            other => Err(MoceError::Validation(format!(
                "unknown objective '{}' (expected exact, rt or elbo)",
                other
            ))),
        }
    }
}

/// Streaming log-sum-exp accumulator (single pass, max-shifted).
#[derive(Debug, Clone, Copy)]
pub(crate) struct StreamingLse {
    max: f64,
    sum: f64,
}

impl StreamingLse {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub(crate) fn push(&mut self, v: f64) {
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// `log E_z[exp(eta)]` for subject `j`: log-sum-exp of `log g + eta` over experts.
fn log_mix_at(eta: &Array2<f64>, gate: &Array2<f64>, j: usize) -> f64 {
    let mut lse = StreamingLse::new();
    for k in 0..eta.ncols() {
        lse.push(floored_ln(gate[[j, k]]) + eta[[j, k]]);
    }
    lse.value()
}

/// `E_z[eta]` for subject `j`: gate-weighted average of linear predictors.
fn mean_eta_at(eta: &Array2<f64>, gate: &Array2<f64>, j: usize) -> f64 {
    (0..eta.ncols()).map(|k| gate[[j, k]] * eta[[j, k]]).sum()
}

fn check_parts(ds: &SurvivalDataset, eta: &Array2<f64>, gate: &Array2<f64>) -> Result<()> {
    if eta.dim() != gate.dim() {
        return Err(MoceError::Dimension(format!(
            "linear predictors {:?} and gating probabilities {:?} disagree",
            eta.dim(),
            gate.dim()
        )));
    }
    if eta.nrows() != ds.len() || eta.ncols() == 0 {
        return Err(MoceError::Dimension(format!(
            "per-expert values are {:?}, dataset has {} subjects",
            eta.dim(),
            ds.len()
        )));
    }
    ds.require_untied()
}

fn check_anchor(ds: &SurvivalDataset, anchor: usize) -> Result<()> {
    if anchor >= ds.len() {
        return Err(MoceError::Validation(format!(
            "anchor index {} out of range (n = {})",
            anchor,
            ds.len()
        )));
    }
    if !ds.subject(anchor).event_observed {
        return Err(MoceError::Validation(format!(
            "anchor {} is censored; objectives are defined for uncensored subjects",
            anchor
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Plain Cox partial log-likelihood
// ---------------------------------------------------------------------------

/// Cox partial log-likelihood of coefficient vector `beta`:
/// `sum_{i: e_i=1} [beta.x_i - log sum_{j in R(i)} exp(beta.x_j)]`.
pub fn cph_partial_loglik(ds: &SurvivalDataset, beta: &[f64]) -> Result<f64> {
    if beta.len() != ds.dim() {
        return Err(MoceError::Dimension(format!(
            "beta has {} entries, dataset has {} features",
            beta.len(),
            ds.dim()
        )));
    }
    let scores: Vec<f64> = ds
        .subjects()
        .iter()
        .map(|s| s.covariates.iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect();
    cph_partial_loglik_from_scores(ds, &scores)
}

/// Cox partial log-likelihood with precomputed per-subject scores.
pub fn cph_partial_loglik_from_scores(ds: &SurvivalDataset, scores: &[f64]) -> Result<f64> {
    if scores.len() != ds.len() {
        return Err(MoceError::Dimension(format!(
            "{} scores for {} subjects",
            scores.len(),
            ds.len()
        )));
    }
    ds.require_untied()?;
    if ds.n_uncensored() == 0 {
        return Err(MoceError::NoUncensoredSubjects);
    }
    let mut lse = StreamingLse::new();
    let mut total = 0.0;
    for &j in ds.sorted_order().iter().rev() {
        lse.push(scores[j]);
        if ds.subject(j).event_observed {
            total += scores[j] - lse.value();
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Per-anchor terms on explicit (eta, gate) arrays
// ---------------------------------------------------------------------------

/// Exact marginal log-factor for one uncensored anchor, by enumerating all
/// `K^|R|` expert assignments over its risk set. Subjects outside the risk set
/// marginalize to one and are skipped.
pub fn exact_term(
    ds: &SurvivalDataset,
    eta: &Array2<f64>,
    gate: &Array2<f64>,
    anchor: usize,
    cap: u64,
) -> Result<f64> {
    check_parts(ds, eta, gate)?;
    check_anchor(ds, anchor)?;
    let members = ds.risk_set(anchor)?.members;
    let m = members.len();
    let k = eta.ncols();
    let assignments = (k as f64).powi(m as i32);
    if assignments > cap as f64 {
        return Err(MoceError::Intractable { assignments, cap });
    }
    debug_assert_eq!(members[0], anchor, "anchor is the earliest of its risk set");

    let mut z = vec![0usize; m];
    let mut acc = StreamingLse::new();
    loop {
        let mut log_weight = 0.0;
        let mut lse = StreamingLse::new();
        for (slot, &j) in members.iter().enumerate().rev() {
            log_weight += floored_ln(gate[[j, z[slot]]]);
            lse.push(eta[[j, z[slot]]]);
        }
        acc.push(log_weight + eta[[anchor, z[0]]] - lse.value());

        // mixed-radix increment over assignment slots
        let mut slot = 0;
        loop {
            if slot == m {
                return Ok(acc.value());
            }
            z[slot] += 1;
            if z[slot] < k {
                break;
            }
            z[slot] = 0;
            slot += 1;
        }
    }
}

/// Ratio-of-expectations term for one uncensored anchor.
pub fn rt_term(
    ds: &SurvivalDataset,
    eta: &Array2<f64>,
    gate: &Array2<f64>,
    anchor: usize,
) -> Result<f64> {
    check_parts(ds, eta, gate)?;
    check_anchor(ds, anchor)?;
    let members = ds.risk_set(anchor)?.members;
    let mut lse = StreamingLse::new();
    for &j in members.iter().rev() {
        lse.push(log_mix_at(eta, gate, j));
    }
    Ok(log_mix_at(eta, gate, anchor) - lse.value())
}

/// Variational lower-bound term for one uncensored anchor.
pub fn elbo_term(
    ds: &SurvivalDataset,
    eta: &Array2<f64>,
    gate: &Array2<f64>,
    anchor: usize,
) -> Result<f64> {
    check_parts(ds, eta, gate)?;
    check_anchor(ds, anchor)?;
    let members = ds.risk_set(anchor)?.members;
    let mut lse = StreamingLse::new();
    for &j in members.iter().rev() {
        lse.push(log_mix_at(eta, gate, j));
    }
    Ok(mean_eta_at(eta, gate, anchor) - lse.value())
}

// ---------------------------------------------------------------------------
// Totals
// ---------------------------------------------------------------------------

/// Sum of `elbo_term` over all uncensored subjects, via one suffix scan.
pub fn elbo_total(ds: &SurvivalDataset, eta: &Array2<f64>, gate: &Array2<f64>) -> Result<f64> {
    scan_total(ds, eta, gate, mean_eta_at)
}

/// Sum of `rt_term` over all uncensored subjects, via one suffix scan.
pub fn rt_total(ds: &SurvivalDataset, eta: &Array2<f64>, gate: &Array2<f64>) -> Result<f64> {
    scan_total(ds, eta, gate, log_mix_at)
}

/// Shared suffix scan: walk subjects from latest to earliest event time,
/// growing the risk-set log-sum-exp of `log E[exp(eta)]`, and add
/// `numerator(j) - lse` for each uncensored subject passed.
fn scan_total(
    ds: &SurvivalDataset,
    eta: &Array2<f64>,
    gate: &Array2<f64>,
    numerator: impl Fn(&Array2<f64>, &Array2<f64>, usize) -> f64,
) -> Result<f64> {
    check_parts(ds, eta, gate)?;
    if ds.n_uncensored() == 0 {
        return Err(MoceError::NoUncensoredSubjects);
    }
    let mut lse = StreamingLse::new();
    let mut total = 0.0;
    for &j in ds.sorted_order().iter().rev() {
        lse.push(log_mix_at(eta, gate, j));
        if ds.subject(j).event_observed {
            total += numerator(eta, gate, j) - lse.value();
        }
    }
    Ok(total)
}

/// Sum of `exact_term` over all uncensored subjects (earliest anchors first,
/// so a cap violation surfaces before any enumeration work).
pub fn exact_total(
    ds: &SurvivalDataset,
    eta: &Array2<f64>,
    gate: &Array2<f64>,
    cap: u64,
) -> Result<f64> {
    check_parts(ds, eta, gate)?;
    if ds.n_uncensored() == 0 {
        return Err(MoceError::NoUncensoredSubjects);
    }
    let mut total = 0.0;
    for &j in ds.sorted_order() {
        if ds.subject(j).event_observed {
            total += exact_term(ds, eta, gate, j, cap)?;
        }
    }
    Ok(total)
}

/// Per-subject eta and gate arrays for a model on a dataset.
pub fn model_parts(model: &MoceModel, ds: &SurvivalDataset) -> Result<(Array2<f64>, Array2<f64>)> {
    if ds.dim() != model.n_features() {
        return Err(MoceError::Dimension(format!(
            "dataset has {} features, model expects {}",
            ds.dim(),
            model.n_features()
        )));
    }
    let xs = design_matrix(ds);
    let eta = model.linear_predictors(&xs);
    let gate = model.gating_forward(&xs).probs;
    Ok((eta, gate))
}

/// Full training objective: data term of the chosen kind minus the L2 penalty
/// on expert coefficients (gating parameters are not penalized).
pub fn total_objective(
    model: &MoceModel,
    ds: &SurvivalDataset,
    kind: ObjectiveKind,
    l2: f64,
) -> Result<f64> {
    if !(l2.is_finite() && l2 >= 0.0) {
        return Err(MoceError::Validation(format!(
            "l2 strength must be a finite non-negative real, got {}",
            l2
        )));
    }
    let (eta, gate) = model_parts(model, ds)?;
    let data = match kind {
        ObjectiveKind::Exact => exact_total(ds, &eta, &gate, ENUMERATION_CAP)?,
        ObjectiveKind::Rt => rt_total(ds, &eta, &gate)?,
        ObjectiveKind::Elbo => elbo_total(ds, &eta, &gate)?,
    };
    let penalty: f64 = model.experts().iter().map(|b| b * b).sum::<f64>() * l2;
    Ok(data - penalty)
}

// ---------------------------------------------------------------------------
// Per-anchor model wrappers
// ---------------------------------------------------------------------------

/// `exact_term` evaluated through a model.
pub fn exact_loglik(model: &MoceModel, ds: &SurvivalDataset, anchor: usize) -> Result<f64> {
    let (eta, gate) = model_parts(model, ds)?;
    exact_term(ds, &eta, &gate, anchor, ENUMERATION_CAP)
}

/// `rt_term` evaluated through a model.
pub fn rt_objective(model: &MoceModel, ds: &SurvivalDataset, anchor: usize) -> Result<f64> {
    let (eta, gate) = model_parts(model, ds)?;
    rt_term(ds, &eta, &gate, anchor)
}

/// `elbo_term` evaluated through a model.
pub fn elbo(model: &MoceModel, ds: &SurvivalDataset, anchor: usize) -> Result<f64> {
    let (eta, gate) = model_parts(model, ds)?;
    elbo_term(ds, &eta, &gate, anchor)
}

// ---------------------------------------------------------------------------
// Ratio moments and second-order factor
// ---------------------------------------------------------------------------

/// Moment decomposition of one risk-set factor `X/Y`, where
/// `X = exp(eta_anchor)` under the anchor's gate and `Y` sums the analogous
/// terms over the risk set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiDecomposition {
    /// `E[X]`: anchor's gate-mean of `exp(eta)`.
    pub mean_anchor: f64,
    /// `E[Y]`: risk-set sum of gate-means.
    pub mean_risk_sum: f64,
    /// `Var[X]` under the anchor's gate.
    pub var_anchor: f64,
    /// `Var[Y]`: risk-set sum of per-subject gate variances (gates are
    /// independent across subjects).
    pub var_risk_sum: f64,
    /// Correction factor relating the ratio approximation to the marginal
    /// factor, by the stated closed form.
    pub phi: f64,
    /// Second-order delta-method estimate of `E[X/Y]`:
    /// `(EX/EY) (1 - Cov(X,Y)/(EX EY) + Var(Y)/EY^2)` with `Cov(X,Y) = Var(X)`
    /// because only the anchor's own term in `Y` covaries with `X`.
    pub second_order: f64,
}

/// Moments of the risk-set ratio at one uncensored anchor, from explicit
/// (eta, gate) arrays.
pub fn phi_decomposition_from(
    ds: &SurvivalDataset,
    eta: &Array2<f64>,
    gate: &Array2<f64>,
    anchor: usize,
) -> Result<PhiDecomposition> {
    check_parts(ds, eta, gate)?;
    check_anchor(ds, anchor)?;
    let members = ds.risk_set(anchor)?.members;
    let k = eta.ncols();

    let moments = |j: usize| -> (f64, f64) {
        let mut mean = 0.0;
        let mut second = 0.0;
        for c in 0..k {
            let w = eta[[j, c]].exp();
            mean += gate[[j, c]] * w;
            second += gate[[j, c]] * w * w;
        }
        // clamp tiny negative cancellation residue
        (mean, (second - mean * mean).max(0.0))
    };

    let (mean_anchor, var_anchor) = moments(anchor);
    let mut mean_risk_sum = 0.0;
    let mut var_risk_sum = 0.0;
    for &j in &members {
        let (mean, var) = moments(j);
        mean_risk_sum += mean;
        var_risk_sum += var;
    }

    let (a, b, c, d) = (mean_anchor, mean_risk_sum, var_anchor, var_risk_sum);
    let phi = 1.0 - (1.0 / b) * (1.0 - (d / b - c / a));
    let second_order = (a / b) * (1.0 - c / (a * b) + d / (b * b));

    Ok(PhiDecomposition {
        mean_anchor: a,
        mean_risk_sum: b,
        var_anchor: c,
        var_risk_sum: d,
        phi,
        second_order,
    })
}

/// Moments of the risk-set ratio at one uncensored anchor, through a model.
pub fn phi_decomposition(
    model: &MoceModel,
    ds: &SurvivalDataset,
    anchor: usize,
) -> Result<PhiDecomposition> {
    let (eta, gate) = model_parts(model, ds)?;
    phi_decomposition_from(ds, &eta, &gate, anchor)
}
