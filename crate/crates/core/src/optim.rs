//! Full-batch ascent steppers and the finite-difference gradient oracle.
//!
//! Everything here maximizes: a step moves parameters along `+grad`.

use std::str::FromStr;

use crate::error::{MoceError, Result};
use crate::model::{MoceModel, ParamSet};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const RMSPROP_DECAY: f64 = 0.9;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Rmsprop,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rmsprop => "rmsprop",
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = MoceError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            other => Err(MoceError::Validation(format!(
                "unknown optimizer '{}' (expected adam or rmsprop)",
                other
            ))),
        }
    }
}

/// Optimizer state tied to one model's parameter shapes.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    step_count: u64,
    first_moment: ParamSet,
    second_moment: ParamSet,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, model: &MoceModel) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(MoceError::Validation(format!(
                "learning rate must be a finite positive real, got {}",
                learning_rate
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            step_count: 0,
            first_moment: ParamSet::zeros_like(model),
            second_moment: ParamSet::zeros_like(model),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One ascent step in place. Rejects non-finite or mis-shaped gradients
    /// before touching any parameter.
    pub fn step(&mut self, model: &mut MoceModel, grad: &ParamSet) -> Result<()> {
        let names = model.block_names();
        {
            let params = model.param_blocks();
            let grads = grad.blocks();
            if grads.len() != params.len() {
                return Err(MoceError::Dimension(format!(
                    "gradient has {} blocks, model has {}",
                    grads.len(),
                    params.len()
                )));
            }
            for ((name, p), g) in names.iter().zip(&params).zip(&grads) {
                if g.dim() != p.dim() {
                    return Err(MoceError::Dimension(format!(
                        "gradient block '{}' is {:?}, parameters are {:?}",
                        name,
                        g.dim(),
                        p.dim()
                    )));
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(MoceError::NonFiniteGradient(format!(
                        "non-finite gradient entries in block '{}'",
                        name
                    )));
                }
            }
        }

        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Adam => {
                let t = self.step_count as i32;
                let correct1 = 1.0 - ADAM_BETA1.powi(t);
                let correct2 = 1.0 - ADAM_BETA2.powi(t);
                for (((p, g), m), v) in model
                    .param_blocks_mut()
                    .into_iter()
                    .zip(grad.blocks())
                    .zip(self.first_moment.blocks_mut())
                    .zip(self.second_moment.blocks_mut())
                {
                    for (((pv, &gv), mv), vv) in
                        p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                        *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                        let m_hat = *mv / correct1;
                        let v_hat = *vv / correct2;
                        *pv += lr * m_hat / (v_hat.sqrt() + EPSILON);
                    }
                }
            }
            OptimizerKind::Rmsprop => {
                for ((p, g), v) in model
                    .param_blocks_mut()
                    .into_iter()
                    .zip(grad.blocks())
                    .zip(self.second_moment.blocks_mut())
                {
                    for ((pv, &gv), vv) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                        *vv = RMSPROP_DECAY * *vv + (1.0 - RMSPROP_DECAY) * gv * gv;
                        *pv += lr * gv / (vv.sqrt() + EPSILON);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Central finite differences of `f` at the model's current parameters:
/// coordinate-wise `(f(p + step) - f(p - step)) / (2 step)`.
pub fn finite_diff_grad<F>(model: &MoceModel, f: F, step: f64) -> Result<ParamSet>
where
    F: Fn(&MoceModel) -> Result<f64>,
{
    if !(step.is_finite() && step > 0.0) {
        return Err(MoceError::Validation(format!(
            "finite-difference step must be a finite positive real, got {}",
            step
        )));
    }
    let names = model.block_names();
    let mut work = model.clone();
    let mut out = ParamSet::zeros_like(model);
    let shapes: Vec<(usize, usize)> = model.param_blocks().iter().map(|b| b.dim()).collect();
    for (b, &(rows, cols)) in shapes.iter().enumerate() {
        for r in 0..rows {
            for c in 0..cols {
                let orig = model.param_blocks()[b][[r, c]];
                work.param_blocks_mut()[b][[r, c]] = orig + step;
                let hi = f(&work)?;
                work.param_blocks_mut()[b][[r, c]] = orig - step;
                let lo = f(&work)?;
                work.param_blocks_mut()[b][[r, c]] = orig;
                if !hi.is_finite() || !lo.is_finite() {
                    return Err(MoceError::NonFiniteGradient(format!(
                        "finite differences hit a non-finite probe at block '{}' entry ({}, {})",
                        names[b], r, c
                    )));
                }
                out.blocks_mut()[b][[r, c]] = (hi - lo) / (2.0 * step);
            }
        }
    }
    Ok(out)
}
