//! Full-batch training with validation-based early stopping.
//!
//! Each epoch takes one optimizer ascent step on the penalized objective,
//! records the post-step training objective, and (when a validation set is
//! present) the validation hard-gating concordance. Training returns the
//! parameter snapshot with the best validation concordance; with no
//! validation set it returns the final parameters. Divergence (non-finite
//! objective or gradient) aborts with the last finite model attached.

use crate::dataset::SurvivalDataset;
use crate::error::{MoceError, Result};
use crate::eval::{concordance_index, TiePolicy};
use crate::grad::grad_total_objective;
use crate::model::{HazardMode,ModelSpec, MoceModel};
use crate::objective::{total_objective, ObjectiveKind};
use crate::optim::{OptimizerKind, OptimizerState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: ObjectiveKind,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_experts: f64,
    /// Seeds parameter initialization in [`train_new`].
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Standard deviation of the initialization draw in [`train_new`].
    pub init_scale: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.objective == ObjectiveKind::Exact {
            return Err(MoceError::Validation(
                "cannot train on the enumeration oracle; use rt or elbo".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(MoceError::Validation(format!(
                "learning rate must be a finite positive real, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(MoceError::Validation("epochs must be positive".into()));
        }
        if !(self.l2_experts.is_finite() && self.l2_experts >= 0.0) {
            return Err(MoceError::Validation(format!(
                "l2 strength must be a finite non-negative real, got {}",
                self.l2_experts
            )));
        }
        if self.patience == 0 {
            return Err(MoceError::Validation("patience must be positive".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(MoceError::Validation(format!(
                "init scale must be a finite non-negative real, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// One row of training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Penalized training objective after this epoch's step.
    pub objective: f64,
    /// Validation hard-gating concordance, when a validation set exists.
    pub val_cindex: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Best-validation snapshot, or the final model without validation.
    pub model: MoceModel,
    pub history: Vec<EpochRecord>,
    /// Epoch of the returned snapshot, when validation drove selection.
    pub best_epoch: Option<usize>,
    /// True when patience ended training before the epoch budget.
    pub stopped_early: bool,
}

/// Epoch-by-epoch stepper. [`train`] drives it to completion; callers that
/// need per-epoch access (e.g. concordance curves) drive it themselves.
pub struct Trainer<'a> {
    model: MoceModel,
    prev: MoceModel,
    optimizer: OptimizerState,
    train: &'a SurvivalDataset,
    objective: ObjectiveKind,
    l2: f64,
    epoch: usize,
    last_objective: f64,
}

impl<'a> Trainer<'a> {
    pub fn new(model: MoceModel, train: &'a SurvivalDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if train.dim() != model.n_features() {
            return Err(MoceError::Dimension(format!(
                "training data has {} features, model expects {}",
                train.dim(),
                model.n_features()
            )));
        }
        train.require_untied()?;
        if train.n_uncensored() == 0 {
            return Err(MoceError::NoUncensoredSubjects);
        }
        let optimizer = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &model)?;
        let last_objective = total_objective(&model, train, cfg.objective, cfg.l2_experts)?;
        Ok(Self {
            prev: model.clone(),
            model,
            optimizer,
            train,
            objective: cfg.objective,
            l2: cfg.l2_experts,
            epoch: 0,
            last_objective,
        })
    }

    pub fn model(&self) -> &MoceModel {
        &self.model
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Penalized training objective at the current parameters.
    pub fn objective_value(&self) -> f64 {
        self.last_objective
    }

    fn diverged(&self, message: String) -> MoceError {
        MoceError::Divergence {
            epoch: self.epoch + 1,
            last_objective: self.last_objective,
            message,
            last_model: Box::new(self.prev.clone()),
        }
    }

    /// One full-batch ascent step; returns the post-step training objective.
    pub fn step(&mut self) -> Result<f64> {
        self.prev = self.model.clone();
        let grad = grad_total_objective(&self.model, self.train, self.objective, self.l2)
            .map_err(|e| self.diverged(format!("gradient failed: {}", e)))?;
        self.optimizer
            .step(&mut self.model, &grad)
            .map_err(|e| self.diverged(format!("optimizer step failed: {}", e)))?;
        let objective = total_objective(&self.model, self.train, self.objective, self.l2)
            .map_err(|e| self.diverged(format!("objective evaluation failed: {}", e)))?;
        if !objective.is_finite() {
            return Err(self.diverged(format!(
                "objective became non-finite ({})",
                objective
            )));
        }
        self.epoch += 1;
        self.last_objective = objective;
        Ok(objective)
    }

    /// Hard-gating hazards on a dataset, mapping non-finite values (blown-up
    /// parameters) to a divergence error.
    pub fn hard_hazards(&self, ds: &SurvivalDataset) -> Result<Vec<f64>> {
        let hazards = self.model.hazards(ds, HazardMode::Hard)?;
        if hazards.iter().any(|h| !h.is_finite()) {
            return Err(self.diverged("hazard predictions became non-finite".into()));
        }
        Ok(hazards)
    }
}

/// Train `model` on `train`, monitoring `val` (may be empty) per the config.
pub fn train(
    model: MoceModel,
    train_ds: &SurvivalDataset,
    val: &SurvivalDataset,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    let monitor = !val.is_empty();
    if monitor {
        val.require_untied()?;
        // comparability depends only on times and events, so check it once
        let probe = vec![1.0; val.len()];
        concordance_index(&probe, val, TiePolicy::Half).map_err(|e| {
            MoceError::Validation(format!(
                "validation split cannot be scored ({}); use the no-validation mode or a larger split",
                e
            ))
        })?;
    }

    let mut trainer = Trainer::new(model, train_ds, cfg)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, MoceModel)> = None;
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        let objective = trainer.step()?;
        let val_cindex = if monitor {
            let hazards = trainer.hard_hazards(val)?;
            Some(concordance_index(&hazards, val, TiePolicy::Strict)?.c_index)
        } else {
            None
        };
        history.push(EpochRecord {
            epoch,
            objective,
            val_cindex,
        });

        if let Some(c) = val_cindex {
            let improved = match &best {
                Some((best_c, _, _)) => c > *best_c,
                None => true,
            };
            if improved {
                best = Some((c, epoch, trainer.model().clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, epoch, snapshot)) => (snapshot, Some(epoch)),
        None => (trainer.model().clone(), None),
    };
    Ok(TrainResult {
        model,
        history,
        best_epoch,
        stopped_early,
    })
}

/// Convenience wrapper: draw a fresh model from `cfg.seed`/`cfg.init_scale`
/// and train it.
pub fn train_new(
    spec: ModelSpec,
    train_ds: &SurvivalDataset,
    val: &SurvivalDataset,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    cfg.validate()?;
    let model = MoceModel::random(spec, cfg.init_scale, cfg.seed)?;
    train(model, train_ds, val, cfg)
}
