//! Mixture-of-Cox-experts survival modeling.
//!
//! A proportional-hazards mixture: a softmax gating network assigns each
//! subject a distribution over linear Cox experts, and risk-set objectives
//! train both jointly. Three objectives share one interface — an enumeration
//! oracle that marginalizes expert assignments exactly (`exact`), a
//! ratio-of-expectations approximation (`rt`), and a variational lower bound
//! (`elbo`) — together with full-batch optimizers, concordance evaluation
//! with bootstrap bands, and seeded synthetic data generation.
//!
//! Everything downstream of a seed is deterministic: RNG streams are fixed,
//! reductions run in fixed orders, and parallel sections merge results in
//! index order.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod grad;
pub mod model;
pub mod objective;
pub mod optim;
pub mod synthetic;
pub mod train;

pub use dataset::{
    load_csv, split, standardize, CsvSchema, RiskSet, Standardizer, Subject, SurvivalDataset,
    TieBreak, ZeroVariancePolicy,
};
pub use error::{MoceError, Result};
pub use eval::{
    bootstrap_ci, comparable_pairs, concordance_index, BootstrapBand, ConcordanceResult, TiePolicy,
};
pub use grad::grad_total_objective;
pub use model::{
    design_matrix, Activation, GatingForward, GatingKind, HazardMode, ModelSpec, MoceModel,
    ParamSet,
};
pub use objective::{
    cph_partial_loglik, elbo, exact_loglik, phi_decomposition, rt_objective, total_objective,
    ObjectiveKind, PhiDecomposition, ENUMERATION_CAP,
};
pub use optim::{finite_diff_grad, OptimizerKind, OptimizerState};
pub use synthetic::{SyntheticData, SyntheticSpec};
pub use train::{train, train_new, EpochRecord, TrainConfig, TrainResult, Trainer};
