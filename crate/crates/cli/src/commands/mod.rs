pub mod compare;
pub mod eval;
pub mod gen_data;
pub mod gradcheck;
pub mod props;
pub mod train;

use moce_core::{Subject, SurvivalDataset};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

/// Small random instance for gradient and property checks: distinct times,
/// at least one observed event, covariates uniform in [-2, 2].
pub(crate) fn probe_dataset(
    n: usize,
    d: usize,
    event_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SurvivalDataset, CliError> {
    let mut subjects: Vec<Subject> = (0..n)
        .map(|i| Subject {
            covariates: (0..d).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect(),
            event_time: (i as f64 + 1.0) * 0.4 + rng.gen::<f64>() * 0.1,
            event_observed: rng.gen::<f64>() < event_rate,
        })
        .collect();
    if subjects.iter().all(|s| !s.event_observed) {
        subjects[0].event_observed = true;
    }
    Ok(SurvivalDataset::new(subjects)?)
}
