//! Synthetic survival data with known mixture structure, for recovery and
//! calibration experiments.
//!
//! Each subject draws covariates from a standard normal, picks an expert from
//! a softmax gate over those covariates, and draws an exponential event time
//! whose rate is the chosen expert's hazard. Censoring replaces a fixed
//! fraction of subjects, chosen at random, with a uniform draw on `(0, t)`.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Subject, SurvivalDataset};
use crate::error::{MoceError, Result};

/// Ground-truth generator parameters.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    /// True expert coefficients, one row per expert (`k x d`).
    pub experts: Array2<f64>,
    /// True gating coefficients (`k x d`); class scores are `gating . x`.
    pub gating: Array2<f64>,
    /// Fraction of subjects to censor, in `[0, 1)`.
    pub censoring: f64,
    pub seed: u64,
}

/// A generated dataset plus its latent ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: SurvivalDataset,
    /// Which expert generated each subject's event time.
    pub assignments: Vec<usize>,
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<SyntheticData> {
        let (k, d) = self.experts.dim();
        if self.gating.dim() != (k, d) {
            return Err(MoceError::Dimension(format!(
                "gating shape {:?} does not match experts shape {:?}",
                self.gating.dim(),
                self.experts.dim()
            )));
        }
        if k == 0 || d == 0 || self.n_subjects == 0 {
            return Err(MoceError::Validation(
                "synthetic generation needs at least one expert, feature and subject".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.censoring) {
            return Err(MoceError::Validation(format!(
                "censoring fraction {} must lie in [0, 1)",
                self.censoring
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut subjects = Vec::with_capacity(self.n_subjects);
        let mut assignments = Vec::with_capacity(self.n_subjects);
        for _ in 0..self.n_subjects {
            let x: Vec<f64> = (0..d)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();

            // softmax over gating scores, max-shifted
            let scores: Vec<f64> = (0..k)
                .map(|row| {
                    self.gating
                        .row(row)
                        .iter()
                        .zip(&x)
                        .map(|(w, v)| w * v)
                        .sum()
                })
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = k - 1;
            for (idx, w) in weights.iter().enumerate() {
                if u < *w {
                    chosen = idx;
                    break;
                }
                u -= w;
            }

            let rate = self
                .experts
                .row(chosen)
                .iter()
                .zip(&x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
                .exp();
            // inverse-CDF exponential draw; 1 - u avoids ln(0)
            let t = -(1.0 - rng.gen::<f64>()).ln() / rate;

            subjects.push(Subject {
                covariates: x,
                event_time: t,
                event_observed: true,
            });
            assignments.push(chosen);
        }

        // censor a fixed-size random subset: replace t with uniform(0, t)
        let n_censor = (self.censoring * self.n_subjects as f64).round() as usize;
        let mut order: Vec<usize> = (0..self.n_subjects).collect();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for &i in order.iter().take(n_censor) {
            let s = &mut subjects[i];
            let mut u = rng.gen::<f64>();
            // keep the censored time strictly positive
            while u == 0.0 {
                u = rng.gen::<f64>();
            }
            s.event_time *= u;
            s.event_observed = false;
        }

        let dataset = SurvivalDataset::new(subjects)?;
        Ok(SyntheticData {
            dataset,
            assignments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec(n: usize, censoring: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_subjects: n,
            experts: array![[1.0, -0.5], [-1.0, 0.5]],
            gating: array![[2.0, 0.0], [-2.0, 0.0]],
            censoring,
            seed,
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = spec(50, 0.2, 3).generate().unwrap();
        let b = spec(50, 0.2, 3).generate().unwrap();
        assert_eq!(a.dataset.subjects(), b.dataset.subjects());
        assert_eq!(a.assignments, b.assignments);
        let c = spec(50, 0.2, 4).generate().unwrap();
        assert_ne!(a.dataset.subjects(), c.dataset.subjects());
    }

    #[test]
    fn censoring_fraction_exact() {
        let out = spec(200, 0.3, 9).generate().unwrap();
        let censored = out
            .dataset
            .subjects()
            .iter()
            .filter(|s| !s.event_observed)
            .count();
        assert_eq!(censored, 60);
    }

    #[test]
    fn times_positive_and_assignments_in_range() {
        let out = spec(100, 0.1, 1).generate().unwrap();
        assert!(out.dataset.subjects().iter().all(|s| s.event_time > 0.0));
        assert!(out.assignments.iter().all(|&a| a < 2));
    }

    #[test]
    fn sharp_gating_tracks_sign() {
        // with gate weights (+-20, 0), assignment is x0's sign almost surely
        let spec = SyntheticSpec {
            n_subjects: 300,
            experts: array![[0.5, 0.0], [-0.5, 0.0]],
            gating: array![[20.0, 0.0], [-20.0, 0.0]],
            censoring: 0.0,
            seed: 5,
        };
        let out = spec.generate().unwrap();
        // away from the boundary the flip probability is < 1e-3
        let mismatches = out
            .dataset
            .subjects()
            .iter()
            .zip(&out.assignments)
            .filter(|(s, &a)| {
                let want = if s.covariates[0] > 0.0 { 0 } else { 1 };
                s.covariates[0].abs() > 0.2 && a != want
            })
            .count();
        assert_eq!(mismatches, 0, "got {mismatches} mismatches");
    }

    #[test]
    fn unit_rate_times_have_unit_mean() {
        // zero expert coefficients give rate 1 regardless of x, so event
        // times are standard exponentials; the sample mean has sd 1/sqrt(n)
        let spec = SyntheticSpec {
            n_subjects: 4000,
            experts: array![[0.0, 0.0]],
            gating: array![[0.0, 0.0]],
            censoring: 0.0,
            seed: 21,
        };
        let out = spec.generate().unwrap();
        let mean: f64 = out
            .dataset
            .subjects()
            .iter()
            .map(|s| s.event_time)
            .sum::<f64>()
            / 4000.0;
        assert!((mean - 1.0).abs() < 3.0 / (4000.0_f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn rejects_bad_shapes_and_fractions() {
        let mut s = spec(10, 0.2, 1);
        s.gating = array![[1.0, 0.0]];
        assert!(s.generate().is_err());
        let s = spec(10, 1.0, 1);
        assert!(s.generate().is_err());
    }
}
