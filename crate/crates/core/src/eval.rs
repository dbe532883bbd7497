//! Concordance index with censoring-aware comparable pairs, plus bootstrap
//! percentile bands.
//!
//! A pair `(i, j)` is comparable iff subject `i` had an observed event and
//! `t_i < t_j`; the c-index is the fraction of comparable pairs ranked
//! correctly by hazard. Ranking ties are counted separately so both tie
//! policies derive from one pass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use std::str::FromStr;

use crate::dataset::SurvivalDataset;
use crate::error::{MoceError, Result};

/// How exactly tied hazard predictions score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    /// A pair counts only when the earlier-event subject's hazard is strictly
    /// greater (the indicator definition). Default.
    Strict,
    /// Exactly tied hazards credit half a pair (Harrell's convention).
    Half,
}

impl TiePolicy {
    pub fn name(self) -> &'static str {
        match self {
            TiePolicy::Strict => "strict",
            TiePolicy::Half => "half",
        }
    }
}

impl FromStr for TiePolicy {
    type Err = MoceError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(TiePolicy::Strict),
            "half" => Ok(TiePolicy::Half),
            other => Err(MoceError::Validation(format!(
                "unknown tie policy '{}' (expected strict or half)",
                other
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcordanceResult {
    pub c_index: f64,
    pub n_comparable: u64,
    /// Pairs where the earlier-event subject's hazard is strictly greater.
    pub n_concordant: u64,
    /// Comparable pairs with exactly tied hazards.
    pub n_tied_predictions: u64,
}

/// All comparable pairs `(i, j)`: `i` uncensored and `t_i < t_j`.
pub fn comparable_pairs(ds: &SurvivalDataset) -> Vec<(usize, usize)> {
    let n = ds.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        if !ds.subject(i).event_observed {
            continue;
        }
        let ti = ds.subject(i).event_time;
        for j in 0..n {
            if ti < ds.subject(j).event_time {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Counting pass shared by the public entry points and the bootstrap, working
/// on parallel (time, event, hazard) arrays so resamples need no dataset.
fn concordance_from_parts(
    times: &[f64],
    events: &[bool],
    hazards: &[f64],
    policy: TiePolicy,
) -> Result<ConcordanceResult> {
    let n = times.len();
    let mut n_comparable = 0u64;
    let mut n_concordant = 0u64;
    let mut n_tied = 0u64;
    for i in 0..n {
        if !events[i] {
            continue;
        }
        for j in 0..n {
            if times[i] < times[j] {
                n_comparable += 1;
                if hazards[i] > hazards[j] {
                    n_concordant += 1;
                } else if hazards[i] == hazards[j] {
                    n_tied += 1;
                }
            }
        }
    }
    if n_comparable == 0 {
        return Err(MoceError::NoComparablePairs(
            "no comparable pairs: need an uncensored subject with a strictly later companion"
                .into(),
        ));
    }
    let credited = match policy {
        TiePolicy::Strict => n_concordant as f64,
        TiePolicy::Half => n_concordant as f64 + 0.5 * n_tied as f64,
    };
    Ok(ConcordanceResult {
        c_index: credited / n_comparable as f64,
        n_comparable,
        n_concordant,
        n_tied_predictions: n_tied,
    })
}

/// Concordance of per-subject hazard predictions against observed outcomes.
pub fn concordance_index(
    hazards: &[f64],
    ds: &SurvivalDataset,
    policy: TiePolicy,
) -> Result<ConcordanceResult> {
    if hazards.len() != ds.len() {
        return Err(MoceError::Dimension(format!(
            "{} hazards for {} subjects",
            hazards.len(),
            ds.len()
        )));
    }
    if let Some(i) = hazards.iter().position(|h| !h.is_finite()) {
        return Err(MoceError::Validation(format!(
            "hazard for subject {} is not finite",
            i
        )));
    }
    let times: Vec<f64> = ds.subjects().iter().map(|s| s.event_time).collect();
    let events: Vec<bool> = ds.subjects().iter().map(|s| s.event_observed).collect();
    concordance_from_parts(&times, &events, hazards, policy)
}

/// Percentile confidence band from resampling subjects with replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapBand {
    /// C-index on the full dataset.
    pub point: f64,
    /// One c-index per resample, in resample order.
    pub samples: Vec<f64>,
    /// 2.5th percentile of the samples.
    pub lower: f64,
    /// 97.5th percentile of the samples.
    pub upper: f64,
    pub seed: u64,
}

/// Bootstrap band over `b` resamples. Each resample draws `n` subjects with
/// replacement (hazards travel with subjects) from an RNG stream derived from
/// `(seed, resample index)`, so results are independent of evaluation order
/// and thread count. Resamples without comparable pairs are redrawn, up to
/// 100 attempts each.
pub fn bootstrap_ci(
    hazards: &[f64],
    ds: &SurvivalDataset,
    b: usize,
    seed: u64,
    policy: TiePolicy,
) -> Result<BootstrapBand> {
    if b < 2 {
        return Err(MoceError::Validation(format!(
            "bootstrap needs at least 2 resamples, got {}",
            b
        )));
    }
    let point = concordance_index(hazards, ds, policy)?.c_index;
    let times: Vec<f64> = ds.subjects().iter().map(|s| s.event_time).collect();
    let events: Vec<bool> = ds.subjects().iter().map(|s| s.event_observed).collect();
    let n = ds.len();

    let samples: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let mut rs_times = vec![0.0; n];
            let mut rs_events = vec![false; n];
            let mut rs_hazards = vec![0.0; n];
            for _attempt in 0..100 {
                for slot in 0..n {
                    let pick = rng.gen_range(0..n);
                    rs_times[slot] = times[pick];
                    rs_events[slot] = events[pick];
                    rs_hazards[slot] = hazards[pick];
                }
                match concordance_from_parts(&rs_times, &rs_events, &rs_hazards, policy) {
                    Ok(r) => return Ok(r.c_index),
                    Err(MoceError::NoComparablePairs(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(MoceError::Validation(format!(
                "bootstrap resample {} stayed degenerate after 100 redraws",
                idx
            )))
        })
        .collect::<Result<_>>()?;

    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite c-indices"));
    let band = BootstrapBand {
        point,
        lower: percentile(&sorted, 2.5),
        upper: percentile(&sorted, 97.5),
        samples,
        seed,
    };
    Ok(band)
}

/// Linear-interpolation percentile of an ascending slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}
