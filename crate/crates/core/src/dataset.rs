//! Survival dataset core: subjects, risk sets, CSV ingestion, standardization
//! and reproducible splits.
//!
//! A dataset is a list of `(covariates, event_time, event_observed)` triplets
//! plus a permutation sorting subjects by ascending event time. Risk sets are
//! suffixes of that permutation. Exactly tied event times corrupt risk-set
//! semantics, so ties are detected at construction and rejected by every
//! consumer that relies on a total time order; the CSV loader can break them
//! with seeded jitter instead.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MoceError, Result};

/// One study subject: covariate vector, observed time, and whether the event
/// was observed (`false` = right-censored).
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub covariates: Vec<f64>,
    pub event_time: f64,
    pub event_observed: bool,
}

/// Immutable survival dataset. Shareable across threads; all views are
/// read-only after construction.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    subjects: Vec<Subject>,
    dim: usize,
    /// Subject indices ordered by ascending event time.
    sorted_order: Vec<usize>,
    /// True when at least two subjects share an exact event time.
    tied_times: bool,
}

/// Risk set of an anchor subject: everyone still under observation at the
/// anchor's event time, i.e. `{j : t_j >= t_anchor}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskSet {
    pub anchor: usize,
    /// Member indices in ascending event-time order; always contains `anchor`.
    pub members: Vec<usize>,
}

impl SurvivalDataset {
    /// Build a dataset from subjects, validating times and dimensions and
    /// computing the time ordering. Tied times are flagged, not rejected;
    /// consumers that need a strict order check [`SurvivalDataset::has_tied_times`].
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        let dim = subjects.first().map(|s| s.covariates.len()).unwrap_or(0);
        Self::with_dim(subjects, dim)
    }

    /// Like [`SurvivalDataset::new`] but with an explicit dimension, so empty
    /// datasets (e.g. an empty validation split) keep a meaningful `dim`.
    pub fn with_dim(subjects: Vec<Subject>, dim: usize) -> Result<Self> {
        for (i, s) in subjects.iter().enumerate() {
            if s.covariates.len() != dim {
                return Err(MoceError::Dimension(format!(
                    "subject {} has {} covariates, expected {}",
                    i,
                    s.covariates.len(),
                    dim
                )));
            }
            if !(s.event_time.is_finite() && s.event_time > 0.0) {
                return Err(MoceError::Validation(format!(
                    "subject {} has non-positive or non-finite event time {}",
                    i, s.event_time
                )));
            }
            if let Some(j) = s.covariates.iter().position(|v| !v.is_finite()) {
                return Err(MoceError::Validation(format!(
                    "subject {} has non-finite covariate at index {}",
                    i, j
                )));
            }
        }
        let mut sorted_order: Vec<usize> = (0..subjects.len()).collect();
        sorted_order.sort_by(|&a, &b| {
            subjects[a]
                .event_time
                .partial_cmp(&subjects[b].event_time)
                .expect("finite times")
                .then(a.cmp(&b))
        });
        let tied_times = sorted_order
            .windows(2)
            .any(|w| subjects[w[0]].event_time == subjects[w[1]].event_time);
        Ok(Self {
            subjects,
            dim,
            sorted_order,
            tied_times,
        })
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn subject(&self, i: usize) -> &Subject {
        &self.subjects[i]
    }

    /// Subject indices by ascending event time.
    pub fn sorted_order(&self) -> &[usize] {
        &self.sorted_order
    }

    pub fn has_tied_times(&self) -> bool {
        self.tied_times
    }

    pub fn n_uncensored(&self) -> usize {
        self.subjects.iter().filter(|s| s.event_observed).count()
    }

    /// Error unless all event times are distinct. Risk-set consumers call this.
    pub fn require_untied(&self) -> Result<()> {
        if self.tied_times {
            Err(MoceError::Validation(
                "dataset has exactly tied event times; resolve ties (e.g. loader jitter) first"
                    .into(),
            ))
        } else {
            Ok(())
        }
    }

    /// Position of subject `i` within `sorted_order`, by binary search on its
    /// event time. Requires untied times.
    pub fn sorted_position(&self, i: usize) -> Result<usize> {
        if i >= self.len() {
            return Err(MoceError::Validation(format!(
                "subject index {} out of range (n = {})",
                i,
                self.len()
            )));
        }
        self.require_untied()?;
        let t = self.subjects[i].event_time;
        let p = self
            .sorted_order
            .partition_point(|&j| self.subjects[j].event_time < t);
        debug_assert_eq!(self.sorted_order[p], i);
        Ok(p)
    }

    /// Risk set of subject `i`: O(log n) lookup plus O(|members|) copy.
    pub fn risk_set(&self, i: usize) -> Result<RiskSet> {
        let p = self.sorted_position(i)?;
        Ok(RiskSet {
            anchor: i,
            members: self.sorted_order[p..].to_vec(),
        })
    }

    /// Dataset restricted to `indices` (original relative order preserved).
    pub fn select(&self, indices: &[usize]) -> Result<SurvivalDataset> {
        let subjects = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        SurvivalDataset::with_dim(subjects, self.dim)
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Column mapping for CSV ingestion. When `feature_cols` is `None`, every
/// column other than time and event is a feature, in header order.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub time_col: String,
    pub event_col: String,
    pub feature_cols: Option<Vec<String>>,
}

/// Policy for exactly tied event times in loaded data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TieBreak {
    /// Reject the file with a validation error naming the tied time.
    Fail,
    /// Break ties by adding seed-derived perturbations of magnitude at most
    /// `eps` times the minimum positive gap between distinct times.
    Jitter { eps: f64, seed: u64 },
}

/// Load a survival dataset from a comma-separated, header-first, UTF-8 CSV
/// with `.` decimal separators. Returns the dataset and the feature column
/// names in dataset order.
pub fn load_csv(
    path: &Path,
    schema: &CsvSchema,
    ties: TieBreak,
) -> Result<(SurvivalDataset, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                MoceError::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("cannot open '{}': {}", path.display(), e),
                ))
            }
            _ => MoceError::Schema(format!("cannot read '{}': {}", path.display(), e)),
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| MoceError::Schema(format!("cannot read header: {}", e)))?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MoceError::Schema(format!("missing column '{}'", name)))
    };

    let time_idx = col_index(&schema.time_col)?;
    let event_idx = col_index(&schema.event_col)?;
    if time_idx == event_idx {
        return Err(MoceError::Schema(format!(
            "time and event columns both map to '{}'",
            schema.time_col
        )));
    }

    let feature_names: Vec<String> = match &schema.feature_cols {
        Some(cols) => {
            for c in cols {
                let idx = col_index(c)?;
                if idx == time_idx || idx == event_idx {
                    return Err(MoceError::Schema(format!(
                        "feature column '{}' collides with time/event column",
                        c
                    )));
                }
            }
            cols.clone()
        }
        None => headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != time_idx && i != event_idx)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    if feature_names.is_empty() {
        return Err(MoceError::Schema("no feature columns".into()));
    }
    let feature_idx: Vec<usize> = feature_names
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;

    let parse_cell = |row: usize, column: &str, raw: &str| -> Result<f64> {
        raw.parse::<f64>().map_err(|_| MoceError::Parse {
            row,
            column: column.to_string(),
            message: format!("'{}' is not a number", raw),
        })
    };

    let mut subjects = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| MoceError::Parse {
            row,
            column: "<record>".into(),
            message: e.to_string(),
        })?;
        let get = |idx: usize, column: &str| -> Result<&str> {
            record.get(idx).ok_or_else(|| MoceError::Parse {
                row,
                column: column.to_string(),
                message: "missing cell".into(),
            })
        };

        let time = parse_cell(row, &schema.time_col, get(time_idx, &schema.time_col)?)?;
        if !(time.is_finite() && time > 0.0) {
            return Err(MoceError::Validation(format!(
                "row {}: event time {} must be a positive real",
                row, time
            )));
        }
        let event_raw = get(event_idx, &schema.event_col)?;
        let event = match event_raw {
            "0" => false,
            "1" => true,
            other => {
                return Err(MoceError::Validation(format!(
                    "row {}: event value '{}' must be 0 or 1",
                    row, other
                )))
            }
        };
        let covariates = feature_idx
            .iter()
            .zip(&feature_names)
            .map(|(&idx, name)| parse_cell(row, name, get(idx, name)?))
            .collect::<Result<Vec<f64>>>()?;
        subjects.push(Subject {
            covariates,
            event_time: time,
            event_observed: event,
        });
    }
    if subjects.is_empty() {
        return Err(MoceError::Validation("file contains no data rows".into()));
    }

    let mut ds = SurvivalDataset::new(subjects)?;
    if ds.has_tied_times() {
        match ties {
            TieBreak::Fail => {
                let t = first_tied_time(&ds);
                return Err(MoceError::Validation(format!(
                    "tied event times detected (e.g. t = {}); rerun with jitter to break ties",
                    t
                )));
            }
            TieBreak::Jitter { eps, seed } => {
                ds = jitter_ties(ds, eps, seed)?;
            }
        }
    }
    Ok((ds, feature_names))
}

fn first_tied_time(ds: &SurvivalDataset) -> f64 {
    let ord = ds.sorted_order();
    for w in ord.windows(2) {
        let (a, b) = (ds.subject(w[0]).event_time, ds.subject(w[1]).event_time);
        if a == b {
            return a;
        }
    }
    f64::NAN
}

/// Add deterministic perturbations in `[0, eps * min_gap)` to every subject in
/// a tied group, where `min_gap` is the smallest positive gap between distinct
/// sorted times. Perturbations are drawn in ascending subject-index order.
fn jitter_ties(ds: SurvivalDataset, eps: f64, seed: u64) -> Result<SurvivalDataset> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(MoceError::Validation(format!(
            "jitter eps must be a positive real, got {}",
            eps
        )));
    }
    let ord = ds.sorted_order();
    let min_gap = ord
        .windows(2)
        .map(|w| ds.subject(w[1]).event_time - ds.subject(w[0]).event_time)
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_gap.is_finite() {
        return Err(MoceError::Validation(
            "all event times are identical; no positive gap to derive a jitter scale from".into(),
        ));
    }

    let mut tied: HashSet<usize> = HashSet::new();
    for w in ord.windows(2) {
        if ds.subject(w[0]).event_time == ds.subject(w[1]).event_time {
            tied.insert(w[0]);
            tied.insert(w[1]);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = eps * min_gap;
    let mut subjects = ds.subjects().to_vec();
    for (i, s) in subjects.iter_mut().enumerate() {
        if tied.contains(&i) {
            s.event_time += rng.gen::<f64>() * scale;
        }
    }
    let ds = SurvivalDataset::new(subjects)?;
    ds.require_untied().map_err(|_| {
        MoceError::Validation("jitter failed to separate tied event times; retry with a different seed".into())
    })?;
    Ok(ds)
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// What to do with zero-variance feature columns during standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroVariancePolicy {
    /// Report the offending column indices as an error.
    Error,
    /// Drop the offending columns.
    Drop,
    /// Keep the offending columns untransformed.
    Keep,
}

/// Per-feature statistics from a training set, reusable on held-out data so
/// both sets see the identical affine transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    /// Feature count of the dataset the transform was fitted on.
    pub input_dim: usize,
    /// Original-space column indices retained in the output.
    pub kept: Vec<usize>,
    /// Means of the kept columns (original-space values).
    pub means: Vec<f64>,
    /// Sample standard deviations (n-1 denominator) of the kept columns.
    /// Constant columns kept under [`ZeroVariancePolicy::Keep`] carry
    /// `mean = 0, sd = 1` so the transform is the identity there.
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Apply the fitted transform to another dataset of the same original width.
    pub fn apply(&self, ds: &SurvivalDataset) -> Result<SurvivalDataset> {
        if ds.dim() != self.input_dim {
            return Err(MoceError::Dimension(format!(
                "standardizer was fitted on {} feature columns, dataset has {}",
                self.input_dim,
                ds.dim()
            )));
        }
        let subjects = ds
            .subjects()
            .iter()
            .map(|s| Subject {
                covariates: self
                    .kept
                    .iter()
                    .enumerate()
                    .map(|(out, &col)| (s.covariates[col] - self.means[out]) / self.sds[out])
                    .collect(),
                event_time: s.event_time,
                event_observed: s.event_observed,
            })
            .collect();
        SurvivalDataset::with_dim(subjects, self.kept.len())
    }
}

/// Standardize every feature to sample mean 0 and sample standard deviation 1
/// (n-1 denominator). Returns the transformed dataset and the fitted stats.
pub fn standardize(
    ds: &SurvivalDataset,
    policy: ZeroVariancePolicy,
) -> Result<(SurvivalDataset, Standardizer)> {
    let n = ds.len();
    if n < 2 {
        return Err(MoceError::Validation(format!(
            "standardize requires at least 2 subjects, got {}",
            n
        )));
    }
    let d = ds.dim();
    let nf = n as f64;

    let mut means = vec![0.0; d];
    for s in ds.subjects() {
        for (m, &v) in means.iter_mut().zip(&s.covariates) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= nf;
    }
    let mut vars = vec![0.0; d];
    for s in ds.subjects() {
        for ((var, &v), &m) in vars.iter_mut().zip(&s.covariates).zip(&means) {
            *var += (v - m) * (v - m);
        }
    }
    for var in &mut vars {
        *var /= nf - 1.0;
    }

    let zero_var: Vec<usize> = (0..d).filter(|&j| vars[j] == 0.0).collect();
    if !zero_var.is_empty() && policy == ZeroVariancePolicy::Error {
        return Err(MoceError::ZeroVariance(zero_var));
    }

    let mut kept = Vec::new();
    let mut out_means = Vec::new();
    let mut out_sds = Vec::new();
    for j in 0..d {
        if vars[j] == 0.0 {
            match policy {
                ZeroVariancePolicy::Drop => continue,
                // identity transform for constant columns
                ZeroVariancePolicy::Keep => {
                    kept.push(j);
                    out_means.push(0.0);
                    out_sds.push(1.0);
                }
                ZeroVariancePolicy::Error => unreachable!(),
            }
        } else {
            kept.push(j);
            out_means.push(means[j]);
            out_sds.push(vars[j].sqrt());
        }
    }
    if kept.is_empty() {
        return Err(MoceError::ZeroVariance(zero_var));
    }
    let stats = Standardizer {
        input_dim: ds.dim(),
        kept,
        means: out_means,
        sds: out_sds,
    };
    let out = stats.apply(ds)?;
    Ok((out, stats))
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

/// Disjoint, exhaustive train/validation/test split, reproducible from `seed`.
///
/// Sizes are `round(frac * n)` for train and validation; test takes the
/// remainder. An empty validation split is an error unless
/// `allow_empty_validation` is set; empty train or test splits are always
/// errors.
pub fn split(
    ds: &SurvivalDataset,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
    allow_empty_validation: bool,
) -> Result<(SurvivalDataset, SurvivalDataset, SurvivalDataset)> {
    if !(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0) {
        return Err(MoceError::Validation(format!(
            "split fractions out of range: train {} + validation {} must be < 1",
            train_frac, val_frac
        )));
    }
    let n = ds.len();
    let n_train = (train_frac * n as f64).round() as usize;
    let n_val = (val_frac * n as f64).round() as usize;
    if n_train + n_val > n {
        return Err(MoceError::Validation(
            "split would be empty: rounded train + validation exceed n".into(),
        ));
    }
    let n_test = n - n_train - n_val;
    if n_test == 0 {
        return Err(MoceError::Validation("split would be empty: test".into()));
    }
    if n_train == 0 {
        return Err(MoceError::Validation("split would be empty: train".into()));
    }
    if n_val == 0 && !allow_empty_validation {
        return Err(MoceError::Validation(
            "split would be empty: validation (pass the no-validation flag to allow)".into(),
        ));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    let take = |count: usize, from: &mut usize| -> Vec<usize> {
        let mut part = indices[*from..*from + count].to_vec();
        *from += count;
        part.sort_unstable();
        part
    };
    let mut cursor = 0;
    let train_idx = take(n_train, &mut cursor);
    let val_idx = take(n_val, &mut cursor);
    let test_idx = take(n_test, &mut cursor);

    Ok((
        ds.select(&train_idx)?,
        ds.select(&val_idx)?,
        ds.select(&test_idx)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ds_from(times: &[f64], events: &[bool]) -> SurvivalDataset {
        let subjects = times
            .iter()
            .zip(events)
            .map(|(&t, &e)| Subject {
                covariates: vec![t],
                event_time: t,
                event_observed: e,
            })
            .collect();
        SurvivalDataset::new(subjects).unwrap()
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn schema() -> CsvSchema {
        CsvSchema {
            time_col: "time".into(),
            event_col: "event".into(),
            feature_cols: None,
        }
    }

    #[test]
    fn load_sorted_file_identity_order() {
        let f = write_csv("a,b,time,event\n0.1,0.2,1,1\n0.3,0.4,2,1\n0.5,0.6,3,0\n");
        let (ds, names) = load_csv(f.path(), &schema(), TieBreak::Fail).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(ds.sorted_order(), &[0, 1, 2]);
    }

    #[test]
    fn load_unsorted_file_sorted_order() {
        let f = write_csv("a,b,time,event\n0.1,0.2,3,1\n0.3,0.4,1,1\n0.5,0.6,2,0\n");
        let (ds, _) = load_csv(f.path(), &schema(), TieBreak::Fail).unwrap();
        assert_eq!(ds.sorted_order(), &[1, 2, 0]);
    }

    #[test]
    fn load_rejects_bad_event_value() {
        let f = write_csv("a,time,event\n0.1,1,2\n");
        let err = load_csv(f.path(), &schema(), TieBreak::Fail).unwrap_err();
        assert!(matches!(err, MoceError::Validation(_)), "{err}");
    }

    #[test]
    fn load_rejects_missing_column() {
        let f = write_csv("a,time\n0.1,1\n");
        let err = load_csv(f.path(), &schema(), TieBreak::Fail).unwrap_err();
        match err {
            MoceError::Schema(msg) => assert!(msg.contains("event"), "{msg}"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn load_reports_parse_position() {
        let f = write_csv("a,time,event\n0.1,1,1\nbogus,2,1\n");
        let err = load_csv(f.path(), &schema(), TieBreak::Fail).unwrap_err();
        match err {
            MoceError::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn load_rejects_nonpositive_time() {
        let f = write_csv("a,time,event\n0.1,0,1\n");
        assert!(load_csv(f.path(), &schema(), TieBreak::Fail).is_err());
    }

    #[test]
    fn load_detects_ties_and_jitter_resolves() {
        let content = "a,time,event\n0.1,2,1\n0.2,2,1\n0.3,5,0\n";
        let f = write_csv(content);
        let err = load_csv(f.path(), &schema(), TieBreak::Fail).unwrap_err();
        assert!(matches!(err, MoceError::Validation(_)));

        let (ds, _) = load_csv(
            f.path(),
            &schema(),
            TieBreak::Jitter {
                eps: 0.01,
                seed: 11,
            },
        )
        .unwrap();
        assert!(!ds.has_tied_times());
        // jitter stays below eps * min_gap = 0.03; untied subject untouched
        assert!((ds.subject(0).event_time - 2.0).abs() < 0.03);
        assert!((ds.subject(1).event_time - 2.0).abs() < 0.03);
        assert_eq!(ds.subject(2).event_time, 5.0);
    }

    #[test]
    fn risk_set_extremes() {
        let ds = ds_from(&[1.0, 2.0, 3.0], &[true, true, true]);
        // latest time: singleton
        assert_eq!(ds.risk_set(2).unwrap().members, vec![2]);
        // earliest time: everyone
        assert_eq!(ds.risk_set(0).unwrap().members, vec![0, 1, 2]);
        // middle
        assert_eq!(ds.risk_set(1).unwrap().members, vec![1, 2]);
    }

    #[test]
    fn risk_set_rejects_out_of_range() {
        let ds = ds_from(&[1.0, 2.0], &[true, true]);
        assert!(ds.risk_set(2).is_err());
    }

    #[test]
    fn standardize_two_point_column() {
        let ds = ds_from(&[1.0, 3.0], &[true, true]);
        let (out, stats) = standardize(&ds, ZeroVariancePolicy::Error).unwrap();
        assert_eq!(stats.means, vec![2.0]);
        assert!((stats.sds[0] - 2.0_f64.sqrt()).abs() < 1e-15);
        let expect = 1.0 / 2.0_f64.sqrt();
        assert!((out.subject(0).covariates[0] + expect).abs() < 1e-15);
        assert!((out.subject(1).covariates[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn standardize_constant_column_policies() {
        let subjects = vec![
            Subject {
                covariates: vec![1.0, 5.0],
                event_time: 1.0,
                event_observed: true,
            },
            Subject {
                covariates: vec![2.0, 5.0],
                event_time: 2.0,
                event_observed: true,
            },
        ];
        let ds = SurvivalDataset::new(subjects).unwrap();
        match standardize(&ds, ZeroVariancePolicy::Error).unwrap_err() {
            MoceError::ZeroVariance(idx) => assert_eq!(idx, vec![1]),
            other => panic!("expected zero-variance error, got {other}"),
        }
        let (dropped, stats) = standardize(&ds, ZeroVariancePolicy::Drop).unwrap();
        assert_eq!(dropped.dim(), 1);
        assert_eq!(stats.kept, vec![0]);
        let (kept, stats) = standardize(&ds, ZeroVariancePolicy::Keep).unwrap();
        assert_eq!(kept.dim(), 2);
        assert_eq!(kept.subject(0).covariates[1], 5.0);
        assert_eq!(stats.sds[1], 1.0);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let times: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let events = vec![true; 100];
        let ds = ds_from(&times, &events);
        let (tr, va, te) = split(&ds, 0.7, 0.1, 7, false).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (70, 10, 20));
        let (tr2, va2, te2) = split(&ds, 0.7, 0.1, 7, false).unwrap();
        assert_eq!(tr.subjects(), tr2.subjects());
        assert_eq!(va.subjects(), va2.subjects());
        assert_eq!(te.subjects(), te2.subjects());
    }

    #[test]
    fn split_empty_validation_needs_flag() {
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let ds = ds_from(&times, &[true; 10]);
        assert!(split(&ds, 0.8, 0.0, 1, false).is_err());
        let (tr, va, te) = split(&ds, 0.8, 0.0, 1, true).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (8, 0, 2));
    }

    #[test]
    fn split_empty_test_rejected() {
        let times: Vec<f64> = (1..=5).map(|i| i as f64).collect();
        let ds = ds_from(&times, &[true; 5]);
        let err = split(&ds, 0.9, 0.09, 1, true).unwrap_err();
        match err {
            MoceError::Validation(msg) => assert!(msg.contains("test"), "{msg}"),
            other => panic!("unexpected error {other}"),
        }
    }
}
