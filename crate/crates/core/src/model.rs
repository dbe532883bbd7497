//! The mixture-of-Cox-experts model: a bank of expert coefficient vectors and
//! a softmax gating network (linear, or a multilayer perceptron), with no bias
//! terms anywhere.
//!
//! Subjects with covariates `x` get per-expert log-hazards `eta_k = beta_k . x`
//! and mixing probabilities `g(x) = softmax(gating(x))`. Parameters live in
//! dense blocks (one experts matrix, one matrix per gating layer) so the
//! optimizer and gradients can treat the model as an ordered list of arrays.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayViewMut1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Standardizer, SurvivalDataset};
use crate::error::{MoceError, Result};

/// Hidden-layer activation for the gating perceptron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Selu,
    Sigmoid,
}

const SELU_SCALE: f64 = 1.0507009873554805;
const SELU_ALPHA: f64 = 1.6732632423543772;

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Selu => {
                if z > 0.0 {
                    SELU_SCALE * z
                } else {
                    SELU_SCALE * SELU_ALPHA * (z.exp() - 1.0)
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output `a = apply(z)`.
    /// All three activations are invertible enough for this on each branch.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Selu => {
                if a > 0.0 {
                    SELU_SCALE
                } else {
                    // a = s*alpha*(e^z - 1)  =>  s*alpha*e^z = a + s*alpha
                    a + SELU_SCALE * SELU_ALPHA
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Selu => "selu",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl FromStr for Activation {
    type Err = MoceError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "selu" => Ok(Activation::Selu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(MoceError::Validation(format!(
                "unknown activation '{}' (expected relu, selu or sigmoid)",
                other
            ))),
        }
    }
}

/// Gating architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GatingKind {
    /// Single weight matrix, softmax output.
    Linear,
    /// Hidden layers of the given widths, then a softmax output layer.
    Mlp {
        hidden: Vec<usize>,
        activation: Activation,
    },
}

impl GatingKind {
    pub fn hidden_widths(&self) -> &[usize] {
        match self {
            GatingKind::Linear => &[],
            GatingKind::Mlp { hidden, .. } => hidden,
        }
    }

    fn activation(&self) -> Activation {
        match self {
            // no hidden layers, so the choice is inert
            GatingKind::Linear => Activation::Relu,
            GatingKind::Mlp { activation, .. } => *activation,
        }
    }
}

/// Architecture description: input width, expert count, gating shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub n_features: usize,
    pub n_experts: usize,
    pub gating: GatingKind,
}

impl ModelSpec {
    /// Widths of the gating network including input and output:
    /// `[d, hidden..., k]`.
    fn layer_widths(&self) -> Vec<usize> {
        let mut widths = vec![self.n_features];
        widths.extend_from_slice(self.gating.hidden_widths());
        widths.push(self.n_experts);
        widths
    }

    fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_experts == 0 {
            return Err(MoceError::Validation(
                "model needs at least one feature and one expert".into(),
            ));
        }
        if self.gating.hidden_widths().contains(&0) {
            return Err(MoceError::Validation(
                "gating hidden layer widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Full model state.
#[derive(Debug, Clone, PartialEq)]
pub struct MoceModel {
    spec: ModelSpec,
    /// Expert coefficients, one row per expert (`k x d`).
    experts: Array2<f64>,
    /// Gating weight matrices in input-to-output order; layer `l` maps a
    /// width-`w_l` activation to width `w_{l+1}`, stored as `(w_{l+1}, w_l)`.
    gating: Vec<Array2<f64>>,
}

/// Cached gating forward pass over a batch, consumed by backpropagation.
#[derive(Debug, Clone)]
pub struct GatingForward {
    /// `layer_inputs[l]` is the `(n, w_l)` input fed to gating layer `l`;
    /// `layer_inputs[0]` is the design matrix itself.
    pub layer_inputs: Vec<Array2<f64>>,
    /// Softmax outputs, `(n, k)`; rows sum to one.
    pub probs: Array2<f64>,
}

/// Which mixture hazard to report at inference time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HazardMode {
    /// Gate-weighted mixture `sum_k g_k exp(eta_k)`.
    Soft,
    /// Hazard of the most probable expert; argmax ties resolve to the lowest
    /// expert index.
    Hard,
}

/// Dense `(n, d)` covariate matrix in subject order.
pub fn design_matrix(ds: &SurvivalDataset) -> Array2<f64> {
    let mut x = Array2::zeros((ds.len(), ds.dim()));
    for (i, s) in ds.subjects().iter().enumerate() {
        for (j, &v) in s.covariates.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    x
}

fn softmax_row(mut row: ArrayViewMut1<f64>) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn softmax_vec(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

impl MoceModel {
    /// Model with all parameters drawn i.i.d. from `N(0, init_scale^2)`.
    /// The draw order is fixed (experts row-major, then each gating layer
    /// row-major), so a seed fully determines the model.
    pub fn random(spec: ModelSpec, init_scale: f64, seed: u64) -> Result<Self> {
        spec.validate()?;
        if !(init_scale.is_finite() && init_scale >= 0.0) {
            return Err(MoceError::Validation(format!(
                "init scale must be a finite non-negative real, got {}",
                init_scale
            )));
        }
        let normal = Normal::new(0.0, init_scale)
            .map_err(|e| MoceError::Validation(format!("bad init scale: {}", e)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize| -> Array2<f64> {
            let data: Vec<f64> = (0..rows * cols).map(|_| normal.sample(&mut rng)).collect();
            Array2::from_shape_vec((rows, cols), data).expect("shape matches data")
        };
        let experts = draw(spec.n_experts, spec.n_features);
        let widths = spec.layer_widths();
        let gating = widths
            .windows(2)
            .map(|w| draw(w[1], w[0]))
            .collect();
        Self::from_parts(spec, experts, gating)
    }

    /// Assemble a model from explicit parameter blocks, validating shapes.
    pub fn from_parts(
        spec: ModelSpec,
        experts: Array2<f64>,
        gating: Vec<Array2<f64>>,
    ) -> Result<Self> {
        spec.validate()?;
        if experts.dim() != (spec.n_experts, spec.n_features) {
            return Err(MoceError::Dimension(format!(
                "experts block is {:?}, expected ({}, {})",
                experts.dim(),
                spec.n_experts,
                spec.n_features
            )));
        }
        let widths = spec.layer_widths();
        if gating.len() != widths.len() - 1 {
            return Err(MoceError::Dimension(format!(
                "gating has {} layers, architecture expects {}",
                gating.len(),
                widths.len() - 1
            )));
        }
        for (l, w) in gating.iter().enumerate() {
            if w.dim() != (widths[l + 1], widths[l]) {
                return Err(MoceError::Dimension(format!(
                    "gating layer {} is {:?}, expected ({}, {})",
                    l,
                    w.dim(),
                    widths[l + 1],
                    widths[l]
                )));
            }
        }
        Ok(Self {
            spec,
            experts,
            gating,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_experts(&self) -> usize {
        self.spec.n_experts
    }

    pub fn n_features(&self) -> usize {
        self.spec.n_features
    }

    pub fn experts(&self) -> &Array2<f64> {
        &self.experts
    }

    pub fn gating_layers(&self) -> &[Array2<f64>] {
        &self.gating
    }

    pub fn hidden_activation(&self) -> Activation {
        self.spec.gating.activation()
    }

    /// Parameter blocks in optimizer order: experts first, then gating layers.
    pub fn param_blocks(&self) -> Vec<&Array2<f64>> {
        let mut blocks = Vec::with_capacity(1 + self.gating.len());
        blocks.push(&self.experts);
        blocks.extend(self.gating.iter());
        blocks
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut blocks: Vec<&mut Array2<f64>> = Vec::with_capacity(1 + self.gating.len());
        blocks.push(&mut self.experts);
        blocks.extend(self.gating.iter_mut());
        blocks
    }

    pub fn block_names(&self) -> Vec<String> {
        let mut names = vec!["experts".to_string()];
        names.extend((0..self.gating.len()).map(|l| format!("gating.{}", l)));
        names
    }

    pub fn n_params(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    /// Per-expert linear predictors `eta[i][k] = beta_k . x_i` as `(n, k)`.
    pub fn linear_predictors(&self, xs: &Array2<f64>) -> Array2<f64> {
        xs.dot(&self.experts.t())
    }

    /// Batch gating forward pass with cached layer inputs.
    pub fn gating_forward(&self, xs: &Array2<f64>) -> GatingForward {
        let act = self.hidden_activation();
        let mut layer_inputs = Vec::with_capacity(self.gating.len());
        let mut a = xs.clone();
        for (l, w) in self.gating.iter().enumerate() {
            let mut z = a.dot(&w.t());
            layer_inputs.push(a);
            if l + 1 < self.gating.len() {
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        let mut probs = a;
        for row in probs.rows_mut() {
            softmax_row(row);
        }
        GatingForward {
            layer_inputs,
            probs,
        }
    }

    /// Mixing probabilities for a single subject.
    pub fn gating_probs_one(&self, x: &[f64]) -> Vec<f64> {
        let act = self.hidden_activation();
        let mut a = x.to_vec();
        for (l, w) in self.gating.iter().enumerate() {
            let mut z: Vec<f64> = w
                .rows()
                .into_iter()
                .map(|row| row.iter().zip(&a).map(|(wv, av)| wv * av).sum())
                .collect();
            if l + 1 < self.gating.len() {
                for v in &mut z {
                    *v = act.apply(*v);
                }
            }
            a = z;
        }
        softmax_vec(&mut a);
        a
    }

    /// Gate-weighted mixture hazard for one subject.
    pub fn hazard_soft(&self, x: &[f64]) -> f64 {
        let probs = self.gating_probs_one(x);
        probs
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let eta: f64 = self.experts.row(k).iter().zip(x).map(|(b, v)| b * v).sum();
                g * eta.exp()
            })
            .sum()
    }

    /// Hazard of the most probable expert (ties pick the lowest index).
    pub fn hazard_hard(&self, x: &[f64]) -> f64 {
        let probs = self.gating_probs_one(x);
        let mut best = 0;
        for (k, g) in probs.iter().enumerate() {
            if *g > probs[best] {
                best = k;
            }
        }
        let eta: f64 = self
            .experts
            .row(best)
            .iter()
            .zip(x)
            .map(|(b, v)| b * v)
            .sum();
        eta.exp()
    }

    /// Hazards for every subject, in subject order.
    pub fn hazards(&self, ds: &SurvivalDataset, mode: HazardMode) -> Result<Vec<f64>> {
        if ds.dim() != self.spec.n_features {
            return Err(MoceError::Dimension(format!(
                "dataset has {} features, model expects {}",
                ds.dim(),
                self.spec.n_features
            )));
        }
        Ok(ds
            .subjects()
            .iter()
            .map(|s| match mode {
                HazardMode::Soft => self.hazard_soft(&s.covariates),
                HazardMode::Hard => self.hazard_hard(&s.covariates),
            })
            .collect())
    }

    // -- text serialization -------------------------------------------------

    pub fn save(&self, path: &Path, standardizer: Option<&Standardizer>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        self.write_text(&mut w, standardizer)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, Option<Standardizer>)> {
        let file = std::fs::File::open(path)?;
        Self::read_text(BufReader::new(file))
    }

    pub fn write_text<W: Write>(
        &self,
        w: &mut W,
        standardizer: Option<&Standardizer>,
    ) -> Result<()> {
        writeln!(w, "moce-model v1")?;
        writeln!(w, "n_features {}", self.spec.n_features)?;
        writeln!(w, "n_experts {}", self.spec.n_experts)?;
        match &self.spec.gating {
            GatingKind::Linear => writeln!(w, "gating linear")?,
            GatingKind::Mlp { hidden, activation } => {
                write!(w, "gating mlp {}", activation.name())?;
                for h in hidden {
                    write!(w, " {}", h)?;
                }
                writeln!(w)?;
            }
        }
        writeln!(w, "experts")?;
        write_matrix(w, &self.experts)?;
        for (l, layer) in self.gating.iter().enumerate() {
            let (rows, cols) = layer.dim();
            writeln!(w, "gating_layer {} {} {}", l, rows, cols)?;
            write_matrix(w, layer)?;
        }
        if let Some(s) = standardizer {
            writeln!(w, "standardizer {} {}", s.kept.len(), s.input_dim)?;
            for ((&col, &mean), &sd) in s.kept.iter().zip(&s.means).zip(&s.sds) {
                writeln!(w, "{} {:.16e} {:.16e}", col, mean, sd)?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<(Self, Option<Standardizer>)> {
        let mut lines = TextLines::new(r);
        let header = lines.next_line()?;
        if header != "moce-model v1" {
            return Err(MoceError::ModelFormat(format!(
                "unsupported header '{}' (expected 'moce-model v1')",
                header
            )));
        }
        let n_features = lines.keyed_value("n_features")?;
        let n_experts = lines.keyed_value("n_experts")?;

        let gating_line = lines.next_line()?;
        let mut toks = gating_line.split_whitespace();
        if toks.next() != Some("gating") {
            return Err(MoceError::ModelFormat(format!(
                "expected 'gating ...', got '{}'",
                gating_line
            )));
        }
        let gating_kind = match toks.next() {
            Some("linear") => GatingKind::Linear,
            Some("mlp") => {
                let act: Activation = toks
                    .next()
                    .ok_or_else(|| MoceError::ModelFormat("mlp gating missing activation".into()))?
                    .parse()
                    .map_err(|e| MoceError::ModelFormat(format!("{}", e)))?;
                let hidden: Vec<usize> = toks
                    .map(|t| {
                        t.parse::<usize>().map_err(|_| {
                            MoceError::ModelFormat(format!("bad hidden width '{}'", t))
                        })
                    })
                    .collect::<Result<_>>()?;
                if hidden.is_empty() {
                    return Err(MoceError::ModelFormat(
                        "mlp gating needs at least one hidden width".into(),
                    ));
                }
                GatingKind::Mlp {
                    hidden,
                    activation: act,
                }
            }
            other => {
                return Err(MoceError::ModelFormat(format!(
                    "unknown gating kind {:?}",
                    other
                )))
            }
        };
        let spec = ModelSpec {
            n_features,
            n_experts,
            gating: gating_kind,
        };

        if lines.next_line()? != "experts" {
            return Err(MoceError::ModelFormat("expected 'experts' section".into()));
        }
        let experts = lines.matrix(n_experts, n_features)?;

        let widths = spec.layer_widths();
        let mut gating = Vec::with_capacity(widths.len() - 1);
        for l in 0..widths.len() - 1 {
            let head = lines.next_line()?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            let bad = || MoceError::ModelFormat(format!("bad gating layer header '{}'", head));
            if parts.len() != 4 || parts[0] != "gating_layer" {
                return Err(bad());
            }
            let idx: usize = parts[1].parse().map_err(|_| bad())?;
            let rows: usize = parts[2].parse().map_err(|_| bad())?;
            let cols: usize = parts[3].parse().map_err(|_| bad())?;
            if idx != l || rows != widths[l + 1] || cols != widths[l] {
                return Err(MoceError::ModelFormat(format!(
                    "gating layer header '{}' disagrees with architecture",
                    head
                )));
            }
            gating.push(lines.matrix(rows, cols)?);
        }

        let mut standardizer = None;
        let mut tail = lines.next_line()?;
        if let Some(rest) = tail.strip_prefix("standardizer ") {
            let bad =
                || MoceError::ModelFormat(format!("bad standardizer header '{}'", tail));
            let nums: Vec<&str> = rest.split_whitespace().collect();
            if nums.len() != 2 {
                return Err(bad());
            }
            let count: usize = nums[0].parse().map_err(|_| bad())?;
            let input_dim: usize = nums[1].parse().map_err(|_| bad())?;
            let mut kept = Vec::with_capacity(count);
            let mut means = Vec::with_capacity(count);
            let mut sds = Vec::with_capacity(count);
            for _ in 0..count {
                let line = lines.next_line()?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(MoceError::ModelFormat(format!(
                        "bad standardizer row '{}'",
                        line
                    )));
                }
                kept.push(parts[0].parse::<usize>().map_err(|_| {
                    MoceError::ModelFormat(format!("bad standardizer column '{}'", parts[0]))
                })?);
                means.push(parse_float(parts[1])?);
                sds.push(parse_float(parts[2])?);
            }
            standardizer = Some(Standardizer {
                input_dim,
                kept,
                means,
                sds,
            });
            tail = lines.next_line()?;
        }
        if tail != "end" {
            return Err(MoceError::ModelFormat(format!(
                "expected 'end', got '{}'",
                tail
            )));
        }

        let model = Self::from_parts(spec, experts, gating)
            .map_err(|e| MoceError::ModelFormat(format!("{}", e)))?;
        if model
            .param_blocks()
            .iter()
            .any(|b| b.iter().any(|v| !v.is_finite()))
        {
            return Err(MoceError::ModelFormat(
                "model file contains non-finite parameters".into(),
            ));
        }
        Ok((model, standardizer))
    }
}

fn write_matrix<W: Write>(w: &mut W, m: &Array2<f64>) -> std::io::Result<()> {
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                write!(w, " ")?;
            }
            write!(w, "{:.16e}", v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn parse_float(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| MoceError::ModelFormat(format!("bad number '{}'", tok)))
}

struct TextLines<R> {
    reader: R,
    line_no: usize,
}

impl<R: BufRead> TextLines<R> {
    fn new(reader: R) -> Self {
        Self { reader, line_no: 0 }
    }

    fn next_line(&mut self) -> Result<String> {
        let mut buf = String::new();
        let read = self.reader.read_line(&mut buf)?;
        if read == 0 {
            return Err(MoceError::ModelFormat(format!(
                "unexpected end of file after line {}",
                self.line_no
            )));
        }
        self.line_no += 1;
        while buf.ends_with('\n') || buf.ends_with('\r') {
            buf.pop();
        }
        Ok(buf)
    }

    fn keyed_value(&mut self, key: &str) -> Result<usize> {
        let line = self.next_line()?;
        let rest = line.strip_prefix(key).and_then(|r| r.strip_prefix(' '));
        rest.and_then(|r| r.trim().parse::<usize>().ok())
            .ok_or_else(|| {
                MoceError::ModelFormat(format!("expected '{} <count>', got '{}'", key, line))
            })
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(parse_float)
                .collect::<Result<_>>()?;
            if values.len() != cols {
                return Err(MoceError::ModelFormat(format!(
                    "line {}: expected {} values, found {}",
                    self.line_no,
                    cols,
                    values.len()
                )));
            }
            data.extend(values);
        }
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| MoceError::ModelFormat(format!("matrix shape error: {}", e)))
    }
}

/// A set of arrays mirroring a model's parameter blocks: gradients, optimizer
/// moments, and parameter snapshots all use this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub experts: Array2<f64>,
    pub gating: Vec<Array2<f64>>,
}

impl ParamSet {
    pub fn zeros_like(model: &MoceModel) -> Self {
        Self {
            experts: Array2::zeros(model.experts.dim()),
            gating: model
                .gating
                .iter()
                .map(|g| Array2::zeros(g.dim()))
                .collect(),
        }
    }

    pub fn blocks(&self) -> Vec<&Array2<f64>> {
        let mut blocks = Vec::with_capacity(1 + self.gating.len());
        blocks.push(&self.experts);
        blocks.extend(self.gating.iter());
        blocks
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut blocks: Vec<&mut Array2<f64>> = Vec::with_capacity(1 + self.gating.len());
        blocks.push(&mut self.experts);
        blocks.extend(self.gating.iter_mut());
        blocks
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(&self.experts)
            .chain(self.gating.iter())
            .flat_map(|b| b.iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Subject;
    use ndarray::array;

    fn linear_spec() -> ModelSpec {
        ModelSpec {
            n_features: 2,
            n_experts: 2,
            gating: GatingKind::Linear,
        }
    }

    fn mlp_spec() -> ModelSpec {
        ModelSpec {
            n_features: 2,
            n_experts: 2,
            gating: GatingKind::Mlp {
                hidden: vec![3],
                activation: Activation::Selu,
            },
        }
    }

    fn tiny_dataset() -> SurvivalDataset {
        SurvivalDataset::new(vec![
            Subject {
                covariates: vec![1.0, 0.0],
                event_time: 1.0,
                event_observed: true,
            },
            Subject {
                covariates: vec![0.0, 1.0],
                event_time: 2.0,
                event_observed: false,
            },
        ])
        .unwrap()
    }

    #[test]
    fn random_is_seed_deterministic() {
        let a = MoceModel::random(mlp_spec(), 0.1, 42).unwrap();
        let b = MoceModel::random(mlp_spec(), 0.1, 42).unwrap();
        assert_eq!(a, b);
        let c = MoceModel::random(mlp_spec(), 0.1, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn from_parts_validates_shapes() {
        let experts = array![[0.1, 0.2]];
        assert!(MoceModel::from_parts(linear_spec(), experts, vec![array![[0.0, 0.0], [0.0, 0.0]]])
            .is_err());
        let experts = array![[0.1, 0.2], [0.3, 0.4]];
        assert!(MoceModel::from_parts(linear_spec(), experts.clone(), vec![]).is_err());
        assert!(MoceModel::from_parts(
            linear_spec(),
            experts,
            vec![array![[0.0, 0.0], [0.0, 0.0]]]
        )
        .is_ok());
    }

    #[test]
    fn uniform_gating_for_zero_weights() {
        let model = MoceModel::from_parts(
            linear_spec(),
            array![[1.0, 0.0], [0.0, 1.0]],
            vec![array![[0.0, 0.0], [0.0, 0.0]]],
        )
        .unwrap();
        let probs = model.gating_probs_one(&[3.0, -1.0]);
        assert!((probs[0] - 0.5).abs() < 1e-15);
        assert!((probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_shift_invariance_large_scores() {
        // scores 1000 apart must not overflow thanks to the max shift
        let model = MoceModel::from_parts(
            linear_spec(),
            array![[0.0, 0.0], [0.0, 0.0]],
            vec![array![[1000.0, 0.0], [0.0, 0.0]]],
        )
        .unwrap();
        let probs = model.gating_probs_one(&[1.0, 0.0]);
        assert!(probs.iter().all(|p| p.is_finite()));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs[0] > 0.999_999);
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let model = MoceModel::random(mlp_spec(), 0.5, 7).unwrap();
        let ds = tiny_dataset();
        let xs = design_matrix(&ds);
        let fwd = model.gating_forward(&xs);
        for (i, s) in ds.subjects().iter().enumerate() {
            let one = model.gating_probs_one(&s.covariates);
            for (k, &p) in one.iter().enumerate() {
                assert!((fwd.probs[[i, k]] - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn soft_hazard_matches_hand_computation() {
        let model = MoceModel::from_parts(
            linear_spec(),
            array![[1.0, 0.0], [0.0, 1.0]],
            vec![array![[0.0, 0.0], [0.0, 0.0]]],
        )
        .unwrap();
        let x = [2.0_f64, -1.0];
        // uniform gate: 0.5 e^2 + 0.5 e^-1
        let want = 0.5 * 2.0_f64.exp() + 0.5 * (-1.0_f64).exp();
        assert!((model.hazard_soft(&x) - want).abs() < 1e-12);
    }

    #[test]
    fn hard_hazard_tie_picks_lowest_index() {
        let model = MoceModel::from_parts(
            linear_spec(),
            array![[1.0, 0.0], [0.0, 1.0]],
            vec![array![[0.0, 0.0], [0.0, 0.0]]],
        )
        .unwrap();
        let x = [2.0_f64, -1.0];
        // tied gate probabilities: expert 0 wins
        assert!((model.hazard_hard(&x) - 2.0_f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn selu_derivative_from_output() {
        for z in [-2.0, -0.5, 0.3, 1.7] {
            let a = Activation::Selu.apply(z);
            let analytic = if z > 0.0 {
                SELU_SCALE
            } else {
                SELU_SCALE * SELU_ALPHA * z.exp()
            };
            assert!((Activation::Selu.derivative_from_output(a) - analytic).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let model = MoceModel::random(mlp_spec(), 0.3, 99).unwrap();
        let std = Standardizer {
            input_dim: 2,
            kept: vec![0, 1],
            means: vec![0.5, -1.25],
            sds: vec![1.5, 0.25],
        };
        let mut buf = Vec::new();
        model.write_text(&mut buf, Some(&std)).unwrap();
        let (loaded, loaded_std) = MoceModel::read_text(&buf[..]).unwrap();
        assert_eq!(model, loaded);
        assert_eq!(Some(std), loaded_std);

        let mut buf2 = Vec::new();
        loaded.write_text(&mut buf2, loaded_std.as_ref()).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn text_round_trip_without_standardizer() {
        let model = MoceModel::random(linear_spec(), 0.3, 5).unwrap();
        let mut buf = Vec::new();
        model.write_text(&mut buf, None).unwrap();
        let (loaded, std) = MoceModel::read_text(&buf[..]).unwrap();
        assert_eq!(model, loaded);
        assert!(std.is_none());
    }

    #[test]
    fn load_rejects_corrupt_files() {
        let model = MoceModel::random(linear_spec(), 0.3, 5).unwrap();
        let mut buf = Vec::new();
        model.write_text(&mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let bad_header = text.replace("moce-model v1", "moce-model v9");
        assert!(MoceModel::read_text(bad_header.as_bytes()).is_err());

        let truncated = &text[..text.len() / 2];
        assert!(MoceModel::read_text(truncated.as_bytes()).is_err());

        // first '.' in the file is inside the first parameter value
        let mangled = text.replacen('.', "!", 1);
        assert!(MoceModel::read_text(mangled.as_bytes()).is_err());
    }

    #[test]
    fn hazards_rejects_dimension_mismatch() {
        let model = MoceModel::random(linear_spec(), 0.1, 1).unwrap();
        let ds = SurvivalDataset::new(vec![Subject {
            covariates: vec![1.0],
            event_time: 1.0,
            event_observed: true,
        }])
        .unwrap();
        assert!(model.hazards(&ds, HazardMode::Soft).is_err());
    }
}
