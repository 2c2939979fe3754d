//! Fully connected networks trained by backpropagation, augmented DFA
//! (direct feedback alignment with `f'` replaced by an arbitrary `g`), or
//! readout-only (frozen hidden layers).
//!
//! Batches are row-major: one sample per row, so a layer computes
//! `S = X W^T + bias`. Every update function returns the descent direction
//! `ΔW = -∂E/∂W` (gradients averaged over the batch); training applies
//! `W += lr * ΔW`.

mod train;

pub use train::{evaluate, train, EpochMetrics, Evaluation, History, TrainConfig};

use std::fmt;
use std::str::FromStr;

use crate::activations::{Activation, Nonlinearity};
use crate::error::{Error, Result};
use crate::numerics::{gemm, uniform_matrix, Matrix, Op, RngStream};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    /// `fan_out x fan_in`.
    pub w: Matrix<T>,
    pub bias: Vec<T>,
    /// `None` for the linear readout.
    pub f: Option<Activation>,
    pub frozen: bool,
}

impl<T: Real> Layer<T> {
    pub fn fan_in(&self) -> usize {
        self.w.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedforwardNet<T> {
    /// Hidden layers followed by the linear readout.
    pub layers: Vec<Layer<T>>,
    /// One fixed `fan_out(l) x output_dim` matrix per hidden layer.
    pub feedback: Vec<Matrix<T>>,
    pub g: Nonlinearity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Trainer {
    Bp,
    /// Backpropagation with every `f'` replaced by `g`.
    BpG,
    Dfa,
    ReadoutOnly,
}

impl Trainer {
    pub fn as_str(self) -> &'static str {
        match self {
            Trainer::Bp => "bp",
            Trainer::BpG => "bp_g",
            Trainer::Dfa => "dfa",
            Trainer::ReadoutOnly => "readout_only",
        }
    }
}

impl fmt::Display for Trainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Trainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bp" => Ok(Trainer::Bp),
            "bp_g" => Ok(Trainer::BpG),
            "dfa" => Ok(Trainer::Dfa),
            "readout_only" => Ok(Trainer::ReadoutOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown trainer {other:?} (expected bp, bp_g, dfa or readout_only)"
            ))),
        }
    }
}

impl<T: Real> FeedforwardNet<T> {
    /// `sizes = [input, hidden.., output]`. Hidden weights are uniform on
    /// `±1/sqrt(fan_in)`, biases zero, feedback uniform on `±1/sqrt(output)`.
    /// Weights and feedback come from separate child streams of `rng`.
    pub fn new(sizes: &[usize], f: Activation, g: Nonlinearity, rng: &RngStream) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must have at least input and output and no zeros, got {sizes:?}"
            )));
        }
        let mut wrng = rng.derive(0);
        let mut brng = rng.derive(1);
        let n_layers = sizes.len() - 1;
        let out_dim = sizes[n_layers];
        let mut layers = Vec::with_capacity(n_layers);
        for (l, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let r = 1.0 / (fan_in as f64).sqrt();
            layers.push(Layer {
                w: uniform_matrix(fan_out, fan_in, -r, r, &mut wrng)?,
                bias: vec![T::zero(); fan_out],
                f: (l + 1 < n_layers).then(|| f.clone()),
                frozen: false,
            });
        }
        let r = 1.0 / (out_dim as f64).sqrt();
        let feedback = sizes[1..n_layers]
            .iter()
            .map(|&n| uniform_matrix(n, out_dim, -r, r, &mut brng))
            .collect::<Result<_>>()?;
        Ok(Self { layers, feedback, g })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::fan_out)
    }

    pub fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Checks layer chaining and feedback shapes.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("network has no layers".into()));
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Shape {
                    op: "FeedforwardNet::validate",
                    expected: format!("layer {} fan_in {}", l + 1, pair[0].fan_out()),
                    got: pair[1].fan_in().to_string(),
                });
            }
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::shape("bias", layer.fan_out(), layer.bias.len()));
            }
            let last = l + 1 == self.layers.len();
            if last != layer.f.is_none() {
                return Err(Error::InvalidArgument(
                    "every hidden layer needs an activation and the readout must be linear".into(),
                ));
            }
        }
        if self.feedback.len() != self.hidden_count() {
            return Err(Error::shape("feedback count", self.hidden_count(), self.feedback.len()));
        }
        for (b, layer) in self.feedback.iter().zip(&self.layers) {
            if b.shape() != (layer.fan_out(), self.output_dim()) {
                return Err(Error::shape(
                    "feedback",
                    format!("{}x{}", layer.fan_out(), self.output_dim()),
                    format!("{}x{}", b.rows(), b.cols()),
                ));
            }
        }
        Ok(())
    }
}

/// Cached activations of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    /// `inputs[l]` is the input of layer `l`; `inputs[0]` is the batch.
    pub inputs: Vec<Matrix<T>>,
    /// `pre[l] = inputs[l] W_l^T + bias_l`; the last entry holds the logits.
    pub pre: Vec<Matrix<T>>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn logits(&self) -> &Matrix<T> {
        self.pre.last().expect("trace has at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }
}

/// Output-layer error `e = softmax(logits) - onehot` and the mean loss.
#[derive(Clone, Debug)]
pub struct ErrorSignal<T> {
    pub e: Matrix<T>,
    pub loss: T,
}

/// Descent direction for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerUpdate<T> {
    pub dw: Matrix<T>,
    pub db: Vec<T>,
}

fn affine<T: Real>(x: &Matrix<T>, layer: &Layer<T>) -> Result<Matrix<T>> {
    let mut s = Matrix::zeros(x.rows(), layer.fan_out());
    gemm(T::one(), x, Op::N, &layer.w, Op::T, T::zero(), &mut s)?;
    s.add_row_vector(&layer.bias)?;
    Ok(s)
}

pub fn forward<T: Real>(net: &FeedforwardNet<T>, batch: &Matrix<T>) -> Result<ForwardTrace<T>> {
    if batch.cols() != net.input_dim() {
        return Err(Error::shape("forward", net.input_dim(), batch.cols()));
    }
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut pre = Vec::with_capacity(net.layers.len());
    inputs.push(batch.clone());
    for layer in &net.layers {
        let s = affine(inputs.last().expect("non-empty"), layer)?;
        if let Some(f) = &layer.f {
            inputs.push(s.map(|v| f.eval(v)));
        }
        pre.push(s);
    }
    Ok(ForwardTrace { inputs, pre })
}

/// Logits only, without keeping intermediate activations.
pub fn predict<T: Real>(net: &FeedforwardNet<T>, batch: &Matrix<T>) -> Result<Matrix<T>> {
    if batch.cols() != net.input_dim() {
        return Err(Error::shape("predict", net.input_dim(), batch.cols()));
    }
    let mut x = affine(batch, &net.layers[0])?;
    if let Some(f) = &net.layers[0].f {
        x.map_inplace(|v| f.eval(v));
    }
    for layer in &net.layers[1..] {
        x = affine(&x, layer)?;
        if let Some(f) = &layer.f {
            x.map_inplace(|v| f.eval(v));
        }
    }
    Ok(x)
}

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Real>(logits: &Matrix<T>) -> Matrix<T> {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    p
}

/// Mean softmax cross-entropy and `e = softmax - labels` (not divided by the
/// batch size; the update functions average).
pub fn loss_and_error<T: Real>(logits: &Matrix<T>, labels: &Matrix<T>) -> Result<ErrorSignal<T>> {
    if logits.shape() != labels.shape() {
        return Err(Error::shape(
            "loss_and_error",
            format!("{}x{}", logits.rows(), logits.cols()),
            format!("{}x{}", labels.rows(), labels.cols()),
        ));
    }
    let mut targets = Vec::with_capacity(labels.rows());
    for (i, row) in labels.row_iter().enumerate() {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros + 1 != row.len() {
            return Err(Error::NotOneHot { row: i });
        }
        targets.push(row.iter().position(|&v| v == T::one()).expect("one hot"));
    }
    let p = softmax(logits);
    let mut loss = T::zero();
    for (i, &t) in targets.iter().enumerate() {
        let row = logits.row(i);
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        loss += lse - row[t];
    }
    let n = T::lit(labels.rows().max(1) as f64);
    let e = p.zip_map(labels, |a, b| a - b)?;
    Ok(ErrorSignal { e, loss: loss / n })
}

fn check_trace<T: Real>(net: &FeedforwardNet<T>, trace: &ForwardTrace<T>, err: &ErrorSignal<T>) -> Result<()> {
    if trace.pre.len() != net.layers.len() || trace.inputs.len() != net.layers.len() {
        return Err(Error::MissingTrace("forward trace does not cover every layer"));
    }
    if err.e.shape() != trace.logits().shape() {
        return Err(Error::shape(
            "error signal",
            format!("{}x{}", trace.logits().rows(), trace.logits().cols()),
            format!("{}x{}", err.e.rows(), err.e.cols()),
        ));
    }
    Ok(())
}

/// `ΔW = -(1/B) δ^T x`, `Δb = -(1/B) Σ_rows δ`; zero for frozen layers.
fn layer_update<T: Real>(layer: &Layer<T>, delta: &Matrix<T>, x: &Matrix<T>) -> Result<LayerUpdate<T>> {
    let mut dw = Matrix::zeros(layer.fan_out(), layer.fan_in());
    let mut db = vec![T::zero(); layer.fan_out()];
    if layer.frozen {
        return Ok(LayerUpdate { dw, db });
    }
    let scale = -T::one() / T::lit(delta.rows().max(1) as f64);
    gemm(scale, delta, Op::T, x, Op::N, T::zero(), &mut dw)?;
    for row in delta.row_iter() {
        for (b, &d) in db.iter_mut().zip(row) {
            *b += d;
        }
    }
    db.iter_mut().for_each(|b| *b *= scale);
    Ok(LayerUpdate { dw, db })
}

/// Pre-activation error signals of every layer under the chain rule, with
/// the local derivative given by `f'` or (if `substitute_g`) by `g`.
fn backprop_deltas<T: Real>(
    net: &FeedforwardNet<T>,
    trace: &ForwardTrace<T>,
    err: &ErrorSignal<T>,
    substitute_g: bool,
) -> Result<Vec<Matrix<T>>> {
    let n = net.layers.len();
    let mut deltas = vec![Matrix::zeros(0, 0); n];
    deltas[n - 1] = err.e.clone();
    for l in (0..n - 1).rev() {
        let upper = &net.layers[l + 1];
        let mut d = Matrix::zeros(trace.batch_size(), upper.fan_in());
        gemm(T::one(), &deltas[l + 1], Op::N, &upper.w, Op::N, T::zero(), &mut d)?;
        let f = net.layers[l].f.as_ref().expect("hidden layer has an activation");
        let local = if substitute_g {
            trace.pre[l].map(|v| net.g.eval(v))
        } else {
            trace.pre[l].map(|v| f.eval_derivative(v))
        };
        d.hadamard_inplace(&local)?;
        deltas[l] = d;
    }
    Ok(deltas)
}

/// Backpropagation updates. With `substitute_g`, `g` replaces `f'` at every
/// hidden layer.
pub fn bp_update<T: Real>(
    net: &FeedforwardNet<T>,
    trace: &ForwardTrace<T>,
    err: &ErrorSignal<T>,
    substitute_g: bool,
) -> Result<Vec<LayerUpdate<T>>> {
    check_trace(net, trace, err)?;
    let deltas = backprop_deltas(net, trace, err, substitute_g)?;
    net.layers
        .iter()
        .enumerate()
        .map(|(l, layer)| layer_update(layer, &deltas[l], &trace.inputs[l]))
        .collect()
}

/// Projected DFA signals `(e B_l^T) ⊙ g(s_l)` for every hidden layer.
fn dfa_deltas<T: Real>(
    net: &FeedforwardNet<T>,
    trace: &ForwardTrace<T>,
    err: &ErrorSignal<T>,
) -> Result<Vec<Matrix<T>>> {
    (0..net.hidden_count())
        .map(|l| {
            let b = &net.feedback[l];
            if b.cols() != err.e.cols() || b.rows() != net.layers[l].fan_out() {
                return Err(Error::shape(
                    "dfa feedback",
                    format!("{}x{}", net.layers[l].fan_out(), err.e.cols()),
                    format!("{}x{}", b.rows(), b.cols()),
                ));
            }
            let mut d = Matrix::zeros(trace.batch_size(), b.rows());
            gemm(T::one(), &err.e, Op::N, b, Op::T, T::zero(), &mut d)?;
            let g = trace.pre[l].map(|v| net.g.eval(v));
            d.hadamard_inplace(&g)?;
            Ok(d)
        })
        .collect()
}

/// Augmented DFA updates: hidden layers get `-x^T [(B e) ⊙ g(s)]`, the
/// readout gets the true error.
pub fn dfa_update<T: Real>(
    net: &FeedforwardNet<T>,
    trace: &ForwardTrace<T>,
    err: &ErrorSignal<T>,
) -> Result<Vec<LayerUpdate<T>>> {
    check_trace(net, trace, err)?;
    let deltas = dfa_deltas(net, trace, err)?;
    let mut out = Vec::with_capacity(net.layers.len());
    for (l, d) in deltas.iter().enumerate() {
        out.push(layer_update(&net.layers[l], d, &trace.inputs[l])?);
    }
    let last = net.layers.len() - 1;
    out.push(layer_update(&net.layers[last], &err.e, &trace.inputs[last])?);
    Ok(out)
}

/// Updates for the readout alone; hidden layers get zeros.
pub fn readout_update<T: Real>(
    net: &FeedforwardNet<T>,
    trace: &ForwardTrace<T>,
    err: &ErrorSignal<T>,
) -> Result<Vec<LayerUpdate<T>>> {
    check_trace(net, trace, err)?;
    let last = net.layers.len() - 1;
    let mut out: Vec<LayerUpdate<T>> = net.layers[..last]
        .iter()
        .map(|l| LayerUpdate {
            dw: Matrix::zeros(l.fan_out(), l.fan_in()),
            db: vec![T::zero(); l.fan_out()],
        })
        .collect();
    out.push(layer_update(&net.layers[last], &err.e, &trace.inputs[last])?);
    Ok(out)
}

pub fn updates_for<T: Real>(
    trainer: Trainer,
    net: &FeedforwardNet<T>,
    trace: &ForwardTrace<T>,
    err: &ErrorSignal<T>,
) -> Result<Vec<LayerUpdate<T>>> {
    match trainer {
        Trainer::Bp => bp_update(net, trace, err, false),
        Trainer::BpG => bp_update(net, trace, err, true),
        Trainer::Dfa => dfa_update(net, trace, err),
        Trainer::ReadoutOnly => readout_update(net, trace, err),
    }
}

/// Angle in degrees between two vectors.
pub fn angle_between<T: Real>(u: &[T], v: &[T]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape("angle_between", u.len(), v.len()));
    }
    let nu = u.iter().map(|a| a.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
    if !(nu > 0.0 && nv > 0.0) || !(nu.is_finite() && nv.is_finite()) {
        return Err(Error::UndefinedAngle);
    }
    // 2 atan2(|u/|u| - v/|v||, |u/|u| + v/|v||) stays accurate near 0 and 180
    let (mut diff, mut sum) = (0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.to_f64_lossy() / nu, b.to_f64_lossy() / nv);
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees())
}

/// Mean per-sample angle, in degrees, between the exact backpropagated
/// pre-activation signal of every hidden layer and the signal the trainer
/// actually uses there (`(B e) ⊙ g(s)` for DFA, the `g`-substituted chain
/// for BP-with-g). Samples where either signal vanishes are skipped.
pub fn alignment_angles<T: Real>(
    net: &FeedforwardNet<T>,
    trace: &ForwardTrace<T>,
    err: &ErrorSignal<T>,
    trainer: Trainer,
) -> Result<Vec<f64>> {
    check_trace(net, trace, err)?;
    let exact = backprop_deltas(net, trace, err, false)?;
    let used = match trainer {
        Trainer::Bp => exact.clone(),
        Trainer::BpG => backprop_deltas(net, trace, err, true)?,
        Trainer::Dfa => dfa_deltas(net, trace, err)?,
        Trainer::ReadoutOnly => {
            return Err(Error::InvalidArgument(
                "readout-only training has no hidden-layer signal".into(),
            ))
        }
    };
    (0..net.hidden_count())
        .map(|l| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in 0..trace.batch_size() {
                if let Ok(a) = angle_between(exact[l].row(i), used[l].row(i)) {
                    sum += a;
                    count += 1;
                }
            }
            if count == 0 {
                Err(Error::UndefinedAngle)
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect()
}

pub fn alignment_angle<T: Real>(
    net: &FeedforwardNet<T>,
    trace: &ForwardTrace<T>,
    err: &ErrorSignal<T>,
    trainer: Trainer,
    layer: usize,
) -> Result<f64> {
    if layer >= net.hidden_count() {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} is not a hidden layer (net has {})",
            net.hidden_count()
        )));
    }
    alignment_angles(net, trace, err, trainer).map(|a| a[layer])
}

/// Index of the largest entry of each row (NaN entries never win).
pub fn argmax_rows<T: Real>(m: &Matrix<T>) -> Vec<usize> {
    m.row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] || row[best].is_nan() {
                    best = j;
                }
            }
            best
        })
        .collect()
}
