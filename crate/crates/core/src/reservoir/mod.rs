//! Delay-line deep reservoir computer.
//!
//! Each layer is a ring of `N` virtual nodes driven through a mask:
//! `s(n) = Ω x(n-1) + M u(n)`, `x(n) = cos(s(n) + φ) + εσ`, where `u` is
//! the previous layer's state sequence (or the input sequence for the first
//! layer) and `Ω` couples node `i` to node `i-1` with gain `α`. The
//! alternative response `x'(n) = sin(s(n) + φ') + εσ` stands in for the
//! derivative in augmented-DFA training of the masks. Images are read out
//! once, from the last `H` states of the final layer.
//!
//! All functions are batched: a sequence is a `Vec` of `batch x features`
//! matrices, one per time step, and states reset to zero for every image.

mod train;

pub use train::{evaluate_rc, train_rc, RcTrainConfig};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{gemm, uniform_matrix, Matrix, Op, RngStream};
use crate::scalar::Real;

/// Ring coupling matrix: entry `(i, i-1)` and `(0, N-1)` equal `alpha`.
pub fn build_ring<T: Real>(n: usize, alpha: f64, allow_unstable: bool) -> Result<Matrix<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ring needs at least 2 nodes, got {n}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("feedback gain must be >= 0, got {alpha}")));
    }
    if alpha >= 1.0 && !allow_unstable {
        return Err(Error::UnstableGain { alpha });
    }
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m[(i, (i + n - 1) % n)] = T::lit(alpha);
    }
    Ok(m)
}

/// How the alternative response `x'` is produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AltMode {
    /// `sin` evaluated at the forward pass's stored arguments.
    #[default]
    Stored,
    /// A second full recurrence driven by the previous layer's `x'`, as a
    /// second physical pass with a shifted bias would produce.
    Recurrent,
}

impl fmt::Display for AltMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AltMode::Stored => "stored",
            AltMode::Recurrent => "recurrent",
        })
    }
}

impl FromStr for AltMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stored" => Ok(AltMode::Stored),
            "recurrent" => Ok(AltMode::Recurrent),
            other => Err(Error::InvalidArgument(format!(
                "unknown alt mode {other:?} (expected stored or recurrent)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirLayer<T> {
    /// `N x input_dim`.
    pub mask: Matrix<T>,
    pub alpha: f64,
    pub phi_bias: f64,
    pub phi_alt: f64,
}

impl<T: Real> ReservoirLayer<T> {
    pub fn nodes(&self) -> usize {
        self.mask.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.mask.cols()
    }

    pub fn omega(&self) -> Matrix<T> {
        build_ring(self.nodes(), self.alpha, true).expect("layer has at least two nodes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirSpec {
    pub nodes: usize,
    pub layers: usize,
    pub input_dim: usize,
    pub classes: usize,
    /// Readout window `H`.
    pub window: usize,
    pub alpha: f64,
    pub phi_bias: f64,
    pub phi_alt: f64,
    /// Masks are uniform on `±mask_scale` (first layer) and
    /// `±deep_mask_scale` (deeper layers).
    pub mask_scale: f64,
    pub deep_mask_scale: f64,
    pub allow_unstable: bool,
    pub alt_mode: AltMode,
}

impl Default for ReservoirSpec {
    fn default() -> Self {
        Self {
            nodes: 404,
            layers: 1,
            input_dim: 28,
            classes: 10,
            window: 28,
            alpha: 0.9,
            phi_bias: 0.0,
            phi_alt: 0.0,
            mask_scale: 1.0,
            deep_mask_scale: 1.0,
            allow_unstable: false,
            alt_mode: AltMode::Stored,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepReservoir<T> {
    pub layers: Vec<ReservoirLayer<T>>,
    /// `classes x (window * N)`; column `j * N + i` weights node `i` at
    /// delay `j` (state `x(n - j)`).
    pub readout: Matrix<T>,
    /// One fixed `N x classes` matrix per layer.
    pub feedback: Vec<Matrix<T>>,
    pub window: usize,
    pub alt_mode: AltMode,
}

impl<T: Real> DeepReservoir<T> {
    /// Masks uniform on `±scale`, feedback uniform on `±1/sqrt(classes)`,
    /// readout zero. Masks and feedback use separate child streams.
    pub fn new(spec: &ReservoirSpec, rng: &RngStream) -> Result<Self> {
        if spec.layers == 0 || spec.window == 0 || spec.classes == 0 || spec.input_dim == 0 {
            return Err(Error::InvalidArgument(
                "reservoir needs at least one layer, class, input feature and window step".into(),
            ));
        }
        build_ring::<T>(spec.nodes, spec.alpha, spec.allow_unstable)?;
        let mut mrng = rng.derive(0);
        let mut brng = rng.derive(1);
        let layers = (0..spec.layers)
            .map(|l| {
                let (fan_in, scale) = if l == 0 {
                    (spec.input_dim, spec.mask_scale)
                } else {
                    (spec.nodes, spec.deep_mask_scale)
                };
                Ok(ReservoirLayer {
                    mask: uniform_matrix(spec.nodes, fan_in, -scale, scale, &mut mrng)?,
                    alpha: spec.alpha,
                    phi_bias: spec.phi_bias,
                    phi_alt: spec.phi_alt,
                })
            })
            .collect::<Result<_>>()?;
        let r = 1.0 / (spec.classes as f64).sqrt();
        let feedback = (0..spec.layers)
            .map(|_| uniform_matrix(spec.nodes, spec.classes, -r, r, &mut brng))
            .collect::<Result<_>>()?;
        Ok(Self {
            layers,
            readout: Matrix::zeros(spec.classes, spec.window * spec.nodes),
            feedback,
            window: spec.window,
            alt_mode: spec.alt_mode,
        })
    }

    pub fn nodes(&self) -> usize {
        self.layers[0].nodes()
    }

    pub fn classes(&self) -> usize {
        self.readout.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.nodes() != n {
                return Err(Error::shape("reservoir layer nodes", n, layer.nodes()));
            }
            if l > 0 && layer.input_dim() != n {
                return Err(Error::shape("deep mask input", n, layer.input_dim()));
            }
        }
        if self.readout.cols() != self.window * n {
            return Err(Error::shape("readout", self.window * n, self.readout.cols()));
        }
        if self.feedback.len() != self.layers.len() {
            return Err(Error::shape("feedback count", self.layers.len(), self.feedback.len()));
        }
        for b in &self.feedback {
            if b.shape() != (n, self.classes()) {
                return Err(Error::shape(
                    "reservoir feedback",
                    format!("{n}x{}", self.classes()),
                    format!("{}x{}", b.rows(), b.cols()),
                ));
            }
        }
        Ok(())
    }
}

/// Additive Gaussian noise `εσ` on every node response.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub rng: RngStream,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            epsilon: 0.0,
            rng: RngStream::new(0),
        }
    }

    pub fn new(epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            rng: RngStream::new(seed),
        }
    }

    /// Adds noise in place; with `epsilon == 0` no random numbers are drawn.
    fn apply<T: Real>(&mut self, m: &mut Matrix<T>) {
        if self.epsilon == 0.0 {
            return;
        }
        for v in m.as_mut_slice() {
            *v += T::lit(self.epsilon * self.rng.normal());
        }
    }
}

/// Per-layer, per-step record of a batched simulation.
#[derive(Clone, Debug)]
pub struct LayerTrace<T> {
    /// `x(n)`, each `batch x N`.
    pub states: Vec<Matrix<T>>,
    /// `s(n)` (without the bias phase).
    pub pre: Vec<Matrix<T>>,
    /// `x'(n)`, once the alternative pass has run.
    pub alt: Option<Vec<Matrix<T>>>,
}

#[derive(Clone, Debug)]
pub struct ReservoirTrace<T> {
    /// The driving sequence of the first layer.
    pub input: Vec<Matrix<T>>,
    pub layers: Vec<LayerTrace<T>>,
}

impl<T: Real> ReservoirTrace<T> {
    pub fn steps(&self) -> usize {
        self.input.len()
    }

    pub fn batch_size(&self) -> usize {
        self.input.first().map_or(0, Matrix::rows)
    }

    /// The sequence that drove layer `l` in the forward pass.
    pub fn layer_input(&self, l: usize) -> &[Matrix<T>] {
        if l == 0 {
            &self.input
        } else {
            &self.layers[l - 1].states
        }
    }
}

/// `dst += alpha * ring_shift(src)`: node `i` receives node `i-1`.
fn add_ring<T: Real>(dst: &mut Matrix<T>, src: &Matrix<T>, alpha: T) {
    let n = src.cols();
    for b in 0..src.rows() {
        let (s, d) = (src.row(b), dst.row_mut(b));
        d[0] += alpha * s[n - 1];
        for i in 1..n {
            d[i] += alpha * s[i - 1];
        }
    }
}

/// One layer's recurrence over a full sequence. Returns `(pre, responses)`
/// where responses are `act(s + phase)` plus noise.
fn run_layer<T: Real>(
    layer: &ReservoirLayer<T>,
    input: &[Matrix<T>],
    phase: f64,
    act: fn(T) -> T,
    noise: &mut NoiseSpec,
) -> Result<(Vec<Matrix<T>>, Vec<Matrix<T>>)> {
    let batch = input.first().map_or(0, Matrix::rows);
    let n = layer.nodes();
    let alpha = T::lit(layer.alpha);
    let phase = T::lit(phase);
    let mut pre = Vec::with_capacity(input.len());
    let mut out: Vec<Matrix<T>> = Vec::with_capacity(input.len());
    for u in input {
        if u.cols() != layer.input_dim() || u.rows() != batch {
            return Err(Error::shape(
                "reservoir input",
                format!("{batch}x{}", layer.input_dim()),
                format!("{}x{}", u.rows(), u.cols()),
            ));
        }
        let mut s = Matrix::zeros(batch, n);
        gemm(T::one(), u, Op::N, &layer.mask, Op::T, T::zero(), &mut s)?;
        if let Some(prev) = out.last() {
            add_ring(&mut s, prev, alpha);
        }
        let mut x = s.map(|v| act(v + phase));
        noise.apply(&mut x);
        if !x.all_finite() {
            return Err(Error::Diverged("non-finite reservoir state".into()));
        }
        pre.push(s);
        out.push(x);
    }
    Ok((pre, out))
}

fn check_sequence<T: Real>(res: &DeepReservoir<T>, seq: &[Matrix<T>]) -> Result<()> {
    res.validate()?;
    if seq.is_empty() {
        return Err(Error::InvalidArgument("empty input sequence".into()));
    }
    Ok(())
}

/// Runs every layer over the sequence (states start at zero).
pub fn rc_forward<T: Real>(
    res: &DeepReservoir<T>,
    seq: &[Matrix<T>],
    noise: &mut NoiseSpec,
) -> Result<ReservoirTrace<T>> {
    check_sequence(res, seq)?;
    let mut layers: Vec<LayerTrace<T>> = Vec::with_capacity(res.layers.len());
    for (l, layer) in res.layers.iter().enumerate() {
        let input = if l == 0 { seq } else { &layers[l - 1].states[..] };
        let (pre, states) = run_layer(layer, input, layer.phi_bias, T::cos, noise)?;
        layers.push(LayerTrace {
            states,
            pre,
            alt: None,
        });
    }
    Ok(ReservoirTrace {
        input: seq.to_vec(),
        layers,
    })
}

/// Fills `x'` for every layer of a completed forward trace.
pub fn rc_alt_forward<T: Real>(
    res: &DeepReservoir<T>,
    trace: &mut ReservoirTrace<T>,
    noise: &mut NoiseSpec,
) -> Result<()> {
    if trace.layers.len() != res.layers.len() || trace.steps() == 0 {
        return Err(Error::MissingTrace("alternative pass needs a full forward trace"));
    }
    match res.alt_mode {
        AltMode::Stored => {
            for (lt, layer) in trace.layers.iter_mut().zip(&res.layers) {
                let phase = T::lit(layer.phi_alt);
                let mut alt = Vec::with_capacity(lt.pre.len());
                for s in &lt.pre {
                    let mut a = s.map(|v| (v + phase).sin());
                    noise.apply(&mut a);
                    alt.push(a);
                }
                lt.alt = Some(alt);
            }
        }
        AltMode::Recurrent => {
            let mut prev: Option<Vec<Matrix<T>>> = None;
            for (l, layer) in res.layers.iter().enumerate() {
                let input = match &prev {
                    Some(p) => &p[..],
                    None => &trace.input[..],
                };
                let (_, alt) = run_layer(layer, input, layer.phi_alt, T::sin, noise)?;
                trace.layers[l].alt = Some(alt.clone());
                prev = Some(alt);
            }
        }
    }
    Ok(())
}

/// `[x(T-1), x(T-2), .., x(T-H)]` of the last layer, one row per image.
fn window_features<T: Real>(res: &DeepReservoir<T>, trace: &ReservoirTrace<T>) -> Result<Matrix<T>> {
    let last = trace
        .layers
        .last()
        .ok_or(Error::MissingTrace("trace has no layers"))?;
    let t = last.states.len();
    if t < res.window {
        return Err(Error::WindowUnderrun {
            needed: res.window,
            available: t,
        });
    }
    let n = res.nodes();
    let mut feats = Matrix::zeros(trace.batch_size(), res.window * n);
    for j in 0..res.window {
        let x = &last.states[t - 1 - j];
        for b in 0..x.rows() {
            feats.row_mut(b)[j * n..(j + 1) * n].copy_from_slice(x.row(b));
        }
    }
    Ok(feats)
}

/// Class scores `y_k = Σ_j Σ_i ω_ijk x_i(T-1-j)`, one row per image.
pub fn rc_readout<T: Real>(res: &DeepReservoir<T>, trace: &ReservoirTrace<T>) -> Result<Matrix<T>> {
    let feats = window_features(res, trace)?;
    let mut y = Matrix::zeros(feats.rows(), res.classes());
    gemm(T::one(), &feats, Op::N, &res.readout, Op::T, T::zero(), &mut y)?;
    Ok(y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirUpdate<T> {
    /// Descent direction per mask; `None` where masks are not trained.
    pub dm: Vec<Option<Matrix<T>>>,
    pub domega: Matrix<T>,
}

fn check_error<T: Real>(res: &DeepReservoir<T>, trace: &ReservoirTrace<T>, e: &Matrix<T>) -> Result<()> {
    if e.shape() != (trace.batch_size(), res.classes()) {
        return Err(Error::shape(
            "reservoir error",
            format!("{}x{}", trace.batch_size(), res.classes()),
            format!("{}x{}", e.rows(), e.cols()),
        ));
    }
    Ok(())
}

fn readout_direction<T: Real>(res: &DeepReservoir<T>, trace: &ReservoirTrace<T>, e: &Matrix<T>) -> Result<Matrix<T>> {
    let feats = window_features(res, trace)?;
    let mut d = Matrix::zeros(res.classes(), feats.cols());
    let scale = -T::one() / T::lit(e.rows().max(1) as f64);
    gemm(scale, e, Op::T, &feats, Op::N, T::zero(), &mut d)?;
    Ok(d)
}

/// Augmented-DFA directions. The per-image error `e` (`batch x classes`) is
/// applied at every time step:
/// `ΔM = -(1/B) Σ_n [(e B^T) ⊙ x'(n)]^T u(n)` and
/// `Δω = -(1/B) e^T [x(T-1), .., x(T-H)]`.
pub fn rc_dfa_update<T: Real>(
    res: &DeepReservoir<T>,
    trace: &ReservoirTrace<T>,
    e: &Matrix<T>,
) -> Result<ReservoirUpdate<T>> {
    check_error(res, trace, e)?;
    let scale = -T::one() / T::lit(e.rows().max(1) as f64);
    let mut dm = Vec::with_capacity(res.layers.len());
    for (l, layer) in res.layers.iter().enumerate() {
        let b = &res.feedback[l];
        if b.cols() != e.cols() || b.rows() != layer.nodes() {
            return Err(Error::shape(
                "reservoir feedback",
                format!("{}x{}", layer.nodes(), e.cols()),
                format!("{}x{}", b.rows(), b.cols()),
            ));
        }
        let alt = trace.layers[l]
            .alt
            .as_ref()
            .ok_or(Error::MissingTrace("alternative responses (run rc_alt_forward first)"))?;
        let mut projected = Matrix::zeros(e.rows(), layer.nodes());
        gemm(T::one(), e, Op::N, b, Op::T, T::zero(), &mut projected)?;
        let mut d = Matrix::zeros(layer.nodes(), layer.input_dim());
        for (a, u) in alt.iter().zip(trace.layer_input(l)) {
            let delta = projected.hadamard(a)?;
            gemm(scale, &delta, Op::T, u, Op::N, T::one(), &mut d)?;
        }
        dm.push(Some(d));
    }
    Ok(ReservoirUpdate {
        dm,
        domega: readout_direction(res, trace, e)?,
    })
}

/// Readout-only direction; masks are left untouched.
pub fn rc_readout_update<T: Real>(
    res: &DeepReservoir<T>,
    trace: &ReservoirTrace<T>,
    e: &Matrix<T>,
) -> Result<ReservoirUpdate<T>> {
    check_error(res, trace, e)?;
    Ok(ReservoirUpdate {
        dm: vec![None; res.layers.len()],
        domega: readout_direction(res, trace, e)?,
    })
}

/// Trace rows for CSV export: `(layer, n, node, x, s, x_alt)` of image `b`.
pub fn trace_rows<T: Real>(trace: &ReservoirTrace<T>, b: usize) -> Vec<(usize, usize, usize, f64, f64, Option<f64>)> {
    let mut rows = Vec::new();
    for (l, lt) in trace.layers.iter().enumerate() {
        for (n, (x, s)) in lt.states.iter().zip(&lt.pre).enumerate() {
            for i in 0..x.cols() {
                let alt = lt.alt.as_ref().map(|a| a[n][(b, i)].to_f64_lossy());
                rows.push((l, n, i, x[(b, i)].to_f64_lossy(), s[(b, i)].to_f64_lossy(), alt));
            }
        }
    }
    rows
}
