//! Unitary MZI-mesh networks.
//!
//! A layer is `U = D · R(1,0) · R(2,0) · R(2,1) · R(3,0) · …`, each `R(i, j)`
//! a 2×2 rotation embedded at ports `i > j`. Activations are
//! `tanh(|U x|²)` per port; class scores come from a real linear readout
//! of the first `classes` ports of the last layer.

use num_complex::Complex;

use crate::activations::Nonlinearity;
use crate::error::{Error, Result};
use crate::ffnet::{ErrorSignal, Trainer};
use crate::numerics::{gemm, uniform_cmatrix, uniform_matrix, CMatrix, Matrix, Op, RngStream};
use crate::scalar::Real;

mod train;

pub use train::{evaluate_unitary, train_unitary, UnitaryTrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct MziPhase<T> {
    pub theta: T,
    pub phi: T,
    /// Ports `(i, j)` with `i > j`.
    pub position: (usize, usize),
}

/// The 2×2 block `[[e^{iφ}cos θ, −e^{iφ}sin θ], [sin θ, cos θ]]`, rows and
/// columns ordered `(i, j)`.
pub fn mzi_matrix<T: Real>(theta: T, phi: T) -> CMatrix<T> {
    let b = mzi_block(theta, phi);
    CMatrix::new(2, 2, b.to_vec()).expect("2x2")
}

fn mzi_block<T: Real>(theta: T, phi: T) -> [Complex<T>; 4] {
    let (s, c) = theta.sin_cos();
    let e = Complex::from_polar(T::one(), phi);
    [e * c, -(e * s), Complex::new(s, T::zero()), Complex::new(c, T::zero())]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseParam {
    Theta(usize),
    Phi(usize),
    /// Phase of the `i`-th entry of `D`.
    Diag(usize),
}

fn mzi_derivative<T: Real>(theta: T, phi: T, wrt_theta: bool) -> [Complex<T>; 4] {
    let (s, c) = theta.sin_cos();
    let e = Complex::from_polar(T::one(), phi);
    let zero = Complex::new(T::zero(), T::zero());
    if wrt_theta {
        [-(e * s), -(e * c), Complex::new(c, T::zero()), Complex::new(-s, T::zero())]
    } else {
        let ie = Complex::new(T::zero(), T::one()) * e;
        [ie * c, -(ie * s), zero, zero]
    }
}

/// Port pairs in composition order.
pub fn reck_positions(n: usize) -> Vec<(usize, usize)> {
    (1..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryLayer<T> {
    pub n_ports: usize,
    pub phases: Vec<MziPhase<T>>,
    pub d_phases: Vec<T>,
}

impl<T: Real> UnitaryLayer<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            n_ports: n,
            phases: reck_positions(n)
                .into_iter()
                .map(|position| MziPhase {
                    theta: T::zero(),
                    phi: T::zero(),
                    position,
                })
                .collect(),
            d_phases: vec![T::zero(); n],
        }
    }

    /// All phases uniform on `[0, 2π)`.
    pub fn random(n: usize, rng: &mut RngStream) -> Self {
        let tau = std::f64::consts::TAU;
        let mut layer = Self::identity(n);
        for p in &mut layer.phases {
            p.theta = T::lit(rng.uniform(0.0, tau));
            p.phi = T::lit(rng.uniform(0.0, tau));
        }
        for d in &mut layer.d_phases {
            *d = T::lit(rng.uniform(0.0, tau));
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        2 * self.phases.len() + self.d_phases.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_ports;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("a mesh needs at least 2 ports, got {n}")));
        }
        if self.phases.len() != n * (n - 1) / 2 || self.d_phases.len() != n {
            return Err(Error::InvalidArgument(format!(
                "incomplete phase list for {n} ports: {} blocks and {} diagonal phases, need {} and {n}",
                self.phases.len(),
                self.d_phases.len(),
                n * (n - 1) / 2
            )));
        }
        for (p, want) in self.phases.iter().zip(reck_positions(n)) {
            if p.position != want {
                return Err(Error::InvalidArgument(format!(
                    "block at {:?} where {want:?} was expected",
                    p.position
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, param: PhaseParam) -> T {
        match param {
            PhaseParam::Theta(k) => self.phases[k].theta,
            PhaseParam::Phi(k) => self.phases[k].phi,
            PhaseParam::Diag(i) => self.d_phases[i],
        }
    }

    pub fn set(&mut self, param: PhaseParam, v: T) {
        match param {
            PhaseParam::Theta(k) => self.phases[k].theta = v,
            PhaseParam::Phi(k) => self.phases[k].phi = v,
            PhaseParam::Diag(i) => self.d_phases[i] = v,
        }
    }

    pub fn params(&self) -> Vec<PhaseParam> {
        let m = self.phases.len();
        (0..m)
            .map(PhaseParam::Theta)
            .chain((0..m).map(PhaseParam::Phi))
            .chain((0..self.n_ports).map(PhaseParam::Diag))
            .collect()
    }
}

// a <- a · R, R embedded at (i, j)
fn right_mul<T: Real>(a: &mut CMatrix<T>, (i, j): (usize, usize), r: &[Complex<T>; 4]) {
    for row in 0..a.rows() {
        let (ai, aj) = (a[(row, i)], a[(row, j)]);
        a[(row, i)] = ai * r[0] + aj * r[2];
        a[(row, j)] = ai * r[1] + aj * r[3];
    }
}

// a <- R^H · a
fn left_mul_adjoint<T: Real>(a: &mut CMatrix<T>, (i, j): (usize, usize), r: &[Complex<T>; 4]) {
    for col in 0..a.cols() {
        let (ai, aj) = (a[(i, col)], a[(j, col)]);
        a[(i, col)] = r[0].conj() * ai + r[2].conj() * aj;
        a[(j, col)] = r[1].conj() * ai + r[3].conj() * aj;
    }
}

fn scale_rows_by_d<T: Real>(m: &mut CMatrix<T>, d: &[T]) {
    for (i, &phase) in d.iter().enumerate() {
        let z = Complex::from_polar(T::one(), phase);
        for col in 0..m.cols() {
            m[(i, col)] = z * m[(i, col)];
        }
    }
}

// R(1,0) · R(2,0) · … without D
fn block_product<T: Real>(layer: &UnitaryLayer<T>) -> CMatrix<T> {
    let mut p = CMatrix::identity(layer.n_ports);
    for ph in &layer.phases {
        right_mul(&mut p, ph.position, &mzi_block(ph.theta, ph.phi));
    }
    p
}

pub fn compose_unitary<T: Real>(layer: &UnitaryLayer<T>) -> Result<CMatrix<T>> {
    layer.validate()?;
    let mut u = block_product(layer);
    scale_rows_by_d(&mut u, &layer.d_phases);
    Ok(u)
}

/// `∂U/∂param`: the composed product with one factor replaced by its
/// derivative.
pub fn unitary_derivative<T: Real>(layer: &UnitaryLayer<T>, param: PhaseParam) -> Result<CMatrix<T>> {
    layer.validate()?;
    let n = layer.n_ports;
    match param {
        PhaseParam::Diag(i) => {
            if i >= n {
                return Err(Error::InvalidArgument(format!("diagonal index {i} out of range")));
            }
            let p = block_product(layer);
            let mut out = CMatrix::zeros(n, n);
            let z = Complex::new(T::zero(), T::one()) * Complex::from_polar(T::one(), layer.d_phases[i]);
            for col in 0..n {
                out[(i, col)] = z * p[(i, col)];
            }
            Ok(out)
        }
        PhaseParam::Theta(k) | PhaseParam::Phi(k) => {
            if k >= layer.phases.len() {
                return Err(Error::InvalidArgument(format!("block index {k} out of range")));
            }
            let mut acc = CMatrix::identity(n);
            for (idx, ph) in layer.phases.iter().enumerate() {
                if idx == k {
                    let d = mzi_derivative(ph.theta, ph.phi, matches!(param, PhaseParam::Theta(_)));
                    // the derivative block is not embedded in an identity
                    let (i, j) = ph.position;
                    let mut next = CMatrix::zeros(n, n);
                    for row in 0..n {
                        next[(row, i)] = acc[(row, i)] * d[0] + acc[(row, j)] * d[2];
                        next[(row, j)] = acc[(row, i)] * d[1] + acc[(row, j)] * d[3];
                    }
                    acc = next;
                } else {
                    right_mul(&mut acc, ph.position, &mzi_block(ph.theta, ph.phi));
                }
            }
            scale_rows_by_d(&mut acc, &layer.d_phases);
            Ok(acc)
        }
    }
}

/// Gradient of a real loss with respect to every phase, given
/// `g = ∂E/∂Ū` (the conjugate Wirtinger derivative):
/// `∂E/∂param = 2 Re Σ conj(g_ij) ∂U_ij/∂param`.
///
/// One sweep through the blocks, carrying `R_{k+1}…R_M · gᴴ · D R_1…R_{k-1}`.
pub fn phase_gradient<T: Real>(layer: &UnitaryLayer<T>, g: &CMatrix<T>) -> Result<PhaseGrad<T>> {
    layer.validate()?;
    let n = layer.n_ports;
    if g.shape() != (n, n) {
        return Err(Error::shape("phase_gradient", format!("{n}x{n}"), format!("{}x{}", g.rows(), g.cols())));
    }
    let two = T::lit(2.0);
    let p = block_product(layer);
    let mut d_grad = vec![T::zero(); n];
    for (i, dg) in d_grad.iter_mut().enumerate() {
        let z = Complex::new(T::zero(), T::one()) * Complex::from_polar(T::one(), layer.d_phases[i]);
        let mut acc = Complex::new(T::zero(), T::zero());
        for col in 0..n {
            acc += g[(i, col)].conj() * z * p[(i, col)];
        }
        *dg = two * acc.re;
    }
    let mut gh_d = g.adjoint();
    for col in 0..n {
        let z = Complex::from_polar(T::one(), layer.d_phases[col]);
        for row in 0..n {
            gh_d[(row, col)] *= z;
        }
    }
    let mut a = p.matmul(&gh_d)?;
    let m = layer.phases.len();
    let (mut theta, mut phi) = (vec![T::zero(); m], vec![T::zero(); m]);
    for (k, ph) in layer.phases.iter().enumerate() {
        let r = mzi_block(ph.theta, ph.phi);
        left_mul_adjoint(&mut a, ph.position, &r);
        let (i, j) = ph.position;
        let trace_with = |d: [Complex<T>; 4]| {
            (a[(i, i)] * d[0] + a[(j, i)] * d[1] + a[(i, j)] * d[2] + a[(j, j)] * d[3]).re
        };
        theta[k] = two * trace_with(mzi_derivative(ph.theta, ph.phi, true));
        phi[k] = two * trace_with(mzi_derivative(ph.theta, ph.phi, false));
        right_mul(&mut a, ph.position, &r);
    }
    Ok(PhaseGrad { theta, phi, d: d_grad })
}

/// Per-parameter values for one layer, in [`UnitaryLayer::params`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrad<T> {
    pub theta: Vec<T>,
    pub phi: Vec<T>,
    pub d: Vec<T>,
}

impl<T: Real> PhaseGrad<T> {
    pub fn zeros(layer: &UnitaryLayer<T>) -> Self {
        Self {
            theta: vec![T::zero(); layer.phases.len()],
            phi: vec![T::zero(); layer.phases.len()],
            d: vec![T::zero(); layer.n_ports],
        }
    }

    pub fn get(&self, param: PhaseParam) -> T {
        match param {
            PhaseParam::Theta(k) => self.theta[k],
            PhaseParam::Phi(k) => self.phi[k],
            PhaseParam::Diag(i) => self.d[i],
        }
    }

    pub fn flat(&self) -> Vec<T> {
        self.theta.iter().chain(&self.phi).chain(&self.d).copied().collect()
    }

    fn negate(mut self) -> Self {
        for v in self.theta.iter_mut().chain(&mut self.phi).chain(&mut self.d) {
            *v = -*v;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryNet<T> {
    pub layers: Vec<UnitaryLayer<T>>,
    /// `classes × classes`, reading the first `classes` ports.
    pub readout: Matrix<T>,
    pub readout_bias: Vec<T>,
    /// Complex `ports × classes` per layer.
    pub feedback: Vec<CMatrix<T>>,
    pub g: Nonlinearity,
}

impl<T: Real> UnitaryNet<T> {
    /// Phases from `rng.derive(0)`, readout from `derive(1)`, feedback from `derive(2)`.
    pub fn new(ports: usize, depth: usize, classes: usize, g: Nonlinearity, rng: &RngStream) -> Result<Self> {
        if depth == 0 || classes == 0 || ports < classes.max(2) {
            return Err(Error::InvalidArgument(format!(
                "unitary net needs depth >= 1 and ports >= classes, got {ports} ports, depth {depth}, {classes} classes"
            )));
        }
        let mut prng = rng.derive(0);
        let layers = (0..depth).map(|_| UnitaryLayer::random(ports, &mut prng)).collect();
        let r = 1.0 / (classes as f64).sqrt();
        let readout = uniform_matrix(classes, classes, -r, r, &mut rng.derive(1))?;
        let mut brng = rng.derive(2);
        let feedback = (0..depth)
            .map(|_| uniform_cmatrix(ports, classes, -r, r, &mut brng))
            .collect::<Result<_>>()?;
        Ok(Self {
            layers,
            readout,
            readout_bias: vec![T::zero(); classes],
            feedback,
            g,
        })
    }

    pub fn ports(&self) -> usize {
        self.layers[0].n_ports
    }

    pub fn classes(&self) -> usize {
        self.readout.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("unitary net has no layers".into()));
        }
        let n = self.ports();
        for l in &self.layers {
            l.validate()?;
            if l.n_ports != n {
                return Err(Error::shape("UnitaryNet::validate", n, l.n_ports));
            }
        }
        let k = self.classes();
        if self.readout.cols() != k || self.readout_bias.len() != k || k > n {
            return Err(Error::shape("UnitaryNet readout", format!("{k}x{k}"), format!("{}x{}", self.readout.rows(), self.readout.cols())));
        }
        if self.feedback.len() != self.layers.len() || self.feedback.iter().any(|b| b.shape() != (n, k)) {
            return Err(Error::shape("UnitaryNet feedback", format!("{} of {n}x{k}", self.layers.len()), "mismatch"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryTrace<T> {
    /// Real input of each layer, `batch × ports`.
    pub inputs: Vec<Matrix<T>>,
    /// `U x` split into real and imaginary parts.
    pub u_re: Vec<Matrix<T>>,
    pub u_im: Vec<Matrix<T>>,
    pub output: Matrix<T>,
    pub logits: Matrix<T>,
    unitaries: Vec<CMatrix<T>>,
}

impl<T: Real> UnitaryTrace<T> {
    pub fn batch_size(&self) -> usize {
        self.output.rows()
    }

    /// `|U x|²` of layer `l`.
    pub fn intensity(&self, l: usize) -> Matrix<T> {
        self.u_re[l].zip_map(&self.u_im[l], |a, b| a * a + b * b).expect("same shape")
    }
}

fn split_parts<T: Real>(u: &CMatrix<T>) -> (Matrix<T>, Matrix<T>) {
    let (r, c) = u.shape();
    (
        Matrix::from_fn(r, c, |i, j| u[(i, j)].re),
        Matrix::from_fn(r, c, |i, j| u[(i, j)].im),
    )
}

/// Forward pass on real inputs, one sample per row.
pub fn unitary_forward<T: Real>(net: &UnitaryNet<T>, input: &Matrix<T>) -> Result<UnitaryTrace<T>> {
    net.validate()?;
    let n = net.ports();
    if input.cols() != n {
        return Err(Error::shape("unitary_forward", n, input.cols()));
    }
    let b = input.rows();
    let mut trace = UnitaryTrace {
        inputs: Vec::new(),
        u_re: Vec::new(),
        u_im: Vec::new(),
        output: Matrix::zeros(0, 0),
        logits: Matrix::zeros(0, 0),
        unitaries: Vec::new(),
    };
    let mut x = input.clone();
    for layer in &net.layers {
        let u = compose_unitary(layer)?;
        let (ur, ui) = split_parts(&u);
        let mut re = Matrix::zeros(b, n);
        let mut im = Matrix::zeros(b, n);
        gemm(T::one(), &x, Op::N, &ur, Op::T, T::zero(), &mut re)?;
        gemm(T::one(), &x, Op::N, &ui, Op::T, T::zero(), &mut im)?;
        let out = re.zip_map(&im, |a, c| (a * a + c * c).tanh())?;
        trace.inputs.push(std::mem::replace(&mut x, out));
        trace.u_re.push(re);
        trace.u_im.push(im);
        trace.unitaries.push(u);
    }
    let k = net.classes();
    let head = Matrix::from_fn(b, k, |i, j| x[(i, j)]);
    let mut logits = Matrix::from_fn(b, k, |_, j| net.readout_bias[j]);
    gemm(T::one(), &head, Op::N, &net.readout, Op::T, T::one(), &mut logits)?;
    trace.output = x;
    trace.logits = logits;
    Ok(trace)
}

/// Descent directions for every trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryUpdate<T> {
    pub phases: Vec<Option<PhaseGrad<T>>>,
    pub readout: Matrix<T>,
    pub readout_bias: Vec<T>,
}

fn check_trace<T: Real>(net: &UnitaryNet<T>, trace: &UnitaryTrace<T>, err: &ErrorSignal<T>) -> Result<()> {
    if trace.inputs.len() != net.layers.len() || trace.unitaries.len() != net.layers.len() {
        return Err(Error::MissingTrace("unitary forward trace"));
    }
    if err.e.shape() != (trace.batch_size(), net.classes()) {
        return Err(Error::shape(
            "unitary update error",
            format!("{}x{}", trace.batch_size(), net.classes()),
            format!("{}x{}", err.e.rows(), err.e.cols()),
        ));
    }
    Ok(())
}

fn readout_grads<T: Real>(net: &UnitaryNet<T>, trace: &UnitaryTrace<T>, e: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
    let b = trace.batch_size();
    let k = net.classes();
    let inv = T::one() / T::lit(b as f64);
    let head = Matrix::from_fn(b, k, |i, j| trace.output[(i, j)]);
    let mut dw = Matrix::zeros(k, k);
    gemm(-inv, e, Op::T, &head, Op::N, T::zero(), &mut dw)?;
    let db = (0..k)
        .map(|j| -inv * (0..b).fold(T::zero(), |acc, i| acc + e[(i, j)]))
        .collect();
    Ok((dw, db))
}

/// `(1/B) Σ_b δ_b x_bᵀ` with `δ = c ⊙ u` for real or complex `c`.
fn wirtinger_gradient<T: Real>(
    c_re: &Matrix<T>,
    c_im: &Matrix<T>,
    u_re: &Matrix<T>,
    u_im: &Matrix<T>,
    x: &Matrix<T>,
) -> Result<CMatrix<T>> {
    let b = x.rows();
    let n = x.cols();
    let d_re = Matrix::from_fn(b, n, |i, j| c_re[(i, j)] * u_re[(i, j)] - c_im[(i, j)] * u_im[(i, j)]);
    let d_im = Matrix::from_fn(b, n, |i, j| c_re[(i, j)] * u_im[(i, j)] + c_im[(i, j)] * u_re[(i, j)]);
    let inv = T::one() / T::lit(b as f64);
    let mut g_re = Matrix::zeros(n, n);
    let mut g_im = Matrix::zeros(n, n);
    gemm(inv, &d_re, Op::T, x, Op::N, T::zero(), &mut g_re)?;
    gemm(inv, &d_im, Op::T, x, Op::N, T::zero(), &mut g_im)?;
    let data = g_re
        .as_slice()
        .iter()
        .zip(g_im.as_slice())
        .map(|(&r, &i)| Complex::new(r, i))
        .collect();
    CMatrix::new(n, n, data)
}

/// Exact gradient (or `g` in place of `tanh′` when `substitute_g`), as descent directions.
pub fn unitary_bp_update<T: Real>(
    net: &UnitaryNet<T>,
    trace: &UnitaryTrace<T>,
    err: &ErrorSignal<T>,
    substitute_g: bool,
) -> Result<UnitaryUpdate<T>> {
    check_trace(net, trace, err)?;
    let (dw, db) = readout_grads(net, trace, &err.e)?;
    let b = trace.batch_size();
    let n = net.ports();
    let k = net.classes();
    // ∂E/∂(layer output), per sample (not yet averaged)
    let mut ew = Matrix::zeros(b, k);
    gemm(T::one(), &err.e, Op::N, &net.readout, Op::N, T::zero(), &mut ew)?;
    let mut a = Matrix::from_fn(b, n, |i, j| if j < k { ew[(i, j)] } else { T::zero() });
    let mut phases = vec![None; net.layers.len()];
    for l in (0..net.layers.len()).rev() {
        let p = trace.intensity(l);
        let c = a.zip_map(&p, |av, pv| {
            let slope = if substitute_g {
                net.g.eval(pv)
            } else {
                let t = pv.tanh();
                T::one() - t * t
            };
            av * slope
        })?;
        let (ur, ui) = (&trace.u_re[l], &trace.u_im[l]);
        let g = wirtinger_gradient(&c, &Matrix::zeros(b, n), ur, ui, &trace.inputs[l])?;
        phases[l] = Some(phase_gradient(&net.layers[l], &g)?.negate());
        if l > 0 {
            let (u_r, u_i) = split_parts(&trace.unitaries[l]);
            let cr = c.hadamard(ur)?;
            let ci = c.hadamard(ui)?;
            let mut next = Matrix::zeros(b, n);
            gemm(T::lit(2.0), &cr, Op::N, &u_r, Op::N, T::zero(), &mut next)?;
            gemm(T::lit(2.0), &ci, Op::N, &u_i, Op::N, T::one(), &mut next)?;
            a = next;
        }
    }
    Ok(UnitaryUpdate {
        phases,
        readout: dw,
        readout_bias: db,
    })
}

/// Augmented DFA: `δU = −(1/B) Σ_b [Re(B e_b) ⊙ g(|u_b|²) ⊙ u_b] x_bᵀ`, mapped to phases.
///
/// The error reaching an intensity detector is real, so only the real part
/// of the complex projection is used; the imaginary part would only rotate
/// output phases that the detector discards.
pub fn unitary_dfa_update<T: Real>(
    net: &UnitaryNet<T>,
    trace: &UnitaryTrace<T>,
    err: &ErrorSignal<T>,
) -> Result<UnitaryUpdate<T>> {
    check_trace(net, trace, err)?;
    let (dw, db) = readout_grads(net, trace, &err.e)?;
    let b = trace.batch_size();
    let n = net.ports();
    let mut phases = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let (fb_re, _) = split_parts(&net.feedback[l]);
        let mut c = Matrix::zeros(b, n);
        gemm(T::one(), &err.e, Op::N, &fb_re, Op::T, T::zero(), &mut c)?;
        c.hadamard_inplace(&trace.intensity(l).map(|p| net.g.eval(p)))?;
        let g = wirtinger_gradient(&c, &Matrix::zeros(b, n), &trace.u_re[l], &trace.u_im[l], &trace.inputs[l])?;
        phases.push(Some(phase_gradient(layer, &g)?.negate()));
    }
    Ok(UnitaryUpdate {
        phases,
        readout: dw,
        readout_bias: db,
    })
}

pub fn unitary_readout_update<T: Real>(
    net: &UnitaryNet<T>,
    trace: &UnitaryTrace<T>,
    err: &ErrorSignal<T>,
) -> Result<UnitaryUpdate<T>> {
    check_trace(net, trace, err)?;
    let (dw, db) = readout_grads(net, trace, &err.e)?;
    Ok(UnitaryUpdate {
        phases: vec![None; net.layers.len()],
        readout: dw,
        readout_bias: db,
    })
}

pub fn unitary_updates_for<T: Real>(
    trainer: Trainer,
    net: &UnitaryNet<T>,
    trace: &UnitaryTrace<T>,
    err: &ErrorSignal<T>,
) -> Result<UnitaryUpdate<T>> {
    match trainer {
        Trainer::Bp => unitary_bp_update(net, trace, err, false),
        Trainer::BpG => unitary_bp_update(net, trace, err, true),
        Trainer::Dfa => unitary_dfa_update(net, trace, err),
        Trainer::ReadoutOnly => unitary_readout_update(net, trace, err),
    }
}

/// Steps the readout with `lr` and every phase with `phase_lr`.
pub fn apply_update<T: Real>(net: &mut UnitaryNet<T>, upd: &UnitaryUpdate<T>, lr: T, phase_lr: T) -> Result<()> {
    net.readout.axpy(lr, &upd.readout)?;
    for (b, &d) in net.readout_bias.iter_mut().zip(&upd.readout_bias) {
        *b += lr * d;
    }
    for (layer, grad) in net.layers.iter_mut().zip(&upd.phases) {
        let Some(grad) = grad else { continue };
        for (p, (&dt, &dp)) in layer.phases.iter_mut().zip(grad.theta.iter().zip(&grad.phi)) {
            p.theta += phase_lr * dt;
            p.phi += phase_lr * dp;
        }
        for (d, &dd) in layer.d_phases.iter_mut().zip(&grad.d) {
            *d += phase_lr * dd;
        }
    }
    Ok(())
}

/// Phase table rows `(layer, i, j, theta, phi)`.
pub fn phase_rows<T: Real>(net: &UnitaryNet<T>) -> Vec<(usize, usize, usize, f64, f64)> {
    net.layers
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| {
            layer.phases.iter().map(move |p| {
                (l, p.position.0, p.position.1, p.theta.to_f64_lossy(), p.phi.to_f64_lossy())
            })
        })
        .collect()
}
