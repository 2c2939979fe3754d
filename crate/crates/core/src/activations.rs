//! Scalar nonlinearities: forward activations `f`, their analytic
//! derivatives, alternative feedback functions `g` (including normalized
//! random Fourier series) and the functional correlation `eta` between
//! `f'` and `g`.

use std::f64::consts::{E, FRAC_2_PI, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::scalar::Real;

/// Default Fourier order for random `g` draws.
pub const FOURIER_ORDER: usize = 4;

/// Coefficients of `g(x) = c1 + sum_k a_k sin(kx) + b_k cos(kx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierCoeffs {
    pub c1: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierCoeffs {
    pub fn new(c1: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::shape("FourierCoeffs::new", a.len(), b.len()));
        }
        Ok(Self { c1, a, b })
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// `|c1| + sum_k (|a_k| + |b_k|)`.
    pub fn l1(&self) -> f64 {
        self.c1.abs() + self.a.iter().chain(&self.b).map(|v| v.abs()).sum::<f64>()
    }

    /// Rescales so that the L1 norm is one. Fails on an all-zero vector.
    pub fn normalized(mut self) -> Result<Self> {
        let s = self.l1();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(
                "cannot normalize all-zero or non-finite Fourier coefficients".into(),
            ));
        }
        self.c1 /= s;
        self.a.iter_mut().chain(self.b.iter_mut()).for_each(|v| *v /= s);
        Ok(self)
    }

    /// Flattened as `[c1, a_1..a_N, b_1..b_N]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + 2 * self.order());
        v.push(self.c1);
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.is_empty() || flat.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "flattened Fourier coefficients need odd length 2N+1, got {}",
                flat.len()
            )));
        }
        let n = (flat.len() - 1) / 2;
        Ok(Self {
            c1: flat[0],
            a: flat[1..=n].to_vec(),
            b: flat[n + 1..].to_vec(),
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let mut acc = self.c1;
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let (s, c) = ((k + 1) as f64 * x).sin_cos();
            acc += a * s + b * c;
        }
        acc
    }

    fn eval_derivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let kf = (k + 1) as f64;
            let (s, c) = (kf * x).sin_cos();
            acc += kf * (a * c - b * s);
        }
        acc
    }
}

/// Draws a random Fourier series of the given order: coefficients uniform on
/// `[-1, 1)`, then rescaled to unit L1 norm.
pub fn random_fourier(rng: &mut RngStream, order: usize) -> FourierCoeffs {
    loop {
        let c1 = rng.uniform(-1.0, 1.0);
        let a = (0..order).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let b = (0..order).map(|_| rng.uniform(-1.0, 1.0)).collect();
        if let Ok(c) = (FourierCoeffs { c1, a, b }).normalized() {
            return c;
        }
    }
}

/// Named scalar function family.
#[derive(Clone, Debug, PartialEq)]
pub enum Activation {
    Tanh,
    Cos,
    Sin,
    /// Odd, period `2*pi`, amplitude-one triangle wave.
    Triangle,
    /// `sin(x + theta)`.
    ShiftedSin { theta: f64 },
    Fourier(FourierCoeffs),
    /// `tanh(x^2)`, intensity detection followed by an electrical tanh.
    IntensityTanh,
}

impl Activation {
    /// Evaluates the function in `f64`.
    pub fn eval_f64(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Cos => x.cos(),
            Activation::Sin => x.sin(),
            Activation::Triangle => FRAC_2_PI * x.sin().asin(),
            Activation::ShiftedSin { theta } => (x + theta).sin(),
            Activation::Fourier(c) => c.eval(x),
            Activation::IntensityTanh => (x * x).tanh(),
        }
    }

    /// Analytic derivative in `f64`.
    pub fn derivative_f64(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let c = x.cosh();
                1.0 / (c * c)
            }
            Activation::Cos => -x.sin(),
            Activation::Sin => x.cos(),
            Activation::Triangle => {
                let c = x.cos();
                if c > 0.0 {
                    FRAC_2_PI
                } else if c < 0.0 {
                    -FRAC_2_PI
                } else {
                    0.0
                }
            }
            Activation::ShiftedSin { theta } => (x + theta).cos(),
            Activation::Fourier(c) => c.eval_derivative(x),
            Activation::IntensityTanh => {
                let c = (x * x).cosh();
                2.0 * x / (c * c)
            }
        }
    }

    /// Evaluates the function at any precision.
    #[inline]
    pub fn eval<T: Real>(&self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Cos => x.cos(),
            Activation::Sin => x.sin(),
            Activation::ShiftedSin { theta } => (x + T::lit(*theta)).sin(),
            _ => T::lit(self.eval_f64(x.to_f64_lossy())),
        }
    }

    #[inline]
    pub fn eval_derivative<T: Real>(&self, x: T) -> T {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Cos => -x.sin(),
            Activation::Sin => x.cos(),
            Activation::ShiftedSin { theta } => (x + T::lit(*theta)).cos(),
            _ => T::lit(self.derivative_f64(x.to_f64_lossy())),
        }
    }

    /// The derivative `f'` as a callable nonlinearity.
    pub fn derivative(&self) -> Nonlinearity {
        Nonlinearity::Derivative(self.clone())
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Tanh => write!(f, "tanh"),
            Activation::Cos => write!(f, "cos"),
            Activation::Sin => write!(f, "sin"),
            Activation::Triangle => write!(f, "triangle"),
            Activation::ShiftedSin { theta } => write!(f, "shifted_sin:{theta}"),
            Activation::Fourier(c) => {
                let parts: Vec<String> = c.to_flat().iter().map(|v| v.to_string()).collect();
                write!(f, "fourier:{}", parts.join(","))
            }
            Activation::IntensityTanh => write!(f, "intensity_tanh"),
        }
    }
}

/// Parses `tanh`, `cos`, `sin`, `triangle`, `intensity_tanh`,
/// `shifted_sin:<theta>`, `fourier:<c1,a..,b..>` (normalized on parse) and
/// `fourier_seed:<seed>` (random order-4 draw).
impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        let need_arg = |what: &str| {
            arg.ok_or_else(|| Error::InvalidArgument(format!("{kind} needs a parameter ({what})")))
        };
        let parse_f = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number '{v}' in '{s}'")))
        };
        let act = match kind {
            "tanh" => Activation::Tanh,
            "cos" => Activation::Cos,
            "sin" => Activation::Sin,
            "triangle" => Activation::Triangle,
            "intensity_tanh" => Activation::IntensityTanh,
            "shifted_sin" => Activation::ShiftedSin {
                theta: parse_f(need_arg("theta")?)?,
            },
            "fourier" => {
                let flat = need_arg("coefficients")?
                    .split(',')
                    .map(parse_f)
                    .collect::<Result<Vec<_>>>()?;
                Activation::Fourier(FourierCoeffs::from_flat(&flat)?.normalized()?)
            }
            "fourier_seed" => {
                let seed = need_arg("seed")?
                    .parse::<u64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad seed in '{s}'")))?;
                Activation::Fourier(random_fourier(&mut RngStream::new(seed), FOURIER_ORDER))
            }
            other => {
                return Err(Error::InvalidArgument(format!("unknown activation '{other}'")))
            }
        };
        if arg.is_some() && !matches!(kind, "shifted_sin" | "fourier" | "fourier_seed") {
            return Err(Error::InvalidArgument(format!("{kind} takes no parameter")));
        }
        Ok(act)
    }
}

/// A function usable in the feedback path: either an activation itself or
/// the analytic derivative of one.
#[derive(Clone, Debug, PartialEq)]
pub enum Nonlinearity {
    Plain(Activation),
    Derivative(Activation),
}

impl Nonlinearity {
    #[inline]
    pub fn eval<T: Real>(&self, x: T) -> T {
        match self {
            Nonlinearity::Plain(a) => a.eval(x),
            Nonlinearity::Derivative(a) => a.eval_derivative(x),
        }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        match self {
            Nonlinearity::Plain(a) => a.eval_f64(x),
            Nonlinearity::Derivative(a) => a.derivative_f64(x),
        }
    }

    /// Resolves a `g` spec against the forward activation: `fprime` means
    /// the analytic derivative of `f`, anything else parses as an activation.
    pub fn parse_for(spec: &str, f: &Activation) -> Result<Self> {
        if spec.trim() == "fprime" {
            Ok(f.derivative())
        } else {
            Ok(Nonlinearity::Plain(spec.parse()?))
        }
    }
}

impl From<Activation> for Nonlinearity {
    fn from(a: Activation) -> Self {
        Nonlinearity::Plain(a)
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Plain(a) => write!(f, "{a}"),
            Nonlinearity::Derivative(a) => write!(f, "d/dx {a}"),
        }
    }
}

/// Number of trapezoid nodes on `[-e, e]`.
pub const ETA_QUADRATURE_POINTS: usize = 10_001;

/// Functional Pearson correlation of `fprime` and `g` over `[-e, e]`,
/// computed with the composite trapezoid rule and clamped to `[-1, 1]`.
pub fn correlation_eta(fprime: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let n = ETA_QUADRATURE_POINTS;
    let h = 2.0 * E / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| -E + h * i as f64).collect();
    let fv: Vec<f64> = xs.iter().map(|&x| fprime(x)).collect();
    let gv: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    if fv.iter().chain(&gv).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "correlation needs functions finite on [-e, e]".into(),
        ));
    }
    let trapz = |v: &dyn Fn(usize) -> f64| {
        let inner: f64 = (1..n - 1).map(v).sum();
        h * (inner + 0.5 * (v(0) + v(n - 1)))
    };
    let len = 2.0 * E;
    let fm = trapz(&|i| fv[i]) / len;
    let gm = trapz(&|i| gv[i]) / len;
    let cov = trapz(&|i| (fv[i] - fm) * (gv[i] - gm));
    let vf = trapz(&|i| (fv[i] - fm).powi(2));
    let vg = trapz(&|i| (gv[i] - gm).powi(2));
    let tiny = 1e-24 * len;
    if vf <= tiny * (1.0 + fm * fm) {
        return Err(Error::UndefinedCorrelation("f'"));
    }
    if vg <= tiny * (1.0 + gm * gm) {
        return Err(Error::UndefinedCorrelation("g"));
    }
    Ok((cov / (vf.sqrt() * vg.sqrt())).clamp(-1.0, 1.0))
}

/// `eta` between the derivative of `f` and `g`.
pub fn eta_for(f: &Activation, g: &Nonlinearity) -> Result<f64> {
    correlation_eta(|x| f.derivative_f64(x), |x| g.eval_f64(x))
}

/// Phase offset that makes `sin(x + theta)` equal `f'` for `f = cos`.
pub const COS_DERIVATIVE_THETA: f64 = PI;
