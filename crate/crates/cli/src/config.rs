//! Experiment configuration: a flat TOML (or JSON) table, unknown keys rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use augdfa::activations::{Activation, Nonlinearity};
use augdfa::ffnet::Trainer;
use augdfa::reservoir::AltMode;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Ffnet,
    Elm,
    Reservoir,
    Unitary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Mnist,
    FashionMnist,
    Cifar10,
    /// Generated in memory, 28×28 with 10 classes; needs no files.
    Synthetic,
}

impl DatasetKind {
    pub fn subdir(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::FashionMnist => "fashion_mnist",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Synthetic => "synthetic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `g = sin(x + θ)`; for reservoirs the value is `phi_alt`.
    EtaTheta,
    Layers,
    Epsilon,
    /// Values are `g` specs.
    G,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Num(f64),
    Text(String),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Num(v) => write!(f, "{v}"),
            SweepValue::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: Model,
    /// `bp`, `bp_g`, `dfa` or `readout_only`.
    pub trainer: String,
    pub f: String,
    /// `fprime` or any activation spec. Unset means `fprime`, or `cos`
    /// for unitary meshes.
    pub g: Option<String>,
    pub precision: Precision,

    pub dataset: DatasetKind,
    /// Dataset root; the dataset lives in `<data_dir>/<dataset>`.
    pub data_dir: Option<PathBuf>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub synthetic_train: usize,
    pub synthetic_test: usize,

    // feedforward
    pub hidden: Vec<usize>,
    /// Hidden layer indices whose weights stay fixed. `elm` defaults to
    /// every second hidden layer starting at index 1.
    pub frozen: Option<Vec<usize>>,
    pub angle_probe: usize,

    // reservoir (`layers` is also the unitary depth)
    pub nodes: usize,
    pub layers: usize,
    pub alpha: f64,
    pub phi_bias: f64,
    pub phi_alt: f64,
    pub mask_scale: f64,
    pub deep_mask_scale: f64,
    pub window: Option<usize>,
    pub alt_mode: String,
    pub allow_unstable: bool,
    pub epsilon: f64,
    pub write_trace: bool,

    // unitary
    pub ports: usize,
    /// Squared norm each input row is scaled to; unset means `ports`
    /// (mean intensity one per port).
    pub input_power: Option<f64>,

    pub lr: f64,
    pub mask_lr: Option<f64>,
    pub deep_mask_lr: Option<f64>,
    /// Unitary phase rate; defaults to `lr`.
    pub phase_lr: Option<f64>,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_train_limit: Option<usize>,

    pub repeats: usize,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<SweepValue>,

    pub pso_generations: usize,
    pub pso_particles: usize,
    pub pso_order: usize,
    pub pso_inertia: f64,
    pub pso_cognitive: f64,
    pub pso_social: f64,
    pub pso_velocity_clamp: f64,

    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: Model::Ffnet,
            trainer: "dfa".into(),
            f: "tanh".into(),
            g: None,
            precision: Precision::F32,
            dataset: DatasetKind::Mnist,
            data_dir: None,
            train_limit: None,
            test_limit: None,
            synthetic_train: 2000,
            synthetic_test: 500,
            hidden: vec![800; 4],
            frozen: None,
            angle_probe: 256,
            nodes: 404,
            layers: 1,
            alpha: 0.9,
            phi_bias: 0.0,
            phi_alt: 0.0,
            mask_scale: 1.0,
            deep_mask_scale: 1.0,
            window: None,
            alt_mode: "stored".into(),
            allow_unstable: false,
            epsilon: 0.0,
            write_trace: false,
            ports: 64,
            input_power: None,
            lr: 0.01,
            mask_lr: None,
            deep_mask_lr: None,
            phase_lr: None,
            momentum: 0.0,
            epochs: 20,
            batch_size: 64,
            seed: 0,
            eval_train_limit: Some(10_000),
            repeats: 1,
            sweep_axis: None,
            sweep_values: Vec::new(),
            pso_generations: 20,
            pso_particles: 128,
            pso_order: augdfa::activations::FOURIER_ORDER,
            pso_inertia: 0.7,
            pso_cognitive: 1.5,
            pso_social: 1.5,
            pso_velocity_clamp: 0.5,
            out_dir: None,
        }
    }
}

fn field<T, E: std::fmt::Display>(name: &str, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| anyhow::anyhow!("invalid value for `{name}`: {e}"))
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).context("config is not valid JSON for this schema")?
        } else {
            toml::from_str(text).context("config is not valid TOML for this schema")?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn trainer(&self) -> Result<Trainer> {
        field("trainer", self.trainer.parse::<Trainer>())
    }

    pub fn activation(&self) -> Result<Activation> {
        field("f", self.f.parse::<Activation>())
    }

    /// `g` resolved against `f`; unitary meshes resolve `fprime` against `tanh`.
    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let (f, default) = match self.model {
            Model::Unitary => (Activation::Tanh, "cos"),
            _ => (self.activation()?, "fprime"),
        };
        field("g", Nonlinearity::parse_for(self.g.as_deref().unwrap_or(default), &f))
    }

    pub fn alt_mode(&self) -> Result<AltMode> {
        field("alt_mode", self.alt_mode.parse::<AltMode>())
    }

    pub fn validate(&self) -> Result<()> {
        let trainer = self.trainer()?;
        self.activation()?;
        self.nonlinearity()?;
        self.alt_mode()?;
        if self.batch_size == 0 {
            bail!("invalid value for `batch_size`: must be at least 1");
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            bail!("invalid value for `lr`: must be finite and non-negative");
        }
        if self.repeats == 0 {
            bail!("invalid value for `repeats`: must be at least 1");
        }
        if !(self.epsilon >= 0.0) {
            bail!("invalid value for `epsilon`: must be non-negative");
        }
        match self.model {
            Model::Ffnet | Model::Elm => {
                if self.hidden.contains(&0) {
                    bail!("invalid value for `hidden`: widths must be positive");
                }
                if let Some(fr) = &self.frozen {
                    if let Some(&bad) = fr.iter().find(|&&i| i >= self.hidden.len()) {
                        bail!("invalid value for `frozen`: {bad} is not a hidden layer index");
                    }
                }
            }
            Model::Reservoir => {
                if !matches!(trainer, Trainer::Dfa | Trainer::ReadoutOnly) {
                    bail!("invalid value for `trainer`: reservoirs train with dfa or readout_only");
                }
                if self.nodes < 2 {
                    bail!("invalid value for `nodes`: need at least 2");
                }
                if self.layers == 0 {
                    bail!("invalid value for `layers`: need at least 1");
                }
                if self.window == Some(0) {
                    bail!("invalid value for `window`: must be at least 1");
                }
            }
            Model::Unitary => {
                let side = (self.ports as f64).sqrt().round() as usize;
                if side * side != self.ports || self.ports < 16 {
                    bail!("invalid value for `ports`: must be a perfect square of at least 16");
                }
                if self.layers == 0 {
                    bail!("invalid value for `layers`: need at least 1");
                }
                if let Some(p) = self.input_power {
                    if !(p.is_finite() && p > 0.0) {
                        bail!("invalid value for `input_power`: must be finite and positive");
                    }
                }
            }
        }
        if let Some(axis) = self.sweep_axis {
            if self.sweep_values.is_empty() {
                bail!("invalid value for `sweep_values`: a sweep needs at least one value");
            }
            for v in &self.sweep_values {
                match (axis, v) {
                    (SweepAxis::G, SweepValue::Text(_)) => {}
                    (SweepAxis::G, SweepValue::Num(_)) => {
                        bail!("invalid value for `sweep_values`: the g axis takes g specs as strings")
                    }
                    (_, SweepValue::Text(s)) => {
                        bail!("invalid value for `sweep_values`: '{s}' is not a number")
                    }
                    _ => {}
                }
            }
            if axis == SweepAxis::Epsilon && self.model != Model::Reservoir {
                bail!("invalid value for `sweep_axis`: epsilon applies to reservoirs only");
            }
        }
        if self.pso_generations == 0 || self.pso_particles == 0 {
            bail!("invalid value for `pso_generations`/`pso_particles`: must be at least 1");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
