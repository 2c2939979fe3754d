//! Single training runs and their output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use augdfa::activations::{correlation_eta, eta_for, Activation, Nonlinearity};
use augdfa::checkpoint::{ffnet_checkpoint, reservoir_checkpoint, unitary_checkpoint, Checkpoint};
use augdfa::data::fixtures::synthetic_digits;
use augdfa::data::{as_sequence, default_data_dir, load_cifar10, load_mnist, Dataset, Split};
use augdfa::ffnet::{train, EpochMetrics, FeedforwardNet, History, TrainConfig};
use augdfa::reservoir::{
    rc_alt_forward, rc_forward, train_rc, trace_rows, DeepReservoir, NoiseSpec, RcTrainConfig, ReservoirSpec,
};
use augdfa::unitary::{phase_rows, train_unitary, UnitaryNet, UnitaryTrainConfig};
use augdfa::{Matrix, Real, RngStream};
use serde_json::json;

use crate::config::{DatasetKind, ExperimentConfig, Model, Precision};
use crate::output::{fmt_f64, CsvOut};

pub const METRICS_HEADER: [&str; 7] = ["epoch", "train_acc", "test_acc", "loss", "diverged", "angle_mean", "angles"];

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub history: History,
    pub eta: Option<f64>,
}

impl RunOutcome {
    pub fn final_test_acc(&self) -> f64 {
        self.history.final_test_acc().unwrap_or(f64::NAN)
    }

    /// Layer-mean angle of the last epoch.
    pub fn final_mean_angle(&self) -> Option<f64> {
        self.history.epochs.last().and_then(EpochMetrics::mean_angle)
    }
}

/// Loaded and model-ready train/test data.
pub struct Prepared<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
}

pub fn data_root(cfg: &ExperimentConfig) -> PathBuf {
    cfg.data_dir.clone().unwrap_or_else(default_data_dir).join(cfg.dataset.subdir())
}

fn synthetic<T: Real>(n: usize, split: Split, seed: u64) -> Result<Dataset<T>> {
    let (px, lb) = synthetic_digits(n, 28, 28, 10, &mut RngStream::new(seed).derive(split as u64));
    let images = Matrix::new(n, 784, px.iter().map(|&p| T::lit(f64::from(p) / 255.0)).collect())?;
    Ok(Dataset::new(images, lb.iter().map(|&l| usize::from(l)).collect(), 10, split, Some((28, 28)))?)
}

pub fn prepare<T: Real>(cfg: &ExperimentConfig) -> Result<Prepared<T>> {
    let root = data_root(cfg);
    let load = |split| -> Result<Dataset<T>> {
        let d = match cfg.dataset {
            DatasetKind::Mnist | DatasetKind::FashionMnist => load_mnist(&root, split),
            DatasetKind::Cifar10 => load_cifar10(&root, split),
            DatasetKind::Synthetic => {
                let n = if split == Split::Train { cfg.synthetic_train } else { cfg.synthetic_test };
                return synthetic(n, split, 0x5717);
            }
        };
        d.with_context(|| {
            format!(
                "loading {} {} data from {} (set --data-dir or AUGDFA_DATA_DIR, or run gen-fixtures)",
                cfg.dataset.subdir(),
                split.as_str(),
                root.display()
            )
        })
    };
    let mut train = load(Split::Train)?;
    let mut test = load(Split::Test)?;
    if let Some(n) = cfg.train_limit {
        train = train.head(n);
    }
    if let Some(n) = cfg.test_limit {
        test = test.head(n);
    }
    let gray = |d: Dataset<T>| -> Result<Dataset<T>> {
        if cfg.dataset == DatasetKind::Cifar10 {
            Ok(d.grayscale(3)?)
        } else {
            Ok(d)
        }
    };
    match cfg.model {
        Model::Reservoir => {
            train = gray(train)?;
            test = gray(test)?;
        }
        Model::Unitary => {
            let side = (cfg.ports as f64).sqrt().round() as usize;
            let power = cfg.input_power.unwrap_or(cfg.ports as f64);
            train = gray(train)?.resized(side, side)?.scaled_to_power(power);
            test = gray(test)?.resized(side, side)?.scaled_to_power(power);
        }
        Model::Ffnet | Model::Elm => {}
    }
    Ok(Prepared { train, test })
}

/// `η` of the configured derivative/feedback pair, when defined.
pub fn config_eta(cfg: &ExperimentConfig, g: &Nonlinearity) -> Option<f64> {
    match cfg.model {
        Model::Ffnet | Model::Elm => eta_for(&cfg.activation().ok()?, g).ok(),
        Model::Unitary => eta_for(&Activation::Tanh, g).ok(),
        Model::Reservoir => {
            let (pb, pa) = (cfg.phi_bias, cfg.phi_alt);
            correlation_eta(|s| -(s + pb).sin(), |s| (s + pa).sin()).ok()
        }
    }
}

fn reservoir_spec(cfg: &ExperimentConfig, image_shape: (usize, usize), classes: usize) -> Result<ReservoirSpec> {
    Ok(ReservoirSpec {
        nodes: cfg.nodes,
        layers: cfg.layers,
        input_dim: image_shape.0,
        classes,
        window: cfg.window.unwrap_or(image_shape.1),
        alpha: cfg.alpha,
        phi_bias: cfg.phi_bias,
        phi_alt: cfg.phi_alt,
        mask_scale: cfg.mask_scale,
        deep_mask_scale: cfg.deep_mask_scale,
        allow_unstable: cfg.allow_unstable,
        alt_mode: cfg.alt_mode()?,
    })
}

struct Outputs {
    dir: PathBuf,
    metrics: CsvOut,
    timing: CsvOut,
    start: Instant,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics: CsvOut::create(&dir.join("metrics.csv"), &METRICS_HEADER)?,
            timing: CsvOut::create(&dir.join("timing.csv"), &["epoch", "wall_seconds"])?,
            start: Instant::now(),
        })
    }

    fn epoch(&mut self, m: &EpochMetrics) -> Result<()> {
        let angles: Vec<String> = m.angles.iter().map(|&a| fmt_f64(a)).collect();
        self.metrics.row(&[
            m.epoch.to_string(),
            fmt_f64(m.train_acc),
            fmt_f64(m.test_acc),
            fmt_f64(m.loss),
            m.diverged.to_string(),
            m.mean_angle().map(fmt_f64).unwrap_or_default(),
            angles.join(";"),
        ])?;
        self.timing.row(&[m.epoch.to_string(), format!("{:.3}", self.start.elapsed().as_secs_f64())])
    }
}

/// Trains one model. With `out`, writes metrics.csv, timing.csv,
/// summary.json and checkpoint.bin there. `g_override` replaces the
/// configured `g` (used by the swarm search).
pub fn run_on<T: Real>(
    cfg: &ExperimentConfig,
    data: &Prepared<T>,
    g_override: Option<Nonlinearity>,
    out: Option<&Path>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let trainer = cfg.trainer()?;
    let g = match g_override {
        Some(g) => g,
        None => cfg.nonlinearity()?,
    };
    let mut outputs = out.map(Outputs::create).transpose()?;
    let mut write_err = None;
    let mut on_epoch = |m: &EpochMetrics| {
        if let Some(o) = outputs.as_mut() {
            if let Err(e) = o.epoch(m) {
                write_err.get_or_insert(e);
            }
        }
    };
    let classes = data.train.n_classes.max(data.test.n_classes);
    let rng = RngStream::new(cfg.seed);
    let (history, checkpoint, extra): (History, Checkpoint, Vec<(String, CsvOut)>) = match cfg.model {
        Model::Ffnet | Model::Elm => {
            let mut sizes = vec![data.train.features()];
            sizes.extend(&cfg.hidden);
            sizes.push(classes);
            let mut net = FeedforwardNet::<T>::new(&sizes, cfg.activation()?, g.clone(), &rng)?;
            let frozen = match (&cfg.frozen, cfg.model) {
                (Some(f), _) => f.clone(),
                (None, Model::Elm) => (1..cfg.hidden.len()).step_by(2).collect(),
                (None, _) => Vec::new(),
            };
            for i in frozen {
                net.layers[i].frozen = true;
            }
            let tc = TrainConfig {
                trainer,
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                lr: cfg.lr,
                momentum: cfg.momentum,
                seed: cfg.seed,
                angle_probe: cfg.angle_probe,
                eval_train_limit: cfg.eval_train_limit,
            };
            let h = train(&mut net, &data.train, &data.test, &tc, &mut on_epoch)?;
            let ck = ffnet_checkpoint(&net, cfg.seed, h.epochs.len() as u64);
            (h, ck, Vec::new())
        }
        Model::Reservoir => {
            let shape = data
                .train
                .image_shape
                .context("reservoir input needs images with a known (rows, cols) shape")?;
            let spec = reservoir_spec(cfg, shape, classes)?;
            let mut res = DeepReservoir::<T>::new(&spec, &rng)?;
            let rc = RcTrainConfig {
                trainer,
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                lr: cfg.lr,
                mask_lr: cfg.mask_lr,
                deep_mask_lr: cfg.deep_mask_lr,
                momentum: cfg.momentum,
                seed: cfg.seed,
                epsilon: cfg.epsilon,
                image_shape: shape,
                eval_train_limit: cfg.eval_train_limit,
            };
            let h = train_rc(&mut res, &data.train, &data.test, &rc, &mut on_epoch)?;
            let mut extra = Vec::new();
            if let (Some(dir), true) = (out, cfg.write_trace && !data.test.is_empty()) {
                let view = as_sequence(&data.test, shape)?;
                let mut trace = rc_forward(&res, &view.batch_steps(&[0]), &mut NoiseSpec::none())?;
                rc_alt_forward(&res, &mut trace, &mut NoiseSpec::none())?;
                let mut csv = CsvOut::create(&dir.join("trace.csv"), &["layer", "n", "node", "x", "s", "x_alt"])?;
                for (l, n, i, x, s, alt) in trace_rows(&trace, 0) {
                    csv.row(&[
                        l.to_string(),
                        n.to_string(),
                        i.to_string(),
                        fmt_f64(x),
                        fmt_f64(s),
                        alt.map(fmt_f64).unwrap_or_default(),
                    ])?;
                }
                extra.push(("trace".to_string(), csv));
            }
            let ck = reservoir_checkpoint(&res, cfg.seed, h.epochs.len() as u64);
            (h, ck, extra)
        }
        Model::Unitary => {
            let mut net = UnitaryNet::<T>::new(cfg.ports, cfg.layers, classes, g.clone(), &rng)?;
            let uc = UnitaryTrainConfig {
                trainer,
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                lr: cfg.lr,
                phase_lr: cfg.phase_lr,
                seed: cfg.seed,
                eval_train_limit: cfg.eval_train_limit,
            };
            let h = train_unitary(&mut net, &data.train, &data.test, &uc, &mut on_epoch)?;
            let mut extra = Vec::new();
            if let Some(dir) = out {
                let mut csv = CsvOut::create(&dir.join("phases.csv"), &["layer", "i", "j", "theta", "phi"])?;
                for (l, i, j, theta, phi) in phase_rows(&net) {
                    csv.row(&[l.to_string(), i.to_string(), j.to_string(), fmt_f64(theta), fmt_f64(phi)])?;
                }
                extra.push(("phases".to_string(), csv));
            }
            let ck = unitary_checkpoint(&net, cfg.seed, h.epochs.len() as u64);
            (h, ck, extra)
        }
    };
    if let Some(e) = write_err {
        return Err(e);
    }
    let eta = config_eta(cfg, &g);
    if let Some(mut o) = outputs {
        o.metrics.finish()?;
        o.timing.finish()?;
        for (_, mut csv) in extra {
            csv.finish()?;
        }
        checkpoint.save(&o.dir.join("checkpoint.bin"))?;
        let last = history.epochs.last();
        let summary = json!({
            "model": cfg.model,
            "trainer": cfg.trainer,
            "g": g.to_string(),
            "epochs_run": history.epochs.len(),
            "final_train_acc": last.map(|m| m.train_acc),
            "final_test_acc": last.map(|m| m.test_acc),
            "final_loss": last.map(|m| m.loss),
            "final_mean_angle": last.and_then(EpochMetrics::mean_angle),
            "diverged": history.diverged,
            "eta": eta,
            "config": cfg,
        });
        fs::write(o.dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")
            .context("writing summary.json")?;
    }
    Ok(RunOutcome { history, eta })
}

/// Loads data and trains one model in the configured precision.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome> {
    match cfg.precision {
        Precision::F32 => run_on(cfg, &prepare::<f32>(cfg)?, None, out),
        Precision::F64 => run_on(cfg, &prepare::<f64>(cfg)?, None, out),
    }
}
