use super::{
    rc_alt_forward, rc_dfa_update, rc_forward, rc_readout, rc_readout_update, DeepReservoir,
    NoiseSpec,
};
use crate::data::{as_sequence, batches, one_hot, Dataset, SequenceView};
use crate::error::{Error, Result};
use crate::ffnet::{argmax_rows, loss_and_error, EpochMetrics, Evaluation, History, Trainer};
use crate::numerics::{Matrix, RngStream};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct RcTrainConfig {
    /// `Dfa` trains masks and readout, `ReadoutOnly` the readout alone.
    pub trainer: Trainer,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Mask learning rate; `None` uses `lr`.
    pub mask_lr: Option<f64>,
    /// Learning rate for masks of layers after the first; `None` uses the mask rate.
    pub deep_mask_lr: Option<f64>,
    pub momentum: f64,
    pub seed: u64,
    pub epsilon: f64,
    /// `(V, H)`: images are scanned column by column, `H` steps of `V` values.
    pub image_shape: (usize, usize),
    pub eval_train_limit: Option<usize>,
}

impl Default for RcTrainConfig {
    fn default() -> Self {
        Self {
            trainer: Trainer::Dfa,
            epochs: 1,
            batch_size: 64,
            lr: 0.01,
            mask_lr: None,
            deep_mask_lr: None,
            momentum: 0.0,
            seed: 0,
            epsilon: 0.0,
            image_shape: (28, 28),
            eval_train_limit: None,
        }
    }
}

const EVAL_CHUNK: usize = 500;

fn evaluate_view<T: Real>(
    res: &DeepReservoir<T>,
    view: &SequenceView<T>,
    labels: &[usize],
    limit: Option<usize>,
    noise: &mut NoiseSpec,
) -> Result<Evaluation> {
    let n = limit.map_or(view.len(), |l| l.min(view.len()));
    if n == 0 {
        return Ok(Evaluation {
            accuracy: 0.0,
            loss: f64::NAN,
        });
    }
    let (mut correct, mut loss) = (0usize, 0.0);
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let trace = rc_forward(res, &view.batch_steps(chunk), noise)?;
        let y = rc_readout(res, &trace)?;
        let chunk_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
        let err = loss_and_error(&y, &one_hot(&chunk_labels, res.classes()))?;
        loss += err.loss.to_f64_lossy() * chunk.len() as f64;
        correct += argmax_rows(&y)
            .iter()
            .zip(&chunk_labels)
            .filter(|(p, l)| p == l)
            .count();
    }
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        loss: loss / n as f64,
    })
}

/// Accuracy and loss of a reservoir on a dataset.
pub fn evaluate_rc<T: Real>(
    res: &DeepReservoir<T>,
    data: &Dataset<T>,
    image_shape: (usize, usize),
    noise: &mut NoiseSpec,
) -> Result<Evaluation> {
    let view = as_sequence(data, image_shape)?;
    evaluate_view(res, &view, &data.labels, None, noise)
}

pub fn train_rc<T: Real>(
    res: &mut DeepReservoir<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    cfg: &RcTrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<History> {
    res.validate()?;
    if !matches!(cfg.trainer, Trainer::Dfa | Trainer::ReadoutOnly) {
        return Err(Error::InvalidArgument(format!(
            "reservoir training supports dfa and readout_only, not {}",
            cfg.trainer
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    if train.n_classes > res.classes() {
        return Err(Error::shape("reservoir classes", train.n_classes, res.classes()));
    }
    let train_view = as_sequence(train, cfg.image_shape)?;
    let test_view = as_sequence(test, cfg.image_shape)?;
    let lr = T::lit(cfg.lr);
    let mask_lr = cfg.mask_lr.unwrap_or(cfg.lr);
    let mask_lrs: Vec<T> = (0..res.layers.len())
        .map(|l| T::lit(if l == 0 { mask_lr } else { cfg.deep_mask_lr.unwrap_or(mask_lr) }))
        .collect();
    let momentum = T::lit(cfg.momentum);
    let root = RngStream::new(cfg.seed);
    let order = root.derive(0xba7c);
    let mut noise = NoiseSpec {
        epsilon: cfg.epsilon,
        rng: root.derive(0x4015e),
    };
    let mut vel_omega = Matrix::zeros(res.readout.rows(), res.readout.cols());
    let mut vel_masks: Vec<_> = res
        .layers
        .iter()
        .map(|l| Matrix::zeros(l.mask.rows(), l.mask.cols()))
        .collect();
    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let mut diverged = false;
        for batch in batches(train.len(), cfg.batch_size, &mut order.derive(epoch as u64))? {
            let mut trace = match rc_forward(res, &train_view.batch_steps(&batch), &mut noise) {
                Ok(t) => t,
                Err(Error::Diverged(_)) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let y = rc_readout(res, &trace)?;
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let err = loss_and_error(&y, &one_hot(&labels, res.classes()))?;
            if !err.loss.is_finite() {
                diverged = true;
                break;
            }
            let upd = match cfg.trainer {
                Trainer::Dfa => {
                    rc_alt_forward(res, &mut trace, &mut noise)?;
                    rc_dfa_update(res, &trace, &err.e)?
                }
                _ => rc_readout_update(res, &trace, &err.e)?,
            };
            vel_omega.scale(momentum);
            vel_omega.axpy(T::one(), &upd.domega)?;
            res.readout.axpy(lr, &vel_omega)?;
            for (((layer, vel), dm), &rate) in res.layers.iter_mut().zip(&mut vel_masks).zip(&upd.dm).zip(&mask_lrs) {
                if let Some(dm) = dm {
                    vel.scale(momentum);
                    vel.axpy(T::one(), dm)?;
                    layer.mask.axpy(rate, vel)?;
                }
            }
        }
        diverged |= !res.readout.all_finite() || res.layers.iter().any(|l| !l.mask.all_finite());
        let mut eval_noise = NoiseSpec {
            epsilon: cfg.epsilon,
            rng: root.derive(0xe7a1_0000 + epoch as u64),
        };
        let (tr, te) = if diverged {
            let nan = Evaluation {
                accuracy: 0.0,
                loss: f64::NAN,
            };
            (nan, nan)
        } else {
            (
                evaluate_view(res, &train_view, &train.labels, cfg.eval_train_limit, &mut eval_noise)?,
                evaluate_view(res, &test_view, &test.labels, None, &mut eval_noise)?,
            )
        };
        diverged |= !tr.loss.is_finite();
        let m = EpochMetrics {
            epoch,
            train_acc: tr.accuracy,
            test_acc: te.accuracy,
            loss: if diverged { f64::NAN } else { tr.loss },
            diverged,
            angles: Vec::new(),
        };
        on_epoch(&m);
        history.epochs.push(m);
        if diverged {
            history.diverged = true;
            break;
        }
    }
    Ok(history)
}
