use super::{apply_update, unitary_forward, unitary_updates_for, UnitaryNet};
use crate::data::{batches, Dataset};
use crate::error::{Error, Result};
use crate::ffnet::{argmax_rows, loss_and_error, EpochMetrics, Evaluation, History, Trainer};
use crate::numerics::RngStream;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryTrainConfig {
    pub trainer: Trainer,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Rate for the mesh phases; defaults to `lr`.
    pub phase_lr: Option<f64>,
    pub seed: u64,
    pub eval_train_limit: Option<usize>,
}

impl Default for UnitaryTrainConfig {
    fn default() -> Self {
        Self {
            trainer: Trainer::Dfa,
            epochs: 1,
            batch_size: 64,
            lr: 0.01,
            phase_lr: None,
            seed: 0,
            eval_train_limit: None,
        }
    }
}

pub fn evaluate_unitary<T: Real>(net: &UnitaryNet<T>, data: &Dataset<T>, limit: Option<usize>) -> Result<Evaluation> {
    let n = limit.map_or(data.len(), |l| l.min(data.len()));
    if n == 0 {
        return Ok(Evaluation {
            accuracy: 0.0,
            loss: f64::NAN,
        });
    }
    let (mut correct, mut loss) = (0usize, 0.0);
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(2000) {
        let (x, y) = data.batch(chunk);
        let trace = unitary_forward(net, &x)?;
        let err = loss_and_error(&trace.logits, &y)?;
        loss += err.loss.to_f64_lossy() * chunk.len() as f64;
        correct += argmax_rows(&trace.logits)
            .iter()
            .zip(chunk)
            .filter(|(p, &i)| **p == data.labels[i])
            .count();
    }
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        loss: loss / n as f64,
    })
}

/// Minibatch training; the epoch's `loss` is the training-set loss after the epoch.
pub fn train_unitary<T: Real>(
    net: &mut UnitaryNet<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    cfg: &UnitaryTrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<History> {
    net.validate()?;
    if train.features() != net.ports() {
        return Err(Error::shape("train_unitary input", net.ports(), train.features()));
    }
    if train.n_classes > net.classes() {
        return Err(Error::shape("train_unitary classes", train.n_classes, net.classes()));
    }
    let lr = T::lit(cfg.lr);
    let phase_lr = T::lit(cfg.phase_lr.unwrap_or(cfg.lr));
    let order = RngStream::new(cfg.seed).derive(0xba7c);
    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let mut diverged = false;
        for batch in batches(train.len(), cfg.batch_size, &mut order.derive(epoch as u64))? {
            let (x, y) = train.batch(&batch);
            let trace = unitary_forward(net, &x)?;
            let err = loss_and_error(&trace.logits, &y)?;
            if !err.loss.is_finite() {
                diverged = true;
                break;
            }
            let upd = unitary_updates_for(cfg.trainer, net, &trace, &err)?;
            apply_update(net, &upd, lr, phase_lr)?;
        }
        let (tr, te) = if diverged {
            let nan = Evaluation {
                accuracy: 0.0,
                loss: f64::NAN,
            };
            (nan, nan)
        } else {
            (
                evaluate_unitary(net, train, cfg.eval_train_limit)?,
                evaluate_unitary(net, test, None)?,
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
