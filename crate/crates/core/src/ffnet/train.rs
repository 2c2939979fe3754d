use super::{
    alignment_angles, argmax_rows, forward, loss_and_error, predict, updates_for, FeedforwardNet,
    LayerUpdate, Trainer,
};
use crate::data::{batches, Dataset};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub trainer: Trainer,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Training samples used to measure alignment angles after each epoch;
    /// 0 disables the measurement.
    pub angle_probe: usize,
    /// Cap on training samples used for the per-epoch train accuracy/loss.
    pub eval_train_limit: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            trainer: Trainer::Dfa,
            epochs: 1,
            batch_size: 64,
            lr: 0.01,
            momentum: 0.0,
            seed: 0,
            angle_probe: 256,
            eval_train_limit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Mean training loss after the epoch (NaN once diverged).
    pub loss: f64,
    pub diverged: bool,
    /// Mean alignment angle per hidden layer, degrees; empty when not measured.
    pub angles: Vec<f64>,
}

impl EpochMetrics {
    pub fn mean_angle(&self) -> Option<f64> {
        let finite: Vec<f64> = self.angles.iter().copied().filter(|a| a.is_finite()).collect();
        (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochMetrics>,
    pub diverged: bool,
}

impl History {
    pub fn final_test_acc(&self) -> Option<f64> {
        self.epochs.last().map(|m| m.test_acc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

const EVAL_CHUNK: usize = 2000;

/// Accuracy and mean loss over (at most `limit` samples of) a dataset.
pub fn evaluate<T: Real>(
    net: &FeedforwardNet<T>,
    data: &Dataset<T>,
    limit: Option<usize>,
) -> Result<Evaluation> {
    let n = limit.map_or(data.len(), |l| l.min(data.len()));
    if n == 0 {
        return Ok(Evaluation {
            accuracy: 0.0,
            loss: f64::NAN,
        });
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = data.batch(chunk);
        let logits = predict(net, &x)?;
        let err = loss_and_error(&logits, &y)?;
        loss += err.loss.to_f64_lossy() * chunk.len() as f64;
        correct += argmax_rows(&logits)
            .iter()
            .zip(chunk)
            .filter(|&(&p, &i)| p == data.labels[i])
            .count();
    }
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        loss: loss / n as f64,
    })
}

fn apply<T: Real>(
    net: &mut FeedforwardNet<T>,
    updates: &[LayerUpdate<T>],
    velocity: &mut Option<Vec<LayerUpdate<T>>>,
    lr: T,
    momentum: T,
) -> Result<()> {
    for (l, (layer, u)) in net.layers.iter_mut().zip(updates).enumerate() {
        if layer.frozen {
            continue;
        }
        match velocity {
            Some(vel) => {
                let v = &mut vel[l];
                v.dw.scale(momentum);
                v.dw.axpy(T::one(), &u.dw)?;
                for (vb, &ub) in v.db.iter_mut().zip(&u.db) {
                    *vb = *vb * momentum + ub;
                }
                layer.w.axpy(lr, &v.dw)?;
                for (b, &vb) in layer.bias.iter_mut().zip(&v.db) {
                    *b += lr * vb;
                }
            }
            None => {
                layer.w.axpy(lr, &u.dw)?;
                for (b, &ub) in layer.bias.iter_mut().zip(&u.db) {
                    *b += lr * ub;
                }
            }
        }
    }
    Ok(())
}

fn probe_angles<T: Real>(
    net: &FeedforwardNet<T>,
    train: &Dataset<T>,
    trainer: Trainer,
    probe: usize,
) -> Result<Vec<f64>> {
    if probe == 0 || net.hidden_count() == 0 || matches!(trainer, Trainer::ReadoutOnly) {
        return Ok(Vec::new());
    }
    let idx: Vec<usize> = (0..probe.min(train.len())).collect();
    let (x, y) = train.batch(&idx);
    let trace = forward(net, &x)?;
    let err = loss_and_error(trace.logits(), &y)?;
    match alignment_angles(net, &trace, &err, trainer) {
        Ok(a) => Ok(a),
        Err(Error::UndefinedAngle) => Ok(vec![f64::NAN; net.hidden_count()]),
        Err(e) => Err(e),
    }
}

/// Minibatch SGD. Stops early (flagging the epoch) if the loss or weights
/// become non-finite. `on_epoch` sees each record as it is produced.
pub fn train<T: Real>(
    net: &mut FeedforwardNet<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<History> {
    net.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    let lr = T::lit(cfg.lr);
    let momentum = T::lit(cfg.momentum);
    let mut velocity = (cfg.momentum != 0.0).then(|| {
        net.layers
            .iter()
            .map(|l| LayerUpdate {
                dw: Matrix::zeros(l.fan_out(), l.fan_in()),
                db: vec![T::zero(); l.fan_out()],
            })
            .collect::<Vec<_>>()
    });
    let order = RngStream::new(cfg.seed).derive(0xba7c);
    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let mut diverged = false;
        for batch in batches(train.len(), cfg.batch_size, &mut order.derive(epoch as u64))? {
            let (x, y) = train.batch(&batch);
            let trace = forward(net, &x)?;
            let err = loss_and_error(trace.logits(), &y)?;
            if !err.loss.is_finite() {
                diverged = true;
                break;
            }
            let updates = updates_for(cfg.trainer, net, &trace, &err)?;
            apply(net, &updates, &mut velocity, lr, momentum)?;
        }
        diverged |= net.layers.iter().any(|l| !l.w.all_finite());
        let tr = evaluate(net, train, cfg.eval_train_limit)?;
        let te = evaluate(net, test, None)?;
        diverged |= !tr.loss.is_finite();
        let angles = if diverged {
            Vec::new()
        } else {
            probe_angles(net, train, cfg.trainer, cfg.angle_probe)?
        };
        let m = EpochMetrics {
            epoch,
            train_acc: tr.accuracy,
            test_acc: te.accuracy,
            loss: if diverged { f64::NAN } else { tr.loss },
            diverged,
            angles,
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
