use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{EpochRecord, SeedStreams, StopReason, Stream, TrainConfig, TrainReport};
use crate::data::{flip_hwc, Dataset, Splits};
use crate::error::{Error, Result};
use crate::metrics::{confusion_matrix, MetricsReport};
use crate::model::{argmax, Classifier};
use crate::nn::{adam_step, cross_entropy, AdamState};
use crate::tensor::{Graph, Tensor};

/// Predictions of a classifier over one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub indices: Vec<usize>,
    pub truth: Vec<usize>,
    pub predicted: Vec<usize>,
    /// Mean cross-entropy.
    pub loss: f64,
    pub metrics: MetricsReport,
}

fn check_compatible(model: &Classifier, data: &Dataset) -> Result<()> {
    if model.cfg.input_bands != data.channels() {
        return Err(Error::ChannelMismatch {
            expected: model.cfg.input_bands,
            got: data.channels(),
        });
    }
    if model.cfg.input_size != data.size {
        return Err(Error::shape(model.cfg.input_size, data.size));
    }
    if model.cfg.n_classes != data.labels.len() {
        return Err(Error::shape(model.cfg.n_classes, data.labels.len()));
    }
    Ok(())
}

/// Classifies `indices` without augmentation and scores them against
/// `target`.
pub fn evaluate(model: &Classifier, data: &Dataset, indices: &[usize], target: usize) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::EmptySplit("evaluation"));
    }
    check_compatible(model, data)?;
    let k = model.cfg.n_classes;
    let truth = data.targets_of(indices);
    let logits = model.logits(&data.batch(indices)?)?;
    let loss = cross_entropy(logits.data(), &truth, k);
    let predicted: Vec<usize> = crate::nn::softmax_rows(logits.data(), k)
        .chunks_exact(k)
        .map(argmax)
        .collect();
    let cm = confusion_matrix(&truth, &predicted, k)?;
    Ok(Evaluation {
        indices: indices.to_vec(),
        truth,
        predicted,
        loss,
        metrics: MetricsReport::new(cm, target)?,
    })
}

/// One epoch of minibatch Adam; returns mean loss and accuracy.
fn run_epoch(
    model: &mut Classifier,
    data: &Dataset,
    train: &[usize],
    cfg: &TrainConfig,
    adam: &mut AdamState,
    lr: f64,
    epoch: usize,
) -> Result<(f64, f64)> {
    let streams = SeedStreams::new(cfg.seed);
    let mut order = train.to_vec();
    order.shuffle(&mut streams.rng(Stream::Shuffle, epoch as u64));
    let mut aug = streams.rng(Stream::Augment, epoch as u64);
    let (s, c, k) = (data.size, data.channels(), model.cfg.n_classes);

    let (mut loss_sum, mut correct) = (0.0, 0usize);
    for idx in order.chunks(cfg.batch_size) {
        let mut values = Vec::with_capacity(idx.len() * s * s * c);
        for &i in idx {
            let (h, v) = if cfg.augment {
                (aug.random_bool(0.5), aug.random_bool(0.5))
            } else {
                (false, false)
            };
            if h || v {
                values.extend(flip_hwc(&data.images[i], s, s, c, h, v));
            } else {
                values.extend_from_slice(&data.images[i]);
            }
        }
        let labels = data.targets_of(idx);
        let mut g = Graph::new();
        let p = model.params.bind(&mut g, true);
        let x = g.leaf(Tensor::from_vec(&[idx.len(), s, s, c], values)?);
        let logits = model.forward(&mut g, &p, x)?;
        let (loss, probs) = g.softmax_xent(logits, &labels)?;
        let l = g.value(loss).data()[0] as f64;
        if !l.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        loss_sum += l * idx.len() as f64;
        correct += probs
            .data()
            .chunks_exact(k)
            .zip(&labels)
            .filter(|(row, &t)| argmax(row) == t)
            .count();
        g.backward(loss)?;
        let grads = model.params.grads(&g, &p);
        adam_step(&mut model.params, &grads, adam, lr)?;
    }
    let n = train.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Trains `model` in place. On return it holds the weights of the best
/// validation epoch, which are also the ones scored on the test split.
pub fn train(model: &mut Classifier, data: &Dataset, splits: &Splits, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    check_compatible(model, data)?;
    for (name, s) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        if s.is_empty() {
            return Err(Error::EmptySplit(name));
        }
    }
    let started = Instant::now();
    let mut adam = AdamState::new(&model.params);
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        stop_reason: StopReason::MaxEpochs,
        wall_time: Default::default(),
        test: None,
    };
    let mut lr = cfg.initial_lr;
    let mut best_val_loss = f64::INFINITY;
    let mut plateau_wait = 0;
    let mut best_val_acc = f64::NEG_INFINITY;
    let mut best_params = model.params.clone();
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        let diverged = |mut report: TrainReport| {
            report.stop_reason = StopReason::Divergence;
            report.wall_time = started.elapsed();
            Error::Divergence {
                epoch,
                report: Box::new(report),
            }
        };
        let (train_loss, train_accuracy) = match run_epoch(model, data, &splits.train, cfg, &mut adam, lr, epoch) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => return Err(diverged(report)),
            Err(e) => return Err(e),
        };
        let val = match evaluate(model, data, &splits.val, cfg.target_label) {
            Ok(v) if v.loss.is_finite() => v,
            Ok(_) | Err(Error::NonFinite(_)) => return Err(diverged(report)),
            Err(e) => return Err(e),
        };
        report.epochs.push(EpochRecord {
            train_loss,
            train_accuracy,
            val_loss: val.loss,
            val_accuracy: val.metrics.accuracy,
            lr,
        });

        if val.loss < best_val_loss {
            best_val_loss = val.loss;
            plateau_wait = 0;
        } else {
            plateau_wait += 1;
            if plateau_wait >= cfg.plateau_patience {
                lr *= cfg.plateau_factor;
                plateau_wait = 0;
            }
        }

        if val.metrics.accuracy > best_val_acc {
            best_val_acc = val.metrics.accuracy;
            report.best_epoch = epoch;
            best_params = model.params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                report.stop_reason = StopReason::EarlyStopping;
                break;
            }
        }
    }

    model.params = best_params;
    report.test = Some(evaluate(model, data, &splits.test, cfg.target_label)?.metrics);
    report.wall_time = started.elapsed();
    Ok(report)
}
