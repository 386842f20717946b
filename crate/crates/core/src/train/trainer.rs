use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{joint_loss, AdamConfig, AdamState, LossWeights, ScheduleConfig};
use crate::arch::MtlNetwork;
use crate::autodiff::{Tape, Tensor};
use crate::data::{batch_tensor, DatasetSplit, Sample, Taxonomy};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::nn::{Parameterized, Phase};
use crate::rng::{stream, Stream};

const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub weights: LossWeights,
    pub schedule: ScheduleConfig,
    pub adam: AdamConfig,
    /// Drives shuffling and dropout masks; initialization uses the seed
    /// given to `NetworkSpec::build`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 32,
            weights: LossWeights::default(),
            schedule: ScheduleConfig::default(),
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// One structured log line per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Sample-weighted mean of the joint loss over the epoch.
    pub train_loss: f64,
    pub val_model_acc: f64,
    /// Direct make-head accuracy, or the derived one for single-task runs.
    pub val_make_acc: f64,
    /// Rate used by the epoch's last optimizer step.
    pub lr: f64,
}

impl EpochRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub history: Vec<EpochRecord>,
    /// Parameters from the epoch with the best validation model accuracy
    /// (earliest on ties), or the initial network if no epoch ran.
    pub best: MtlNetwork,
    pub best_epoch: Option<usize>,
}

pub fn train(net: MtlNetwork, split: &DatasetSplit, taxonomy: &Taxonomy, cfg: &TrainConfig) -> Result<TrainedRun> {
    train_with_observer(net, split, taxonomy, cfg, |_, _| {})
}

/// Like [`train`], calling `observer` with each epoch's record and the
/// network's current (not best) parameters.
pub fn train_with_observer(
    mut net: MtlNetwork,
    split: &DatasetSplit,
    taxonomy: &Taxonomy,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord, &MtlNetwork),
) -> Result<TrainedRun> {
    net.check_taxonomy(taxonomy)?;
    cfg.weights.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Data(format!(
            "training needs non-empty train and validation splits, got {} and {}",
            split.train.len(),
            split.val.len()
        )));
    }
    let mut best = net.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(TrainedRun {
            history,
            best,
            best_epoch: None,
        });
    }

    let batches_per_epoch = split.train.len().div_ceil(cfg.batch_size);
    let schedule = cfg.schedule.schedule((cfg.epochs * batches_per_epoch).max(2))?;
    let mut adam = AdamState::new(cfg.adam, net.params());
    let mut shuffle_rng = stream(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = stream(cfg.seed, Stream::Dropout);
    let input_shape = net.spec().encoder.input_shape.clone();
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = None;
    let mut step = 0;
    let mut lr = schedule.lr_at(0)?;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let samples: Vec<&Sample> = chunk.iter().map(|&i| &split.train[i]).collect();
            let model_labels: Vec<usize> = samples.iter().map(|s| s.model_label).collect();
            let make_labels: Vec<usize> = samples.iter().map(|s| s.make_label).collect();

            let mut tape = Tape::new();
            let bound = net.bind(&mut tape);
            let x = tape.constant(batch_tensor(&samples, &input_shape)?);
            let diverged = |e: Error| match e {
                Error::Numeric { .. } => Error::Divergence { epoch },
                other => other,
            };
            let out = bound
                .forward(&mut tape, x, Phase::Train, &mut dropout_rng)
                .map_err(diverged)?;
            let terms = joint_loss(&mut tape, &out, &model_labels, Some(&make_labels), cfg.weights).map_err(diverged)?;
            let loss = tape.value(terms.total).item()?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += loss * samples.len() as f64;
            tape.backward(terms.total)?;
            let grads: Vec<Tensor> = bound.vars().into_iter().map(|v| tape.grad_or_zeros(v)).collect();
            if grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Divergence { epoch });
            }
            lr = schedule.lr_at(step.min(schedule.total_steps()))?;
            adam.step(net.params_mut(), &grads, lr)?;
            step += 1;
        }

        let report = evaluate(&net, &split.val, taxonomy)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / split.train.len() as f64,
            val_model_acc: report.model_acc,
            val_make_acc: report.make_acc_direct.unwrap_or(report.make_acc_derived),
            lr,
        };
        if record.val_model_acc > best_acc {
            best_acc = record.val_model_acc;
            best_epoch = Some(epoch);
            best = net.clone();
        }
        observer(&record, &net);
        history.push(record);
    }
    Ok(TrainedRun {
        history,
        best,
        best_epoch,
    })
}

/// Evaluation-mode metrics of `net` on `samples`.
pub fn evaluate(net: &MtlNetwork, samples: &[Sample], taxonomy: &Taxonomy) -> Result<MetricsReport> {
    net.check_taxonomy(taxonomy)?;
    if samples.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty split".into()));
    }
    let input_shape = &net.spec().encoder.input_shape;
    let mut model_parts = Vec::new();
    let mut make_parts = Vec::new();
    for chunk in samples.chunks(EVAL_BATCH) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let (model, make) = net.predict(&batch_tensor(&refs, input_shape)?)?;
        model_parts.push(model);
        make_parts.extend(make);
    }
    let model_logits = Tensor::concat(&model_parts.iter().collect::<Vec<_>>(), 0)?;
    let make_logits = if make_parts.is_empty() {
        None
    } else {
        Some(Tensor::concat(&make_parts.iter().collect::<Vec<_>>(), 0)?)
    };
    let model_labels: Vec<usize> = samples.iter().map(|s| s.model_label).collect();
    let make_labels: Vec<usize> = samples.iter().map(|s| s.make_label).collect();
    MetricsReport::compute(&model_logits, make_logits.as_ref(), &model_labels, &make_labels, taxonomy)
}
