use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::adamax::{adamax_step, AdaMaxState, DEFAULT_BETA1, DEFAULT_BETA2};
use super::head::{argmax, loss_and_grad, predict, LinearHead};
use crate::error::{Error, Result};
use crate::metrics::{aggregate_folds, compute_metrics, confusion_from_log, MetricReport};
use crate::partition::FoldPlan;
use crate::rng::Stream;
use crate::tables::{FeatureRow, FeatureTable, PredictionLog};
use crate::trainctl::{
    run_training_loop, Checkpoint, CheckpointPolicy, ControlConfig, Evaluation, TrainLoopConfig,
    Trainer, TrainingHistory,
};

/// Source of training rows. A fixed table returns the same rows every
/// epoch; an augmenting source re-extracts features per epoch.
pub trait TrainFeatures: Sync {
    fn dim(&self) -> usize;
    fn rows_for_epoch(&self, epoch: usize) -> Result<Cow<'_, [FeatureRow]>>;
}

impl TrainFeatures for FeatureTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rows_for_epoch(&self, _epoch: usize) -> Result<Cow<'_, [FeatureRow]>> {
        Ok(Cow::Borrowed(&self.rows))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadTrainConfig {
    pub train: TrainLoopConfig,
    pub control: ControlConfig,
    pub beta1: f64,
    pub beta2: f64,
    /// Seeds mini-batch order.
    pub seed: u64,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        HeadTrainConfig {
            train: TrainLoopConfig::default(),
            control: ControlConfig::default(),
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            seed: 0,
        }
    }
}

pub struct HeadTrainer<'a> {
    pub head: LinearHead,
    optimizer: AdaMaxState,
    train: &'a dyn TrainFeatures,
    val: &'a FeatureTable,
    seed: u64,
    stream_tag: u64,
}

impl<'a> HeadTrainer<'a> {
    /// `stream_tag` distinguishes otherwise identical runs (e.g. the fold
    /// index) in the mini-batch stream.
    pub fn new(
        train: &'a dyn TrainFeatures,
        val: &'a FeatureTable,
        cfg: &HeadTrainConfig,
        stream_tag: u64,
    ) -> Result<Self> {
        if train.dim() != val.dim {
            return Err(Error::DimensionMismatch {
                expected: train.dim(),
                got: val.dim,
            });
        }
        let head = LinearHead::zeros(val.classes.len(), val.dim);
        let optimizer = AdaMaxState::with_betas(
            head.param_count(),
            cfg.train.initial_lr,
            cfg.beta1,
            cfg.beta2,
        );
        Ok(HeadTrainer {
            head,
            optimizer,
            train,
            val,
            seed: cfg.seed,
            stream_tag,
        })
    }
}

impl Trainer for HeadTrainer<'_> {
    fn train_one_epoch(&mut self, epoch: usize, lr: f64, batch_size: usize) -> Result<f64> {
        let rows = self.train.rows_for_epoch(epoch)?;
        if rows.is_empty() {
            return Err(Error::Empty("training rows"));
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        Stream::derive(
            self.seed,
            "batches",
            &[
                &self.stream_tag.to_le_bytes(),
                &(epoch as u64).to_le_bytes(),
            ],
        )
        .shuffle(&mut order);
        self.optimizer.alpha = lr;
        let mut params = self.head.params();
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&FeatureRow> = chunk.iter().map(|&i| &rows[i]).collect();
            let (loss, grad) = loss_and_grad(&self.head, &batch)?;
            adamax_step(&mut params, &grad, &mut self.optimizer)?;
            self.head.set_params(&params)?;
            loss_sum += loss * batch.len() as f64;
        }
        Ok(loss_sum / rows.len() as f64)
    }

    fn evaluate(&mut self) -> Result<Evaluation> {
        if self.val.rows.is_empty() {
            return Err(Error::Empty("validation rows"));
        }
        let batch: Vec<&FeatureRow> = self.val.rows.iter().collect();
        let (loss, _) = loss_and_grad(&self.head, &batch)?;
        let mut correct = 0usize;
        for row in &self.val.rows {
            if argmax(&self.head.forward(&row.features)?) == row.label {
                correct += 1;
            }
        }
        Ok(Evaluation {
            loss,
            accuracy: correct as f64 / self.val.rows.len() as f64,
        })
    }

    fn snapshot(&self) -> Checkpoint {
        self.head.to_checkpoint(&self.val.classes)
    }

    fn restore(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        self.head.set_params(&checkpoint.params)
    }
}

/// Train a zero-initialized head on `train`, monitoring `val`, and return the
/// best-validation-accuracy head with its history.
pub fn train_head(
    train: &dyn TrainFeatures,
    val: &FeatureTable,
    cfg: &HeadTrainConfig,
    stream_tag: u64,
    ckpt: &CheckpointPolicy,
) -> Result<(LinearHead, TrainingHistory)> {
    let mut trainer = HeadTrainer::new(train, val, cfg, stream_tag)?;
    let mut scheduler = cfg.control.scheduler(cfg.train.initial_lr)?;
    let mut stopper = cfg.control.stopper();
    let history = run_training_loop(&mut trainer, &cfg.train, &mut scheduler, &mut stopper, ckpt)?;
    Ok((trainer.head, history))
}

/// Train on every fold but `fold` of a fixed feature table, validating on `fold`.
pub fn train_fold(
    table: &FeatureTable,
    folds: &FoldPlan,
    fold: usize,
    cfg: &HeadTrainConfig,
) -> Result<(LinearHead, TrainingHistory)> {
    let (train_ids, val_ids) = folds.rotation(fold);
    let train = table.select(&train_ids)?;
    let val = table.select(&val_ids)?;
    train_head(&train, &val, cfg, fold as u64, &CheckpointPolicy::default())
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub head: LinearHead,
    pub history: TrainingHistory,
    pub predictions: PredictionLog,
    pub report: MetricReport,
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub folds: Vec<FoldOutcome>,
    pub aggregate: MetricReport,
}

impl CrossValidation {
    /// Fold whose validation weighted F1 is highest (earliest on ties).
    pub fn best_fold(&self) -> &FoldOutcome {
        let mut best = &self.folds[0];
        for f in &self.folds[1..] {
            if f.report.weighted.f1 > best.report.weighted.f1 {
                best = f;
            }
        }
        best
    }
}

/// Rotate through all `k` folds. `sources` builds the training source and
/// validation table for a fold from its (train ids, validation ids).
/// `checkpoints` maps a fold index to its checkpoint policy.
pub fn cross_validate<'s, S>(
    folds: &FoldPlan,
    cfg: &HeadTrainConfig,
    mut sources: S,
    checkpoints: impl Fn(usize) -> CheckpointPolicy,
) -> Result<CrossValidation>
where
    S: FnMut(usize, &[String], &[String]) -> Result<(Box<dyn TrainFeatures + 's>, FeatureTable)>,
{
    let mut outcomes = Vec::with_capacity(folds.k);
    for fold in 0..folds.k {
        let (train_ids, val_ids) = folds.rotation(fold);
        let (train, val) = sources(fold, &train_ids, &val_ids)?;
        let (head, history) =
            train_head(train.as_ref(), &val, cfg, fold as u64, &checkpoints(fold))?;
        let predictions = predict(&head, &val)?;
        let cm = confusion_from_log(&predictions, &val.classes)?;
        let report = compute_metrics(&cm)?;
        outcomes.push(FoldOutcome {
            fold,
            head,
            history,
            predictions,
            report,
        });
    }
    let weighted: Vec<(MetricReport, usize)> = outcomes
        .iter()
        .map(|o| (o.report.clone(), o.predictions.rows.len()))
        .collect();
    let aggregate = aggregate_folds(&weighted)?;
    Ok(CrossValidation {
        folds: outcomes,
        aggregate,
    })
}
