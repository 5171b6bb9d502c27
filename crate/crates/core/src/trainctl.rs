//! Training control: plateau learning-rate reduction, early stopping,
//! best-model checkpointing and the epoch loop that ties them together.
//!
//! Improvement is strict with zero min-delta and no cooldown. A reduction
//! (or a stop) fires on the epoch where the count of consecutive
//! non-improving epochs reaches the patience.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    initial_lr: f64,
    lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
    best_loss: Option<f64>,
    bad_epochs: usize,
    reductions: u32,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, factor: f64, patience: usize, min_lr: f64) -> Result<Self> {
        if !(initial_lr > 0.0 && initial_lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {initial_lr}"
            )));
        }
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::Config(format!(
                "plateau factor must be in (0, 1), got {factor}"
            )));
        }
        if min_lr.is_nan() || min_lr < 0.0 {
            return Err(Error::Config(format!("min_lr must be >= 0, got {min_lr}")));
        }
        Ok(PlateauScheduler {
            initial_lr,
            lr: initial_lr.max(min_lr),
            factor,
            patience,
            min_lr,
            best_loss: None,
            bad_epochs: 0,
            reductions: 0,
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best_loss
    }

    pub fn bad_epochs(&self) -> usize {
        self.bad_epochs
    }

    pub fn reductions(&self) -> u32 {
        self.reductions
    }

    /// Feed one validation loss. Returns `true` when the learning rate was
    /// reduced on this step.
    pub fn step(&mut self, val_loss: f64) -> Result<bool> {
        if !val_loss.is_finite() {
            return Err(Error::InvalidMetric(val_loss));
        }
        match self.best_loss {
            Some(best) if val_loss >= best => self.bad_epochs += 1,
            _ => {
                self.best_loss = Some(val_loss);
                self.bad_epochs = 0;
                return Ok(false);
            }
        }
        if self.bad_epochs >= self.patience {
            self.reductions += 1;
            self.lr = (self.initial_lr * self.factor.powi(self.reductions as i32)).max(self.min_lr);
            self.bad_epochs = 0;
            return Ok(true);
        }
        Ok(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopper {
    patience: usize,
    best_acc: Option<f64>,
    bad_epochs: usize,
    stopped: bool,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best_acc: None,
            bad_epochs: 0,
            stopped: false,
        }
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    pub fn bad_epochs(&self) -> usize {
        self.bad_epochs
    }

    pub fn best_acc(&self) -> Option<f64> {
        self.best_acc
    }

    /// Feed one validation accuracy. Returns `true` on improvement.
    pub fn step(&mut self, val_acc: f64) -> Result<bool> {
        if val_acc.is_nan() || !(0.0..=1.0).contains(&val_acc) {
            return Err(Error::InvalidMetric(val_acc));
        }
        let improved = self.best_acc.is_none_or(|best| val_acc > best);
        if improved {
            self.best_acc = Some(val_acc);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.stopped = true;
            }
        }
        Ok(improved)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainLoopConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
}

impl Default for TrainLoopConfig {
    fn default() -> Self {
        TrainLoopConfig {
            max_epochs: 50,
            batch_size: 32,
            initial_lr: 0.002,
        }
    }
}

impl TrainLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!(
                "initial_lr must be positive, got {}",
                self.initial_lr
            )));
        }
        Ok(())
    }
}

/// Plateau and early-stop parameters as they appear in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub early_stop_patience: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            plateau_factor: 1e-3,
            plateau_patience: 3,
            min_lr: 0.0,
            early_stop_patience: 7,
        }
    }
}

impl ControlConfig {
    pub fn scheduler(&self, initial_lr: f64) -> Result<PlateauScheduler> {
        PlateauScheduler::new(
            initial_lr,
            self.plateau_factor,
            self.plateau_patience,
            self.min_lr,
        )
    }

    pub fn stopper(&self) -> EarlyStopper {
        EarlyStopper::new(self.early_stop_patience)
    }
}

/// Model parameters plus the class list they were trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub classes: Vec<String>,
    pub params: Vec<f64>,
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"LKCKPT\0\0";
const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    /// Layout (all integers little-endian):
    /// magic `LKCKPT\0\0`, version u32, class count u32, then per class a
    /// u32 byte length and UTF-8 name, parameter count u64, parameters as
    /// f64, and finally the SHA-256 of everything before it.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.params.len() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.classes.len() as u32).to_le_bytes());
        for c in &self.classes {
            out.extend_from_slice(&(c.len() as u32).to_le_bytes());
            out.extend_from_slice(c.as_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let bad = |m: &str| Error::Checkpoint(m.to_owned());
        if bytes.len() < CHECKPOINT_MAGIC.len() + 32 {
            return Err(bad("truncated"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch"));
        }
        let mut cur = Cursor(body);
        if cur.take(8)? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n_classes = cur.u32()? as usize;
        let mut classes = Vec::with_capacity(n_classes.min(1024));
        for _ in 0..n_classes {
            let len = cur.u32()? as usize;
            let name =
                std::str::from_utf8(cur.take(len)?).map_err(|_| bad("class name is not UTF-8"))?;
            classes.push(name.to_owned());
        }
        let n_params = cur.u64()? as usize;
        let raw = cur.take(
            n_params
                .checked_mul(8)
                .ok_or_else(|| bad("parameter count overflow"))?,
        )?;
        let params = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if !cur.0.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Checkpoint { classes, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Where to persist the best checkpoint. With no directory the best
/// snapshot is only kept in memory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointPolicy {
    pub directory: Option<PathBuf>,
    pub file_name: Option<String>,
}

impl CheckpointPolicy {
    pub fn in_dir(dir: impl Into<PathBuf>, file_name: &str) -> Self {
        CheckpointPolicy {
            directory: Some(dir.into()),
            file_name: Some(file_name.to_owned()),
        }
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.directory
            .as_ref()
            .map(|d| d.join(self.file_name.as_deref().unwrap_or("best.ckpt")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// A model that the epoch loop can drive.
pub trait Trainer {
    /// Run one pass over the training data and return the mean training loss.
    /// `epoch` is 1-based.
    fn train_one_epoch(&mut self, epoch: usize, lr: f64, batch_size: usize) -> Result<f64>;
    fn evaluate(&mut self) -> Result<Evaluation>;
    fn snapshot(&self) -> Checkpoint;
    fn restore(&mut self, checkpoint: &Checkpoint) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    LrReduced,
    Checkpoint,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose snapshot was restored at the end, if any.
    pub best_epoch: Option<usize>,
}

impl TrainingHistory {
    pub fn epochs_with(&self, event: Event) -> Vec<usize> {
        self.epochs
            .iter()
            .filter(|e| e.events.contains(&event))
            .map(|e| e.epoch)
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")
                .map_err(|err| Error::io("<history>", err))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: std::io::BufRead>(r: R) -> Result<TrainingHistory> {
        let mut epochs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<history>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            epochs.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::parse("history", i + 1, e.to_string()))?,
            );
        }
        Ok(TrainingHistory {
            epochs,
            best_epoch: None,
        })
    }
}

fn in_epoch<T>(epoch: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Trainer {
        epoch,
        source: Box::new(e),
    })
}

/// Drive `trainer` for at most `cfg.max_epochs` epochs. After each epoch the
/// validation loss feeds `scheduler`, the validation accuracy feeds `stopper`,
/// and a new best accuracy (strict, so ties keep the earliest epoch) is
/// snapshotted. On exit the best snapshot is restored into the trainer.
pub fn run_training_loop<T: Trainer + ?Sized>(
    trainer: &mut T,
    cfg: &TrainLoopConfig,
    scheduler: &mut PlateauScheduler,
    stopper: &mut EarlyStopper,
    ckpt: &CheckpointPolicy,
) -> Result<TrainingHistory> {
    cfg.validate()?;
    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, usize, Checkpoint)> = None;

    for epoch in 1..=cfg.max_epochs {
        let lr = scheduler.lr();
        let train_loss = in_epoch(epoch, trainer.train_one_epoch(epoch, lr, cfg.batch_size))?;
        let eval = in_epoch(epoch, trainer.evaluate())?;
        let mut events = Vec::new();

        if in_epoch(epoch, scheduler.step(eval.loss))? {
            events.push(Event::LrReduced);
        }
        in_epoch(epoch, stopper.step(eval.accuracy))?;

        if best.as_ref().is_none_or(|(acc, _, _)| eval.accuracy > *acc) {
            let snap = trainer.snapshot();
            if let Some(path) = ckpt.path() {
                in_epoch(epoch, snap.save(&path))?;
            }
            best = Some((eval.accuracy, epoch, snap));
            events.push(Event::Checkpoint);
        }

        let stop = stopper.stopped();
        if stop {
            events.push(Event::EarlyStop);
        }
        history.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss: eval.loss,
            val_acc: eval.accuracy,
            events,
        });
        if stop {
            break;
        }
    }

    if let Some((_, epoch, snap)) = best {
        trainer.restore(&snap)?;
        history.best_epoch = Some(epoch);
    }
    Ok(history)
}
