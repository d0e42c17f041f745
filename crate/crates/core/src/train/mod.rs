//! Training, evaluation and the cross-validated experiment drivers.

mod cv;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use cv::{run_cv, run_sensor_dropout_sweep, run_variant_ablation, AblationRow, SweepEntry};
pub use report::{CvReport, EvalReport, Manifest, MetricSummary, TaskKind};

use crate::autodiff::OpKind;
use crate::data::{Dataset, IrtsSample};
use crate::error::{Error, Result};
use crate::metrics::{auprc, auroc, multiclass_report, ScoredLabels};
use crate::model::{save_checkpoint, ModelConfig, MvFormer, Session};
use crate::optim::{AdamConfig, AdamState};
use crate::rng::{derive_seed, rng_from, stream};

/// Inverse-frequency class weights in the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassWeighting {
    /// On for imbalanced binary data, off otherwise.
    Auto,
    On,
    Off,
}

impl fmt::Display for ClassWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassWeighting::Auto => "auto",
            ClassWeighting::On => "on",
            ClassWeighting::Off => "off",
        })
    }
}

impl FromStr for ClassWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ClassWeighting::Auto),
            "on" | "true" => Ok(ClassWeighting::On),
            "off" | "false" => Ok(ClassWeighting::Off),
            _ => Err(Error::Config(format!("class_weighting must be auto|on|off, got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub class_weighting: ClassWeighting,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Z-score with statistics of the training split.
    pub normalize: bool,
    /// Where the best model of a single run is saved.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            lr: 3e-3,
            seed: 0,
            class_weighting: ClassWeighting::Auto,
            patience: 10,
            normalize: true,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    /// `key=value` pairs; the checkpoint path is omitted.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("lr".into(), format!("{:?}", self.lr)),
            ("seed".into(), self.seed.to_string()),
            ("class_weighting".into(), self.class_weighting.to_string()),
            ("patience".into(), self.patience.to_string()),
            ("normalize".into(), self.normalize.to_string()),
        ]
    }

    /// Apply one `key=value` setting; `Ok(false)` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::Config(format!("field `{key}`: cannot parse `{v}`")))
        }
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "class_weighting" => self.class_weighting = value.trim().parse()?,
            "patience" => self.patience = num(key, value)?,
            "normalize" => self.normalize = num(key, value)?,
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value.trim())),
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// One epoch of [`History`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Validation AUROC (binary) or macro F1; `None` without validation data.
    pub val_metric: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Weights `n / (C n_c)`, or all ones.
pub fn class_weights(train: &Dataset, mode: ClassWeighting) -> Vec<f64> {
    let counts = train.class_counts();
    let c = counts.len();
    let on = match mode {
        ClassWeighting::On => true,
        ClassWeighting::Off => false,
        ClassWeighting::Auto => {
            let (lo, hi) = (counts.iter().min().copied().unwrap_or(0), counts.iter().max().copied().unwrap_or(0));
            c == 2 && lo > 0 && hi as f64 > 1.5 * lo as f64
        }
    };
    let n: usize = counts.iter().sum();
    counts.iter().map(|&k| if on && k > 0 { n as f64 / (c * k) as f64 } else { 1.0 }).collect()
}

/// Probability vectors for every sample.
pub fn score(model: &MvFormer, data: &Dataset) -> Result<ScoredLabels> {
    let samples = data.samples();
    let probs = samples.iter().map(|s| model.predict_proba(s)).collect::<Result<Vec<_>>>()?;
    ScoredLabels::new(probs, data.labels())
}

/// Model-selection score: AUROC for two classes, macro F1 otherwise.
fn selection_metric(model: &MvFormer, data: &Dataset) -> Result<Option<f64>> {
    if data.is_empty() {
        return Ok(None);
    }
    let s = score(model, data)?;
    if data.num_classes() == 2 {
        let (scores, truth) = s.one_vs_rest(1);
        match auroc(&scores, &truth) {
            Ok(v) => return Ok(Some(v)),
            Err(Error::MetricUndefined(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Some(multiclass_report(&s, data.num_classes())?.macro_f1))
}

/// Mini-batch Adam on (optionally class-weighted) cross-entropy. Returns the
/// parameters of the best validation epoch and the per-epoch history.
pub fn train_model(
    train: &Dataset,
    val: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(MvFormer, History)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut model = MvFormer::new(model_cfg.clone(), cfg.seed)?;
    let mut adam = AdamState::new(model.params(), AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let weights = class_weights(train, cfg.class_weighting);
    let mut shuffle = rng_from(derive_seed(cfg.seed, stream::SHUFFLE));
    let mut dropout = rng_from(derive_seed(cfg.seed, stream::DROPOUT));
    let samples: Vec<&IrtsSample> = train.samples().iter().collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();

    let mut history = History::default();
    let mut best: Option<(f64, MvFormer)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&IrtsSample> = chunk.iter().map(|&i| samples[i]).collect();
            let mut sess = Session::training(&model, rng_from(rand::Rng::gen(&mut dropout)));
            let loss = sess.batch_loss(&batch, &weights)?;
            let value = sess.tape.value(loss).data()[0];
            if !value.is_finite() {
                let origin = sess.tape.non_finite_origin().map(OpKind::name);
                return Err(Error::Divergence { epoch, batch: b + 1, loss: value, origin });
            }
            let grads = sess.gradients(loss)?;
            drop(sess);
            adam.step(model.params_mut(), &grads)?;
            total += value * batch.len() as f64;
        }
        let val_metric = selection_metric(&model, val)?;
        history.epochs.push(EpochRecord { epoch, train_loss: total / samples.len() as f64, val_metric });
        // without validation data the latest epoch is kept
        let improved = match (&best, val_metric) {
            (None, _) | (_, None) => true,
            (Some((b, _)), Some(m)) => m > *b,
        };
        if improved {
            best = Some((val_metric.unwrap_or(f64::NEG_INFINITY), model.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    let model = best.map(|(_, m)| m).expect("at least one epoch");
    if let Some(path) = &cfg.checkpoint {
        save_checkpoint(&model, path)?;
    }
    Ok((model, history))
}

/// Score `model` on `test`: AUROC and AUPRC for binary tasks, accuracy and
/// macro precision, recall and F1 otherwise.
pub fn evaluate(model: &MvFormer, test: &Dataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Usage("cannot evaluate on an empty test set".into()));
    }
    let s = score(model, test)?;
    let task = TaskKind::of(test.num_classes());
    let mc = multiclass_report(&s, test.num_classes())?;
    let metrics = match task {
        TaskKind::Binary => {
            let (scores, truth) = s.one_vs_rest(1);
            let ctx = |e: Error| Error::MetricUndefined(format!("test set of {} samples: {e}", test.len()));
            vec![
                ("auroc".to_string(), auroc(&scores, &truth).map_err(ctx)?),
                ("auprc".to_string(), auprc(&scores, &truth).map_err(ctx)?),
            ]
        }
        TaskKind::Multiclass => vec![
            ("accuracy".to_string(), mc.accuracy),
            ("precision".to_string(), mc.macro_precision),
            ("recall".to_string(), mc.macro_recall),
            ("f1".to_string(), mc.macro_f1),
        ],
    };
    Ok(EvalReport {
        task,
        samples: test.len(),
        class_counts: test.class_counts(),
        metrics,
        confusion: mc.per_class,
        absent_classes: mc.absent_classes,
    })
}

#[cfg(test)]
mod tests;
