//! Cross-validation, sensor-dropout sweeps and paired ablations.

use rayon::prelude::*;

use super::report::{CvReport, EvalReport, Manifest};
use super::{evaluate, train_model, History, TrainConfig};
use crate::data::{
    leave_random_sensor_out, normalize_with, sensor_stats, stratified_kfold, CorruptionSpec, Dataset, Fold,
};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, MvFormer};
use crate::rng::{derive_seed, stream};

/// Library version recorded in manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

struct Split {
    train: Dataset,
    val: Dataset,
    test: Dataset,
}

fn split(dataset: &Dataset, fold: &Fold, normalize: bool) -> Split {
    let (train, val, test) = (dataset.subset(&fold.train), dataset.subset(&fold.val), dataset.subset(&fold.test));
    if !normalize {
        return Split { train, val, test };
    }
    let stats = sensor_stats(&train);
    Split {
        train: normalize_with(&train, &stats).dataset,
        val: normalize_with(&val, &stats).dataset,
        test: normalize_with(&test, &stats).dataset,
    }
}

fn fold_config(cfg: &TrainConfig, fold: usize) -> TrainConfig {
    let mut c = cfg.clone();
    c.seed = derive_seed(cfg.seed, stream::FOLD_BASE + fold as u64);
    c.checkpoint = cfg.checkpoint.as_ref().map(|p| p.with_extension(format!("fold{}.mvf", fold + 1)));
    c
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn base_manifest(dataset: &Dataset, k: usize, model_cfg: &ModelConfig, cfg: &TrainConfig, folds: &[Fold]) -> Manifest {
    let mut m = Manifest::default();
    m.set("version", VERSION);
    m.set("seed", cfg.seed);
    m.set("dataset.fingerprint", dataset.fingerprint());
    m.set("dataset.samples", dataset.len());
    m.set("dataset.missing_ratio", format!("{:?}", dataset.missing_ratio()));
    m.extend("model", model_cfg.to_kv());
    m.extend("train", cfg.to_kv());
    if dataset.num_classes() > 2 {
        m.set("averaging", "macro");
    }
    m.set("folds", k);
    for (f, fold) in folds.iter().enumerate() {
        let p = format!("fold.{}", f + 1);
        m.set(format!("{p}.seed"), fold_config(cfg, f).seed);
        m.set(format!("{p}.train"), join(&fold.train));
        m.set(format!("{p}.val"), join(&fold.val));
        m.set(format!("{p}.test"), join(&fold.test));
    }
    m
}

/// Train one fold; the test split is untouched until training returns.
fn train_fold(
    dataset: &Dataset,
    fold: &Fold,
    f: usize,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(MvFormer, History, Dataset)> {
    let s = split(dataset, fold, cfg.normalize);
    let (model, history) = train_model(&s.train, &s.val, model_cfg, &fold_config(cfg, f))?;
    debug_assert_eq!(s.test.reads(), 0, "fold {} read test data during training", f + 1);
    Ok((model, history, s.test))
}

fn folds_for(dataset: &Dataset, k: usize, cfg: &TrainConfig) -> Result<Vec<Fold>> {
    cfg.validate()?;
    stratified_kfold(&dataset.labels(), dataset.num_classes(), k, cfg.seed)
}

/// `k` independent models on stratified folds, aggregated as mean and
/// sample standard deviation. Fold seeds derive from `cfg.seed`.
pub fn run_cv(dataset: &Dataset, k: usize, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<CvReport> {
    let folds = folds_for(dataset, k, cfg)?;
    let mut manifest = base_manifest(dataset, k, model_cfg, cfg, &folds);
    let results: Vec<(EvalReport, History)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let (model, history, test) = train_fold(dataset, fold, f, model_cfg, cfg)?;
            Ok((evaluate(&model, &test)?, history))
        })
        .collect::<Result<_>>()?;
    for (f, (_, h)) in results.iter().enumerate() {
        manifest.set(format!("fold.{}.best_epoch", f + 1), h.best_epoch);
        manifest.set(format!("fold.{}.epochs_run", f + 1), h.epochs.len());
    }
    Ok(CvReport::from_folds(manifest, results.into_iter().map(|(r, _)| r).collect()))
}

/// One ratio of a sensor-dropout sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub ratio: f64,
    pub report: CvReport,
}

/// Train once per fold on complete data, then evaluate every drop ratio on
/// that fold's corrupted test split. Entries come back sorted by ratio with
/// duplicates removed.
pub fn run_sensor_dropout_sweep(
    dataset: &Dataset,
    k: usize,
    ratios: &[f64],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<Vec<SweepEntry>> {
    if let Some(r) = ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Parameter(format!("drop ratio {r} outside [0, 1]")));
    }
    let mut ratios = ratios.to_vec();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    if ratios.is_empty() {
        return Err(Error::Usage("no drop ratios given".into()));
    }
    let folds = folds_for(dataset, k, cfg)?;
    let base = base_manifest(dataset, k, model_cfg, cfg, &folds);

    // per fold: one (report, dropped sensors) per ratio
    let per_fold: Vec<(History, Vec<(EvalReport, Vec<usize>)>)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let (model, history, test) = train_fold(dataset, fold, f, model_cfg, cfg)?;
            let seed = derive_seed(fold_config(cfg, f).seed, stream::CORRUPT);
            let evals = ratios
                .iter()
                .map(|&drop_ratio| {
                    let (corrupted, dropped) = leave_random_sensor_out(&test, &CorruptionSpec { drop_ratio, seed })?;
                    Ok((evaluate(&model, &corrupted)?, dropped))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((history, evals))
        })
        .collect::<Result<_>>()?;

    Ok(ratios
        .iter()
        .enumerate()
        .map(|(r, &ratio)| {
            let mut m = base.clone();
            m.set("drop_ratio", format!("{ratio:?}"));
            let mut reports = Vec::with_capacity(folds.len());
            for (f, (h, evals)) in per_fold.iter().enumerate() {
                m.set(format!("fold.{}.best_epoch", f + 1), h.best_epoch);
                m.set(format!("fold.{}.epochs_run", f + 1), h.epochs.len());
                m.set(format!("fold.{}.dropped", f + 1), join(&evals[r].1));
                reports.push(evals[r].0.clone());
            }
            SweepEntry { ratio, report: CvReport::from_folds(m, reports) }
        })
        .collect())
}

/// One configuration of an ablation table.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub config: ModelConfig,
    pub report: CvReport,
}

/// Cross-validate every configuration on the same folds and seeds.
pub fn run_variant_ablation(
    dataset: &Dataset,
    k: usize,
    configs: &[(String, ModelConfig)],
    cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    if configs.is_empty() {
        return Err(Error::Usage("ablation needs at least one configuration".into()));
    }
    let rows: Vec<AblationRow> = configs
        .iter()
        .map(|(label, config)| {
            let mut report = run_cv(dataset, k, config, cfg)?;
            report.manifest.set("label", label);
            Ok(AblationRow { label: label.clone(), config: config.clone(), report })
        })
        .collect::<Result<_>>()?;
    let folds_of = |r: &CvReport| -> Vec<(String, String)> {
        r.manifest.entries.iter().filter(|(k, _)| k.starts_with("fold.") && !k.contains("epoch")).cloned().collect()
    };
    let reference = folds_of(&rows[0].report);
    if let Some(row) = rows.iter().find(|r| folds_of(&r.report) != reference) {
        return Err(Error::State(format!("row `{}` did not use the shared folds", row.label)));
    }
    Ok(rows)
}
