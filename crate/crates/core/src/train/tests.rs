use super::*;
use crate::data::{gen_synthetic, Regime, SyntheticSpec};
use crate::model::Variant;

fn synth(regime: Regime, n: usize, seed: u64) -> Dataset {
    gen_synthetic(&SyntheticSpec { n_samples: n, seed, ..SyntheticSpec::default_for(regime) }).unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 8, seed: 3, ..TrainConfig::default() }
}

fn tiny_model() -> ModelConfig {
    let mut c = ModelConfig::toy();
    c.embed_dim = 8;
    c.heads = 2;
    c.ffn_width = 16;
    c.blocks = 1;
    c
}

#[test]
fn zero_epochs_rejected() {
    let d = synth(Regime::Nirts, 8, 0);
    let e = train_model(&d, &d, &tiny_model(), &quick(0)).unwrap_err();
    assert!(matches!(e, Error::Config(_)));
}

#[test]
fn memorizes_a_small_set() {
    let d = synth(Regime::Airts, 32, 1);
    let cfg = TrainConfig { epochs: 200, batch_size: 32, lr: 1e-2, patience: 0, ..quick(0) };
    let (_, h) = train_model(&d, &Dataset::new(vec![], 2, 8, 4).unwrap(), &ModelConfig::toy(), &cfg).unwrap();
    let last = h.epochs.last().unwrap().train_loss;
    assert!(last < 0.05, "final loss {last}");
}

#[test]
fn training_is_deterministic() {
    let d = synth(Regime::Nirts, 24, 2);
    let run = || train_model(&d, &d, &tiny_model(), &quick(3)).unwrap().1;
    assert_eq!(run(), run());
}

#[test]
fn best_epoch_holds_the_best_validation_score() {
    let d = synth(Regime::Nirts, 40, 3);
    let v = synth(Regime::Nirts, 20, 4);
    let (model, h) = train_model(&d, &v, &tiny_model(), &quick(6)).unwrap();
    let best = h.epochs.iter().filter_map(|e| e.val_metric).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(h.epochs[h.best_epoch - 1].val_metric, Some(best));
    assert_eq!(selection_metric(&model, &v).unwrap(), Some(best));
}

#[test]
fn divergence_names_epoch_and_batch() {
    let d = synth(Regime::Nirts, 8, 5);
    let cfg = TrainConfig { lr: f64::MAX, ..quick(3) };
    match train_model(&d, &d, &tiny_model(), &cfg) {
        Err(Error::Divergence { epoch, batch, .. }) => assert!(epoch >= 1 && batch >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn class_weights_balance_counts() {
    let mut d = synth(Regime::Nirts, 30, 6);
    let keep: Vec<usize> = (0..30).filter(|i| i % 2 == 0 || *i < 10).collect();
    d = d.subset(&keep);
    let counts = d.class_counts();
    let w = class_weights(&d, ClassWeighting::Auto);
    assert!((w[0] * counts[0] as f64 - w[1] * counts[1] as f64).abs() < 1e-12);
    assert_eq!(class_weights(&d, ClassWeighting::Off), vec![1.0, 1.0]);
    let balanced = synth(Regime::Nirts, 20, 6);
    assert_eq!(class_weights(&balanced, ClassWeighting::Auto), vec![1.0, 1.0]);
}

#[test]
fn cv_structure_and_aggregates() {
    let d = synth(Regime::Nirts, 40, 7);
    let r = run_cv(&d, 2, &tiny_model(), &quick(2)).unwrap();
    assert_eq!(r.folds.len(), 2);
    let vals: Vec<f64> = r.folds.iter().map(|f| f.metric("auroc").unwrap()).collect();
    let mean = (vals[0] + vals[1]) / 2.0;
    let std = ((vals[0] - mean).powi(2) + (vals[1] - mean).powi(2)).sqrt();
    assert!((r.mean("auroc").unwrap() - mean).abs() < 1e-15);
    assert!((r.std("auroc").unwrap() - std).abs() < 1e-15);
    let mut tests: Vec<usize> = Vec::new();
    for f in 1..=2 {
        let key = format!("fold.{f}.test");
        let v = r.manifest.get(&key).unwrap();
        tests.extend(v.split(',').map(|x| x.parse::<usize>().unwrap()));
        let val = r.manifest.get(&format!("fold.{f}.val")).unwrap();
        tests.extend(val.split(',').map(|x| x.parse::<usize>().unwrap()));
    }
    tests.sort_unstable();
    assert_eq!(tests, (0..40).collect::<Vec<_>>());
}

#[test]
fn report_round_trips() {
    let d = synth(Regime::Nirts, 40, 8);
    let r = run_cv(&d, 2, &tiny_model(), &quick(1)).unwrap();
    let back = CvReport::from_text(&r.to_text()).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.to_text(), r.to_text());
    let json: CvReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json, r);
}

#[test]
fn multiclass_reports_macro_scores() {
    let spec = SyntheticSpec { num_classes: 3, n_samples: 30, seed: 9, ..SyntheticSpec::default_for(Regime::Airts) };
    let d = gen_synthetic(&spec).unwrap();
    let mut mc = tiny_model();
    mc.num_classes = 3;
    let r = run_cv(&d, 2, &mc, &quick(1)).unwrap();
    assert_eq!(r.folds[0].task, TaskKind::Multiclass);
    for m in ["accuracy", "precision", "recall", "f1"] {
        assert!(r.mean(m).is_some());
    }
    assert_eq!(r.manifest.get("averaging"), Some("macro"));
}

#[test]
fn sweep_zero_ratio_matches_cv() {
    let d = synth(Regime::Airts, 40, 10);
    let cfg = quick(2);
    let cv = run_cv(&d, 2, &tiny_model(), &cfg).unwrap();
    let sweep = run_sensor_dropout_sweep(&d, 2, &[1.0, 0.0, 0.5], &tiny_model(), &cfg).unwrap();
    let ratios: Vec<f64> = sweep.iter().map(|e| e.ratio).collect();
    assert_eq!(ratios, vec![0.0, 0.5, 1.0]);
    assert_eq!(sweep[0].report.folds, cv.folds);
    for f in 1..=2 {
        let key = format!("fold.{f}.dropped");
        let half: Vec<&str> = sweep[1].report.manifest.get(&key).unwrap().split(',').collect();
        let all: Vec<&str> = sweep[2].report.manifest.get(&key).unwrap().split(',').collect();
        assert_eq!(half.len(), 2);
        assert_eq!(all.len(), 4);
        assert!(half.iter().all(|s| all.contains(s)));
        assert_eq!(sweep[0].report.manifest.get(&key), Some(""));
    }
    assert!(run_sensor_dropout_sweep(&d, 2, &[1.5], &tiny_model(), &cfg).is_err());
}

#[test]
fn ablation_rows_share_folds() {
    let d = synth(Regime::Nirts, 40, 11);
    let configs: Vec<(String, ModelConfig)> =
        [Variant::V1, Variant::V2].iter().map(|&v| (v.to_string(), tiny_model().with_variant(v))).collect();
    let rows = run_variant_ablation(&d, 2, &configs, &quick(1)).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].report.manifest.get("fold.1.test"), rows[1].report.manifest.get("fold.1.test"));
    assert!(run_variant_ablation(&d, 2, &[], &quick(1)).is_err());
}
