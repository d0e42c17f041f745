use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TOY: &str = "embed_dim=16\nheads=4\ndilations=1,2\nkernel_width=3\nffn_width=32\nn_samples=60\n";

fn mvformer(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvformer")).args(args).current_dir(cwd).output().unwrap()
}

fn toy_config(dir: &Path) -> PathBuf {
    let p = dir.join("toy.cfg");
    std::fs::write(&p, TOY).unwrap();
    p
}

fn run_dir(out: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn train_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let o = mvformer(
        &[
            "train",
            "--synthetic",
            "airts",
            "--folds",
            "2",
            "--epochs",
            "2",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "runs",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&tmp.path().join("runs"));
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with("-0"));
    for f in ["manifest.txt", "report.txt", "summary.json", "metrics.csv", "model.fold1.mvf", "model.fold2.mvf"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let manifest = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("timestamp="));
    assert!(manifest.contains("dataset.fingerprint="));
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(!report.contains("timestamp"));
    let rows = csv_rows(&dir.join("metrics.csv"));
    assert_eq!(rows[0], ["fold", "auroc", "auprc"]);
    assert_eq!(rows.len(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(json.is_object());
}

#[test]
fn checkpoint_loads_back() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let o = mvformer(
        &[
            "train",
            "--synthetic",
            "nirts",
            "--folds",
            "2",
            "--epochs",
            "1",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let dir = run_dir(&tmp.path().join("r"));
    let m = mvformer::model::load_checkpoint(dir.join("model.fold1.mvf"), None).unwrap();
    assert_eq!(m.config().embed_dim, 16);
}

#[test]
fn ablate_rows_are_configs_times_folds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let o = mvformer(
        &[
            "ablate",
            "--synthetic",
            "nirts",
            "--folds",
            "2",
            "--epochs",
            "1",
            "--switches",
            "tc,time-sensor,irmask",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&tmp.path().join("r"));
    let rows = csv_rows(&dir.join("ablation.csv"));
    assert_eq!(rows[0][..2], ["config", "fold"]);
    assert_eq!(rows.len(), 1 + 3 * 2);
    let labels: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["tc", "tc", "time-sensor", "time-sensor", "irmask", "irmask"]);
}

#[test]
fn ablate_rejects_conflicting_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mvformer(&["ablate", "--synthetic", "nirts", "--variants", "v1", "--switches", "tc"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = mvformer(&["ablate", "--synthetic", "nirts", "--variants", ","], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_has_one_row_per_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let o = mvformer(
        &[
            "sweep",
            "--synthetic",
            "airts",
            "--folds",
            "2",
            "--epochs",
            "1",
            "--ratios",
            "1,0,0.5,0.5",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&tmp.path().join("r"));
    let rows = csv_rows(&dir.join("sweep.csv"));
    assert_eq!(rows[0], ["ratio", "auroc_mean", "auroc_std", "auprc_mean", "auprc_std"]);
    let ratios: Vec<f64> = rows[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(ratios, [0.0, 0.5, 1.0]);
    assert_eq!(csv_rows(&dir.join("sweep_folds.csv")).len(), 1 + 3 * 2);
    let o = mvformer(&["sweep", "--synthetic", "airts", "--ratios", "1.5"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gradcheck_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.cfg");
    std::fs::write(&cfg, "seq_len=3\nn_sensors=2\nembed_dim=4\nheads=2\nffn_width=6\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = mvformer(&["gradcheck", "--variant", "v2", "--config", c], tmp.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("head.w"));
    let o = mvformer(&["gradcheck", "--config", c, "--corrupt-backward", "layer_norm"], tmp.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.contains("layer_norm"), "{out}");
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(mvformer(&["train"], tmp.path()).status.code(), Some(2));
    assert_eq!(mvformer(&["train", "--synthetic", "pam"], tmp.path()).status.code(), Some(2));
    assert_eq!(mvformer(&["frobnicate"], tmp.path()).status.code(), Some(2));
    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "synthetic=nirts\nlearning_rate=0.1\n").unwrap();
    let o = mvformer(&["train", "--config", bad.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));
}

#[test]
fn missing_dataset_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mvformer(&["train", "--dataset", "absent.irts"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_then_train_on_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o =
        mvformer(&["synth", "--synthetic", "airts", "--samples", "40", "--seed", "2", "--out", "d/a.irts"], tmp.path());
    assert!(o.status.success());
    let sidecar = std::fs::read_to_string(tmp.path().join("d/a.irts.manifest")).unwrap();
    assert!(sidecar.contains("data.synthetic=airts"));
    let loaded = mvformer::data::load_triplets(tmp.path().join("d/a.irts")).unwrap();
    assert_eq!(loaded.dataset.len(), 40);
    assert!(sidecar.contains(&format!("dataset.fingerprint={}", loaded.dataset.fingerprint())));
    let cfg = toy_config(tmp.path());
    let o = mvformer(
        &[
            "train",
            "--dataset",
            "d/a.irts",
            "--folds",
            "2",
            "--epochs",
            "1",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_ratio_zero_matches_train() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let c = cfg.to_str().unwrap();
    let common = ["--synthetic", "airts", "--folds", "2", "--epochs", "2", "--seed", "4", "--config", c];
    let mut train = vec!["train"];
    train.extend(common);
    train.extend(["--out", "t"]);
    assert!(mvformer(&train, tmp.path()).status.success());
    let mut sweep = vec!["sweep"];
    sweep.extend(common);
    sweep.extend(["--ratios", "0,0.5", "--out", "s"]);
    assert!(mvformer(&sweep, tmp.path()).status.success());

    let t = csv_rows(&run_dir(&tmp.path().join("t")).join("metrics.csv"));
    let s = csv_rows(&run_dir(&tmp.path().join("s")).join("sweep_folds.csv"));
    let zero: Vec<&Vec<String>> = s[1..].iter().filter(|r| r[0] == "0.0").collect();
    assert_eq!(zero.len(), t.len() - 1);
    for (a, b) in t[1..].iter().zip(zero) {
        assert_eq!(a[..], b[1..]);
    }
}

#[test]
fn synth_is_reproducible_and_matches_its_missing_rate() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["a.irts", "b.irts"] {
        let o =
            mvformer(&["synth", "--synthetic", "nirts", "--samples", "500", "--seed", "8", "--out", name], tmp.path());
        assert!(o.status.success());
    }
    let a = std::fs::read(tmp.path().join("a.irts")).unwrap();
    assert_eq!(a, std::fs::read(tmp.path().join("b.irts")).unwrap());
    let d = mvformer::data::load_triplets(tmp.path().join("a.irts")).unwrap().dataset;
    let base = mvformer::data::SyntheticSpec::default_for(mvformer::data::Regime::Nirts).missing_prob;
    assert!((d.missing_ratio() - base).abs() <= 0.02, "{}", d.missing_ratio());
}

#[test]
fn invalid_synthetic_spec_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "missing_prob=1.5\n").unwrap();
    let o = mvformer(&["synth", "--config", cfg.to_str().unwrap(), "--out", "x.irts"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("x.irts").exists());
}
