use mvformer::data::{
    gen_synthetic, leave_random_sensor_out, load_triplets, normalize, save_triplets, stratified_kfold, CorruptionSpec,
    Regime, SyntheticSpec,
};
use mvformer::Error;

#[test]
fn triplet_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen_synthetic(&SyntheticSpec { n_samples: 30, ..SyntheticSpec::default_for(Regime::Nirts) }).unwrap();
    let path = tmp.path().join("x.irts");
    save_triplets(&data, &path).unwrap();
    let back = load_triplets(&path).unwrap();
    assert_eq!(back.duplicate_observations, 0);
    assert_eq!(back.dataset.fingerprint(), data.fingerprint());
    assert_eq!(back.dataset.missing_ratio(), data.missing_ratio());
}

#[test]
fn hand_written_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("h.irts");
    std::fs::write(
        &path,
        "#irts v1 sensors=3 classes=2\nL a 1\nL b 0\nO a 0 2 1.5\nO a 3 0 -2\nO a 3 0 -4\nO b 1 1 0.25\n",
    )
    .unwrap();
    let loaded = load_triplets(&path).unwrap();
    let d = &loaded.dataset;
    assert_eq!((d.len(), d.seq_len(), d.n_sensors()), (2, 4, 3));
    assert_eq!(loaded.duplicate_observations, 1);
    assert_eq!(d.samples()[0].get(3, 0), Some(-4.0));
    assert_eq!(d.samples()[0].get(0, 0), None);
    // 3 observed cells out of 2 * 4 * 3
    assert!((d.missing_ratio() - 21.0 / 24.0).abs() < 1e-12);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.irts");
    std::fs::write(&path, "#irts v1 sensors=2 classes=2\nL a 0\nO a 0 5 1.0\n").unwrap();
    match load_triplets(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn folds_corruption_and_normalization_compose() {
    let data = gen_synthetic(&SyntheticSpec { n_samples: 100, ..SyntheticSpec::default_for(Regime::Airts) }).unwrap();
    let folds = stratified_kfold(&data.labels(), 2, 5, 4).unwrap();
    let mut seen = vec![0usize; data.len()];
    for f in &folds {
        for i in f.held_out() {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));

    let test = data.subset(&folds[0].test);
    let (corrupted, dropped) = leave_random_sensor_out(&test, &CorruptionSpec { drop_ratio: 0.5, seed: 1 }).unwrap();
    assert_eq!(dropped.len(), 2);
    for s in corrupted.samples() {
        for &k in &dropped {
            assert!((0..s.len()).all(|t| !s.is_observed(t, k)));
        }
    }
    let n = normalize(&data);
    assert_eq!(n.dataset.len(), data.len());
    assert_eq!(n.dataset.missing_ratio(), data.missing_ratio());
}
