//! Cross-validate the gated model on synthetic NIRTS and reload one fold's
//! checkpoint.
//!
//! ```text
//! cargo run --release --example train_cv [folds] [epochs]
//! ```

use mvformer::data::{gen_synthetic, Regime, SyntheticSpec};
use mvformer::model::load_checkpoint;
use mvformer::train::{run_cv, TrainConfig};
use mvformer::ModelConfig;

fn main() -> mvformer::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let folds = args.next().unwrap_or(3);
    let epochs = args.next().unwrap_or(10);
    let dir = tempfile_dir();
    let data = gen_synthetic(&SyntheticSpec { n_samples: 300, ..SyntheticSpec::default_for(Regime::Nirts) })?;
    let cfg = TrainConfig { epochs, checkpoint: Some(dir.join("model.mvf")), ..TrainConfig::default() };
    let report = run_cv(&data, folds, &ModelConfig::toy(), &cfg)?;
    print!("{}", report.to_text());

    let model = load_checkpoint(dir.join("model.fold1.mvf"), Some(&ModelConfig::toy()))?;
    let p = model.predict_proba(&data.samples()[0])?;
    println!("fold 1 model on sample 0 (label {}): {p:?}", data.samples()[0].label());
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("mvformer-train-cv-{}", std::process::id()));
    std::fs::create_dir_all(&d).expect("temp dir");
    d
}
