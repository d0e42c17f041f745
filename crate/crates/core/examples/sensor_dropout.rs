//! Leave-random-sensor-out sweep on synthetic AIRTS.
//!
//! ```text
//! cargo run --release --example sensor_dropout [folds] [epochs]
//! ```

use mvformer::data::{gen_synthetic, Regime, SyntheticSpec};
use mvformer::train::{run_sensor_dropout_sweep, TrainConfig};
use mvformer::ModelConfig;

fn main() -> mvformer::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let folds = args.next().unwrap_or(3);
    let epochs = args.next().unwrap_or(10);
    let data = gen_synthetic(&SyntheticSpec::default_for(Regime::Airts))?;
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let ratios = [0.0, 0.25, 0.5, 0.75, 1.0];
    for e in run_sensor_dropout_sweep(&data, folds, &ratios, &ModelConfig::toy(), &cfg)? {
        let dropped: Vec<&str> = e
            .report
            .manifest
            .entries
            .iter()
            .filter(|(k, _)| k.ends_with(".dropped"))
            .map(|(_, v)| v.as_str())
            .collect();
        println!(
            "ratio {:<4}  auroc {:.3} ± {:.3}  dropped per fold {:?}",
            e.ratio,
            e.report.mean("auroc").unwrap_or(f64::NAN),
            e.report.std("auroc").unwrap_or(f64::NAN),
            dropped
        );
    }
    Ok(())
}
