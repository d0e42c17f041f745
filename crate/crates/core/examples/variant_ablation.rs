//! Paired V1 to V4 comparison on both synthetic regimes.
//!
//! ```text
//! cargo run --release --example variant_ablation [folds] [epochs]
//! ```

use std::time::Instant;

use mvformer::data::{gen_synthetic, Regime, SyntheticSpec};
use mvformer::train::{run_variant_ablation, TrainConfig};
use mvformer::{ModelConfig, Variant};

fn main() -> mvformer::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let folds = args.next().unwrap_or(5);
    let epochs = args.next().unwrap_or(30);
    let train = TrainConfig { epochs, seed: 11, ..TrainConfig::default() };
    let configs: Vec<(String, ModelConfig)> =
        Variant::ALL.iter().map(|&v| (v.to_string(), ModelConfig::toy().with_variant(v))).collect();
    for regime in [Regime::Nirts, Regime::Airts] {
        let data = gen_synthetic(&SyntheticSpec { seed: 5, ..SyntheticSpec::default_for(regime) })?;
        let start = Instant::now();
        let rows = run_variant_ablation(&data, folds, &configs, &train)?;
        println!("{regime} ({} samples, missing {:.3})", data.len(), data.missing_ratio());
        for r in rows {
            println!(
                "  {:<3} auroc {:.3} ± {:.3}  auprc {:.3}",
                r.label,
                r.report.mean("auroc").unwrap_or(f64::NAN),
                r.report.std("auroc").unwrap_or(f64::NAN),
                r.report.mean("auprc").unwrap_or(f64::NAN)
            );
        }
        println!("  {:.1?}", start.elapsed());
    }
    Ok(())
}
