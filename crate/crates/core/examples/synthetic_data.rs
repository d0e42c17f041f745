//! Generate both synthetic regimes, round-trip them through the triplet
//! format and split them into stratified folds.
//!
//! ```text
//! cargo run --example synthetic_data
//! ```

use mvformer::data::{gen_synthetic, parse_triplets, stratified_kfold, write_triplets, Regime, SyntheticSpec};

fn main() -> mvformer::Result<()> {
    for regime in [Regime::Nirts, Regime::Airts] {
        let spec = SyntheticSpec { n_samples: 200, seed: 3, ..SyntheticSpec::default_for(regime) };
        let data = gen_synthetic(&spec)?;
        println!("{}", spec.describe());
        println!("  missing ratio {:.3}, classes {:?}", data.missing_ratio(), data.class_counts());

        let text = write_triplets(&data);
        let back = parse_triplets(&text)?.dataset;
        assert_eq!(back.fingerprint(), data.fingerprint());
        println!("  {} bytes as triplets, fingerprint {}", text.len(), &data.fingerprint()[..16]);

        for (i, fold) in stratified_kfold(&data.labels(), data.num_classes(), 5, 1)?.iter().enumerate() {
            println!("  fold {}: train {} val {} test {}", i + 1, fold.train.len(), fold.val.len(), fold.test.len());
        }
    }
    Ok(())
}
