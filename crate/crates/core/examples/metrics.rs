//! Binary and multiclass metrics on hand-sized inputs.
//!
//! ```text
//! cargo run --example metrics
//! ```

use mvformer::metrics::{auprc, auroc, confusion_matrix, multiclass_report, ScoredLabels};

fn main() -> mvformer::Result<()> {
    let scores = [0.9, 0.8, 0.7, 0.6, 0.55, 0.4, 0.3, 0.1];
    let positive = [true, true, false, true, false, false, true, false];
    println!("auroc {:.4}", auroc(&scores, &positive)?);
    println!("auprc {:.4}", auprc(&scores, &positive)?);

    let probs = vec![
        vec![0.7, 0.2, 0.1],
        vec![0.1, 0.8, 0.1],
        vec![0.2, 0.3, 0.5],
        vec![0.6, 0.3, 0.1],
        vec![0.1, 0.2, 0.7],
        vec![0.3, 0.4, 0.3],
    ];
    let labels = vec![0, 1, 2, 1, 2, 0];
    let s = ScoredLabels::new(probs, labels.clone())?;
    for row in confusion_matrix(&labels, &s.predictions(), 3) {
        println!("  {row:?}");
    }
    let r = multiclass_report(&s, 3)?;
    println!(
        "accuracy {:.3}  macro precision {:.3}  recall {:.3}  f1 {:.3}",
        r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1
    );
    Ok(())
}
