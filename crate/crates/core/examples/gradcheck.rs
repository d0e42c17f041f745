//! Verify every model gradient against central differences on the toy
//! configuration, for all variants and view combinations.
//!
//! ```text
//! cargo run --release --example gradcheck
//! ```

use std::time::Instant;

use mvformer::gradcheck::{suite, TOLERANCE};
use mvformer::ModelConfig;

fn main() -> mvformer::Result<()> {
    let start = Instant::now();
    let checks = suite(&ModelConfig::toy(), 7, None, |_, _| true)?;
    for c in &checks {
        let w = c.worst().expect("non-empty model");
        println!(
            "{:<16} worst {:.3e} in {} [{}] (tape {:.6e}, numeric {:.6e})",
            c.label, w.max_rel_error, w.name, w.worst_index, w.analytic, w.numeric
        );
    }
    let ok = checks.iter().all(|c| c.passed(TOLERANCE));
    println!("{} in {:.1?}", if ok { "all passed" } else { "FAILED" }, start.elapsed());
    Ok(())
}
