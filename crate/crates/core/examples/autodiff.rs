//! Softmax regression on a tape, trained with Adam.
//!
//! ```text
//! cargo run --example autodiff
//! ```

use mvformer::autodiff::Tape;
use mvformer::optim::{AdamConfig, AdamState};
use mvformer::params::ParamStore;
use mvformer::Tensor;

fn main() -> mvformer::Result<()> {
    // two classes, separated by the sign of x0 - x1
    let xs = [[1.0, -0.5], [0.8, 0.1], [2.0, 1.0], [-1.0, 0.3], [0.2, 1.4], [-0.7, -0.1]];
    let ys = [0, 0, 0, 1, 1, 1];

    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::zeros(&[2, 2]));
    let b = store.add("b", Tensor::zeros(&[2]));
    let mut adam = AdamState::new(&store, AdamConfig { lr: 0.1, ..AdamConfig::default() });

    for step in 0..=100 {
        let mut tape = Tape::new();
        let bind = store.bind(&mut tape);
        let mut terms = Vec::new();
        for (x, &y) in xs.iter().zip(&ys) {
            let x = tape.constant(Tensor::new(&[1, 2], x.to_vec())?);
            let z = tape.matmul(x, bind.var(w))?;
            let logits = tape.add_row(z, bind.var(b))?;
            terms.push(tape.cross_entropy(logits, y, 1.0)?);
        }
        let stacked = tape.concat_rows(&terms)?;
        let total = tape.sum(stacked);
        let loss = tape.scale(total, 1.0 / xs.len() as f64);
        if step % 20 == 0 {
            println!("step {step:>3}  loss {:.5}", tape.value(loss).data()[0]);
        }
        let grads = tape.backward(loss)?;
        adam.step(&mut store, &bind.collect(&grads))?;
    }
    println!("w = {:?}", store.get(w).data());
    println!("b = {:?}", store.get(b).data());
    Ok(())
}
