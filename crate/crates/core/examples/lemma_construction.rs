//! A two-layer ReLU network that multiplies binary matrices: prints the
//! weights for n = 2, walks through one product and verifies small n.
//!
//! ```text
//! cargo run --release --example lemma_construction
//! ```

use regulargpt::lemma::{print_weights, verify_lemma, BinaryMatrix, LemmaNetwork, VerifyMode};

fn main() -> regulargpt::Result<()> {
    print!("{}", print_weights(2)?);

    let net = LemmaNetwork::new(2)?;
    let a = BinaryMatrix::from_rows(&[vec![1, 0], vec![1, 0]])?;
    let b = BinaryMatrix::from_rows(&[vec![0, 1], vec![1, 0]])?;
    let mut x = a.flat();
    x.extend(b.flat());
    println!("\nx          = {x:?}");
    println!("x W1       = {:?}", net.pre_activation(&x)?);
    println!("ReLU(.-1)  = {:?}", net.hidden(&x)?);
    println!("output     = {:?}", net.forward(&x)?);
    println!("A B        = {:?}", a.product(&b)?);

    for n in 1..=3 {
        println!("n = {n}: {}", verify_lemma(n, VerifyMode::Exhaustive)?);
    }
    let report = verify_lemma(
        6,
        VerifyMode::Random {
            trials: 1000,
            seed: 0,
        },
    )?;
    println!("n = 6 (random): {report}");
    Ok(())
}
