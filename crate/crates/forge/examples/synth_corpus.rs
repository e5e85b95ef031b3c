//! Generate the labelled two-class APK corpus used for end-to-end testing.
//!
//!     cargo run --example synth_corpus [dir] [per_class] [seed]

use forge::synth::write_two_class_corpus;
use std::path::PathBuf;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir: PathBuf = args
        .next()
        .unwrap_or_else(|| "corpus".to_string())
        .into();
    let per_class: usize = args
        .next()
        .map(|s| s.parse().expect("per_class must be a number"))
        .unwrap_or(10);
    let seed: u64 = args
        .next()
        .map(|s| s.parse().expect("seed must be a u64"))
        .unwrap_or(42);

    write_two_class_corpus(&dir, per_class, seed).unwrap();
    println!(
        "wrote {per_class} sms + {per_class} benign packages under {}",
        dir.display()
    );
    println!("try: cargo run --bin forge -- run {} --out dataset", dir.display());
}
