//! End-to-end run: synthesize a corpus, image it, train the built-in
//! classifier on an 80/20 split and report held-out metrics.
//!
//!     cargo run --release --example train_and_eval

use forge::classify::{evaluate_binary, featurize, train};
use forge::fuse::decode_png;
use forge::pipeline::{make_report, png_path, run_pipeline, PipelineConfig, RecordStatus, ReportRow};
use forge::synth::write_two_class_corpus;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let root = std::env::temp_dir().join("forge_train_and_eval");
    let input = root.join("corpus");
    let output = root.join("dataset");
    let _ = std::fs::remove_dir_all(&root);

    let per_class = 25;
    let seed = 42u64;
    write_two_class_corpus(&input, per_class, seed).unwrap();
    println!("corpus: {} packages under {}", per_class * 2, input.display());

    let cfg = PipelineConfig {
        workers: 4,
        seed,
        ..PipelineConfig::default()
    };
    let records = run_pipeline(&input, &output, &cfg).unwrap();
    let manifest = output.join("manifest.jsonl");
    println!("imaged {} packages -> {}", records.len(), manifest.display());

    // Featurize every Ok record.
    let mut samples = Vec::new();
    for r in records.iter().filter(|r| r.status == RecordStatus::Ok) {
        let png = std::fs::read(png_path(&manifest, r)).unwrap();
        let img = decode_png(&png).unwrap();
        samples.push((featurize(&img, cfg.feature_dim).unwrap(), r.label.clone()));
    }

    // Deterministic 80/20 split.
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let cut = samples.len() * 4 / 5;
    let pick = |idx: &[usize]| -> Vec<_> { idx.iter().map(|&i| samples[i].clone()).collect() };
    let train_set = pick(&order[..cut]);
    let test_set = pick(&order[cut..]);

    let outcome = train(&train_set, cfg.classifier, cfg.seed).unwrap();
    println!(
        "trained {} epochs, final loss {:.6}",
        outcome.loss_trace.len(),
        outcome.loss_trace.last().unwrap()
    );

    let metrics = evaluate_binary(&outcome.model, &test_set, "sms").unwrap();
    let (table, csv) = make_report(&[ReportRow {
        model: "builtin".into(),
        accuracy: metrics.accuracy,
        precision: metrics.precision,
        recall: metrics.recall,
        f1: metrics.f1,
    }]);
    print!("{table}{csv}");
}
