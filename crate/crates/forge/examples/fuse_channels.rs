//! Fuse one synthetic APK into a 256×256 RGB PNG, then prove the channels
//! separate back out pixel-for-pixel.
//!
//!     cargo run --example fuse_channels [output.png]

use forge::fuse::{decode_png, encode_png};
use forge::pipeline::{fuse_apk_bytes, PipelineConfig};
use forge::synth::corpus_apk;

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fused.png".to_string());

    let apk = corpus_apk(true, 0, 42);
    let cfg = PipelineConfig::default();
    let fused = fuse_apk_bytes(&apk, &cfg).unwrap();
    let png = encode_png(&fused.image).unwrap();
    std::fs::write(&out, &png).unwrap();
    println!("wrote {out} ({} bytes)", png.len());

    let decoded = decode_png(&png).unwrap();
    for (i, name) in ["red/dex", "green/manifest", "blue/api"].iter().enumerate() {
        let plane = decoded.channel(i);
        assert_eq!(plane.pixels(), fused.planes[i].pixels());
        let mean = plane.pixels().iter().map(|&p| p as f64).sum::<f64>() / plane.pixels().len() as f64;
        println!("  {name:<16} mean intensity {mean:.2}");
    }
    println!("channel separation verified");
}
