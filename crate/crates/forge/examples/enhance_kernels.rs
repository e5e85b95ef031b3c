//! Run the three enhancement kernels over the same byteplot and compare
//! their output statistics.
//!
//!     cargo run --example enhance_kernels

use forge::byteplot::bytes_to_gray;
use forge::enhance::{EnhanceConfig, Enhancement};
use forge::raster::GrayImage;

fn describe(name: &str, img: &GrayImage) {
    let px = img.pixels();
    let nonzero = px.iter().filter(|&&p| p > 0).count();
    let distinct: std::collections::BTreeSet<u8> = px.iter().copied().collect();
    println!(
        "{name:<20} {}x{}, {} distinct value(s), {:.1}% nonzero",
        img.width(),
        img.height(),
        distinct.len(),
        100.0 * nonzero as f64 / px.len() as f64
    );
}

fn main() {
    // A payload with visible structure: ramps interrupted by hard steps.
    let payload: Vec<u8> = (0..24 * 1024)
        .map(|i| if (i / 512) % 2 == 0 { (i % 256) as u8 } else { 32 })
        .collect();
    let plot = bytes_to_gray(&payload).unwrap();
    describe("raw byteplot", &plot);

    let cfg = EnhanceConfig::default();
    for kind in [
        Enhancement::Canny,
        Enhancement::HistEq,
        Enhancement::AdaptiveThreshold,
    ] {
        let (out, warnings) = kind.apply(&plot, &cfg).unwrap();
        describe(&format!("{kind:?}"), &out);
        for w in warnings {
            println!("  warning: {w}");
        }
    }
}
