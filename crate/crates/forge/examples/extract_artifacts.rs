//! Build a tiny APK in memory and pull its DEX and manifest members back out.
//!
//!     cargo run --example extract_artifacts

use forge::apk::{extract_artifacts, DexMode};
use forge::synth::{sample_manifest_axml, DexBuilder, ZipBuilder};

fn main() {
    let dex = DexBuilder::new()
        .invoke("Landroid/app/Activity;", "onCreate", "V")
        .build();
    let apk = ZipBuilder::new()
        .add_deflated("classes.dex", &dex)
        .add_deflated("classes2.dex", &dex)
        .add_deflated("AndroidManifest.xml", &sample_manifest_axml(false))
        .add_stored("res/raw/data.bin", b"opaque resource payload")
        .finish();
    println!("synthetic APK: {} bytes", apk.len());

    let artifacts = extract_artifacts(&apk, DexMode::ConcatAll).unwrap();
    for (name, payload) in &artifacts.dexes {
        println!("  {name}: {} bytes", payload.len());
    }
    println!(
        "  AndroidManifest.xml: {} bytes (binary XML)",
        artifacts.manifest.len()
    );
    println!("  concatenated DEX payload: {} bytes", artifacts.dex_concat().len());

    let only_primary = extract_artifacts(&apk, DexMode::ClassesOnly).unwrap();
    println!(
        "classes-only mode keeps {} member(s)",
        only_primary.dexes.len()
    );
}
