//! Decode a binary AndroidManifest.xml back into readable XML.
//!
//!     cargo run --example decode_manifest [path/to/AndroidManifest.xml]
//!
//! Without an argument a synthetic manifest is decoded.

use forge::axml::decode_axml;
use forge::synth::sample_manifest_axml;

fn main() {
    let bytes = match std::env::args().nth(1) {
        Some(path) => std::fs::read(path).expect("readable manifest file"),
        None => sample_manifest_axml(true),
    };
    match decode_axml(&bytes) {
        Ok(doc) => {
            for w in &doc.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", doc.text);
        }
        Err(e) => {
            eprintln!("decode failed: {e}");
            std::process::exit(2);
        }
    }
}
