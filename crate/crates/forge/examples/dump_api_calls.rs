//! Scan DEX bytecode for invoked platform APIs.
//!
//!     cargo run --example dump_api_calls
//!
//! Shows the difference between the bytecode scan (only what is actually
//! called) and the method-table fallback (everything referenced).

use forge::dex::{parse_dex, scan_invokes, serialize_api_text};
use forge::synth::{CodeMode, DexBuilder};

fn main() {
    let dex = DexBuilder::new()
        .invoke("Landroid/telephony/SmsManager;", "sendTextMessage", "V")
        .invoke("Ljava/lang/Runtime;", "exec", "L")
        .reference("Landroid/net/Uri;", "parse", "L") // in the table, never called
        .invoke("Lcom/thirdparty/Tracker;", "ping", "V") // not platform API
        .build();

    let tables = parse_dex(&dex).unwrap();
    let report = scan_invokes(&dex, &tables, false);
    println!("bytecode scan ({:?}):", report.source);
    print!("{}", String::from_utf8(serialize_api_text(&report)).unwrap());

    // Corrupt code items force the conservative fallback: the uninvoked
    // reference now shows up too.
    let broken = DexBuilder::new()
        .invoke("Landroid/telephony/SmsManager;", "sendTextMessage", "V")
        .reference("Landroid/net/Uri;", "parse", "L")
        .code_mode(CodeMode::Unparseable)
        .build();
    let tables = parse_dex(&broken).unwrap();
    let report = scan_invokes(&broken, &tables, false);
    println!("\nfallback ({:?}):", report.source);
    for w in &report.warnings {
        println!("  warning: {w}");
    }
    print!("{}", String::from_utf8(serialize_api_text(&report)).unwrap());
}
