//! Show how payload size picks the byteplot row width.
//!
//!     cargo run --example byteplot_sizes

use forge::byteplot::{bytes_to_gray, WidthTable};

fn main() {
    let table = WidthTable::default();
    for kb in [1usize, 9, 10, 64, 150, 700, 2048] {
        let payload = vec![0xABu8; kb * 1024];
        let img = bytes_to_gray(&payload).unwrap();
        println!(
            "{:>5} KiB -> width {:>4} (table says {:>4}), height {}",
            kb,
            img.width(),
            table.width_for(payload.len()),
            img.height()
        );
    }
}
