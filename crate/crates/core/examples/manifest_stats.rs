//! Builds the benchmark-sized manifest, validates it and prints per-style
//! counts. Pass a path to write the manifest out as well.

use stylevar::dataset::{parse_manifest, save_manifest, style_stats};
use stylevar::synthetic::benchmark_manifest;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = benchmark_manifest();
    for (style, count) in style_stats(&manifest) {
        println!("{:<18} {count:>5}", style.label());
    }
    println!("{:<18} {:>5}", "total", manifest.len());

    // a declared count that disagrees with the records is rejected
    let mut text = stylevar::dataset::manifest_to_string(&manifest);
    text = text.replacen("\"anime\": 1072", "\"anime\": 1000", 1);
    match parse_manifest(&text) {
        Err(e) => println!("tampered manifest rejected: {e}"),
        Ok(_) => println!("tampered manifest unexpectedly accepted"),
    }

    if let Some(path) = std::env::args().nth(1) {
        save_manifest(&manifest, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
