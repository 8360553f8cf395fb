//! Runs the batch pipeline with the random annotator and writes the bundle.
//!
//! cargo run -p wugkit --example pipeline -- out/

use wugkit::pipeline::{run_pipeline, AnnotatorChoice, PipelineConfig};

const ARM: &[u8] = include_bytes!("../fixtures/arm_uses.csv");

fn main() {
    let mut config = PipelineConfig::new(2024);
    config.annotator = Some(AnnotatorChoice::Random);
    let bundle = match run_pipeline(ARM, None, &config) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    };
    for (name, bytes) in &bundle.files {
        println!("{name:32} {:>6} bytes", bytes.len());
    }
    print!("\n{}", String::from_utf8_lossy(bundle.get("arm/clusters.csv").unwrap()));
    if let Some(dir) = std::env::args().nth(1) {
        bundle.write_to(dir.as_ref()).expect("write bundle");
    }
}
