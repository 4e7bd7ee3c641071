//! Regenerates the bundled demo dataset: `cargo run --example make_demo -- data/demo`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use epimine::corpus::write_annotations;
use epimine::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/demo".into()));
    std::fs::create_dir_all(&dir)?;
    let data = generate(&SynthConfig::default())?;
    data.corpus.write_jsonl(BufWriter::new(File::create(dir.join("corpus.jsonl"))?))?;
    write_annotations(&data.annotations, File::create(dir.join("annotations.csv"))?)?;
    data.write_ratings_csv(File::create(dir.join("ratings.csv"))?)?;
    println!(
        "wrote {} tweets, {} annotations, {} rated items to {}",
        data.corpus.len(),
        data.annotations.len(),
        data.ratings.items(),
        dir.display()
    );
    Ok(())
}
