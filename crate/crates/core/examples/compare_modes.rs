//! Runs the scripted four-question demo through all three answering modes
//! and prints the comparison table. Output files go to a temporary
//! directory unless a path is given.
//!
//! ```bash
//! cargo run -p skill-rag --example compare_modes [-- OUT_DIR]
//! ```

use std::path::PathBuf;

use skill_rag::eval::{reports_tsv, Evaluator};
use skill_rag::pipeline::{Pipeline, PipelineConfig};
use skill_rag::scenario;

fn main() -> skill_rag::Result<()> {
    let world = scenario::demo()?;
    let tmp = tempfile::tempdir()?;
    let out_dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());

    world.write_files(&out_dir)?;
    let model = world.backend();
    let index = world.index()?;
    let pipeline = Pipeline::new(&model, &index, PipelineConfig { k: world.k, ..PipelineConfig::default() })?;
    let reports = Evaluator::new(&pipeline).compare_modes(&out_dir.join("qa.jsonl"), &out_dir)?;

    print!("{}", reports_tsv(&reports));
    println!("\nfiles written to {}", out_dir.display());
    Ok(())
}
