//! Writes the scripted demo world (QA items, corpus, mock script) as line
//! files for use with the `skillrag` binary.
//!
//! ```bash
//! cargo run -p skill-rag --example write_fixtures -- crates/core/fixtures
//! ```

use std::path::PathBuf;

use skill_rag::scenario;

fn main() -> skill_rag::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures"));
    scenario::demo()?.write_files(&dir)?;
    println!("wrote qa.jsonl, corpus.jsonl, script.jsonl to {}", dir.display());
    Ok(())
}
