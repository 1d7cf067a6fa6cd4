//! Sentence filtering by confidence gain on the gold-segment scenario: the
//! gold sentence raises P("Yes") from 0.2 to 0.6, the distractors do not.
//!
//! ```bash
//! cargo run -p skill-rag --example pmi_filter
//! ```

use skill_rag::filter::{filter_documents, FilterConfig};
use skill_rag::retrieval::Retriever;
use skill_rag::scenario;
use skill_rag::templates::Templates;

fn main() -> skill_rag::Result<()> {
    let world = scenario::gold_segment()?;
    let model = world.backend();
    let index = world.index()?;
    let item = &world.items[0];

    let docs: Vec<(String, String)> = index
        .retrieve(&item.question, world.k)?
        .into_iter()
        .map(|h| (h.doc.doc_id, h.doc.text))
        .collect();
    let out = filter_documents(&model, &Templates::default(), &item.question, &docs, &FilterConfig::default())?;

    println!("question: {}", item.question);
    println!("P(Yes | question) = {:.2}", out.p_base);
    for seg in out.retained.iter().map(|s| (s, "keep")).chain(out.dropped.iter().map(|s| (s, "drop"))) {
        println!("  [{}] {}#{} pmi={:+.4}  {}", seg.1, seg.0.doc_id, seg.0.index, seg.0.pmi.unwrap_or(f64::NAN), seg.0.text);
    }
    Ok(())
}
