//! Ranking a small corpus with the built-in TF-IDF cosine retriever.
//!
//! ```bash
//! cargo run -p skill-rag --example retrieval
//! ```

use skill_rag::retrieval::{CorpusDoc, Retriever, TfIdfIndex};

fn main() -> skill_rag::Result<()> {
    let doc = |id: &str, text: &str| CorpusDoc { doc_id: id.into(), title: String::new(), text: text.into() };
    let index = TfIdfIndex::from_docs(vec![
        doc("d1", "Canberra is the capital city of Australia."),
        doc("d2", "Sydney is the largest city in Australia."),
        doc("d3", "The capital of Austria is Vienna."),
        doc("d4", "Kangaroos are native to Australia."),
        doc("d5", "Rust is a systems programming language."),
    ])?;
    let summary = index.summary();
    println!("{} documents, {} terms", summary.doc_count, summary.term_count);

    for question in ["What is the capital of Australia?", "largest city", "quantum physics"] {
        println!("\n{question}");
        let hits = index.retrieve(question, 3)?;
        if hits.is_empty() {
            println!("  (no document shares a term)");
        }
        for h in hits {
            println!("  {:.4}  {}  {}", h.score, h.doc.doc_id, h.doc.text);
        }
    }
    Ok(())
}
