//! Builds self-knowledge records: ten sampled answers per question, scored
//! against the gold answers, labelled Known when acc_rate exceeds 0.8.
//!
//! ```bash
//! cargo run -p skill-rag --example probe_self_knowledge
//! ```

use skill_rag::gateway::{MockBackend, MockScript};
use skill_rag::probe::{Prober, QaItem};
use skill_rag::templates::Templates;

fn main() -> skill_rag::Result<()> {
    let t = Templates::default();
    let items = vec![
        QaItem::new("q1", "What is the capital of France?", &["Paris"]),
        QaItem::new("q2", "Who painted the Mona Lisa?", &["Leonardo da Vinci", "Leonardo"]),
        QaItem::new("q3", "What is the capital of Australia?", &["Canberra"]),
    ];
    let script = MockScript::new()
        .with_answer(&t.answer_prompt(&items[0].question), "Paris")?
        .with_completions(
            &t.answer_prompt(&items[1].question),
            [("Leonardo da Vinci", 0.85), ("Michelangelo", 0.15)],
        )?
        .with_completions(&t.answer_prompt(&items[2].question), [("Sydney", 0.6), ("Canberra", 0.4)])?;
    let model = MockBackend::new(script);

    let prober = Prober::new(&model).samples(10)?.threshold(0.8)?.seed(42);
    for item in &items {
        let rec = prober.probe_question(item)?;
        let correct = rec.samples.iter().filter(|s| s.correct).count();
        println!(
            "{:<4} {:>2}/{} correct  acc_rate={:.1}  {:?}",
            rec.question_id,
            correct,
            rec.samples.len(),
            rec.acc_rate,
            rec.label
        );
    }
    Ok(())
}
