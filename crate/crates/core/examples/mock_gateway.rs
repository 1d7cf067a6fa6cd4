//! Scripting the deterministic mock backend: sampling, greedy decoding,
//! prefix probabilities and the entropy surrogate.
//!
//! ```bash
//! cargo run -p skill-rag --example mock_gateway
//! ```

use skill_rag::gateway::{response_entropy, GenParams, LanguageModel, MockBackend, MockScript, Prompt};

fn main() -> skill_rag::Result<()> {
    let question = "Q: heads or tails?";
    let script = MockScript::new()
        .with_completions(question, [("heads", 0.5), ("tails", 0.5)])?
        .with_prefix_prob(question, "he", 0.5)?;
    let model = MockBackend::new(script);
    let prompt = Prompt::new(question)?;

    let draws = model.generate(&prompt, &GenParams::sampling(10, Some(7)))?;
    let texts: Vec<&str> = draws.iter().map(|c| c.text.as_str()).collect();
    println!("seed 7, 10 draws: {texts:?}");

    let again = model.generate(&prompt, &GenParams::sampling(10, Some(7)))?;
    assert_eq!(draws, again);
    println!("same seed reproduces the draws exactly");

    let greedy = model.generate(&prompt, &GenParams::greedy())?;
    println!("greedy: {}", greedy[0].text);

    println!("P(prefix \"he\") = {}", model.prefix_probability(&prompt, "he")?);
    println!("entropy surrogate of one draw = {:.4} nats", response_entropy(&draws[0])?);

    match model.generate(&Prompt::new("unscripted")?, &GenParams::greedy()) {
        Err(e) => println!("unscripted prompt: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
