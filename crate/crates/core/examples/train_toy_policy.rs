//! Trains the toy yes/no policy on 50 questions of random familiarity and
//! prints where it learned to answer versus abstain.
//!
//! ```bash
//! cargo run -p skill-rag --example train_toy_policy
//! ```

use skill_rag::grpo::{train_toy_policy, GrpoConfig, ToyUniverse};

fn main() -> skill_rag::Result<()> {
    let universe = ToyUniverse::uniform(50, 2024);
    let config = GrpoConfig::default();
    let result = train_toy_policy(&universe, &config)?;

    let mut rows: Vec<(f64, f64)> = universe
        .questions
        .iter()
        .enumerate()
        .map(|(j, q)| (q.familiarity, result.policy.prob_yes(j)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));

    println!("familiarity  P(yes)  choice");
    for (f, p) in &rows {
        println!("{f:>11.3}  {p:>6.3}  {}", if *p > 0.5 { "answer" } else { "abstain" });
    }

    let first = &result.trace[0];
    let last = result.trace.last().expect("at least one iteration");
    println!(
        "\nmean reward {:.3} -> {:.3} over {} iterations",
        first.mean_reward,
        last.mean_reward,
        result.trace.len()
    );
    println!("expected crossover f* = {:.3}", ToyUniverse::crossover());
    Ok(())
}
