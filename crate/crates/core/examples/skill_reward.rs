//! Parses self-knowledge responses, assigns rewards from acc_rate, and runs
//! one group through the advantage chain and the clipped objective.
//!
//! ```bash
//! cargo run -p skill-rag --example skill_reward
//! ```

use skill_rag::grpo::{
    blend_advantage, entropy_weight, normalized_advantage, rank_advantage, surrogate_objective,
};
use skill_rag::reward::{parse_response, reward};

fn main() -> skill_rag::Result<()> {
    let golds = vec!["Canberra".to_string()];
    let acc_rate = 0.7;
    let responses = [
        "Yes, I know. Canberra",
        "Yes, I know. Sydney",
        "No, I don't know",
        "Yes, I know, Canberra.",
        "I think it is Canberra",
    ];

    let mut rewards = Vec::new();
    for text in responses {
        let parsed = parse_response(text, &golds);
        let r = reward(parsed.category, acc_rate);
        println!("{text:<26} -> {:?} reward {r:+.2}", parsed.category);
        rewards.push(r);
    }

    let norm = normalized_advantage(&rewards)?;
    let rank = rank_advantage(&rewards)?;
    let blended = blend_advantage(&norm, &rank, 0.5)?;
    let entropies = [0.2, 1.5, 0.4, 0.3, 2.0];
    let weighted = entropy_weight(&blended, &entropies, 0.5)?;
    println!("\n{:>8} {:>8} {:>8} {:>8}", "norm", "rank", "blend", "weighted");
    for i in 0..rewards.len() {
        println!("{:>8.3} {:>8.3} {:>8.3} {:>8.3}", norm[i], rank[i], blended[i], weighted[i]);
    }

    let ratios = [1.3, 0.9, 1.0, 1.1, 0.7];
    println!(
        "\nclipped objective at ratios {ratios:?}: {:.4}",
        surrogate_objective(&ratios, &weighted, 0.2)?
    );
    Ok(())
}
