//! Group-relative advantages, the clipped surrogate objective, and a toy
//! trainer that checks the self-knowledge reward end to end.
//!
//! The advantage chain for one group of `K` rollouts is
//!
//! ```text
//! norm_i  = (r_i - mean) / std                      (population std)
//! rank_i  = (rank(r_i) - (K + 1) / 2) / (K / 2)     (average rank on ties)
//! grpo_i  = lambda * norm_i + (1 - lambda) * rank_i
//! skill_i = w_i * grpo_i,  w_i ∝ exp(-beta * z_i),  mean(w) = 1
//! ```
//!
//! where `z_i` is the group-standardized entropy of rollout `i`. The
//! trainer ascends `mean_i min(rho_i * A_i, clip(rho_i, 1-eps, 1+eps) * A_i)`
//! with `rho_i` the new-to-old probability ratio. There is no KL term and
//! no value model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{reward, Category, ParsedResponse};

fn check_group(len: usize) -> Result<()> {
    if len < 2 {
        Err(Error::GroupTooSmall(len))
    } else {
        Ok(())
    }
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left: a, right: b })
    }
}

fn all_equal(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64], mu: f64) -> f64 {
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Z-scores within the group. A group with identical rewards carries no
/// preference signal and maps to all zeros.
pub fn normalized_advantage(rewards: &[f64]) -> Result<Vec<f64>> {
    check_group(rewards.len())?;
    if all_equal(rewards) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let mu = mean(rewards);
    let sigma = population_std(rewards, mu);
    Ok(rewards.iter().map(|r| (r - mu) / sigma).collect())
}

/// Ascending 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks[i] = avg;
        }
        start = end + 1;
    }
    ranks
}

pub fn rank_advantage(rewards: &[f64]) -> Result<Vec<f64>> {
    check_group(rewards.len())?;
    let k = rewards.len() as f64;
    let center = (k + 1.0) / 2.0;
    Ok(average_ranks(rewards)
        .into_iter()
        .map(|r| (r - center) / (k / 2.0))
        .collect())
}

pub fn blend_advantage(a_norm: &[f64], a_rank: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_same_len(a_norm.len(), a_rank.len())?;
    if lambda == 1.0 {
        return Ok(a_norm.to_vec());
    }
    if lambda == 0.0 {
        return Ok(a_rank.to_vec());
    }
    Ok(a_norm
        .iter()
        .zip(a_rank)
        .map(|(n, r)| lambda * n + (1.0 - lambda) * r)
        .collect())
}

/// Per-rollout weights `exp(-beta * z_i)` rescaled to mean 1, where `z_i` is
/// the standardized entropy. Uncertain rollouts get weights below 1.
pub fn entropy_weights(entropies: &[f64], beta: f64) -> Vec<f64> {
    if entropies.is_empty() {
        return Vec::new();
    }
    if beta == 0.0 || all_equal(entropies) {
        return vec![1.0; entropies.len()];
    }
    let mu = mean(entropies);
    let sd = population_std(entropies, mu);
    let raw: Vec<f64> = entropies.iter().map(|h| (-beta * (h - mu) / sd).exp()).collect();
    let m = mean(&raw);
    raw.into_iter().map(|w| w / m).collect()
}

pub fn entropy_weight(a_grpo: &[f64], entropies: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_same_len(a_grpo.len(), entropies.len())?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    Ok(entropy_weights(entropies, beta)
        .into_iter()
        .zip(a_grpo)
        .map(|(w, a)| w * a)
        .collect())
}

pub fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// `mean_i min(rho_i * A_i, clip(rho_i, 1-eps, 1+eps) * A_i)`.
pub fn surrogate_objective(ratios: &[f64], advantages: &[f64], epsilon: f64) -> Result<f64> {
    check_same_len(ratios.len(), advantages.len())?;
    if ratios.is_empty() {
        return Err(Error::GroupTooSmall(0));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    let mut total = 0.0;
    for (i, (&rho, &a)) in ratios.iter().zip(advantages).enumerate() {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::NonFiniteRatio(i));
        }
        total += (rho * a).min(clip(rho, 1.0 - epsilon, 1.0 + epsilon) * a);
    }
    Ok(total / ratios.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    /// Weight of the z-scored advantage against the rank advantage.
    pub lambda: f64,
    pub epsilon_clip: f64,
    pub beta_entropy: f64,
    pub group_size: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    /// Gradient steps on each group's surrogate per iteration.
    pub update_epochs: usize,
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            lambda: 0.5,
            epsilon_clip: 0.2,
            beta_entropy: 0.5,
            group_size: 8,
            learning_rate: 0.5,
            iterations: 500,
            update_epochs: 4,
            seed: 0,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid("lambda", format!("must be in [0, 1], got {}", self.lambda)));
        }
        if !(self.epsilon_clip > 0.0 && self.epsilon_clip.is_finite()) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if !(self.beta_entropy >= 0.0 && self.beta_entropy.is_finite()) {
            return Err(Error::invalid("beta", "must be finite and >= 0"));
        }
        if self.group_size < 2 {
            return Err(Error::invalid("group_size", "must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if self.update_epochs == 0 {
            return Err(Error::invalid("update_epochs", "must be at least 1"));
        }
        Ok(())
    }
}

/// `K` rollouts for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub question_id: String,
    pub responses: Vec<ParsedResponse>,
    pub rewards: Vec<f64>,
    pub logprob_old: Vec<f64>,
    pub entropies: Vec<f64>,
}

impl RolloutGroup {
    pub fn validate(&self) -> Result<()> {
        let k = self.rewards.len();
        check_group(k)?;
        check_same_len(k, self.responses.len())?;
        check_same_len(k, self.logprob_old.len())?;
        check_same_len(k, self.entropies.len())?;
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("rewards", "must be finite"));
        }
        Ok(())
    }

    /// The full advantage chain: normalize, rank, blend, entropy-weight.
    pub fn advantages(&self, config: &GrpoConfig) -> Result<Vec<f64>> {
        self.validate()?;
        skill_advantages(&self.rewards, &self.entropies, config)
    }
}

pub fn skill_advantages(rewards: &[f64], entropies: &[f64], config: &GrpoConfig) -> Result<Vec<f64>> {
    let norm = normalized_advantage(rewards)?;
    let rank = rank_advantage(rewards)?;
    let blended = blend_advantage(&norm, &rank, config.lambda)?;
    entropy_weight(&blended, entropies, config.beta_entropy)
}

// ---------------------------------------------------------------------------
// toy policy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyQuestion {
    pub id: String,
    pub familiarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyUniverse {
    pub questions: Vec<ToyQuestion>,
}

impl ToyUniverse {
    pub fn new(questions: Vec<ToyQuestion>) -> Result<Self> {
        if let Some(q) = questions.iter().find(|q| !(0.0..=1.0).contains(&q.familiarity)) {
            return Err(Error::invalid(
                "familiarity",
                format!("{} has familiarity {} outside [0, 1]", q.id, q.familiarity),
            ));
        }
        Ok(ToyUniverse { questions })
    }

    /// `n` questions with familiarity drawn uniformly from `[0, 1]`.
    pub fn uniform(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ToyUniverse {
            questions: (0..n)
                .map(|i| ToyQuestion {
                    id: format!("toy-{i}"),
                    familiarity: rng.gen_range(0.0..=1.0),
                })
                .collect(),
        }
    }

    /// Familiarity at which answering beats abstaining in expectation:
    /// `2f^2 - 1 = 1 - 2f`.
    pub fn crossover() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// One logit per question; `P(yes | j) = logistic(logits[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub logits: Vec<f64>,
}

impl ToyPolicy {
    pub fn new(n: usize) -> Self {
        ToyPolicy { logits: vec![0.0; n] }
    }

    pub fn prob_yes(&self, j: usize) -> f64 {
        logistic(self.logits[j])
    }
}

fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

/// Log-probability of an action under logit `theta`.
pub fn action_logprob(theta: f64, yes: bool) -> f64 {
    // log sigmoid(x) = -softplus(-x)
    let x = if yes { theta } else { -theta };
    -softplus(-x)
}

fn action_score(theta: f64, yes: bool) -> f64 {
    // d/dθ log π(a)
    if yes {
        1.0 - logistic(theta)
    } else {
        -logistic(theta)
    }
}

/// Clipped surrogate of one group as a function of the current logit.
pub fn toy_surrogate(theta: f64, theta_old: f64, actions: &[bool], advantages: &[f64], epsilon: f64) -> f64 {
    let total: f64 = actions
        .iter()
        .zip(advantages)
        .map(|(&yes, &a)| {
            let rho = (action_logprob(theta, yes) - action_logprob(theta_old, yes)).exp();
            (rho * a).min(clip(rho, 1.0 - epsilon, 1.0 + epsilon) * a)
        })
        .sum();
    total / actions.len() as f64
}

/// Analytic derivative of [`toy_surrogate`] with respect to `theta`.
/// Terms where the clipped branch is selected outside the trust region
/// contribute nothing.
pub fn toy_surrogate_grad(theta: f64, theta_old: f64, actions: &[bool], advantages: &[f64], epsilon: f64) -> f64 {
    let total: f64 = actions
        .iter()
        .zip(advantages)
        .map(|(&yes, &a)| {
            let rho = (action_logprob(theta, yes) - action_logprob(theta_old, yes)).exp();
            let clipped_binds = (a > 0.0 && rho > 1.0 + epsilon) || (a < 0.0 && rho < 1.0 - epsilon);
            if clipped_binds {
                0.0
            } else {
                a * rho * action_score(theta, yes)
            }
        })
        .sum();
    total / actions.len() as f64
}

/// Smallest distance from any ratio to a clip boundary; gradients are not
/// defined where this is zero.
pub fn toy_kink_distance(theta: f64, theta_old: f64, actions: &[bool], epsilon: f64) -> f64 {
    actions
        .iter()
        .map(|&yes| {
            let rho = (action_logprob(theta, yes) - action_logprob(theta_old, yes)).exp();
            (rho - (1.0 + epsilon)).abs().min((rho - (1.0 - epsilon)).abs())
        })
        .fold(f64::INFINITY, f64::min)
}

pub const FAMILIARITY_BUCKETS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_abs_advantage: f64,
    /// Mean `P(yes)` per familiarity bucket of width 0.1; `None` for empty
    /// buckets.
    pub bucket_yes_rate: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainingResult {
    pub policy: ToyPolicy,
    pub trace: Vec<TraceRow>,
}

impl ToyTrainingResult {
    /// Tab-separated trace with a header row.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::from("iteration\tmean_reward\tmean_abs_advantage");
        for b in 0..FAMILIARITY_BUCKETS {
            out.push_str(&format!(
                "\tyes_rate_{:.1}_{:.1}",
                b as f64 / 10.0,
                (b + 1) as f64 / 10.0
            ));
        }
        out.push('\n');
        for row in &self.trace {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}",
                row.iteration, row.mean_reward, row.mean_abs_advantage
            ));
            for r in &row.bucket_yes_rate {
                match r {
                    Some(v) => out.push_str(&format!("\t{v:.6}")),
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn bucket_of(f: f64) -> usize {
    ((f * FAMILIARITY_BUCKETS as f64) as usize).min(FAMILIARITY_BUCKETS - 1)
}

fn bucket_rates(universe: &ToyUniverse, policy: &ToyPolicy) -> Vec<Option<f64>> {
    let mut sums = [0.0; FAMILIARITY_BUCKETS];
    let mut counts = [0usize; FAMILIARITY_BUCKETS];
    for (j, q) in universe.questions.iter().enumerate() {
        let b = bucket_of(q.familiarity);
        sums[b] += policy.prob_yes(j);
        counts[b] += 1;
    }
    sums.iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect()
}

fn toy_response(category: Category) -> ParsedResponse {
    ParsedResponse {
        category,
        extracted_answer: matches!(category, Category::YesCorrect | Category::YesIncorrect)
            .then(String::new),
    }
}

/// Trains a per-question yes/no policy with the full advantage chain.
///
/// Each iteration samples `K` actions per question from the current policy.
/// Answering is correct with probability equal to the question's familiarity,
/// and the reward uses that familiarity as `acc_rate`. Rollout entropy is the
/// binary entropy of the sampling distribution.
pub fn train_toy_policy(universe: &ToyUniverse, config: &GrpoConfig) -> Result<ToyTrainingResult> {
    config.validate()?;
    if universe.questions.is_empty() {
        return Err(Error::invalid("universe", "must contain at least one question"));
    }
    let k = config.group_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = ToyPolicy::new(universe.questions.len());
    let mut trace = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let mut reward_sum = 0.0;
        let mut adv_abs_sum = 0.0;
        for (j, q) in universe.questions.iter().enumerate() {
            let theta_old = policy.logits[j];
            let p_yes = logistic(theta_old);
            let h = binary_entropy(p_yes);

            let mut actions = Vec::with_capacity(k);
            let mut responses = Vec::with_capacity(k);
            for _ in 0..k {
                let yes = rng.gen::<f64>() < p_yes;
                let category = if !yes {
                    Category::No
                } else if rng.gen::<f64>() < q.familiarity {
                    Category::YesCorrect
                } else {
                    Category::YesIncorrect
                };
                actions.push(yes);
                responses.push(toy_response(category));
            }
            let group = RolloutGroup {
                question_id: q.id.clone(),
                rewards: responses.iter().map(|r| reward(r.category, q.familiarity)).collect(),
                logprob_old: actions.iter().map(|&a| action_logprob(theta_old, a)).collect(),
                entropies: vec![h; k],
                responses,
            };
            let adv = group.advantages(config)?;
            reward_sum += group.rewards.iter().sum::<f64>();
            adv_abs_sum += adv.iter().map(|a| a.abs()).sum::<f64>();

            let mut theta = theta_old;
            for _ in 0..config.update_epochs {
                theta += config.learning_rate
                    * toy_surrogate_grad(theta, theta_old, &actions, &adv, config.epsilon_clip);
            }
            policy.logits[j] = theta;
        }
        let n = (universe.questions.len() * k) as f64;
        trace.push(TraceRow {
            iteration,
            mean_reward: reward_sum / n,
            mean_abs_advantage: adv_abs_sum / n,
            bucket_yes_rate: bucket_rates(universe, &policy),
        });
    }
    Ok(ToyTrainingResult { policy, trace })
}
