//! Parsing of self-knowledge responses and the acc_rate-shaped reward.

use serde::{Deserialize, Serialize};

use crate::probe::match_answer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    YesCorrect,
    YesIncorrect,
    No,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub category: Category,
    /// Present exactly for the two `Yes` categories.
    pub extracted_answer: Option<String>,
}

const YES_PHRASE: &str = "yes, i know";
const NO_PHRASES: [&str; 3] = ["no, i don't know", "no, i dont know", "no, i don\u{2019}t know"];

/// Returns the text following a leading `phrase`, compared ASCII
/// case-insensitively.
fn strip_phrase<'a>(text: &'a str, phrase: &str) -> Option<&'a str> {
    let head = text.get(..phrase.len())?;
    head.eq_ignore_ascii_case(phrase).then(|| &text[phrase.len()..])
}

/// True when `text` is an explicit "No, I don't know" abstention.
pub fn is_abstention(text: &str) -> bool {
    let t = text.trim_start();
    NO_PHRASES.iter().any(|p| strip_phrase(t, p).is_some())
}

/// Everything after the first `,` or `.` that follows the acknowledgement,
/// trimmed. Without a delimiter the whole remainder is the answer.
fn extract_answer(rest: &str) -> String {
    match rest.find([',', '.']) {
        Some(i) => rest[i + 1..].trim().to_string(),
        None => rest.trim().to_string(),
    }
}

/// Classifies a response to the self-knowledge prompt. The `Yes` branch is
/// scored with [`match_answer`] against `golds`.
pub fn parse_response(text: &str, golds: &[String]) -> ParsedResponse {
    let t = text.trim_start();
    if let Some(rest) = strip_phrase(t, YES_PHRASE) {
        let answer = extract_answer(rest);
        let category = if match_answer(&answer, golds) {
            Category::YesCorrect
        } else {
            Category::YesIncorrect
        };
        return ParsedResponse {
            category,
            extracted_answer: Some(answer),
        };
    }
    let category = if is_abstention(t) {
        Category::No
    } else {
        Category::Malformed
    };
    ParsedResponse {
        category,
        extracted_answer: None,
    }
}

/// Reward for a response category given the question's acc_rate:
/// `2a - 1` for a correct claim of knowledge, `1 - 2a` for abstaining, and
/// `-1` for a wrong claim or an off-format response.
pub fn reward(category: Category, acc_rate: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&acc_rate), "acc_rate {acc_rate}");
    match category {
        Category::YesCorrect => 2.0 * acc_rate - 1.0,
        Category::No => 1.0 - 2.0 * acc_rate,
        Category::YesIncorrect | Category::Malformed => -1.0,
    }
}
