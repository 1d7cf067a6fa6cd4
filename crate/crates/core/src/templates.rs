//! Prompt templates. `{question}` and `{context}` are substituted verbatim.

use serde::{Deserialize, Serialize};

/// Question-only answer elicitation.
pub const ANSWER_TEMPLATE: &str =
    "Answer the following question as briefly as possible.\nQuestion: {question}\nAnswer:";

/// Answer elicitation with a retrieved context block.
pub const ANSWER_WITH_CONTEXT_TEMPLATE: &str = "Context: {context}\nAnswer the following question as briefly as possible.\nQuestion: {question}\nAnswer:";

/// Self-knowledge elicitation prompt.
pub const SKILL_TEMPLATE: &str = "Do you know the answer to this question? If you know, please answer \"Yes, I know\" and then provide the shortest possible answer to the question. If you don't know, please answer \"No, I don't know\".\nQuestion: {question}\nAnswer:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub answer: String,
    pub answer_with_context: String,
    pub skill: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            answer: ANSWER_TEMPLATE.into(),
            answer_with_context: ANSWER_WITH_CONTEXT_TEMPLATE.into(),
            skill: SKILL_TEMPLATE.into(),
        }
    }
}

impl Templates {
    pub fn answer_prompt(&self, question: &str) -> String {
        self.answer.replace("{question}", question)
    }

    pub fn answer_with_context_prompt(&self, question: &str, context: &str) -> String {
        // context first so a `{question}` inside retrieved text is left alone
        let (head, tail) = split_at_placeholder(&self.answer_with_context, "{context}");
        match tail {
            Some(tail) => format!(
                "{}{}{}",
                head.replace("{question}", question),
                context,
                tail.replace("{question}", question)
            ),
            None => head.replace("{question}", question),
        }
    }

    /// The self-knowledge prompt, optionally with a `Context: ...` line placed
    /// directly before the `Question:` line.
    pub fn skill_prompt(&self, question: &str, context: Option<&str>) -> String {
        let base = &self.skill;
        let Some(ctx) = context else {
            return base.replace("{question}", question);
        };
        let pos = base.find("Question:").unwrap_or(0);
        format!(
            "{}Context: {}\n{}",
            base[..pos].replace("{question}", question),
            ctx,
            base[pos..].replace("{question}", question)
        )
    }
}

fn split_at_placeholder<'a>(s: &'a str, placeholder: &str) -> (&'a str, Option<&'a str>) {
    match s.find(placeholder) {
        Some(i) => (&s[..i], Some(&s[i + placeholder.len()..])),
        None => (s, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_prompt_is_bit_exact() {
        assert_eq!(
            Templates::default().answer_prompt("Who?"),
            "Answer the following question as briefly as possible.\nQuestion: Who?\nAnswer:"
        );
    }

    #[test]
    fn context_line_precedes_question() {
        let t = Templates::default();
        let plain = t.skill_prompt("Q?", None);
        let with = t.skill_prompt("Q?", Some("Some fact."));
        assert!(plain.ends_with("\"No, I don't know\".\nQuestion: Q?\nAnswer:"));
        assert!(with.ends_with("\"No, I don't know\".\nContext: Some fact.\nQuestion: Q?\nAnswer:"));
        assert_eq!(with.replace("Context: Some fact.\n", ""), plain);
    }

    #[test]
    fn placeholders_inside_context_are_not_expanded() {
        let t = Templates::default();
        let p = t.answer_with_context_prompt("Q?", "literal {question}");
        assert!(p.starts_with("Context: literal {question}\nAnswer"));
        let s = t.skill_prompt("Q?", Some("x {question}"));
        assert!(s.contains("Context: x {question}\n"));
    }
}
