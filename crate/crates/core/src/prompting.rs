//! Question-generation model input.
//!
//! Layout: `Answer: {answer}, {rationale} Context: {window} [SEP] {history}`.
//! The ` [SEP] {history}` tail is dropped when there is no history.

use crate::error::{Error, Result};
use crate::relevance::turn_text;

pub const SEP: &str = "[SEP]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub answer: String,
    pub rationale: String,
    pub window: Vec<String>,
    pub history: Vec<(String, String)>,
}

/// History turns oldest first, each as `"q a"`, joined by single spaces.
pub fn serialize_history(turns: &[(String, String)]) -> String {
    turns.iter().map(|(q, a)| turn_text(q, a)).collect::<Vec<_>>().join(" ")
}

pub fn assemble_prompt(spec: &PromptSpec) -> Result<String> {
    if spec.window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if spec.answer.trim().is_empty() {
        return Err(Error::EmptyInput("answer"));
    }
    let mut out = format!("Answer: {}, {} Context: {}", spec.answer, spec.rationale, spec.window.join(" "));
    if !spec.history.is_empty() {
        out.push(' ');
        out.push_str(SEP);
        out.push(' ');
        out.push_str(&serialize_history(&spec.history));
    }
    Ok(out)
}
