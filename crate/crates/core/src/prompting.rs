//! Prompt construction and answer extraction for the fixed-prompt,
//! single-letter scoring protocol.
//!
//! The exact token rules below are part of the protocol: validity rates are
//! only reproducible if extraction is bit-specified, so any change here is a
//! protocol change.

use serde::{Deserialize, Serialize};

use crate::corpus::Item;
use crate::error::{AuditError, Result};
use crate::scoring::ScoreRecord;

/// Default instruction shipped with the harness. Runs are only comparable
/// when they share this string, so it is also printed in the README.
pub const DEFAULT_INSTRUCTION: &str =
    "Answer with a single letter: A, B, C, or D. Do not explain.";

/// Label separators recognized when stripping a leading choice label.
/// Includes the full-width forms used in Chinese-language choices.
const LABEL_SEPARATORS: [char; 5] = ['.', ')', '、', ':', '：'];

/// Configuration of the prompt builder and parser.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptConfig {
    pub instruction_text: String,
    pub letter_set: Vec<char>,
    pub strip_leading_labels: bool,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            instruction_text: DEFAULT_INSTRUCTION.to_string(),
            letter_set: vec!['A', 'B', 'C', 'D'],
            strip_leading_labels: true,
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.letter_set.len() != 4 {
            return Err(AuditError::Config(format!(
                "letter_set must have 4 letters, found {}",
                self.letter_set.len()
            )));
        }
        Ok(())
    }
}

/// Remove at most one leading label of the form `[optional whitespace]
/// [letter A-D] [separator] [optional whitespace]`. Exactly one strip: the
/// duplicated-label defect carried a single spurious label, and repeated
/// stripping could delete real content such as "A. A is correct".
pub fn strip_leading_label(choice: &str) -> &str {
    let trimmed = choice.trim_start();
    let mut chars = trimmed.chars();
    let Some(letter) = chars.next() else {
        return choice;
    };
    if !('A'..='D').contains(&letter) {
        return choice;
    }
    let Some(sep) = chars.next() else {
        return choice;
    };
    if !LABEL_SEPARATORS.contains(&sep) {
        return choice;
    }
    chars.as_str().trim_start()
}

/// Deterministic prompt layout: question, blank line, one `X. choice` line
/// per option, blank line, instruction. The same builder serves every
/// condition; label stripping only rewrites choices that carry a label.
///
/// With stripping enabled the builder strips to fixpoint, so no emitted
/// option line ever carries a duplicated label, even when a choice arrives
/// with stacked labels. Prose like "A is correct" survives because a label
/// requires a separator character after the letter.
pub fn build_prompt(item: &Item, config: &PromptConfig) -> String {
    let mut out = String::new();
    out.push_str(&item.question);
    out.push_str("\n\n");
    for (letter, choice) in config.letter_set.iter().zip(&item.choices) {
        let text = if config.strip_leading_labels {
            let mut text = strip_leading_label(choice);
            loop {
                let next = strip_leading_label(text);
                if next.len() == text.len() {
                    break;
                }
                text = next;
            }
            text
        } else {
            choice.as_str()
        };
        out.push(*letter);
        out.push_str(". ");
        out.push_str(text);
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&config.instruction_text);
    out
}

/// Extract the first answer letter from a raw response.
///
/// Scans whitespace tokens left to right and accepts the closed set of
/// presentations `X`, `X.`, `(X)`, `X)`, `**X**` (case-folded), returning
/// the first token that reduces to a letter in the set. `Answer: X` is
/// covered by the bare-token form. No match is reported as absent.
pub fn parse_answer(raw: &str, letter_set: &[char]) -> Option<char> {
    raw.split_whitespace()
        .find_map(|token| token_letter(token, letter_set))
}

fn token_letter(token: &str, letter_set: &[char]) -> Option<char> {
    let core = if let Some(inner) = token
        .strip_prefix("**")
        .and_then(|t| t.strip_suffix("**"))
    {
        inner
    } else if let Some(inner) = token.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
        inner
    } else if let Some(inner) = token.strip_suffix(')') {
        inner
    } else if let Some(inner) = token.strip_suffix('.') {
        inner
    } else {
        token
    };
    let mut chars = core.chars();
    let ch = chars.next()?;
    if chars.next().is_some() {
        return None;
    }
    let upper = ch.to_ascii_uppercase();
    letter_set.contains(&upper).then_some(upper)
}

/// Fraction of records whose response yielded a parsable letter.
pub fn validity_rate(records: &[ScoreRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(AuditError::EmptyInput(
            "validity_rate needs at least one record".to_string(),
        ));
    }
    let parsed = records.iter().filter(|r| r.parsed.is_some()).count();
    Ok(parsed as f64 / records.len() as f64)
}
