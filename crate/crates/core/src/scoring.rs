//! Model scoring: provider abstraction, response records, and strict-QC
//! pairing of original vs back-translated outcomes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Condition, Item};
use crate::error::{AuditError, Result};
use crate::prompting::{build_prompt, parse_answer, PromptConfig};

/// Model family grouping used for subgroup contrasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
    C,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Group::A => write!(f, "A"),
            Group::B => write!(f, "B"),
            Group::C => write!(f, "C"),
        }
    }
}

/// One (model, item, condition) response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub model: String,
    pub group: Group,
    pub item_id: String,
    pub condition: Condition,
    pub raw_response: String,
    pub parsed: Option<char>,
    pub correct: Option<bool>,
}

/// Decoding defaults are deterministic-intent: temperature 0 and a bounded
/// output budget (truncation shows up as parser failures, so the budget is
/// configurable).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: usize,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.0,
            max_tokens: 64,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct ProviderError {
    pub message: String,
}

impl ProviderError {
    pub fn new(message: impl Into<String>) -> Self {
        ProviderError {
            message: message.into(),
        }
    }
}

/// Everything a provider may need to answer one prompt. HTTP providers use
/// only the model, prompt, and decoding params; the mock keys on the item
/// identity.
#[derive(Debug, Clone)]
pub struct ScoreRequest<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub item_id: &'a str,
    pub condition: Condition,
    pub params: &'a DecodingParams,
}

pub trait ModelProvider: Sync {
    fn send(&self, request: &ScoreRequest<'_>) -> std::result::Result<String, ProviderError>;
}

/// Deterministic provider backed by a fixture mapping
/// (model, item_id, condition) to a canned response. Unknown keys yield an
/// empty response, which the parser records as a failure.
#[derive(Debug, Default, Clone)]
pub struct MockProvider {
    responses: BTreeMap<(String, String, Condition), String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MockEntry {
    pub model: String,
    pub item_id: String,
    pub condition: Condition,
    pub response: String,
}

impl MockProvider {
    pub fn from_entries(entries: impl IntoIterator<Item = MockEntry>) -> Self {
        let responses = entries
            .into_iter()
            .map(|e| ((e.model, e.item_id, e.condition), e.response))
            .collect();
        MockProvider { responses }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
        let mut entries = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: MockEntry =
                serde_json::from_str(line).map_err(|e| AuditError::MalformedLine {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }
}

impl ModelProvider for MockProvider {
    fn send(&self, request: &ScoreRequest<'_>) -> std::result::Result<String, ProviderError> {
        let key = (
            request.model.to_string(),
            request.item_id.to_string(),
            request.condition,
        );
        Ok(self.responses.get(&key).cloned().unwrap_or_default())
    }
}

/// OpenAI-style chat-completions provider. The bearer token comes from an
/// environment variable, never from config files.
pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>, api_key_env: &str) -> Self {
        HttpProvider {
            endpoint: endpoint.into(),
            api_key: std::env::var(api_key_env).ok(),
        }
    }
}

impl ModelProvider for HttpProvider {
    fn send(&self, request: &ScoreRequest<'_>) -> std::result::Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        });
        let mut builder = ureq::post(&self.endpoint).header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            builder = builder.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(&body)
            .map_err(|e| ProviderError::new(e.to_string()))?;
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::new(e.to_string()))?;
        Ok(value["choices"][0]["message"]["content"]
            .as_str()
            .unwrap_or_default()
            .to_string())
    }
}

/// Closure-backed provider for tests.
pub struct FnProvider<F>(pub F);

impl<F> ModelProvider for FnProvider<F>
where
    F: Fn(&ScoreRequest<'_>) -> std::result::Result<String, ProviderError> + Sync,
{
    fn send(&self, request: &ScoreRequest<'_>) -> std::result::Result<String, ProviderError> {
        (self.0)(request)
    }
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub retry_budget: usize,
    pub backoff_base: Duration,
    pub decoding: DecodingParams,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            retry_budget: 3,
            backoff_base: Duration::from_millis(100),
            decoding: DecodingParams::default(),
        }
    }
}

/// Score every item against one model. One record per item in item order.
/// Transport failure after the retry budget becomes an empty raw response
/// (a parser failure in the data), never a dropped item or an abort.
pub fn score_items(
    items: &[Item],
    model: &str,
    group: Group,
    provider: &dyn ModelProvider,
    config: &PromptConfig,
    options: &ScoreOptions,
) -> Result<Vec<ScoreRecord>> {
    config.validate()?;
    let records = items
        .par_iter()
        .map(|item| {
            let prompt = build_prompt(item, config);
            let request = ScoreRequest {
                model,
                prompt: &prompt,
                item_id: &item.id,
                condition: item.condition,
                params: &options.decoding,
            };
            let raw = send_with_retry(provider, &request, options);
            let parsed = parse_answer(&raw, &config.letter_set);
            let correct = parsed.map(|letter| {
                config
                    .letter_set
                    .iter()
                    .position(|&l| l == letter)
                    .map(|idx| idx == item.gold_index)
                    .unwrap_or(false)
            });
            ScoreRecord {
                model: model.to_string(),
                group,
                item_id: item.id.clone(),
                condition: item.condition,
                raw_response: raw,
                parsed,
                correct,
            }
        })
        .collect();
    Ok(records)
}

fn send_with_retry(
    provider: &dyn ModelProvider,
    request: &ScoreRequest<'_>,
    options: &ScoreOptions,
) -> String {
    let attempts = options.retry_budget.max(1);
    for attempt in 0..attempts {
        match provider.send(request) {
            Ok(text) => return text,
            Err(_) if attempt + 1 < attempts => {
                let backoff = options.backoff_base * 2u32.saturating_pow(attempt as u32);
                if !backoff.is_zero() {
                    std::thread::sleep(backoff);
                }
            }
            Err(_) => break,
        }
    }
    String::new()
}

pub fn save_records(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| AuditError::io(path, e))
}

pub fn load_records(path: &Path) -> Result<Vec<ScoreRecord>> {
    let content = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ScoreRecord =
            serde_json::from_str(line).map_err(|e| AuditError::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// One strict-QC paired outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pair {
    pub item_id: String,
    pub correct_en: bool,
    pub correct_back: bool,
}

/// Paired comparisons for one (model, benchmark) cell, restricted to items
/// that passed QC and parsed validly on both sides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedSet {
    pub model: String,
    pub benchmark: String,
    pub pairs: Vec<Pair>,
    pub n: usize,
}

/// `pair_strict` output: the paired set plus ids that were QC-passed but
/// covered by only one record set.
#[derive(Debug, Clone)]
pub struct StrictPairing {
    pub set: PairedSet,
    pub coverage_gaps: Vec<String>,
}

/// Pair original-side and back-side records under strict QC: only ids in
/// `qc_pass_ids` with a parsed letter on both sides enter the pairs.
pub fn pair_strict(
    benchmark: &str,
    en_records: &[ScoreRecord],
    back_records: &[ScoreRecord],
    qc_pass_ids: &BTreeSet<String>,
) -> Result<StrictPairing> {
    let model = en_records
        .iter()
        .chain(back_records)
        .map(|r| r.model.clone())
        .next()
        .unwrap_or_default();
    for r in en_records.iter().chain(back_records) {
        if r.model != model {
            return Err(AuditError::Data(format!(
                "pair_strict expects records from one model, found `{}` and `{}`",
                model, r.model
            )));
        }
    }
    let en_map = index_records(en_records, "original")?;
    let back_map = index_records(back_records, "back-translated")?;

    let mut pairs = Vec::new();
    let mut coverage_gaps = Vec::new();
    for id in qc_pass_ids {
        match (en_map.get(id), back_map.get(id)) {
            (Some(en), Some(back)) => {
                if let (Some(ce), Some(cb)) = (en.correct, back.correct) {
                    pairs.push(Pair {
                        item_id: id.clone(),
                        correct_en: ce,
                        correct_back: cb,
                    });
                }
            }
            (None, None) => {}
            _ => coverage_gaps.push(id.clone()),
        }
    }
    let n = pairs.len();
    Ok(StrictPairing {
        set: PairedSet {
            model,
            benchmark: benchmark.to_string(),
            pairs,
            n,
        },
        coverage_gaps,
    })
}

fn index_records<'a>(
    records: &'a [ScoreRecord],
    side: &str,
) -> Result<BTreeMap<&'a String, &'a ScoreRecord>> {
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert(&r.item_id, r).is_some() {
            return Err(AuditError::Data(format!(
                "duplicate record for item `{}` on the {side} side",
                r.item_id
            )));
        }
    }
    Ok(map)
}

/// (pos, neg, ties): pos counts pairs correct only on the original side,
/// neg only on the back side, ties everything else.
pub fn discordant_counts(pairs: &[Pair]) -> (usize, usize, usize) {
    let mut pos = 0;
    let mut neg = 0;
    let mut ties = 0;
    for p in pairs {
        match (p.correct_en, p.correct_back) {
            (true, false) => pos += 1,
            (false, true) => neg += 1,
            _ => ties += 1,
        }
    }
    (pos, neg, ties)
}
