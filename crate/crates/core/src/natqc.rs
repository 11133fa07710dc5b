//! Naturalization quality control: verifier records, the strict-pass gate,
//! editable coder sheets, the two-coder merge, and the rewrite/verify
//! prompt contracts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Item;
use crate::error::{AuditError, Result};
use crate::estimators::{run_e4, E4Summary, Stratum};
use crate::inference::{kappa_binary, percent_agreement};
use crate::scoring::ScoreRecord;

/// Who produced a QC verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coder {
    LlmVerifier,
    Human1,
    Human2,
}

impl std::fmt::Display for Coder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Coder::LlmVerifier => "llm_verifier",
            Coder::Human1 => "human_1",
            Coder::Human2 => "human_2",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Coder {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "llm_verifier" => Ok(Coder::LlmVerifier),
            "human_1" => Ok(Coder::Human1),
            "human_2" => Ok(Coder::Human2),
            other => Err(AuditError::InvalidArgument(format!(
                "unknown coder `{other}`"
            ))),
        }
    }
}

/// Six-dimension QC verdict for one rewrite. Likert fields run 1..5.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifierRecord {
    pub item_id: String,
    pub semantic: u8,
    pub difficulty: u8,
    pub answer_key_preserved: bool,
    pub option_order_preserved: bool,
    pub cue_removal: u8,
    pub rewrite_risk: u8,
    pub coder: Coder,
    pub notes: String,
}

impl VerifierRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("semantic", self.semantic),
            ("difficulty", self.difficulty),
            ("cue_removal", self.cue_removal),
            ("rewrite_risk", self.rewrite_risk),
        ] {
            if !(1..=5).contains(&v) {
                return Err(format!("{name} must be in 1..5, got {v}"));
            }
        }
        Ok(())
    }
}

/// Per-item annotation scores for the calibration estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub cue_score: u8,
    pub cultural_residue: u8,
    pub syntactic_residue: u8,
    pub annotator: String,
}

impl AnnotationRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("cue_score", self.cue_score),
            ("cultural_residue", self.cultural_residue),
            ("syntactic_residue", self.syntactic_residue),
        ] {
            if !(1..=5).contains(&v) {
                return Err(format!("{name} must be in 1..5, got {v}"));
            }
        }
        Ok(())
    }
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let content = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord =
            serde_json::from_str(line).map_err(|e| AuditError::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        record.validate().map_err(|message| AuditError::MalformedLine {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// The strict-pass gate: semantic and difficulty at least 4, answer key and
/// option order preserved, rewrite risk at most 2. The same predicate
/// serves LLM-verifier and human verdicts; provenance lives in `coder`.
pub fn strict_pass(v: &VerifierRecord) -> bool {
    v.semantic >= 4
        && v.difficulty >= 4
        && v.answer_key_preserved
        && v.option_order_preserved
        && v.rewrite_risk <= 2
}

/// Cross-tab of two coders' strict-pass verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeReport {
    pub n: usize,
    pub both_pass: usize,
    pub first_only: usize,
    pub second_only: usize,
    pub both_fail: usize,
    pub agreement: f64,
    pub kappa: f64,
    pub intersection_pass_ids: Vec<String>,
}

/// Merge two coder sheets over the same item set: per-item strict-pass
/// verdicts cross-tabulated, agreement and kappa from the 2x2, and the
/// ids both coders pass.
pub fn merge_coders(sheet1: &[VerifierRecord], sheet2: &[VerifierRecord]) -> Result<MergeReport> {
    let map1 = sheet_map(sheet1, "first")?;
    let map2 = sheet_map(sheet2, "second")?;
    let ids1: BTreeSet<&String> = map1.keys().copied().collect();
    let ids2: BTreeSet<&String> = map2.keys().copied().collect();
    if ids1 != ids2 {
        let only1: Vec<&&String> = ids1.difference(&ids2).collect();
        let only2: Vec<&&String> = ids2.difference(&ids1).collect();
        return Err(AuditError::SheetMismatch(format!(
            "first-only {only1:?}, second-only {only2:?}"
        )));
    }
    let (mut a, mut b, mut c, mut d) = (0usize, 0usize, 0usize, 0usize);
    let mut intersection = Vec::new();
    for id in ids1 {
        let p1 = strict_pass(map1[id]);
        let p2 = strict_pass(map2[id]);
        match (p1, p2) {
            (true, true) => {
                a += 1;
                intersection.push(id.clone());
            }
            (true, false) => b += 1,
            (false, true) => c += 1,
            (false, false) => d += 1,
        }
    }
    Ok(MergeReport {
        n: a + b + c + d,
        both_pass: a,
        first_only: b,
        second_only: c,
        both_fail: d,
        agreement: percent_agreement(a, b, c, d)?,
        kappa: kappa_binary(a, b, c, d)?,
        intersection_pass_ids: intersection,
    })
}

fn sheet_map<'a>(
    sheet: &'a [VerifierRecord],
    which: &str,
) -> Result<BTreeMap<&'a String, &'a VerifierRecord>> {
    let mut map = BTreeMap::new();
    for r in sheet {
        if map.insert(&r.item_id, r).is_some() {
            return Err(AuditError::Data(format!(
                "duplicate item `{}` in the {which} sheet",
                r.item_id
            )));
        }
    }
    Ok(map)
}

/// Rerun the naturalization contrast restricted to `pass_ids`.
#[allow(clippy::too_many_arguments)]
pub fn qc_sensitivity(
    translated: &[ScoreRecord],
    naturalized: &[ScoreRecord],
    strata: &BTreeMap<String, Stratum>,
    pass_ids: &BTreeSet<String>,
    b: usize,
    seed: u64,
    level: f64,
    outlier_threshold: f64,
) -> Result<E4Summary> {
    if pass_ids.is_empty() {
        return Err(AuditError::EmptyInput(
            "qc_sensitivity needs a non-empty restriction".to_string(),
        ));
    }
    let scored: BTreeSet<&String> = translated.iter().map(|r| &r.item_id).collect();
    if let Some(unknown) = pass_ids.iter().find(|id| !scored.contains(id)) {
        return Err(AuditError::Data(format!(
            "pass id `{unknown}` was never scored"
        )));
    }
    let keep = |records: &[ScoreRecord]| -> Vec<ScoreRecord> {
        records
            .iter()
            .filter(|r| pass_ids.contains(&r.item_id))
            .cloned()
            .collect()
    };
    let strata_kept: BTreeMap<String, Stratum> = strata
        .iter()
        .filter(|(id, _)| pass_ids.contains(*id))
        .map(|(id, s)| (id.clone(), *s))
        .collect();
    run_e4(
        &keep(translated),
        &keep(naturalized),
        &strata_kept,
        b,
        seed,
        level,
        outlier_threshold,
    )
}

/// Rendered rewrite and verify prompts for one item.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptContracts {
    pub rewriter_prompt: String,
    pub verifier_prompt: String,
}

/// The six QC dimensions, in scoring order, by their record keys.
pub const VERIFIER_DIMENSIONS: [&str; 6] = [
    "semantic",
    "difficulty",
    "answer_key_preserved",
    "option_order_preserved",
    "cue_removal",
    "rewrite_risk",
];

/// Fill the shipped rewrite/verify templates with an item's fields. The
/// verifier prompt demands the fenced score block that
/// [`parse_verifier_response`] accepts.
pub fn render_prompt_contracts(item: &Item) -> PromptContracts {
    let letters = ['A', 'B', 'C', 'D'];
    let mut options = String::new();
    for (letter, choice) in letters.iter().zip(&item.choices) {
        options.push_str(&format!("{letter}. {choice}\n"));
    }
    let gold = letters[item.gold_index.min(3)];

    let rewriter_prompt = format!(
        "Rewrite the following multiple-choice item so the surface form reads as \
natural, idiomatic text in its language. You must preserve: the meaning of the \
question and of every option, the answer key ({gold}), the ordering of the \
options, the difficulty, and all technical terminology. Do not add or remove \
content. Do not prepend option letters to the option texts. Return the \
rewritten question followed by the four rewritten options, one per line.\n\n\
Question: {question}\n{options}",
        gold = gold,
        question = item.question,
        options = options,
    );

    let verifier_prompt = format!(
        "You are auditing a rewritten multiple-choice item against its original. \
Score the rewrite on six dimensions:\n\
1. semantic: meaning preservation, 1 (changed) to 5 (identical).\n\
2. difficulty: difficulty preservation, 1 (shifted) to 5 (unchanged).\n\
3. answer_key_preserved: true if the correct option is still {gold}.\n\
4. option_order_preserved: true if the options appear in the same order.\n\
5. cue_removal: how much translation residue was removed, 1 (none) to 5 (all).\n\
6. rewrite_risk: how much the rewrite changed beyond surface form, 1 (minimal) \
to 5 (excessive).\n\n\
Original question: {question}\n{options}\n\
Respond with exactly one fenced JSON block of the form:\n\
```json\n\
{{\"semantic\": 5, \"difficulty\": 5, \"answer_key_preserved\": true, \
\"option_order_preserved\": true, \"cue_removal\": 5, \"rewrite_risk\": 1, \
\"notes\": \"\"}}\n\
```",
        gold = gold,
        question = item.question,
        options = options,
    );

    PromptContracts {
        rewriter_prompt,
        verifier_prompt,
    }
}

#[derive(Debug, Deserialize)]
struct VerifierBlock {
    semantic: u8,
    difficulty: u8,
    answer_key_preserved: bool,
    option_order_preserved: bool,
    cue_removal: u8,
    rewrite_risk: u8,
    #[serde(default)]
    notes: String,
}

/// Parse a verifier response into a record. QC fails closed: anything
/// without a well-formed fenced block inside bounds yields `None`, and the
/// item stays out of every strict-pass set.
pub fn parse_verifier_response(item_id: &str, raw: &str, coder: Coder) -> Option<VerifierRecord> {
    let block = fenced_block(raw)?;
    let parsed: VerifierBlock = serde_json::from_str(&block).ok()?;
    let record = VerifierRecord {
        item_id: item_id.to_string(),
        semantic: parsed.semantic,
        difficulty: parsed.difficulty,
        answer_key_preserved: parsed.answer_key_preserved,
        option_order_preserved: parsed.option_order_preserved,
        cue_removal: parsed.cue_removal,
        rewrite_risk: parsed.rewrite_risk,
        coder,
        notes: parsed.notes,
    };
    record.validate().ok()?;
    Some(record)
}

fn fenced_block(raw: &str) -> Option<String> {
    let start = raw.find("```")?;
    let after_fence = &raw[start + 3..];
    let body_start = after_fence.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after_fence[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim().to_string())
}

const SHEET_HEADER: &str = "item_id\tsemantic\tdifficulty\tanswer_key_preserved\toption_order_preserved\tcue_removal\trewrite_risk\tcoder\tnotes";

/// Serialize a coder sheet: tab-separated, fixed header, one row per item,
/// notes last so they can hold free text.
pub fn sheet_to_string(records: &[VerifierRecord]) -> String {
    let mut out = String::from(SHEET_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.item_id,
            r.semantic,
            r.difficulty,
            r.answer_key_preserved,
            r.option_order_preserved,
            r.cue_removal,
            r.rewrite_risk,
            r.coder,
            r.notes.replace(['\t', '\n'], " "),
        ));
    }
    out
}

pub fn save_sheet(path: &Path, records: &[VerifierRecord]) -> Result<()> {
    fs::write(path, sheet_to_string(records)).map_err(|e| AuditError::io(path, e))
}

pub fn load_sheet(path: &Path) -> Result<Vec<VerifierRecord>> {
    let content = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    parse_sheet(&content, path)
}

fn parse_sheet(content: &str, path: &Path) -> Result<Vec<VerifierRecord>> {
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SHEET_HEADER => {}
        other => {
            return Err(AuditError::MalformedLine {
                path: path.to_path_buf(),
                line: 1,
                message: format!(
                    "bad sheet header: expected {SHEET_HEADER:?}, found {:?}",
                    other.map(|(_, h)| h).unwrap_or("")
                ),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(9, '\t').collect();
        if fields.len() != 9 {
            return Err(AuditError::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected 9 tab-separated fields, found {}", fields.len()),
            });
        }
        let err = |message: String| AuditError::MalformedLine {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let record = VerifierRecord {
            item_id: fields[0].to_string(),
            semantic: fields[1].parse().map_err(|_| err(format!("bad semantic {:?}", fields[1])))?,
            difficulty: fields[2]
                .parse()
                .map_err(|_| err(format!("bad difficulty {:?}", fields[2])))?,
            answer_key_preserved: fields[3]
                .parse()
                .map_err(|_| err(format!("bad answer_key_preserved {:?}", fields[3])))?,
            option_order_preserved: fields[4]
                .parse()
                .map_err(|_| err(format!("bad option_order_preserved {:?}", fields[4])))?,
            cue_removal: fields[5]
                .parse()
                .map_err(|_| err(format!("bad cue_removal {:?}", fields[5])))?,
            rewrite_risk: fields[6]
                .parse()
                .map_err(|_| err(format!("bad rewrite_risk {:?}", fields[6])))?,
            coder: fields[7].parse()?,
            notes: fields[8].to_string(),
        };
        record.validate().map_err(err)?;
        records.push(record);
    }
    Ok(records)
}
