//! Benchmark item ingestion, stratified sampling, and triple alignment.
//!
//! Items live in UTF-8 line-delimited files, one JSON record per line with
//! fields `{id, subject, question, choices, answer_index, language,
//! condition}`. Unknown fields are preserved on round-trip.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Which experimental condition an item's text belongs to.
///
/// `original_en` tags source originals (the untranslated side of a pair);
/// for natively-sourced control sets the `language` field carries the
/// actual language while the condition still marks the text as original.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    OriginalEn,
    Translated,
    BackTranslated,
    Naturalized,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Condition::OriginalEn => "original_en",
            Condition::Translated => "translated",
            Condition::BackTranslated => "back_translated",
            Condition::Naturalized => "naturalized",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Condition {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original_en" => Ok(Condition::OriginalEn),
            "translated" => Ok(Condition::Translated),
            "back_translated" => Ok(Condition::BackTranslated),
            "naturalized" => Ok(Condition::Naturalized),
            other => Err(AuditError::InvalidArgument(format!(
                "unknown condition `{other}`"
            ))),
        }
    }
}

/// One multiple-choice question.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Item {
    pub id: String,
    pub subject: String,
    pub question: String,
    pub choices: Vec<String>,
    #[serde(rename = "answer_index")]
    pub gold_index: usize,
    pub language: String,
    pub condition: Condition,
    /// Unknown fields from the source file, kept so round-trips are lossless.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// On-disk shape: `condition` may be absent, the loader stamps it.
#[derive(Debug, Deserialize)]
struct RawItem {
    id: String,
    subject: String,
    question: String,
    choices: Vec<String>,
    answer_index: usize,
    language: String,
    #[serde(default)]
    condition: Option<Condition>,
    #[serde(flatten)]
    extra: serde_json::Map<String, serde_json::Value>,
}

impl Item {
    /// Check the item invariants: exactly 4 non-empty choices, in-range
    /// gold index, non-empty question.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.choices.len() != 4 {
            return Err(format!("expected 4 choices, found {}", self.choices.len()));
        }
        if self.gold_index > 3 {
            return Err(format!(
                "answer_index {} out of range 0..=3",
                self.gold_index
            ));
        }
        if self.question.is_empty() {
            return Err("empty question".to_string());
        }
        if let Some(i) = self.choices.iter().position(|c| c.is_empty()) {
            return Err(format!("empty choice at position {i}"));
        }
        Ok(())
    }
}

/// QC verdict carried on a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcStatus {
    Pass,
    ExcludedQc,
    Unchecked,
}

/// Aligned (original, translated, back-translated) versions of one item.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemTriple {
    pub id: String,
    pub en: Item,
    pub zh: Item,
    pub back: Item,
    pub bleu: Option<f64>,
    pub qc_status: QcStatus,
}

/// Stratified sampling parameters: cap per subject and RNG seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SampleSpec {
    pub per_subject: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(per_subject: usize, seed: u64) -> Result<Self> {
        if per_subject == 0 {
            return Err(AuditError::InvalidArgument(
                "per_subject must be at least 1".to_string(),
            ));
        }
        Ok(SampleSpec { per_subject, seed })
    }
}

/// Load items from a line-delimited file, stamping every record with the
/// given condition. Order is preserved; whitespace-only lines are skipped.
pub fn load_items(path: &Path, condition: Condition) -> Result<Vec<Item>> {
    let content = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    parse_items(&content, condition, path)
}

fn parse_items(content: &str, condition: Condition, path: &Path) -> Result<Vec<Item>> {
    let mut items = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawItem =
            serde_json::from_str(line).map_err(|e| AuditError::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        let item = Item {
            id: raw.id,
            subject: raw.subject,
            question: raw.question,
            choices: raw.choices,
            gold_index: raw.answer_index,
            language: raw.language,
            condition,
            extra: raw.extra,
        };
        item.validate().map_err(|message| AuditError::InvalidItem {
            path: path.to_path_buf(),
            line: idx + 1,
            id: item.id.clone(),
            message,
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Serialize items back to the line-delimited format with normalized field
/// order. `save → load → save` is byte-identical.
pub fn serialize_items(items: &[Item]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    out
}

pub fn save_items(path: &Path, items: &[Item]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| AuditError::io(path, e))?;
    file.write_all(serialize_items(items).as_bytes())
        .map_err(|e| AuditError::io(path, e))
}

/// Draw at most `spec.per_subject` items per subject, uniformly without
/// replacement, using a generator seeded by `spec.seed`. Undersized
/// subjects contribute all of their items. The draw is insensitive to input
/// order (items are sorted by (subject, id) before drawing) and the output
/// is sorted by (subject, id).
pub fn stratified_sample(items: &[Item], spec: &SampleSpec) -> Vec<Item> {
    let mut by_subject: BTreeMap<&str, Vec<&Item>> = BTreeMap::new();
    for item in items {
        by_subject.entry(&item.subject).or_default().push(item);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out: Vec<Item> = Vec::new();
    for (_, mut group) in by_subject {
        group.sort_by(|a, b| a.id.cmp(&b.id));
        if group.len() <= spec.per_subject {
            out.extend(group.into_iter().cloned());
        } else {
            let picked = rand::seq::index::sample(&mut rng, group.len(), spec.per_subject);
            let mut chosen: Vec<&Item> = picked.iter().map(|i| group[i]).collect();
            chosen.sort_by(|a, b| a.id.cmp(&b.id));
            out.extend(chosen.into_iter().cloned());
        }
    }
    out
}

/// Ids that could not be aligned across the three sources.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MissingReport {
    pub missing_from_en: Vec<String>,
    pub missing_from_zh: Vec<String>,
    pub missing_from_back: Vec<String>,
}

impl MissingReport {
    pub fn is_empty(&self) -> bool {
        self.missing_from_en.is_empty()
            && self.missing_from_zh.is_empty()
            && self.missing_from_back.is_empty()
    }
}

/// Align three item sets by id intersection. Ids absent from any source are
/// reported, never silently dropped. Triples come back sorted by id with
/// `qc_status = unchecked`.
pub fn build_triples(
    en: &[Item],
    zh: &[Item],
    back: &[Item],
) -> Result<(Vec<ItemTriple>, MissingReport)> {
    let en_map = index_by_id(en, "en")?;
    let zh_map = index_by_id(zh, "zh")?;
    let back_map = index_by_id(back, "back")?;

    let mut all_ids: Vec<&String> = en_map
        .keys()
        .chain(zh_map.keys())
        .chain(back_map.keys())
        .copied()
        .collect();
    all_ids.sort();
    all_ids.dedup();

    let mut triples = Vec::new();
    let mut report = MissingReport::default();
    for id in all_ids {
        match (en_map.get(id), zh_map.get(id), back_map.get(id)) {
            (Some(e), Some(z), Some(b)) => triples.push(ItemTriple {
                id: id.clone(),
                en: (*e).clone(),
                zh: (*z).clone(),
                back: (*b).clone(),
                bleu: None,
                qc_status: QcStatus::Unchecked,
            }),
            (e, z, b) => {
                if e.is_none() {
                    report.missing_from_en.push(id.clone());
                }
                if z.is_none() {
                    report.missing_from_zh.push(id.clone());
                }
                if b.is_none() {
                    report.missing_from_back.push(id.clone());
                }
            }
        }
    }
    Ok((triples, report))
}

fn index_by_id<'a>(items: &'a [Item], source_name: &str) -> Result<BTreeMap<&'a String, &'a Item>> {
    let mut map = BTreeMap::new();
    for item in items {
        if map.insert(&item.id, item).is_some() {
            return Err(AuditError::DuplicateId {
                id: item.id.clone(),
                source_name: source_name.to_string(),
            });
        }
    }
    Ok(map)
}

/// Load triples from a line-delimited file.
pub fn load_triples(path: &Path) -> Result<Vec<ItemTriple>> {
    let content = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    let mut triples = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let triple: ItemTriple =
            serde_json::from_str(line).map_err(|e| AuditError::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        triples.push(triple);
    }
    Ok(triples)
}

pub fn save_triples(path: &Path, triples: &[ItemTriple]) -> Result<()> {
    let mut out = String::new();
    for t in triples {
        out.push_str(&serde_json::to_string(t).expect("triple serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| AuditError::io(path, e))
}

// Items deserialize through RawItem so the loader can stamp conditions, but
// triples carry fully-formed items; accept a missing condition as original.
impl<'de> Deserialize<'de> for Item {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = RawItem::deserialize(deserializer)?;
        Ok(Item {
            id: raw.id,
            subject: raw.subject,
            question: raw.question,
            choices: raw.choices,
            gold_index: raw.answer_index,
            language: raw.language,
            condition: raw.condition.unwrap_or(Condition::OriginalEn),
            extra: raw.extra,
        })
    }
}


#[cfg(test)]
mod tests {
    use super::test_fixtures::*;
    use super::*;
    use std::collections::BTreeSet;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const LINE: &str = r#"{"id":"q1","subject":"algebra","question":"2+2?","choices":["1","2","3","4"],"answer_index":3,"language":"en"}"#;

    #[test]
    fn load_preserves_order() {
        let content = [
            LINE.replace("q1", "q1"),
            LINE.replace("q1", "q2"),
            LINE.replace("q1", "q3"),
        ]
        .join("\n");
        let f = write_temp(&content);
        let items = load_items(f.path(), Condition::OriginalEn).unwrap();
        assert_eq!(items.len(), 3);
        let ids: Vec<&str> = items.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["q1", "q2", "q3"]);
        assert!(items.iter().all(|i| i.condition == Condition::OriginalEn));
    }

    #[test]
    fn three_choices_is_an_error_naming_the_line() {
        let bad = r#"{"id":"q2","subject":"algebra","question":"?","choices":["1","2","3"],"answer_index":0,"language":"en"}"#;
        let content = format!("{LINE}\n{bad}");
        let f = write_temp(&content);
        let err = load_items(f.path(), Condition::Translated).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "error should name line 2: {msg}");
        assert!(msg.contains("4 choices"), "{msg}");
    }

    #[test]
    fn gold_index_out_of_range_is_an_error() {
        let bad = LINE.replace("\"answer_index\":3", "\"answer_index\":4");
        let f = write_temp(&bad);
        let err = load_items(f.path(), Condition::Translated).unwrap_err();
        assert!(err.to_string().contains("out of range"));
    }

    #[test]
    fn malformed_json_names_the_line() {
        let content = format!("{LINE}\nnot json");
        let f = write_temp(&content);
        let err = load_items(f.path(), Condition::OriginalEn).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn fixture_228_items_span_57_subjects() {
        let items = corpus_57_subjects(4, Condition::OriginalEn);
        let f = write_temp(&serialize_items(&items));
        let loaded = load_items(f.path(), Condition::OriginalEn).unwrap();
        assert_eq!(loaded.len(), 228);
        let subjects: BTreeSet<&str> = loaded.iter().map(|i| i.subject.as_str()).collect();
        assert_eq!(subjects.len(), 57);
    }

    #[test]
    fn round_trip_is_idempotent_and_keeps_unknown_fields() {
        let line = r#"{"id":"q1","subject":"algebra","question":"2+2?","choices":["1","2","3","4"],"answer_index":3,"language":"en","source_row":17,"split":"test"}"#;
        let f = write_temp(line);
        let items = load_items(f.path(), Condition::Translated).unwrap();
        let once = serialize_items(&items);
        assert!(once.contains("\"source_row\":17"));
        assert!(once.contains("\"split\":\"test\""));
        let f2 = write_temp(&once);
        let again = serialize_items(&load_items(f2.path(), Condition::Translated).unwrap());
        assert_eq!(once, again);
    }

    #[test]
    fn sample_draws_228_from_57_full_subjects() {
        let items = corpus_57_subjects(6, Condition::OriginalEn);
        let spec = SampleSpec::new(4, 42).unwrap();
        let sample = stratified_sample(&items, &spec);
        assert_eq!(sample.len(), 228);
        let mut per_subject: BTreeMap<&str, usize> = BTreeMap::new();
        for i in &sample {
            *per_subject.entry(i.subject.as_str()).or_default() += 1;
        }
        assert_eq!(per_subject.len(), 57);
        assert!(per_subject.values().all(|&c| c == 4));
    }

    #[test]
    fn undersized_subject_contributes_everything() {
        let items = vec![
            make_item("x", "tiny", 0, Condition::OriginalEn),
            make_item("x", "tiny", 1, Condition::OriginalEn),
        ];
        let spec = SampleSpec::new(4, 7).unwrap();
        let sample = stratified_sample(&items, &spec);
        assert_eq!(sample.len(), 2);
    }

    #[test]
    fn sample_is_deterministic_and_order_insensitive() {
        let items = corpus_57_subjects(9, Condition::OriginalEn);
        let spec = SampleSpec::new(4, 42).unwrap();
        let ids = |v: &[Item]| v.iter().map(|i| i.id.clone()).collect::<Vec<_>>();

        let a = stratified_sample(&items, &spec);
        let b = stratified_sample(&items, &spec);
        assert_eq!(ids(&a), ids(&b));

        let mut reversed = items.clone();
        reversed.reverse();
        let c = stratified_sample(&reversed, &spec);
        assert_eq!(ids(&a), ids(&c));

        let other = stratified_sample(&items, &SampleSpec::new(4, 43).unwrap());
        assert_ne!(ids(&a), ids(&other), "different seeds should differ");
    }

    #[test]
    fn per_subject_zero_is_rejected() {
        assert!(SampleSpec::new(0, 42).is_err());
    }

    #[test]
    fn triples_align_by_intersection() {
        let en = corpus_57_subjects(4, Condition::OriginalEn);
        let zh: Vec<Item> = en
            .iter()
            .map(|i| Item {
                condition: Condition::Translated,
                language: "zh".into(),
                ..i.clone()
            })
            .collect();
        let back: Vec<Item> = en
            .iter()
            .map(|i| Item {
                condition: Condition::BackTranslated,
                ..i.clone()
            })
            .collect();
        let (triples, missing) = build_triples(&en, &zh, &back).unwrap();
        assert_eq!(triples.len(), 228);
        assert!(missing.is_empty());
        assert!(triples.iter().all(|t| t.id == t.en.id && t.id == t.zh.id && t.id == t.back.id));
    }

    #[test]
    fn missing_id_is_reported_not_dropped_silently() {
        let en = corpus_57_subjects(2, Condition::OriginalEn);
        let mut zh = en.clone();
        let removed = zh.remove(5);
        let back = en.clone();
        let (triples, missing) = build_triples(&en, &zh, &back).unwrap();
        assert_eq!(triples.len(), en.len() - 1);
        assert_eq!(missing.missing_from_zh, vec![removed.id.clone()]);
        assert!(triples.iter().all(|t| t.id != removed.id));
    }

    #[test]
    fn duplicate_id_in_one_source_is_an_error() {
        let en = corpus_57_subjects(1, Condition::OriginalEn);
        let zh = en.clone();
        let mut back = en.clone();
        back.push(back[0].clone());
        let err = build_triples(&en, &zh, &back).unwrap_err();
        assert!(matches!(err, AuditError::DuplicateId { ref source_name, .. } if source_name == "back"));
    }

    #[test]
    fn triple_count_never_exceeds_smallest_source() {
        let en = corpus_57_subjects(3, Condition::OriginalEn);
        let zh = en[..100].to_vec();
        let back = en[50..].to_vec();
        let (triples, _) = build_triples(&en, &zh, &back).unwrap();
        assert!(triples.len() <= 100.min(back.len()));
        assert_eq!(triples.len(), 50);
    }
}
