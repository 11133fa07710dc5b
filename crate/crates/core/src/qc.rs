//! Back-translation quality control: sentence BLEU, the threshold gate,
//! and the triple-alignment audit.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Item, ItemTriple, QcStatus};
use crate::error::{AuditError, Result};

const MAX_NGRAM: usize = 4;

/// Default gate: triples below this BLEU are excluded from paired analysis.
pub const DEFAULT_BLEU_THRESHOLD: f64 = 0.30;

/// Lowercase word/punctuation tokenizer. Alphanumeric runs become tokens;
/// every other non-whitespace character is its own token. Deterministic by
/// construction, not a reimplementation of any external tokenizer.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Sentence-level BLEU in [0,1]: n-grams up to 4 with uniform weights,
/// add-one smoothing on any order with zero matches, brevity penalty
/// exp(1 - r/c) when the candidate is shorter than the reference.
pub fn bleu(candidate: &str, reference: &str) -> Result<f64> {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() {
        return Err(AuditError::EmptyInput(
            "candidate is empty after tokenization".to_string(),
        ));
    }
    if refr.is_empty() {
        return Err(AuditError::EmptyInput(
            "reference is empty after tokenization".to_string(),
        ));
    }

    let mut log_sum = 0.0;
    for n in 1..=MAX_NGRAM {
        let (matches, total) = modified_precision(&cand, &refr, n);
        let p = if matches == 0 {
            // add-one smoothing on zero-match orders
            1.0 / (total as f64 + 1.0)
        } else {
            matches as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let geo_mean = (log_sum / MAX_NGRAM as f64).exp();

    let c = cand.len() as f64;
    let r = refr.len() as f64;
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    Ok((bp * geo_mean).min(1.0))
}

/// Clipped n-gram matches and candidate n-gram total for one order.
fn modified_precision(cand: &[String], refr: &[String], n: usize) -> (usize, usize) {
    if cand.len() < n {
        return (0, 0);
    }
    let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
    for gram in refr.windows(n) {
        *ref_counts.entry(gram).or_default() += 1;
    }
    let mut cand_counts: HashMap<&[String], usize> = HashMap::new();
    for gram in cand.windows(n) {
        *cand_counts.entry(gram).or_default() += 1;
    }
    let matches = cand_counts
        .iter()
        .map(|(gram, &count)| count.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    (matches, cand.len() - n + 1)
}

/// Text a whole item exposes to QC: question plus the four choices joined
/// with single spaces. Choices carry most cue residue in multiple choice.
pub fn item_text(item: &Item) -> String {
    let mut s = item.question.clone();
    for c in &item.choices {
        s.push(' ');
        s.push_str(c);
    }
    s
}

/// Score every triple: BLEU of the back-translated item against the
/// original. Overwrites any existing score.
pub fn score_triples(triples: &mut [ItemTriple]) -> Result<()> {
    for t in triples.iter_mut() {
        t.bleu = Some(bleu(&item_text(&t.back), &item_text(&t.en))?);
    }
    Ok(())
}

/// Partition triples at the threshold: pass iff BLEU >= threshold (the
/// boundary passes). Both lists preserve input order and carry updated
/// `qc_status`. Errors if any triple is missing its BLEU score.
pub fn apply_qc(
    triples: &[ItemTriple],
    threshold: f64,
) -> Result<(Vec<ItemTriple>, Vec<ItemTriple>)> {
    let mut pass = Vec::new();
    let mut excluded = Vec::new();
    for t in triples {
        let score = t.bleu.ok_or_else(|| AuditError::MissingBleu {
            id: t.id.clone(),
        })?;
        let mut t = t.clone();
        if score >= threshold {
            t.qc_status = QcStatus::Pass;
            pass.push(t);
        } else {
            t.qc_status = QcStatus::ExcludedQc;
            excluded.push(t);
        }
    }
    Ok((pass, excluded))
}

/// Findings of the triple-alignment audit. A clean audit has all three
/// lists empty.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub n_items: usize,
    pub id_mismatches: Vec<String>,
    pub choice_count_mismatches: Vec<String>,
    pub gold_index_mismatches: Vec<String>,
}

impl AlignmentReport {
    pub fn is_clean(&self) -> bool {
        self.id_mismatches.is_empty()
            && self.choice_count_mismatches.is_empty()
            && self.gold_index_mismatches.is_empty()
    }
}

/// Per-triple checks: member ids equal, every member has 4 choices, and the
/// gold index agrees between original and translated members (the
/// content-level alignment proof). Findings are report content, not errors.
pub fn audit_alignment(triples: &[ItemTriple]) -> AlignmentReport {
    let mut report = AlignmentReport {
        n_items: triples.len(),
        ..Default::default()
    };
    for t in triples {
        if t.en.id != t.id || t.zh.id != t.id || t.back.id != t.id {
            report.id_mismatches.push(t.id.clone());
        }
        if t.en.choices.len() != 4 || t.zh.choices.len() != 4 || t.back.choices.len() != 4 {
            report.choice_count_mismatches.push(t.id.clone());
        }
        if t.en.gold_index != t.zh.gold_index {
            report.gold_index_mismatches.push(t.id.clone());
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_fixtures::*;
    use crate::corpus::{build_triples, Condition};

    fn make_triples(n_subjects: usize, per_subject: usize) -> Vec<ItemTriple> {
        let mut en = Vec::new();
        for s in 0..n_subjects {
            let subject = format!("subject_{s:02}");
            for k in 0..per_subject {
                en.push(make_item("mmlu", &subject, s * 100 + k, Condition::OriginalEn));
            }
        }
        let zh: Vec<_> = en
            .iter()
            .map(|i| Item {
                condition: Condition::Translated,
                language: "zh".into(),
                ..i.clone()
            })
            .collect();
        let back: Vec<_> = en
            .iter()
            .map(|i| Item {
                condition: Condition::BackTranslated,
                ..i.clone()
            })
            .collect();
        build_triples(&en, &zh, &back).unwrap().0
    }

    #[test]
    fn identical_texts_score_one() {
        let text = "The mitochondria is the powerhouse of the cell.";
        assert_eq!(bleu(text, text).unwrap(), 1.0);
    }

    #[test]
    fn whitespace_does_not_matter() {
        let a = bleu("  the cat sat  ", "the cat sat").unwrap();
        assert_eq!(a, 1.0);
    }

    #[test]
    fn disjoint_texts_land_near_the_smoothed_floor() {
        let candidate = "aa bb cc dd ee ff gg hh ii jj kk ll mm nn oo pp qq rr ss tt uu vv ww xx yy zz";
        let reference = "one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty alpha beta gamma delta epsilon zeta";
        let score = bleu(candidate, reference).unwrap();
        assert!(score > 0.0, "smoothing keeps the score above zero");
        assert!(score < 0.05, "got {score}");
    }

    #[test]
    fn hand_derived_smoothed_bleu() {
        // candidate: the cat sat on the mat   reference: the cat is on the mat
        // p1 = 5/6 (clipped: the x2, cat, on, mat)
        // p2 = 3/5 (the cat, on the, the mat)
        // p3 = 1/4 (on the mat)
        // p4 = 0/3 -> add-one -> 1/4
        // lengths equal -> BP = 1
        let expected = (5.0 / 6.0 * (3.0 / 5.0) * 0.25 * 0.25_f64).powf(0.25);
        let got = bleu("the cat sat on the mat", "the cat is on the mat").unwrap();
        assert!((got - expected).abs() < 1e-9, "got {got}, want {expected}");
        assert!((expected - 0.42044820762685725).abs() < 1e-12);
    }

    #[test]
    fn punctuation_splits_tokens() {
        assert_eq!(
            tokenize("Who's there? (Nobody!)"),
            ["who", "'", "s", "there", "?", "(", "nobody", "!", ")"]
        );
    }

    #[test]
    fn brevity_penalty_applies_to_short_candidates() {
        // candidate 3 tokens, reference 6, all matching a prefix
        let got = bleu("the cat sat", "the cat sat on the mat").unwrap();
        // p1 = 1, p2 = 1, p3 = 1, p4 = 0/0 -> smoothed 1/1
        let expected = (1.0f64 - 6.0 / 3.0).exp();
        assert!((got - expected).abs() < 1e-12, "got {got}, want {expected}");
    }

    #[test]
    fn empty_after_tokenization_is_an_error() {
        assert!(bleu("   ", "the cat").is_err());
        assert!(bleu("the cat", " \t ").is_err());
    }

    #[test]
    fn qc_excludes_low_bleu() {
        let mut triples = make_triples(1, 3);
        triples[0].bleu = Some(0.041);
        triples[1].bleu = Some(0.025);
        triples[2].bleu = Some(0.568);
        let (pass, excluded) = apply_qc(&triples, DEFAULT_BLEU_THRESHOLD).unwrap();
        assert_eq!(pass.len(), 1);
        assert_eq!(excluded.len(), 2);
        assert!(pass.iter().all(|t| t.qc_status == QcStatus::Pass));
        assert!(excluded.iter().all(|t| t.qc_status == QcStatus::ExcludedQc));
    }

    #[test]
    fn boundary_bleu_passes() {
        let mut triples = make_triples(1, 1);
        triples[0].bleu = Some(0.30);
        let (pass, excluded) = apply_qc(&triples, 0.30).unwrap();
        assert_eq!(pass.len(), 1);
        assert!(excluded.is_empty());
    }

    #[test]
    fn zero_threshold_passes_everything() {
        let mut triples = make_triples(2, 2);
        for t in triples.iter_mut() {
            t.bleu = Some(0.01);
        }
        let (pass, excluded) = apply_qc(&triples, 0.0).unwrap();
        assert_eq!(pass.len(), 4);
        assert!(excluded.is_empty());
    }

    #[test]
    fn unset_bleu_is_an_error() {
        let triples = make_triples(1, 1);
        assert!(matches!(
            apply_qc(&triples, 0.3),
            Err(AuditError::MissingBleu { .. })
        ));
    }

    #[test]
    fn qc_partitions_the_input() {
        let mut triples = make_triples(5, 4);
        for (k, t) in triples.iter_mut().enumerate() {
            t.bleu = Some(k as f64 / 20.0);
        }
        let (pass, excluded) = apply_qc(&triples, 0.5).unwrap();
        assert_eq!(pass.len() + excluded.len(), triples.len());
        let mut ids: Vec<&str> = pass.iter().chain(&excluded).map(|t| t.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), triples.len());
    }

    #[test]
    fn audit_flags_injected_gold_mismatches() {
        let mut triples = make_triples(57, 4);
        assert_eq!(triples.len(), 228);
        // corrupt two translated gold indices post-build
        triples[10].zh.gold_index = (triples[10].zh.gold_index + 1) % 4;
        triples[99].zh.gold_index = (triples[99].zh.gold_index + 2) % 4;
        let expect: Vec<String> = vec![triples[10].id.clone(), triples[99].id.clone()];
        let report = audit_alignment(&triples);
        assert_eq!(report.n_items, 228);
        assert!(report.id_mismatches.is_empty());
        assert!(report.choice_count_mismatches.is_empty());
        let mut got = report.gold_index_mismatches.clone();
        got.sort();
        let mut want = expect;
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn clean_fixture_audits_clean() {
        let triples = make_triples(3, 4);
        let report = audit_alignment(&triples);
        assert!(report.is_clean());
    }

    #[test]
    fn fifth_choice_injected_post_load_is_flagged() {
        let mut triples = make_triples(2, 2);
        triples[1].back.choices.push("smuggled".to_string());
        let report = audit_alignment(&triples);
        assert_eq!(report.choice_count_mismatches, vec![triples[1].id.clone()]);
        assert!(report.id_mismatches.is_empty());
    }

    #[test]
    fn audit_on_builder_output_never_reports_id_mismatches() {
        let triples = make_triples(10, 3);
        assert!(audit_alignment(&triples).id_mismatches.is_empty());
    }

    #[test]
    fn score_triples_fills_every_bleu() {
        let mut triples = make_triples(2, 3);
        score_triples(&mut triples).unwrap();
        assert!(triples.iter().all(|t| t.bleu.is_some()));
        // identical en/back text in the fixture -> BLEU 1
        assert!(triples.iter().all(|t| t.bleu.unwrap() == 1.0));
    }
}
