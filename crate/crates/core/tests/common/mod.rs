//! Shared fixture corpus and pipeline driver for the integration suites.
//!
//! The fixture mirrors the production layout: 57 subjects x 4 items with
//! aligned original / translated / back-translated files, a naturalized
//! subset with stacked choice labels, a native-control set, canned mock
//! responses per (model, item, condition), annotation records, and two
//! coder QC sheets realizing a known 2x2 table.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const N_SUBJECTS: usize = 57;
pub const PER_SUBJECT: usize = 4;
pub const N_ITEMS: usize = N_SUBJECTS * PER_SUBJECT;
pub const N_NATURALIZED: usize = 60;
pub const N_CONTROL: usize = 100;
pub const LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

/// Items whose back-translation shares no vocabulary with the original, so
/// they fall under the BLEU gate. Includes the two gold-mismatch items.
pub const LOW_BLEU: [usize; 15] = [3, 10, 17, 31, 45, 59, 73, 87, 99, 101, 115, 129, 143, 157, 171];

/// Items whose translated gold index is corrupted (source-side defect).
pub const GOLD_MISMATCH: [usize; 2] = [10, 99];

pub const MODELS: [(&str, &str); 4] = [
    ("gpt-4o", "A"),
    ("gpt-4o-mini", "A"),
    ("deepseek-chat", "B"),
    ("glm-4.5", "B"),
];

pub fn item_id(flat: usize) -> String {
    format!("item_{flat:03}")
}

pub fn subject(flat: usize) -> String {
    format!("subject_{:02}", flat / PER_SUBJECT)
}

fn json_item(
    id: &str,
    subject: &str,
    question: &str,
    choices: [String; 4],
    gold: usize,
    language: &str,
) -> String {
    serde_json::json!({
        "id": id,
        "subject": subject,
        "question": question,
        "choices": choices,
        "answer_index": gold,
        "language": language,
    })
    .to_string()
}

pub fn en_question(flat: usize) -> String {
    format!(
        "Which option denotes marker {flat} in {}?",
        subject(flat)
    )
}

pub fn en_choices(flat: usize) -> [String; 4] {
    [
        format!("north {flat}"),
        format!("south {flat}"),
        format!("east {flat}"),
        format!("west {flat}"),
    ]
}

pub fn en_gold(flat: usize) -> usize {
    flat % 4
}

pub fn zh_gold(flat: usize) -> usize {
    if GOLD_MISMATCH.contains(&flat) {
        (flat + 1) % 4
    } else {
        flat % 4
    }
}

fn write_lines(path: &Path, lines: &[String]) {
    let mut out = lines.join("\n");
    out.push('\n');
    fs::write(path, out).unwrap();
}

pub fn write_item_files(dir: &Path) {
    let mut en = Vec::new();
    let mut zh = Vec::new();
    let mut back = Vec::new();
    for flat in 0..N_ITEMS {
        let id = item_id(flat);
        let subj = subject(flat);
        en.push(json_item(
            &id,
            &subj,
            &en_question(flat),
            en_choices(flat),
            en_gold(flat),
            "en",
        ));
        zh.push(json_item(
            &id,
            &subj,
            &format!("关于{subj}的标记{flat}，哪个选项正确？"),
            [
                format!("北 {flat}"),
                format!("南 {flat}"),
                format!("东 {flat}"),
                format!("西 {flat}"),
            ],
            zh_gold(flat),
            "zh",
        ));
        let (bq, bc) = if LOW_BLEU.contains(&flat) {
            (
                "Entirely unrelated replacement prose that shares no vocabulary with the source material at all".to_string(),
                [
                    "crimson".to_string(),
                    "verdant".to_string(),
                    "azure".to_string(),
                    "amber".to_string(),
                ],
            )
        } else {
            (
                format!("Which option indicates marker {flat} in {subj}?"),
                en_choices(flat),
            )
        };
        back.push(json_item(&id, &subj, &bq, bc, en_gold(flat), "en"));
    }
    write_lines(&dir.join("items_en.jsonl"), &en);
    write_lines(&dir.join("items_zh.jsonl"), &zh);
    write_lines(&dir.join("items_back.jsonl"), &back);

    // naturalized rewrites of the first 60 translated items; every choice
    // arrives with a stacked canonical label, the defect the builder strips
    let mut nat = Vec::new();
    for flat in 0..N_NATURALIZED {
        let id = item_id(flat);
        let subj = subject(flat);
        let choices = [
            format!("A. 北面 {flat}"),
            format!("B. 南面 {flat}"),
            format!("C. 东面 {flat}"),
            format!("D. 西面 {flat}"),
        ];
        nat.push(json_item(
            &id,
            &subj,
            &format!("{subj}的标记{flat}对应哪个选项？"),
            choices,
            zh_gold(flat),
            "zh",
        ));
    }
    write_lines(&dir.join("items_naturalized.jsonl"), &nat);

    let mut control = Vec::new();
    for j in 0..N_CONTROL {
        control.push(json_item(
            &format!("ctrl_{j:03}"),
            &format!("ctrl_subject_{:02}", j % 10),
            &format!("控制题目{j}的正确选项是？"),
            [
                format!("甲 {j}"),
                format!("乙 {j}"),
                format!("丙 {j}"),
                format!("丁 {j}"),
            ],
            j % 4,
            "zh",
        ));
    }
    write_lines(&dir.join("items_control.jsonl"), &control);
}

fn mock_line(model: &str, item_id: &str, condition: &str, response: &str) -> String {
    serde_json::json!({
        "model": model,
        "item_id": item_id,
        "condition": condition,
        "response": response,
    })
    .to_string()
}

/// Deterministic canned responses. Each model misses a different slice of
/// items per condition, a few responses are empty (parser failures), and
/// some answers arrive wrapped in prose to exercise the extractor.
pub fn write_mock_responses(dir: &Path) {
    let mut lines = Vec::new();
    for (mi, (model, _)) in MODELS.iter().enumerate() {
        for flat in 0..N_ITEMS {
            let id = item_id(flat);

            // original side
            let en = if flat % 37 == mi {
                String::new()
            } else {
                let gold = en_gold(flat);
                let idx = if flat % 9 == mi { (gold + 1) % 4 } else { gold };
                render_answer(flat, LETTERS[idx])
            };
            lines.push(mock_line(model, &id, "original_en", &en));

            // back-translated side
            let back = if flat % 41 == mi {
                String::new()
            } else {
                let gold = en_gold(flat);
                let idx = if flat % 11 == mi * 2 { (gold + 2) % 4 } else { gold };
                render_answer(flat + 1, LETTERS[idx])
            };
            lines.push(mock_line(model, &id, "back_translated", &back));

            // translated side (correctness judged against the zh gold)
            let zh = if flat % 43 == mi {
                String::new()
            } else {
                let gold = zh_gold(flat);
                let idx = if flat % 13 == mi { (gold + 3) % 4 } else { gold };
                render_answer(flat + 2, LETTERS[idx])
            };
            lines.push(mock_line(model, &id, "translated", &zh));
        }

        // naturalized subset; one model loses its format crutch
        for flat in 0..N_NATURALIZED {
            let id = item_id(flat);
            let response = if *model == "glm-4.5" {
                if flat % 3 == 0 {
                    LETTERS[zh_gold(flat)].to_string()
                } else {
                    String::new()
                }
            } else {
                let gold = zh_gold(flat);
                let idx = if flat % 7 == mi { (gold + 1) % 4 } else { gold };
                render_answer(flat + 3, LETTERS[idx])
            };
            lines.push(mock_line(model, &id, "naturalized", &response));
        }

        // native control set
        for j in 0..N_CONTROL {
            let id = format!("ctrl_{j:03}");
            let response = if j % 29 == mi {
                String::new()
            } else {
                let gold = j % 4;
                let idx = if j % (6 + mi) == 0 { (gold + 1) % 4 } else { gold };
                render_answer(j, LETTERS[idx])
            };
            lines.push(mock_line(model, &id, "original_en", &response));
        }
    }
    write_lines(&dir.join("mock_responses.jsonl"), &lines);
}

fn render_answer(salt: usize, letter: char) -> String {
    match salt % 5 {
        0 => format!("I think the answer is ({letter}) based on the marker."),
        1 => format!("{letter}."),
        2 => format!("**{letter}**"),
        3 => format!("Answer: {letter}"),
        _ => letter.to_string(),
    }
}

pub fn write_annotations(dir: &Path) {
    // 26 QC-passed items, cue scores cycling 1..5
    let pass_ids: Vec<String> = (0..N_ITEMS)
        .filter(|flat| !LOW_BLEU.contains(flat))
        .map(item_id)
        .take(26)
        .collect();
    let lines: Vec<String> = pass_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            serde_json::json!({
                "item_id": id,
                "cue_score": (i % 5) + 1,
                "cultural_residue": (i % 3) + 1,
                "syntactic_residue": ((i + 2) % 5) + 1,
                "annotator": "rubric_v1",
            })
            .to_string()
        })
        .collect();
    write_lines(&dir.join("annotations.jsonl"), &lines);
}

/// Two coder sheets over 50 naturalized items realizing the 2x2 table
/// (both pass 46, first-only 3, second-only 0, both fail 1).
pub fn write_qc_sheets(dir: &Path) {
    let header = "item_id\tsemantic\tdifficulty\tanswer_key_preserved\toption_order_preserved\tcue_removal\trewrite_risk\tcoder\tnotes";
    let mut sheet1 = vec![header.to_string()];
    let mut sheet2 = vec![header.to_string()];
    for i in 0..50 {
        let id = item_id(i);
        let s1 = if i == 49 { 3 } else { 5 };
        sheet1.push(format!("{id}\t{s1}\t5\ttrue\ttrue\t5\t1\thuman_1\t"));
        let (s2, risk2, note) = if i == 49 {
            (3, 1, "dropped the statement list")
        } else if i >= 46 {
            (5, 4, "rewrite went beyond surface form")
        } else {
            (5, 1, "")
        };
        sheet2.push(format!("{id}\t{s2}\t5\ttrue\ttrue\t5\t{risk2}\thuman_2\t{note}"));
    }
    write_lines(&dir.join("qc_sheet_1.tsv"), &sheet1);
    write_lines(&dir.join("qc_sheet_2.tsv"), &sheet2);
}

pub fn write_config(dir: &Path, out_dir: &Path) -> PathBuf {
    let config = format!(
        r#"benchmark = "mmlu_zh_sample"

[paths]
out_dir = "{out}"
items_en = "{dir}/items_en.jsonl"
items_zh = "{dir}/items_zh.jsonl"
items_back = "{dir}/items_back.jsonl"
items_naturalized = "{dir}/items_naturalized.jsonl"
items_control = "{dir}/items_control.jsonl"
annotations = "{dir}/annotations.jsonl"
mock_responses = "{dir}/mock_responses.jsonl"
qc_sheet_1 = "{dir}/qc_sheet_1.tsv"
qc_sheet_2 = "{dir}/qc_sheet_2.tsv"

[models]
group_a = ["gpt-4o", "gpt-4o-mini"]
group_b = ["deepseek-chat", "glm-4.5"]
group_c = []

[sampling]
per_subject = 4
seed = 42

[qc]
bleu_threshold = 0.30

[inference]
b_e1 = 2000
b_e4 = 500
seed = 42
ci_level = 0.95

[e4]
outlier_threshold = 0.80

[e1_sensitivity]
drop_model = "gpt-4o-mini"
restrict_benchmark = "mmlu_zh_sample"

[provider]
kind = "mock"
parallelism = 2
retry_budget = 3
max_tokens = 64
temperature = 0.0

[prompt]
strip_leading_labels = true
"#,
        out = out_dir.display(),
        dir = dir.display(),
    );
    let path = dir.join("ttaudit.toml");
    fs::write(&path, config).unwrap();
    path
}

/// Write the whole fixture tree and the config; returns the config path.
pub fn build_fixture(dir: &Path, out_dir: &Path) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    fs::create_dir_all(out_dir).unwrap();
    write_item_files(dir);
    write_mock_responses(dir);
    write_annotations(dir);
    write_qc_sheets(dir);
    write_config(dir, out_dir)
}

pub struct CliOutput {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(config: &Path, args: &[&str]) -> CliOutput {
    let output = Command::new(env!("CARGO_BIN_EXE_ttaudit"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs");
    CliOutput {
        status: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

pub fn run_cli_ok(config: &Path, args: &[&str]) -> CliOutput {
    let out = run_cli(config, args);
    assert_eq!(
        out.status, 0,
        "`{args:?}` failed\nstdout: {}\nstderr: {}",
        out.stdout, out.stderr
    );
    out
}

/// Execute every pipeline stage in order against the fixture.
pub fn run_full_pipeline(config: &Path) {
    run_cli_ok(config, &["sample", "--target", "original-en"]);
    run_cli_ok(config, &["triples"]);
    run_cli_ok(config, &["qc"]);
    run_cli_ok(config, &["audit"]);
    for target in [
        "original-en",
        "translated",
        "back-translated",
        "naturalized",
        "control",
    ] {
        run_cli_ok(config, &["score", "--target", target]);
    }
    run_cli_ok(config, &["e1"]);
    run_cli_ok(config, &["e2"]);
    run_cli_ok(config, &["e3"]);
    run_cli_ok(config, &["e4"]);
    run_cli_ok(config, &["qc-merge"]);
    run_cli_ok(config, &["report"]);
    run_cli_ok(config, &["checklist"]);
}

/// Sorted (relative path, bytes) of every file under a directory tree.
pub fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    let mut entries = Vec::new();
    walk(dir, dir, &mut entries);
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

/// Reconstruct a paired set from cell marginals: total n, original-side
/// correct count, and discordant counts.
pub fn paired_set_from_marginals(
    benchmark: &str,
    model: &str,
    n: usize,
    en_correct: usize,
    pos: usize,
    neg: usize,
) -> ttaudit::scoring::PairedSet {
    use ttaudit::scoring::{Pair, PairedSet};
    let both_correct = en_correct - pos;
    let both_wrong = n - pos - neg - both_correct;
    let mut pairs = Vec::with_capacity(n);
    let mut push = |k: usize, ce: bool, cb: bool, tag: &str| {
        for i in 0..k {
            pairs.push(Pair {
                item_id: format!("{benchmark}_{tag}_{i:04}"),
                correct_en: ce,
                correct_back: cb,
            });
        }
    };
    push(pos, true, false, "pos");
    push(neg, false, true, "neg");
    push(both_correct, true, true, "bc");
    push(both_wrong, false, false, "bw");
    assert_eq!(pairs.len(), n);
    PairedSet {
        model: model.to_string(),
        benchmark: benchmark.to_string(),
        pairs,
        n,
    }
}
