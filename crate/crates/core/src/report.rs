//! Run configuration, evidence-file emission, forest-plot data, and the
//! reporting checklist.
//!
//! Every output is plain structured text (line-delimited JSON, tab-separated
//! tables, markdown) so audit artifacts diff cleanly, and none carries a
//! timestamp: identical config and fixtures give byte-identical files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::estimators::CellResult;
use crate::natqc::MergeReport;
use crate::prompting::{PromptConfig, DEFAULT_INSTRUCTION};
use crate::qc::AlignmentReport;
use crate::scoring::Group;

/// Evidence file names under the output directory.
pub mod files {
    pub const SAMPLED_ITEMS: &str = "sampled_items.jsonl";
    pub const TRIPLES: &str = "triples.jsonl";
    pub const TRIPLES_MISSING: &str = "triples_missing.json";
    pub const TRIPLES_QC: &str = "triples_qc.jsonl";
    pub const QC_SUMMARY: &str = "qc_summary.json";
    pub const ALIGNMENT_AUDIT: &str = "alignment_audit.json";
    pub const E1_CELLS: &str = "e1_cells.jsonl";
    pub const E1_CLUSTERED: &str = "e1_clustered.json";
    pub const E1_GAPS: &str = "e1_coverage_gaps.json";
    pub const FOREST: &str = "forest_tt_back.tsv";
    pub const E2_CALIBRATION: &str = "e2_calibration.jsonl";
    pub const E3_CONTROL: &str = "e3_control.jsonl";
    pub const E3_SKIPPED: &str = "e3_skipped.json";
    pub const E4_RESULTS: &str = "e4_results.json";
    pub const E4_STRATA: &str = "e4_strata.tsv";
    pub const E4_INTERSECTION: &str = "e4_intersection.json";
    pub const QC_MERGE: &str = "qc_merge.json";
    pub const RUN_SUMMARY: &str = "run_summary.json";
    pub const CHECKLIST: &str = "checklist.md";

    pub fn records(condition_or_set: &str) -> String {
        format!("records_{condition_or_set}.jsonl")
    }
}

/// Models with parser validity below this are flagged in the checklist.
pub const VALIDITY_FLAG_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Benchmark label stamped on every cell.
    pub benchmark: String,
    pub paths: PathsConfig,
    pub models: ModelsConfig,
    pub sampling: SamplingConfig,
    pub qc: QcGateConfig,
    pub inference: InferenceConfig,
    pub e4: E4Config,
    pub e1_sensitivity: E1SensitivityConfig,
    pub provider: ProviderConfig,
    pub prompt: PromptSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            benchmark: "benchmark".to_string(),
            paths: PathsConfig::default(),
            models: ModelsConfig::default(),
            sampling: SamplingConfig::default(),
            qc: QcGateConfig::default(),
            inference: InferenceConfig::default(),
            e4: E4Config::default(),
            e1_sensitivity: E1SensitivityConfig::default(),
            provider: ProviderConfig::default(),
            prompt: PromptSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    pub items_en: Option<PathBuf>,
    pub items_zh: Option<PathBuf>,
    pub items_back: Option<PathBuf>,
    pub items_naturalized: Option<PathBuf>,
    pub items_control: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub mock_responses: Option<PathBuf>,
    pub qc_sheet_1: Option<PathBuf>,
    pub qc_sheet_2: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelsConfig {
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
    pub group_c: Vec<String>,
}

impl ModelsConfig {
    pub fn group_of(&self, model: &str) -> Option<Group> {
        if self.group_a.iter().any(|m| m == model) {
            Some(Group::A)
        } else if self.group_b.iter().any(|m| m == model) {
            Some(Group::B)
        } else if self.group_c.iter().any(|m| m == model) {
            Some(Group::C)
        } else {
            None
        }
    }

    pub fn all(&self) -> Vec<(String, Group)> {
        let mut out = Vec::new();
        for m in &self.group_a {
            out.push((m.clone(), Group::A));
        }
        for m in &self.group_b {
            out.push((m.clone(), Group::B));
        }
        for m in &self.group_c {
            out.push((m.clone(), Group::C));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub per_subject: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            per_subject: 4,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QcGateConfig {
    pub bleu_threshold: f64,
}

impl Default for QcGateConfig {
    fn default() -> Self {
        QcGateConfig {
            bleu_threshold: crate::qc::DEFAULT_BLEU_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub b_e1: usize,
    pub b_e4: usize,
    pub seed: u64,
    pub ci_level: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            b_e1: 10_000,
            b_e4: 2_000,
            seed: 42,
            ci_level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct E4Config {
    pub outlier_threshold: f64,
}

impl Default for E4Config {
    fn default() -> Self {
        E4Config {
            outlier_threshold: 0.80,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct E1SensitivityConfig {
    pub drop_model: Option<String>,
    pub restrict_benchmark: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub parallelism: usize,
    pub retry_budget: usize,
    pub max_tokens: usize,
    pub temperature: f64,
    /// Name of the environment variable holding the API key. Credentials
    /// never live in the config file.
    pub api_key_env: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            endpoint: String::new(),
            parallelism: 4,
            retry_budget: 3,
            max_tokens: 64,
            temperature: 0.0,
            api_key_env: "TTAUDIT_API_KEY".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSettings {
    pub instruction_text: String,
    pub letters: String,
    pub strip_leading_labels: bool,
}

impl Default for PromptSettings {
    fn default() -> Self {
        PromptSettings {
            instruction_text: DEFAULT_INSTRUCTION.to_string(),
            letters: "ABCD".to_string(),
            strip_leading_labels: true,
        }
    }
}

impl PromptSettings {
    pub fn to_prompt_config(&self) -> PromptConfig {
        PromptConfig {
            instruction_text: self.instruction_text.clone(),
            letter_set: self.letters.chars().collect(),
            strip_leading_labels: self.strip_leading_labels,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let content = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
        let config: RunConfig = toml::from_str(&content)
            .map_err(|e| AuditError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(AuditError::Config(format!(
                    "{name} must lie in [0,1], got {v}"
                )));
            }
            Ok(())
        };
        in_unit("qc.bleu_threshold", self.qc.bleu_threshold)?;
        in_unit("e4.outlier_threshold", self.e4.outlier_threshold)?;
        if self.inference.b_e1 == 0 || self.inference.b_e4 == 0 {
            return Err(AuditError::Config(
                "inference.b_e1 and inference.b_e4 must be at least 1".to_string(),
            ));
        }
        if !(self.inference.ci_level > 0.0 && self.inference.ci_level < 1.0) {
            return Err(AuditError::Config(format!(
                "inference.ci_level must lie in (0,1), got {}",
                self.inference.ci_level
            )));
        }
        if self.sampling.per_subject == 0 {
            return Err(AuditError::Config(
                "sampling.per_subject must be at least 1".to_string(),
            ));
        }
        if self.prompt.letters.chars().count() != 4 {
            return Err(AuditError::Config(format!(
                "prompt.letters must contain 4 letters, got {:?}",
                self.prompt.letters
            )));
        }
        if self.provider.parallelism == 0 {
            return Err(AuditError::Config(
                "provider.parallelism must be at least 1".to_string(),
            ));
        }
        if self.provider.kind == ProviderKind::Http && self.provider.endpoint.is_empty() {
            return Err(AuditError::Config(
                "provider.kind = http requires provider.endpoint".to_string(),
            ));
        }
        Ok(())
    }
}

/// QC gate outcome persisted for downstream stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QcSummary {
    pub threshold: f64,
    pub n_total: usize,
    pub n_pass: usize,
    pub n_excluded: usize,
    pub pass_rate: f64,
    pub mean_bleu: f64,
    pub pass_ids: Vec<String>,
    pub excluded_ids: Vec<String>,
}

const FOREST_HEADER: &str = "benchmark\tmodel\tpoint\tlo\thi\tn\tpos\tneg\tsign_p";

/// One row per cell: benchmark, model, point, interval, n, discordant
/// counts, sign p. Empty cells keep blank estimate fields.
pub fn emit_forest_data(cells: &[CellResult]) -> String {
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(FOREST_HEADER);
    out.push('\n');
    for cell in cells {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            cell.benchmark,
            cell.model,
            fmt(cell.tt_back.as_ref().map(|e| e.point)),
            fmt(cell.tt_back.as_ref().map(|e| e.lo)),
            fmt(cell.tt_back.as_ref().map(|e| e.hi)),
            cell.n,
            cell.pos,
            cell.neg,
            fmt(cell.sign_p),
        ));
    }
    out
}

/// A parsed forest row; estimate fields are absent for empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestRow {
    pub benchmark: String,
    pub model: String,
    pub point: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub n: usize,
    pub pos: usize,
    pub neg: usize,
    pub sign_p: Option<f64>,
}

pub fn parse_forest_data(content: &str) -> Result<Vec<ForestRow>> {
    let mut lines = content.lines();
    match lines.next() {
        Some(h) if h == FOREST_HEADER => {}
        other => {
            return Err(AuditError::Data(format!(
                "bad forest header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| AuditError::Data(format!("bad number {s:?}: {e}")))
        }
    };
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(AuditError::Data(format!(
                "forest row needs 9 fields, found {}",
                f.len()
            )));
        }
        rows.push(ForestRow {
            benchmark: f[0].to_string(),
            model: f[1].to_string(),
            point: parse_opt(f[2])?,
            lo: parse_opt(f[3])?,
            hi: parse_opt(f[4])?,
            n: f[5].parse().map_err(|e| AuditError::Data(format!("bad n: {e}")))?,
            pos: f[6].parse().map_err(|e| AuditError::Data(format!("bad pos: {e}")))?,
            neg: f[7].parse().map_err(|e| AuditError::Data(format!("bad neg: {e}")))?,
            sign_p: parse_opt(f[8])?,
        });
    }
    Ok(rows)
}

/// Provenance line for one analysis: method, resamples, seed, level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceLine {
    pub analysis: String,
    pub method: String,
    pub b: usize,
    pub seed: u64,
    pub level: f64,
}

/// Everything the checklist synthesizer looks at. Fields are optional:
/// absence drives the REPORTED / UNREPORTED / N/A status per item.
#[derive(Debug, Clone, Default)]
pub struct ChecklistInputs {
    pub estimators_run: BTreeSet<String>,
    pub qc_threshold: Option<f64>,
    pub qc_pass: Option<(usize, usize)>,
    pub audit: Option<AlignmentReport>,
    /// (record set label, model, validity)
    pub validity: Vec<(String, String, f64)>,
    /// (benchmark, model, n)
    pub pairing_cells: Vec<(String, String, usize)>,
    pub provenance: Vec<ProvenanceLine>,
    pub cluster_unit: Option<String>,
    pub subgroup_contrasts: Vec<String>,
    pub outlier_rule: Option<String>,
    pub human_qc: Option<MergeReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Reported,
    Unreported,
    NotApplicable,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Reported => "REPORTED",
            Status::Unreported => "UNREPORTED",
            Status::NotApplicable => "N/A",
        }
    }
}

fn estimator_scope(name: &str) -> &'static str {
    match name {
        "e1" => "round-trip contrast on the same items; assumes back-translation noise is small, so the gap is an upper-bound proxy",
        "e2" => "rank correlation between annotated cue scores and per-item paired signal; assumes the rubric captures exploitable cues",
        "e3" => "aggregate contrast against a natively-sourced control; unmatched at item level, so content-distribution effects are not separable",
        "e4" => "same-item rewrite contrast holding answer, options, and content fixed; assumes the rewriter changes surface form only, gated by verifier and human QC",
        _ => "unknown estimator",
    }
}

/// Render the ten-item reporting checklist as markdown. The checklist
/// reports coverage; it never blocks a run.
pub fn emit_checklist(inputs: &ChecklistInputs) -> String {
    let e4_run = inputs.estimators_run.contains("e4");
    let e1_run = inputs.estimators_run.contains("e1");
    let mut out = String::from("# Reporting checklist\n");

    let mut section = |idx: usize, title: &str, status: Status, body: String| {
        out.push_str(&format!("\n## {idx}. {title} - {}\n", status.label()));
        if !body.is_empty() {
            out.push_str(&body);
            out.push('\n');
        }
    };

    // 1. estimator scope and identification assumptions
    {
        let status = if inputs.estimators_run.is_empty() {
            Status::Unreported
        } else {
            Status::Reported
        };
        let mut body = String::new();
        for e in &inputs.estimators_run {
            body.push_str(&format!("- {e}: {}\n", estimator_scope(e)));
        }
        section(1, "Estimator scope and identification assumptions", status, body);
    }

    // 2. QC pass rate and threshold
    {
        let (status, body) = match (inputs.qc_threshold, inputs.qc_pass) {
            (Some(t), Some((pass, total))) => (
                Status::Reported,
                format!(
                    "- threshold {t}; {pass}/{total} items pass ({:.1}%)\n",
                    100.0 * pass as f64 / total.max(1) as f64
                ),
            ),
            _ => (Status::Unreported, String::new()),
        };
        section(2, "QC pass rate and threshold", status, body);
    }

    // 3. alignment audit findings
    {
        let (status, body) = match &inputs.audit {
            Some(a) => (
                Status::Reported,
                format!(
                    "- {} items audited; id mismatches {}, choice-count mismatches {}, gold-index mismatches {} {:?}\n",
                    a.n_items,
                    a.id_mismatches.len(),
                    a.choice_count_mismatches.len(),
                    a.gold_index_mismatches.len(),
                    a.gold_index_mismatches,
                ),
            ),
            None => (Status::Unreported, String::new()),
        };
        section(3, "Alignment audit findings", status, body);
    }

    // 4. per-model parser validity with flagged models
    {
        let status = if inputs.validity.is_empty() {
            Status::Unreported
        } else {
            Status::Reported
        };
        let mut body = String::new();
        for (set, model, v) in &inputs.validity {
            let flag = if *v < VALIDITY_FLAG_THRESHOLD {
                " [FLAGGED]"
            } else {
                ""
            };
            body.push_str(&format!("- {set} / {model}: {v:.3}{flag}\n"));
        }
        section(4, "Per-model parser validity", status, body);
    }

    // 5. strict pairing definition and n per cell
    {
        let (status, body) = if !inputs.pairing_cells.is_empty() {
            let mut body = String::from(
                "- pairing: QC-passed items with a parsed letter on both sides\n",
            );
            for (bench, model, n) in &inputs.pairing_cells {
                body.push_str(&format!("- {bench} / {model}: n = {n}\n"));
            }
            (Status::Reported, body)
        } else if e1_run {
            (Status::Unreported, String::new())
        } else {
            (Status::NotApplicable, String::new())
        };
        section(5, "Strict-QC pairing definition and n per cell", status, body);
    }

    // 6. inference method, B, seed, CI level
    {
        let status = if inputs.provenance.is_empty() {
            Status::Unreported
        } else {
            Status::Reported
        };
        let mut body = String::new();
        for p in &inputs.provenance {
            body.push_str(&format!(
                "- {}: {} with B = {}, seed = {}, level = {}\n",
                p.analysis, p.method, p.b, p.seed, p.level
            ));
        }
        section(6, "Inference method, resamples, seed, CI level", status, body);
    }

    // 7. cluster unit for primary inference
    {
        let (status, body) = match &inputs.cluster_unit {
            Some(unit) => (Status::Reported, format!("- {unit}\n")),
            None if e1_run || e4_run => (Status::Unreported, String::new()),
            None => (Status::NotApplicable, String::new()),
        };
        section(7, "Cluster unit for primary inference", status, body);
    }

    // 8. subgroup and model-family contrasts
    {
        let status = if inputs.subgroup_contrasts.is_empty() {
            Status::Unreported
        } else {
            Status::Reported
        };
        let body = inputs
            .subgroup_contrasts
            .iter()
            .map(|c| format!("- {c}\n"))
            .collect();
        section(8, "Subgroup and model-family contrasts", status, body);
    }

    // 9. outlier exclusion rules and sensitivity
    {
        let (status, body) = if e4_run {
            match &inputs.outlier_rule {
                Some(rule) => (Status::Reported, format!("- {rule}\n")),
                None => (Status::Unreported, String::new()),
            }
        } else {
            (Status::NotApplicable, String::new())
        };
        section(9, "Outlier exclusion rules and sensitivity", status, body);
    }

    // 10. human QC coder count and agreement
    {
        let (status, body) = match &inputs.human_qc {
            Some(m) => (
                Status::Reported,
                format!(
                    "- 2 coders over {} items: agreement {:.2}, kappa {:.2}, intersection strict-pass n = {}\n",
                    m.n,
                    m.agreement,
                    m.kappa,
                    m.intersection_pass_ids.len()
                ),
            ),
            None if e4_run => (Status::Unreported, String::new()),
            None => (Status::NotApplicable, String::new()),
        };
        section(10, "Human QC coder count and agreement", status, body);
    }

    out
}

/// Gather checklist inputs from whatever evidence files exist in `out_dir`.
pub fn collect_checklist_inputs(out_dir: &Path) -> ChecklistInputs {
    let mut inputs = ChecklistInputs::default();

    if let Ok(content) = fs::read_to_string(out_dir.join(files::QC_SUMMARY)) {
        if let Ok(summary) = serde_json::from_str::<QcSummary>(&content) {
            inputs.qc_threshold = Some(summary.threshold);
            inputs.qc_pass = Some((summary.n_pass, summary.n_total));
        }
    }
    if let Ok(content) = fs::read_to_string(out_dir.join(files::ALIGNMENT_AUDIT)) {
        if let Ok(audit) = serde_json::from_str::<AlignmentReport>(&content) {
            inputs.audit = Some(audit);
        }
    }

    // validity per record set and model
    for set in ["original_en", "translated", "back_translated", "naturalized", "control"] {
        let path = out_dir.join(files::records(set));
        let Ok(records) = crate::scoring::load_records(&path) else {
            continue;
        };
        let mut by_model: std::collections::BTreeMap<String, (usize, usize)> = Default::default();
        for r in &records {
            let entry = by_model.entry(r.model.clone()).or_default();
            entry.1 += 1;
            if r.parsed.is_some() {
                entry.0 += 1;
            }
        }
        for (model, (parsed, total)) in by_model {
            inputs
                .validity
                .push((set.to_string(), model, parsed as f64 / total as f64));
        }
    }

    if let Ok(content) = fs::read_to_string(out_dir.join(files::E1_CELLS)) {
        inputs.estimators_run.insert("e1".to_string());
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            if let Ok(cell) = serde_json::from_str::<CellResult>(line) {
                if let Some(tt) = &cell.tt_back {
                    inputs.provenance.push(ProvenanceLine {
                        analysis: format!("e1 {} {}", cell.benchmark, cell.model),
                        method: "paired_bootstrap".to_string(),
                        b: tt.b,
                        seed: tt.seed,
                        level: tt.level,
                    });
                }
                inputs
                    .pairing_cells
                    .push((cell.benchmark.clone(), cell.model.clone(), cell.n));
            }
        }
    }
    if let Ok(content) = fs::read_to_string(out_dir.join(files::E1_CLUSTERED)) {
        if let Ok(clustered) = serde_json::from_str::<crate::estimators::ClusteredE1>(&content) {
            inputs.cluster_unit = Some(format!(
                "(benchmark, item) clusters for the primary estimate; {} clusters",
                clustered.n_clusters
            ));
            inputs.provenance.push(ProvenanceLine {
                analysis: "e1 clustered".to_string(),
                method: "cluster_bootstrap".to_string(),
                b: clustered.main.b,
                seed: clustered.main.seed,
                level: clustered.main.level,
            });
        }
    }
    if out_dir.join(files::E2_CALIBRATION).exists() {
        inputs.estimators_run.insert("e2".to_string());
    }
    if let Ok(content) = fs::read_to_string(out_dir.join(files::E3_CONTROL)) {
        inputs.estimators_run.insert("e3".to_string());
        let mut models = Vec::new();
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            if let Ok(r) = serde_json::from_str::<crate::estimators::E3Result>(line) {
                models.push(r.model.clone());
                inputs.provenance.push(ProvenanceLine {
                    analysis: format!("e3 {}", r.model),
                    method: "unpaired_bootstrap + wilson".to_string(),
                    b: r.gap.b,
                    seed: r.gap.seed,
                    level: r.gap.level,
                });
            }
        }
        if !models.is_empty() {
            inputs
                .subgroup_contrasts
                .push(format!("control-set gaps per model: {}", models.join(", ")));
        }
    }
    if let Ok(content) = fs::read_to_string(out_dir.join(files::E4_RESULTS)) {
        if let Ok(summary) = serde_json::from_str::<crate::estimators::E4Summary>(&content) {
            inputs.estimators_run.insert("e4".to_string());
            inputs.outlier_rule = Some(format!(
                "models under naturalized parser validity {} excluded from the main pooled/DiD estimates: {:?}",
                summary.outlier_threshold, summary.excluded_models
            ));
            if let Some(pooled) = &summary.pooled_main {
                inputs.provenance.push(ProvenanceLine {
                    analysis: "e4 pooled".to_string(),
                    method: "cluster_bootstrap".to_string(),
                    b: pooled.b,
                    seed: pooled.seed,
                    level: pooled.level,
                });
            }
            if summary.did.is_some() {
                inputs
                    .subgroup_contrasts
                    .push("group A - group B naturalization difference-in-differences".to_string());
            }
            if inputs.cluster_unit.is_none() {
                inputs.cluster_unit =
                    Some("item clusters for the naturalization contrast".to_string());
            }
        }
    }
    if let Ok(content) = fs::read_to_string(out_dir.join(files::QC_MERGE)) {
        if let Ok(merge) = serde_json::from_str::<MergeReport>(&content) {
            inputs.human_qc = Some(merge);
        }
    }
    inputs
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut content = serde_json::to_string_pretty(value)
        .map_err(|e| AuditError::Data(format!("serialization failed: {e}")))?;
    content.push('\n');
    fs::write(path, content).map_err(|e| AuditError::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut out = String::new();
    for v in values {
        out.push_str(
            &serde_json::to_string(v)
                .map_err(|e| AuditError::Data(format!("serialization failed: {e}")))?,
        );
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| AuditError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{CiMethod, EstimateCI};

    fn cell(benchmark: &str, model: &str, n: usize, point: f64) -> CellResult {
        CellResult {
            benchmark: benchmark.into(),
            model: model.into(),
            n,
            acc_en: Some(0.8),
            acc_back: Some(0.8 - point),
            tt_back: Some(EstimateCI {
                point,
                lo: point - 0.04,
                hi: point + 0.04,
                level: 0.95,
                method: CiMethod::PairedBootstrap,
                b: 1000,
                seed: 42,
            }),
            pos: 5,
            neg: 3,
            sign_p: Some(0.7),
        }
    }

    fn empty_cell() -> CellResult {
        CellResult {
            benchmark: "b".into(),
            model: "empty".into(),
            n: 0,
            acc_en: None,
            acc_back: None,
            tt_back: None,
            pos: 0,
            neg: 0,
            sign_p: None,
        }
    }

    #[test]
    fn forest_has_one_row_per_cell_with_fixed_header() {
        let cells: Vec<CellResult> = (0..6)
            .map(|i| cell(if i < 3 { "bench1" } else { "bench2" }, &format!("m{i}"), 100 + i, 0.01 * i as f64))
            .collect();
        let tsv = emit_forest_data(&cells);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], FOREST_HEADER);
    }

    #[test]
    fn empty_cells_keep_blank_interval_fields() {
        let tsv = emit_forest_data(&[empty_cell()]);
        let row = tsv.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split('\t').collect();
        assert_eq!(fields[2], "");
        assert_eq!(fields[3], "");
        assert_eq!(fields[4], "");
        assert_eq!(fields[5], "0");
        assert_eq!(fields[8], "");
    }

    #[test]
    fn forest_round_trips() {
        let cells = vec![cell("b1", "m1", 209, 0.029), empty_cell()];
        let tsv = emit_forest_data(&cells);
        let rows = parse_forest_data(&tsv).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].point, Some(0.029));
        assert_eq!(rows[0].n, 209);
        assert_eq!(rows[1].point, None);
        // parse -> emit equivalence on the parsed values
        let reparsed = parse_forest_data(&tsv).unwrap();
        assert_eq!(rows, reparsed);
    }

    #[test]
    fn default_config_is_valid_and_matches_documented_defaults() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.qc.bleu_threshold, 0.30);
        assert_eq!(config.inference.b_e1, 10_000);
        assert_eq!(config.inference.b_e4, 2_000);
        assert_eq!(config.inference.seed, 42);
        assert_eq!(config.inference.ci_level, 0.95);
        assert_eq!(config.e4.outlier_threshold, 0.80);
        assert_eq!(config.sampling.per_subject, 4);
        assert_eq!(config.sampling.seed, 42);
    }

    #[test]
    fn config_rejects_out_of_range_values() {
        let mut config = RunConfig::default();
        config.qc.bleu_threshold = 1.5;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.inference.b_e1 = 0;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.prompt.letters = "AB".into();
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_loads_from_toml_with_partial_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "benchmark = \"mmlu_zh_sample\"\n[inference]\nb_e1 = 500\n[models]\ngroup_a = [\"m1\"]\n",
        )
        .unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.benchmark, "mmlu_zh_sample");
        assert_eq!(config.inference.b_e1, 500);
        assert_eq!(config.inference.b_e4, 2000);
        assert_eq!(config.models.group_of("m1"), Some(Group::A));
        assert_eq!(config.models.group_of("nope"), None);
    }

    #[test]
    fn checklist_covers_e1_e3_runs_with_trailing_na() {
        let mut inputs = ChecklistInputs::default();
        inputs.estimators_run.insert("e1".into());
        inputs.estimators_run.insert("e3".into());
        inputs.qc_threshold = Some(0.3);
        inputs.qc_pass = Some((213, 228));
        inputs.audit = Some(AlignmentReport {
            n_items: 228,
            ..Default::default()
        });
        inputs.validity.push(("translated".into(), "m1".into(), 0.99));
        inputs.pairing_cells.push(("b".into(), "m1".into(), 209));
        inputs.provenance.push(ProvenanceLine {
            analysis: "e1".into(),
            method: "paired_bootstrap".into(),
            b: 10_000,
            seed: 42,
            level: 0.95,
        });
        inputs.cluster_unit = Some("(benchmark, item)".into());
        inputs.subgroup_contrasts.push("per-model control gaps".into());
        let md = emit_checklist(&inputs);
        for i in 1..=8 {
            assert!(md.contains(&format!("## {i}. ")), "missing section {i}");
        }
        assert_eq!(md.matches("- REPORTED").count(), 8, "{md}");
        assert_eq!(md.matches("- N/A").count(), 2);
        assert_eq!(md.matches("- UNREPORTED").count(), 0);
    }

    #[test]
    fn checklist_flags_low_validity_models() {
        let mut inputs = ChecklistInputs::default();
        inputs.validity.push(("translated".into(), "fragile".into(), 0.825));
        inputs.validity.push(("translated".into(), "solid".into(), 0.998));
        let md = emit_checklist(&inputs);
        assert!(md.contains("fragile: 0.825 [FLAGGED]"));
        assert!(!md.contains("solid: 0.998 [FLAGGED]"));
    }

    #[test]
    fn checklist_marks_missing_human_qc_unreported_when_e4_ran() {
        let mut inputs = ChecklistInputs::default();
        inputs.estimators_run.insert("e4".into());
        inputs.outlier_rule = Some("threshold 0.8".into());
        let md = emit_checklist(&inputs);
        let section10 = md.split("## 10.").nth(1).unwrap();
        assert!(section10.contains("UNREPORTED"));
    }
}
