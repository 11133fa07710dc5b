//! Command-line driver. Every subcommand reads and writes only the files
//! named in the run config, and identical config plus fixtures give
//! byte-identical outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use crate::corpus::{
    build_triples, load_items, load_triples, save_items, save_triples, stratified_sample,
    Condition, SampleSpec,
};
use crate::error::{AuditError, Result};
use crate::estimators::{
    run_e1, run_e1_clustered, run_e2, run_e3, run_e4, strata_from_records, Stratum,
};
use crate::natqc::{load_annotations, load_sheet, merge_coders, qc_sensitivity};
use crate::qc::{apply_qc, audit_alignment, score_triples};
use crate::report::{self, files, QcSummary, RunConfig};
use crate::scoring::{
    load_records, pair_strict, save_records, score_items, DecodingParams, HttpProvider,
    MockProvider, ModelProvider, PairedSet, ScoreOptions, ScoreRecord,
};

#[derive(Parser)]
#[command(
    name = "ttaudit",
    version,
    about = "Audit harness for translation artifacts in translated multiple-choice benchmarks"
)]
struct Cli {
    /// Run configuration file
    #[arg(long, global = true, default_value = "ttaudit.toml")]
    config: PathBuf,
    /// Override the configured output directory
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Which item file a scoring or sampling run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    OriginalEn,
    Translated,
    BackTranslated,
    Naturalized,
    Control,
}

impl Target {
    fn condition(self) -> Condition {
        match self {
            Target::OriginalEn | Target::Control => Condition::OriginalEn,
            Target::Translated => Condition::Translated,
            Target::BackTranslated => Condition::BackTranslated,
            Target::Naturalized => Condition::Naturalized,
        }
    }

    fn records_label(self) -> &'static str {
        match self {
            Target::OriginalEn => "original_en",
            Target::Translated => "translated",
            Target::BackTranslated => "back_translated",
            Target::Naturalized => "naturalized",
            Target::Control => "control",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw the stratified per-subject sample from an item file
    Sample {
        #[arg(long, value_enum, default_value = "original-en")]
        target: Target,
        /// Item file override (defaults to the configured path for the target)
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Align original, translated, and back-translated item files by id
    Triples,
    /// Score back-translations and partition triples at the QC threshold
    Qc {
        /// Threshold override
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run the triple-alignment audit
    Audit,
    /// Score items against configured models via the provider
    Score {
        #[arg(long, value_enum)]
        target: Target,
        /// Comma-separated subset of configured models
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
    },
    /// Back-translation contrast: per-cell estimates plus clustered summary
    E1,
    /// Annotation calibration: cue score vs paired signal per model
    E2,
    /// Non-translation control contrast per model
    E3,
    /// Naturalization contrast with strata, DiD, and leave-one-out
    E4,
    /// Merge two coder QC sheets and rerun the contrast on the intersection
    QcMerge {
        #[arg(long)]
        sheet1: Option<PathBuf>,
        #[arg(long)]
        sheet2: Option<PathBuf>,
    },
    /// Regenerate forest data and the run summary from emitted evidence
    Report,
    /// Synthesize the reporting checklist from emitted evidence
    Checklist,
}

/// Parse and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(out_dir) = cli.out_dir {
        config.paths.out_dir = out_dir;
    }
    fs::create_dir_all(&config.paths.out_dir)
        .map_err(|e| AuditError::io(&config.paths.out_dir, e))?;
    match cli.command {
        Command::Sample { target, input } => cmd_sample(&config, target, input),
        Command::Triples => cmd_triples(&config),
        Command::Qc { threshold } => cmd_qc(&config, threshold),
        Command::Audit => cmd_audit(&config),
        Command::Score { target, models } => cmd_score(&config, target, &models),
        Command::E1 => cmd_e1(&config),
        Command::E2 => cmd_e2(&config),
        Command::E3 => cmd_e3(&config),
        Command::E4 => cmd_e4(&config),
        Command::QcMerge { sheet1, sheet2 } => cmd_qc_merge(&config, sheet1, sheet2),
        Command::Report => cmd_report(&config),
        Command::Checklist => cmd_checklist(&config),
    }
}

fn items_path(config: &RunConfig, target: Target) -> Result<PathBuf> {
    let path = match target {
        Target::OriginalEn => &config.paths.items_en,
        Target::Translated => &config.paths.items_zh,
        Target::BackTranslated => &config.paths.items_back,
        Target::Naturalized => &config.paths.items_naturalized,
        Target::Control => &config.paths.items_control,
    };
    path.clone().ok_or_else(|| {
        AuditError::Config(format!(
            "no item file configured for target {:?}",
            target.records_label()
        ))
    })
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.paths.out_dir.join(name)
}

fn cmd_sample(config: &RunConfig, target: Target, input: Option<PathBuf>) -> Result<()> {
    let path = match input {
        Some(p) => p,
        None => items_path(config, target)?,
    };
    let items = load_items(&path, target.condition())?;
    let spec = SampleSpec::new(config.sampling.per_subject, config.sampling.seed)?;
    let sample = stratified_sample(&items, &spec);
    let out = out_path(config, files::SAMPLED_ITEMS);
    save_items(&out, &sample)?;
    println!("sampled {} of {} items -> {}", sample.len(), items.len(), out.display());
    Ok(())
}

fn cmd_triples(config: &RunConfig) -> Result<()> {
    let en = load_items(&items_path(config, Target::OriginalEn)?, Condition::OriginalEn)?;
    let zh = load_items(&items_path(config, Target::Translated)?, Condition::Translated)?;
    let back = load_items(
        &items_path(config, Target::BackTranslated)?,
        Condition::BackTranslated,
    )?;
    let (triples, missing) = build_triples(&en, &zh, &back)?;
    save_triples(&out_path(config, files::TRIPLES), &triples)?;
    report::write_json(&out_path(config, files::TRIPLES_MISSING), &missing)?;
    println!(
        "aligned {} triples; missing ids: en {}, zh {}, back {}",
        triples.len(),
        missing.missing_from_en.len(),
        missing.missing_from_zh.len(),
        missing.missing_from_back.len()
    );
    Ok(())
}

fn cmd_qc(config: &RunConfig, threshold: Option<f64>) -> Result<()> {
    let threshold = threshold.unwrap_or(config.qc.bleu_threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(AuditError::Config(format!(
            "QC threshold must lie in [0,1], got {threshold}"
        )));
    }
    let mut triples = load_triples(&out_path(config, files::TRIPLES))?;
    score_triples(&mut triples)?;
    let (pass, excluded) = apply_qc(&triples, threshold)?;
    let mean_bleu = crate::inference::mean(
        &triples.iter().map(|t| t.bleu.unwrap_or(0.0)).collect::<Vec<_>>(),
    );
    let summary = QcSummary {
        threshold,
        n_total: triples.len(),
        n_pass: pass.len(),
        n_excluded: excluded.len(),
        pass_rate: pass.len() as f64 / triples.len().max(1) as f64,
        mean_bleu,
        pass_ids: pass.iter().map(|t| t.id.clone()).collect(),
        excluded_ids: excluded.iter().map(|t| t.id.clone()).collect(),
    };
    let mut gated = pass;
    gated.extend(excluded);
    gated.sort_by(|a, b| a.id.cmp(&b.id));
    save_triples(&out_path(config, files::TRIPLES_QC), &gated)?;
    report::write_json(&out_path(config, files::QC_SUMMARY), &summary)?;
    println!(
        "QC at {threshold}: {}/{} pass (mean BLEU {:.3})",
        summary.n_pass, summary.n_total, summary.mean_bleu
    );
    Ok(())
}

fn cmd_audit(config: &RunConfig) -> Result<()> {
    let qc_path = out_path(config, files::TRIPLES_QC);
    let triples = if qc_path.exists() {
        load_triples(&qc_path)?
    } else {
        load_triples(&out_path(config, files::TRIPLES))?
    };
    let report_data = audit_alignment(&triples);
    report::write_json(&out_path(config, files::ALIGNMENT_AUDIT), &report_data)?;
    println!(
        "audited {} triples: {} id, {} choice-count, {} gold-index mismatches",
        report_data.n_items,
        report_data.id_mismatches.len(),
        report_data.choice_count_mismatches.len(),
        report_data.gold_index_mismatches.len()
    );
    Ok(())
}

fn make_provider(config: &RunConfig) -> Result<Box<dyn ModelProvider>> {
    match config.provider.kind {
        report::ProviderKind::Mock => {
            let path = config.paths.mock_responses.clone().ok_or_else(|| {
                AuditError::Config(
                    "provider.kind = mock requires paths.mock_responses".to_string(),
                )
            })?;
            Ok(Box::new(MockProvider::from_file(&path)?))
        }
        report::ProviderKind::Http => Ok(Box::new(HttpProvider::new(
            config.provider.endpoint.clone(),
            &config.provider.api_key_env,
        ))),
    }
}

fn cmd_score(config: &RunConfig, target: Target, model_filter: &[String]) -> Result<()> {
    let items = load_items(&items_path(config, target)?, target.condition())?;
    let provider = make_provider(config)?;
    let options = ScoreOptions {
        retry_budget: config.provider.retry_budget,
        backoff_base: Duration::from_millis(100),
        decoding: DecodingParams {
            temperature: config.provider.temperature,
            max_tokens: config.provider.max_tokens,
        },
    };
    let prompt_config = config.prompt.to_prompt_config();
    let mut selected = config.models.all();
    if !model_filter.is_empty() {
        for m in model_filter {
            if config.models.group_of(m).is_none() {
                return Err(AuditError::Config(format!(
                    "model `{m}` is not in any configured group"
                )));
            }
        }
        selected.retain(|(m, _)| model_filter.iter().any(|f| f == m));
    }
    if selected.is_empty() {
        return Err(AuditError::Config("no models configured".to_string()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.provider.parallelism)
        .build()
        .map_err(|e| AuditError::Config(format!("thread pool: {e}")))?;
    let mut all_records = Vec::new();
    for (model, group) in &selected {
        let records = pool.install(|| {
            score_items(&items, model, *group, provider.as_ref(), &prompt_config, &options)
        })?;
        // an HTTP provider that never answered once is a provider failure,
        // not a benchmark full of parser failures
        if config.provider.kind == report::ProviderKind::Http
            && records.iter().all(|r| r.raw_response.is_empty())
        {
            return Err(AuditError::Provider {
                model: model.clone(),
                message: "no responses from the endpoint; check endpoint and credentials"
                    .to_string(),
            });
        }
        all_records.extend(records);
    }
    let out = out_path(config, &files::records(target.records_label()));
    save_records(&out, &all_records)?;
    println!(
        "scored {} models x {} items -> {}",
        selected.len(),
        items.len(),
        out.display()
    );
    Ok(())
}

fn load_qc_pass_ids(config: &RunConfig) -> Result<BTreeSet<String>> {
    let path = out_path(config, files::QC_SUMMARY);
    let content = fs::read_to_string(&path).map_err(|e| AuditError::io(&path, e))?;
    let summary: QcSummary = serde_json::from_str(&content)
        .map_err(|e| AuditError::Data(format!("{}: {e}", path.display())))?;
    Ok(summary.pass_ids.into_iter().collect())
}

fn records_by_model(records: &[ScoreRecord]) -> BTreeMap<String, Vec<ScoreRecord>> {
    let mut map: BTreeMap<String, Vec<ScoreRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.model.clone()).or_default().push(r.clone());
    }
    map
}

type CoverageGaps = BTreeMap<String, Vec<String>>;

/// Strict pairing for every model present on both sides; also returns the
/// coverage gaps per model.
fn build_pairings(
    config: &RunConfig,
    qc_pass_ids: &BTreeSet<String>,
) -> Result<(Vec<PairedSet>, CoverageGaps)> {
    let en = load_records(&out_path(config, &files::records("original_en")))?;
    let back = load_records(&out_path(config, &files::records("back_translated")))?;
    let en_by_model = records_by_model(&en);
    let back_by_model = records_by_model(&back);
    let mut sets = Vec::new();
    let mut gaps = BTreeMap::new();
    for (model, en_records) in &en_by_model {
        let Some(back_records) = back_by_model.get(model) else {
            continue;
        };
        let pairing = pair_strict(&config.benchmark, en_records, back_records, qc_pass_ids)?;
        if !pairing.coverage_gaps.is_empty() {
            gaps.insert(model.clone(), pairing.coverage_gaps);
        }
        sets.push(pairing.set);
    }
    if sets.is_empty() {
        return Err(AuditError::Data(
            "no model has records on both the original and back-translated sides".to_string(),
        ));
    }
    Ok((sets, gaps))
}

fn cmd_e1(config: &RunConfig) -> Result<()> {
    let qc_pass_ids = load_qc_pass_ids(config)?;
    let (sets, gaps) = build_pairings(config, &qc_pass_ids)?;
    let cells = run_e1(
        &sets,
        config.inference.b_e1,
        config.inference.seed,
        config.inference.ci_level,
    )?;
    let clustered = run_e1_clustered(
        &sets,
        config.e1_sensitivity.drop_model.as_deref(),
        config.e1_sensitivity.restrict_benchmark.as_deref(),
        config.inference.b_e1,
        config.inference.seed,
        config.inference.ci_level,
    )?;
    report::write_jsonl(&out_path(config, files::E1_CELLS), &cells)?;
    report::write_json(&out_path(config, files::E1_CLUSTERED), &clustered)?;
    report::write_json(&out_path(config, files::E1_GAPS), &gaps)?;
    fs::write(
        out_path(config, files::FOREST),
        report::emit_forest_data(&cells),
    )
    .map_err(|e| AuditError::io(out_path(config, files::FOREST), e))?;
    println!(
        "e1: {} cells; clustered point {:+.3} [{:+.3}, {:+.3}] over {} clusters",
        cells.len(),
        clustered.main.point,
        clustered.main.lo,
        clustered.main.hi,
        clustered.n_clusters
    );
    Ok(())
}

fn cmd_e2(config: &RunConfig) -> Result<()> {
    let path = config.paths.annotations.clone().ok_or_else(|| {
        AuditError::Config("e2 requires paths.annotations".to_string())
    })?;
    let annotations = load_annotations(&path)?;
    let qc_pass_ids = load_qc_pass_ids(config)?;
    let (sets, _) = build_pairings(config, &qc_pass_ids)?;
    let results = run_e2(&annotations, &sets)?;
    report::write_jsonl(&out_path(config, files::E2_CALIBRATION), &results)?;
    for r in &results {
        println!(
            "e2 {}: rho {:+.2}, p {:.3}, ties {:.0}% over {} items",
            r.model,
            r.rho,
            r.p,
            100.0 * r.ties_fraction,
            r.n
        );
    }
    Ok(())
}

fn cmd_e3(config: &RunConfig) -> Result<()> {
    let bench = load_records(&out_path(config, &files::records("translated")))?;
    let control = load_records(&out_path(config, &files::records("control")))?;
    let (results, skipped) = run_e3(
        &bench,
        &control,
        config.inference.b_e1,
        config.inference.seed,
        config.inference.ci_level,
    )?;
    report::write_jsonl(&out_path(config, files::E3_CONTROL), &results)?;
    report::write_json(&out_path(config, files::E3_SKIPPED), &skipped)?;
    for r in &results {
        println!(
            "e3 {}: {:.3} vs {:.3}, gap {:+.3} [{:+.3}, {:+.3}]",
            r.model, r.acc_bench, r.acc_control, r.gap.point, r.gap.lo, r.gap.hi
        );
    }
    for s in &skipped {
        eprintln!("e3 skipped {s}");
    }
    Ok(())
}

fn group_records(records: &[ScoreRecord], config: &RunConfig, group: crate::scoring::Group) -> Vec<ScoreRecord> {
    records
        .iter()
        .filter(|r| config.models.group_of(&r.model) == Some(group))
        .cloned()
        .collect()
}

fn cmd_e4(config: &RunConfig) -> Result<()> {
    let translated = load_records(&out_path(config, &files::records("translated")))?;
    let naturalized = load_records(&out_path(config, &files::records("naturalized")))?;

    // Residue strata from the pilot records when they exist.
    let en_path = out_path(config, &files::records("original_en"));
    let strata: BTreeMap<String, Stratum> = if en_path.exists() {
        let en = load_records(&en_path)?;
        let a_en = group_records(&en, config, crate::scoring::Group::A);
        let a_zh = group_records(&translated, config, crate::scoring::Group::A);
        let b_zh = group_records(&translated, config, crate::scoring::Group::B);
        if a_en.is_empty() || a_zh.is_empty() {
            eprintln!("e4: no group-A pilot records; strata left empty");
            BTreeMap::new()
        } else {
            strata_from_records(&a_en, &a_zh, &b_zh)?
        }
    } else {
        eprintln!("e4: no original-side records; strata left empty");
        BTreeMap::new()
    };

    // Only items scored in the naturalized condition enter the contrast.
    let e4_items: BTreeSet<&String> = naturalized.iter().map(|r| &r.item_id).collect();
    let translated_subset: Vec<ScoreRecord> = translated
        .iter()
        .filter(|r| e4_items.contains(&r.item_id))
        .cloned()
        .collect();

    let summary = run_e4(
        &translated_subset,
        &naturalized,
        &strata,
        config.inference.b_e4,
        config.inference.seed,
        config.inference.ci_level,
        config.e4.outlier_threshold,
    )?;
    report::write_json(&out_path(config, files::E4_RESULTS), &summary)?;

    let mut strata_tsv = String::from("item_id\tstratum\n");
    for (id, stratum) in &strata {
        strata_tsv.push_str(&format!("{id}\t{stratum}\n"));
    }
    fs::write(out_path(config, files::E4_STRATA), strata_tsv)
        .map_err(|e| AuditError::io(out_path(config, files::E4_STRATA), e))?;

    if let Some(pooled) = &summary.pooled_main {
        println!(
            "e4 pooled (excl. {:?}): {:+.3} [{:+.3}, {:+.3}]",
            summary.excluded_models, pooled.point, pooled.lo, pooled.hi
        );
    }
    if let Some(did) = &summary.did {
        println!(
            "e4 DiD (A - B): {:+.3} [{:+.3}, {:+.3}]",
            did.point, did.lo, did.hi
        );
    }
    Ok(())
}

fn cmd_qc_merge(config: &RunConfig, sheet1: Option<PathBuf>, sheet2: Option<PathBuf>) -> Result<()> {
    let path1 = sheet1.or_else(|| config.paths.qc_sheet_1.clone()).ok_or_else(|| {
        AuditError::Config("qc-merge requires --sheet1 or paths.qc_sheet_1".to_string())
    })?;
    let path2 = sheet2.or_else(|| config.paths.qc_sheet_2.clone()).ok_or_else(|| {
        AuditError::Config("qc-merge requires --sheet2 or paths.qc_sheet_2".to_string())
    })?;
    let sheet1 = load_sheet(&path1)?;
    let sheet2 = load_sheet(&path2)?;
    let merged = merge_coders(&sheet1, &sheet2)?;
    report::write_json(&out_path(config, files::QC_MERGE), &merged)?;

    // mirror the release layout: normalized sheet copies under the e4 root
    for (subdir, sheet) in [("human_qc", &sheet1), ("second_coder_qc", &sheet2)] {
        let dir = config.paths.out_dir.join("e4").join(subdir);
        fs::create_dir_all(&dir).map_err(|e| AuditError::io(&dir, e))?;
        crate::natqc::save_sheet(&dir.join("qc_sheet.tsv"), sheet)?;
    }
    println!(
        "qc-merge: agreement {:.2}, kappa {:.2}, intersection n = {}",
        merged.agreement,
        merged.kappa,
        merged.intersection_pass_ids.len()
    );

    // Intersection sensitivity when the contrast records are available.
    let trans_path = out_path(config, &files::records("translated"));
    let nat_path = out_path(config, &files::records("naturalized"));
    if trans_path.exists() && nat_path.exists() && !merged.intersection_pass_ids.is_empty() {
        let translated = load_records(&trans_path)?;
        let naturalized = load_records(&nat_path)?;
        let e4_items: BTreeSet<&String> = naturalized.iter().map(|r| &r.item_id).collect();
        let translated_subset: Vec<ScoreRecord> = translated
            .iter()
            .filter(|r| e4_items.contains(&r.item_id))
            .cloned()
            .collect();
        let scored: BTreeSet<String> = translated_subset.iter().map(|r| r.item_id.clone()).collect();
        let pass_ids: BTreeSet<String> = merged
            .intersection_pass_ids
            .iter()
            .filter(|id| scored.contains(*id))
            .cloned()
            .collect();
        if !pass_ids.is_empty() {
            let strata = read_strata(&out_path(config, files::E4_STRATA)).unwrap_or_default();
            let sensitivity = qc_sensitivity(
                &translated_subset,
                &naturalized,
                &strata,
                &pass_ids,
                config.inference.b_e4,
                config.inference.seed,
                config.inference.ci_level,
                config.e4.outlier_threshold,
            )?;
            report::write_json(&out_path(config, files::E4_INTERSECTION), &sensitivity)?;
            if let Some(pooled) = &sensitivity.pooled_main {
                println!(
                    "intersection sensitivity (n = {}): pooled {:+.3} [{:+.3}, {:+.3}]",
                    pass_ids.len(),
                    pooled.point,
                    pooled.lo,
                    pooled.hi
                );
            }
        }
    }
    Ok(())
}

fn read_strata(path: &Path) -> Result<BTreeMap<String, Stratum>> {
    let content = fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    let mut out = BTreeMap::new();
    for line in content.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, stratum)) = line.split_once('\t') else {
            return Err(AuditError::Data(format!("bad strata row {line:?}")));
        };
        let stratum = match stratum {
            "high_residue" => Stratum::HighResidue,
            "low_residue" => Stratum::LowResidue,
            "disagreement" => Stratum::Disagreement,
            "unstratified" => Stratum::Unstratified,
            other => return Err(AuditError::Data(format!("unknown stratum {other:?}"))),
        };
        out.insert(id.to_string(), stratum);
    }
    Ok(out)
}

#[derive(serde::Serialize)]
struct RunSummary {
    benchmark: String,
    artifacts: Vec<String>,
    n_cells: usize,
}

fn cmd_report(config: &RunConfig) -> Result<()> {
    let cells_path = out_path(config, files::E1_CELLS);
    let mut n_cells = 0;
    if cells_path.exists() {
        let content = fs::read_to_string(&cells_path).map_err(|e| AuditError::io(&cells_path, e))?;
        let mut cells = Vec::new();
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            let cell: crate::estimators::CellResult = serde_json::from_str(line)
                .map_err(|e| AuditError::Data(format!("{}: {e}", cells_path.display())))?;
            cells.push(cell);
        }
        n_cells = cells.len();
        fs::write(
            out_path(config, files::FOREST),
            report::emit_forest_data(&cells),
        )
        .map_err(|e| AuditError::io(out_path(config, files::FOREST), e))?;
    }
    let mut artifacts: Vec<String> = Vec::new();
    for name in [
        files::SAMPLED_ITEMS,
        files::TRIPLES,
        files::TRIPLES_QC,
        files::QC_SUMMARY,
        files::ALIGNMENT_AUDIT,
        files::E1_CELLS,
        files::E1_CLUSTERED,
        files::FOREST,
        files::E2_CALIBRATION,
        files::E3_CONTROL,
        files::E4_RESULTS,
        files::E4_STRATA,
        files::E4_INTERSECTION,
        files::QC_MERGE,
    ] {
        if out_path(config, name).exists() {
            artifacts.push(name.to_string());
        }
    }
    let summary = RunSummary {
        benchmark: config.benchmark.clone(),
        artifacts,
        n_cells,
    };
    report::write_json(&out_path(config, files::RUN_SUMMARY), &summary)?;
    println!("report: {} cells, {} artifacts", n_cells, summary.artifacts.len());
    Ok(())
}

fn cmd_checklist(config: &RunConfig) -> Result<()> {
    let inputs = report::collect_checklist_inputs(&config.paths.out_dir);
    let markdown = report::emit_checklist(&inputs);
    let path = out_path(config, files::CHECKLIST);
    fs::write(&path, markdown).map_err(|e| AuditError::io(&path, e))?;
    println!("checklist -> {}", path.display());
    Ok(())
}
