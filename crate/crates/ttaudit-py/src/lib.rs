//! Python bindings for the audit harness: the seeded statistics kernel,
//! sentence BLEU, and the single-letter scoring protocol.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ttaudit::corpus::{Condition, Item};
use ttaudit::inference;
use ttaudit::natqc::VerifierRecord;
use ttaudit::prompting;

fn value_err(e: ttaudit::AuditError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A point estimate with its interval and re-derivation provenance.
#[pyclass(name = "Estimate", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyEstimate {
    point: f64,
    lo: f64,
    hi: f64,
    level: f64,
    method: String,
    b: usize,
    seed: u64,
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate(point={:+.6}, lo={:+.6}, hi={:+.6}, level={}, method={}, b={}, seed={})",
            self.point, self.lo, self.hi, self.level, self.method, self.b, self.seed
        )
    }
}

impl From<inference::EstimateCI> for PyEstimate {
    fn from(e: inference::EstimateCI) -> Self {
        let method = match e.method {
            inference::CiMethod::PairedBootstrap => "paired_bootstrap",
            inference::CiMethod::ClusterBootstrap => "cluster_bootstrap",
            inference::CiMethod::UnpairedBootstrap => "unpaired_bootstrap",
            inference::CiMethod::Wilson => "wilson",
        };
        PyEstimate {
            point: e.point,
            lo: e.lo,
            hi: e.hi,
            level: e.level,
            method: method.to_string(),
            b: e.b,
            seed: e.seed,
        }
    }
}

/// Sentence BLEU in [0,1] with add-one smoothing on zero-match orders.
#[pyfunction]
fn bleu(candidate: &str, reference: &str) -> PyResult<f64> {
    ttaudit::qc::bleu(candidate, reference).map_err(value_err)
}

/// Two-sided exact sign test on discordant counts.
#[pyfunction]
fn exact_sign_test(pos: usize, neg: usize) -> f64 {
    inference::exact_sign_test(pos, neg)
}

/// Percentile bootstrap CI for the mean of paired differences.
#[pyfunction(signature = (diffs, b=10_000, seed=42, level=0.95))]
fn paired_bootstrap(diffs: Vec<f64>, b: usize, seed: u64, level: f64) -> PyResult<PyEstimate> {
    inference::paired_bootstrap(&diffs, b, seed, level)
        .map(PyEstimate::from)
        .map_err(value_err)
}

/// Cluster bootstrap over lists of per-cluster observations.
#[pyfunction(signature = (clusters, b=10_000, seed=42, level=0.95))]
fn cluster_bootstrap(
    clusters: Vec<Vec<f64>>,
    b: usize,
    seed: u64,
    level: f64,
) -> PyResult<PyEstimate> {
    let clusters: Vec<inference::Cluster> = clusters
        .into_iter()
        .enumerate()
        .map(|(i, observations)| inference::Cluster {
            key: ("py".to_string(), format!("cluster_{i:06}")),
            observations,
        })
        .collect();
    inference::cluster_bootstrap(&clusters, b, seed, level)
        .map(PyEstimate::from)
        .map_err(value_err)
}

/// Bootstrap CI for mean(a) - mean(b) with independent resampling per side.
#[pyfunction(signature = (a, b_side, b=10_000, seed=42, level=0.95))]
fn unpaired_gap_bootstrap(
    a: Vec<bool>,
    b_side: Vec<bool>,
    b: usize,
    seed: u64,
    level: f64,
) -> PyResult<PyEstimate> {
    inference::unpaired_gap_bootstrap(&a, &b_side, b, seed, level)
        .map(PyEstimate::from)
        .map_err(value_err)
}

/// Wilson score interval for a binomial proportion.
#[pyfunction(signature = (successes, n, level=0.95))]
fn wilson_interval(successes: usize, n: usize, level: f64) -> PyResult<(f64, f64)> {
    inference::wilson_interval(successes, n, level).map_err(value_err)
}

/// Spearman rank correlation with mid-rank ties; returns (rho, p).
#[pyfunction]
fn spearman(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    inference::spearman(&xs, &ys).map_err(value_err)
}

/// Cohen's kappa for a binary 2x2 table (both-pass, first-only,
/// second-only, both-fail).
#[pyfunction]
fn kappa_binary(a: usize, b: usize, c: usize, d: usize) -> PyResult<f64> {
    inference::kappa_binary(a, b, c, d).map_err(value_err)
}

/// Observed agreement (a + d) / n for the same table.
#[pyfunction]
fn percent_agreement(a: usize, b: usize, c: usize, d: usize) -> PyResult<f64> {
    inference::percent_agreement(a, b, c, d).map_err(value_err)
}

/// Remove at most one leading choice label ("A. ", "B)", "C、", ...).
#[pyfunction]
fn strip_leading_label(choice: &str) -> String {
    prompting::strip_leading_label(choice).to_string()
}

/// Render the fixed scoring prompt for one question and its four choices.
#[pyfunction(signature = (question, choices, strip_leading_labels=true, instruction=None))]
fn build_prompt(
    question: &str,
    choices: Vec<String>,
    strip_leading_labels: bool,
    instruction: Option<String>,
) -> PyResult<String> {
    if choices.len() != 4 {
        return Err(PyValueError::new_err(format!(
            "expected 4 choices, found {}",
            choices.len()
        )));
    }
    let item = Item {
        id: "py".to_string(),
        subject: "py".to_string(),
        question: question.to_string(),
        choices,
        gold_index: 0,
        language: "und".to_string(),
        condition: Condition::Translated,
        extra: serde_json::Map::new(),
    };
    let config = prompting::PromptConfig {
        instruction_text: instruction.unwrap_or_else(|| prompting::DEFAULT_INSTRUCTION.to_string()),
        strip_leading_labels,
        ..prompting::PromptConfig::default()
    };
    Ok(prompting::build_prompt(&item, &config))
}

/// Extract the first answer letter from a raw response, or None.
#[pyfunction(signature = (raw, letters="ABCD"))]
fn parse_answer(raw: &str, letters: &str) -> Option<String> {
    let letter_set: Vec<char> = letters.chars().collect();
    prompting::parse_answer(raw, &letter_set).map(String::from)
}

/// The strict-pass QC gate over the six verifier dimensions.
#[pyfunction]
fn strict_pass(
    semantic: u8,
    difficulty: u8,
    answer_key_preserved: bool,
    option_order_preserved: bool,
    cue_removal: u8,
    rewrite_risk: u8,
) -> bool {
    ttaudit::natqc::strict_pass(&VerifierRecord {
        item_id: String::new(),
        semantic,
        difficulty,
        answer_key_preserved,
        option_order_preserved,
        cue_removal,
        rewrite_risk,
        coder: ttaudit::natqc::Coder::LlmVerifier,
        notes: String::new(),
    })
}

#[pymodule]
fn ttaudit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(exact_sign_test, m)?)?;
    m.add_function(wrap_pyfunction!(paired_bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(unpaired_gap_bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_binary, m)?)?;
    m.add_function(wrap_pyfunction!(percent_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(strip_leading_label, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_answer, m)?)?;
    m.add_function(wrap_pyfunction!(strict_pass, m)?)?;
    m.add("DEFAULT_INSTRUCTION", prompting::DEFAULT_INSTRUCTION)?;
    Ok(())
}
