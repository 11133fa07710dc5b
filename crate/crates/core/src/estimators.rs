//! The four audit estimators, from score records to per-cell evidence.
//!
//! E1 contrasts original vs back-translated accuracy under strict QC, with
//! an item-clustered variant as the primary inferential object. E2
//! correlates annotation cue scores with item-level paired signal. E3
//! contrasts translated-benchmark accuracy against a non-translation
//! control. E4 contrasts translated vs naturalized rewrites of the same
//! items, with residue strata, a group difference-in-differences, and
//! leave-one-out sensitivity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::inference::{
    cluster_bootstrap, exact_sign_test, mean, paired_bootstrap, unpaired_gap_bootstrap,
    wilson_interval, CiMethod, Cluster, EstimateCI,
};
use crate::natqc::AnnotationRecord;
use crate::scoring::{discordant_counts, Group, PairedSet, ScoreRecord};

/// One (benchmark, model) cell of the back-translation contrast. A cell
/// with no strict-QC pairs keeps `n = 0` and empty estimate fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub benchmark: String,
    pub model: String,
    pub n: usize,
    pub acc_en: Option<f64>,
    pub acc_back: Option<f64>,
    pub tt_back: Option<EstimateCI>,
    pub pos: usize,
    pub neg: usize,
    pub sign_p: Option<f64>,
}

impl CellResult {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Back-translation gap per cell: paired bootstrap over per-item
/// differences plus the exact sign test on discordant counts.
pub fn run_e1(
    paired_sets: &[PairedSet],
    b: usize,
    seed: u64,
    level: f64,
) -> Result<Vec<CellResult>> {
    let mut cells = Vec::with_capacity(paired_sets.len());
    for set in paired_sets {
        if set.pairs.is_empty() {
            cells.push(CellResult {
                benchmark: set.benchmark.clone(),
                model: set.model.clone(),
                n: 0,
                acc_en: None,
                acc_back: None,
                tt_back: None,
                pos: 0,
                neg: 0,
                sign_p: None,
            });
            continue;
        }
        let diffs: Vec<f64> = set
            .pairs
            .iter()
            .map(|p| p.correct_en as u8 as f64 - p.correct_back as u8 as f64)
            .collect();
        let (pos, neg, _) = discordant_counts(&set.pairs);
        let en: Vec<f64> = set.pairs.iter().map(|p| p.correct_en as u8 as f64).collect();
        let back: Vec<f64> = set.pairs.iter().map(|p| p.correct_back as u8 as f64).collect();
        cells.push(CellResult {
            benchmark: set.benchmark.clone(),
            model: set.model.clone(),
            n: set.pairs.len(),
            acc_en: Some(mean(&en)),
            acc_back: Some(mean(&back)),
            tt_back: Some(paired_bootstrap(&diffs, b, seed, level)?),
            pos,
            neg,
            sign_p: Some(exact_sign_test(pos, neg)),
        });
    }
    Ok(cells)
}

/// A sensitivity rerun of the clustered estimate under a named restriction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    pub label: String,
    pub n_clusters: usize,
    pub estimate: EstimateCI,
}

/// Clustered back-translation estimate plus its sensitivity variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusteredE1 {
    pub n_clusters: usize,
    pub main: EstimateCI,
    pub sensitivities: Vec<SensitivityEstimate>,
}

/// Item-clustered bootstrap across all cells: one cluster per
/// (benchmark, item) holding up to one difference per model. The two
/// standard sensitivities drop a named model and restrict to one benchmark.
pub fn run_e1_clustered(
    paired_sets: &[PairedSet],
    drop_model: Option<&str>,
    restrict_benchmark: Option<&str>,
    b: usize,
    seed: u64,
    level: f64,
) -> Result<ClusteredE1> {
    let clusters = clusters_from_sets(paired_sets, |_| true);
    if clusters.is_empty() {
        return Err(AuditError::EmptyInput(
            "run_e1_clustered needs at least one cluster".to_string(),
        ));
    }
    let main = cluster_bootstrap(&clusters, b, seed, level)?;
    let mut sensitivities = Vec::new();
    if let Some(model) = drop_model {
        let subset = clusters_from_sets(paired_sets, |s| s.model != model);
        if !subset.is_empty() {
            sensitivities.push(SensitivityEstimate {
                label: format!("drop_model:{model}"),
                n_clusters: subset.len(),
                estimate: cluster_bootstrap(&subset, b, seed, level)?,
            });
        }
    }
    if let Some(benchmark) = restrict_benchmark {
        let subset = clusters_from_sets(paired_sets, |s| s.benchmark == benchmark);
        if !subset.is_empty() {
            sensitivities.push(SensitivityEstimate {
                label: format!("restrict_benchmark:{benchmark}"),
                n_clusters: subset.len(),
                estimate: cluster_bootstrap(&subset, b, seed, level)?,
            });
        }
    }
    Ok(ClusteredE1 {
        n_clusters: clusters.len(),
        main,
        sensitivities,
    })
}

fn clusters_from_sets(sets: &[PairedSet], keep: impl Fn(&PairedSet) -> bool) -> Vec<Cluster> {
    let mut by_key: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for set in sets.iter().filter(|s| keep(s)) {
        for pair in &set.pairs {
            by_key
                .entry((set.benchmark.clone(), pair.item_id.clone()))
                .or_default()
                .push(pair.correct_en as u8 as f64 - pair.correct_back as u8 as f64);
        }
    }
    by_key
        .into_iter()
        .map(|(key, observations)| Cluster { key, observations })
        .collect()
}

/// Annotation calibration output for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct E2Result {
    pub model: String,
    pub n: usize,
    pub rho: f64,
    pub p: f64,
    pub ties_fraction: f64,
}

/// Correlate per-item cue scores with the paired signal
/// (correct_en - correct_back) per model.
pub fn run_e2(
    annotations: &[AnnotationRecord],
    paired_sets: &[PairedSet],
) -> Result<Vec<E2Result>> {
    let mut cue_by_id: BTreeMap<&String, f64> = BTreeMap::new();
    for a in annotations {
        if cue_by_id.insert(&a.item_id, a.cue_score as f64).is_some() {
            return Err(AuditError::Data(format!(
                "duplicate annotation for item `{}`",
                a.item_id
            )));
        }
    }
    let mut results = Vec::new();
    for set in paired_sets {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for pair in &set.pairs {
            if let Some(&cue) = cue_by_id.get(&pair.item_id) {
                xs.push(cue);
                ys.push(pair.correct_en as u8 as f64 - pair.correct_back as u8 as f64);
            }
        }
        if xs.len() < 3 {
            return Err(AuditError::Data(format!(
                "model `{}`: only {} annotated items overlap its pairs (need 3)",
                set.model,
                xs.len()
            )));
        }
        let (rho, p) = crate::inference::spearman(&xs, &ys)?;
        let ties = ys.iter().filter(|&&y| y == 0.0).count();
        results.push(E2Result {
            model: set.model.clone(),
            n: xs.len(),
            rho,
            p,
            ties_fraction: ties as f64 / ys.len() as f64,
        });
    }
    Ok(results)
}

/// Non-translation control contrast for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct E3Result {
    pub model: String,
    pub n_bench: usize,
    pub acc_bench: f64,
    pub wilson_bench: (f64, f64),
    pub n_control: usize,
    pub acc_control: f64,
    pub wilson_control: (f64, f64),
    pub gap: EstimateCI,
}

/// Aggregate accuracy on the translated benchmark vs the control set, with
/// Wilson intervals and an unpaired bootstrap gap. Only parse-valid records
/// enter either side. Models missing one side are skipped with a report.
pub fn run_e3(
    bench_records: &[ScoreRecord],
    control_records: &[ScoreRecord],
    b: usize,
    seed: u64,
    level: f64,
) -> Result<(Vec<E3Result>, Vec<String>)> {
    let bench = by_model(bench_records);
    let control = by_model(control_records);
    let models: BTreeSet<&String> = bench.keys().chain(control.keys()).collect();

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for model in models {
        let (Some(b_recs), Some(c_recs)) = (bench.get(model), control.get(model)) else {
            skipped.push(format!("{model}: missing one side"));
            continue;
        };
        let b_valid = valid_bools(b_recs);
        let c_valid = valid_bools(c_recs);
        if b_valid.is_empty() || c_valid.is_empty() {
            skipped.push(format!("{model}: no parse-valid records on one side"));
            continue;
        }
        let b_succ = b_valid.iter().filter(|&&x| x).count();
        let c_succ = c_valid.iter().filter(|&&x| x).count();
        results.push(E3Result {
            model: model.clone(),
            n_bench: b_valid.len(),
            acc_bench: b_succ as f64 / b_valid.len() as f64,
            wilson_bench: wilson_interval(b_succ, b_valid.len(), level)?,
            n_control: c_valid.len(),
            acc_control: c_succ as f64 / c_valid.len() as f64,
            wilson_control: wilson_interval(c_succ, c_valid.len(), level)?,
            gap: unpaired_gap_bootstrap(&b_valid, &c_valid, b, seed, level)?,
        });
    }
    Ok((results, skipped))
}

fn by_model(records: &[ScoreRecord]) -> BTreeMap<String, Vec<&ScoreRecord>> {
    let mut map: BTreeMap<String, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.model.clone()).or_default().push(r);
    }
    map
}

fn valid_bools(records: &[&ScoreRecord]) -> Vec<bool> {
    records.iter().filter_map(|r| r.correct).collect()
}

/// Item class by translation-artifact signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    HighResidue,
    LowResidue,
    Disagreement,
    Unstratified,
}

impl std::fmt::Display for Stratum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stratum::HighResidue => "high_residue",
            Stratum::LowResidue => "low_residue",
            Stratum::Disagreement => "disagreement",
            Stratum::Unstratified => "unstratified",
        };
        write!(f, "{s}")
    }
}

/// Classify one item from per-model correctness. Parse failures count as
/// incorrect. Precedence when definitions overlap: high, then low, then
/// disagreement.
pub fn classify_residue(
    a_en_correct: &[bool],
    a_zh_correct: &[bool],
    b_zh_correct: &[bool],
) -> Result<Stratum> {
    if a_en_correct.is_empty() || a_zh_correct.is_empty() {
        return Err(AuditError::Data(
            "classify_residue needs group-A records on both conditions".to_string(),
        ));
    }
    let all_en = a_en_correct.iter().all(|&x| x);
    let all_zh = a_zh_correct.iter().all(|&x| x);
    if all_en && !all_zh {
        return Ok(Stratum::HighResidue);
    }
    if all_en && all_zh {
        return Ok(Stratum::LowResidue);
    }
    if let (Some(a), Some(b)) = (majority(a_zh_correct), majority(b_zh_correct)) {
        if a != b {
            return Ok(Stratum::Disagreement);
        }
    }
    Ok(Stratum::Unstratified)
}

/// Strict majority verdict; an exact split has none.
fn majority(votes: &[bool]) -> Option<bool> {
    let yes = votes.iter().filter(|&&v| v).count();
    match (2 * yes).cmp(&votes.len()) {
        std::cmp::Ordering::Greater => Some(true),
        std::cmp::Ordering::Less => Some(false),
        std::cmp::Ordering::Equal => None,
    }
}

/// Build the id -> stratum table from group-A records on both conditions
/// and group-B records on the translated condition.
pub fn strata_from_records(
    a_en: &[ScoreRecord],
    a_zh: &[ScoreRecord],
    b_zh: &[ScoreRecord],
) -> Result<BTreeMap<String, Stratum>> {
    let ids: BTreeSet<&String> = a_en.iter().map(|r| &r.item_id).collect();
    let collect = |records: &[ScoreRecord], id: &String| -> Vec<bool> {
        records
            .iter()
            .filter(|r| &r.item_id == id)
            .map(|r| r.correct == Some(true))
            .collect()
    };
    let mut out = BTreeMap::new();
    for id in ids {
        let a_en_c = collect(a_en, id);
        let a_zh_c = collect(a_zh, id);
        if a_zh_c.is_empty() {
            return Err(AuditError::Data(format!(
                "item `{id}` has no group-A translated records"
            )));
        }
        let b_zh_c = collect(b_zh, id);
        out.insert(id.clone(), classify_residue(&a_en_c, &a_zh_c, &b_zh_c)?);
    }
    Ok(out)
}

/// Naturalization contrast for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct E4Result {
    pub model: String,
    pub group: Group,
    pub n_valid_pairs: usize,
    pub validity_naturalized: f64,
    pub outlier: bool,
    pub delta: EstimateCI,
    pub strata_deltas: BTreeMap<Stratum, EstimateCI>,
}

/// Naturalization summary: per-model results plus pooled, group, DiD,
/// stratum, and leave-one-out estimates. Models under the outlier validity
/// threshold are excluded from the main pooled/DiD numbers and reported in
/// the `*_all` sensitivity fields instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct E4Summary {
    pub outlier_threshold: f64,
    pub excluded_models: Vec<String>,
    pub per_model: Vec<E4Result>,
    pub pooled_main: Option<EstimateCI>,
    pub pooled_all: Option<EstimateCI>,
    pub group_deltas: BTreeMap<Group, EstimateCI>,
    pub did: Option<EstimateCI>,
    pub did_n_clusters: usize,
    pub strata_pooled: BTreeMap<Stratum, EstimateCI>,
    pub leave_one_out: Vec<(String, EstimateCI)>,
}

struct ModelDiffs {
    model: String,
    group: Group,
    validity_naturalized: f64,
    outlier: bool,
    /// item id -> naturalized correct minus translated correct
    diffs: BTreeMap<String, f64>,
}

/// Paired naturalized-vs-translated contrast over cells valid in both
/// conditions, item-clustered throughout.
pub fn run_e4(
    translated: &[ScoreRecord],
    naturalized: &[ScoreRecord],
    strata: &BTreeMap<String, Stratum>,
    b: usize,
    seed: u64,
    level: f64,
    outlier_threshold: f64,
) -> Result<E4Summary> {
    if !(0.0..=1.0).contains(&outlier_threshold) {
        return Err(AuditError::InvalidArgument(format!(
            "outlier threshold must lie in [0,1], got {outlier_threshold}"
        )));
    }
    let trans_by_model = by_model(translated);
    let nat_by_model = by_model(naturalized);
    let models: BTreeSet<String> = trans_by_model
        .keys()
        .chain(nat_by_model.keys())
        .cloned()
        .collect();

    let mut model_diffs = Vec::new();
    for model in &models {
        let (Some(trans), Some(nat)) = (trans_by_model.get(model), nat_by_model.get(model)) else {
            return Err(AuditError::Data(format!(
                "model `{model}` lacks records on one condition"
            )));
        };
        let trans_map = index_by_item(trans, model)?;
        let nat_map = index_by_item(nat, model)?;
        let parsed = nat.iter().filter(|r| r.parsed.is_some()).count();
        let validity = parsed as f64 / nat.len() as f64;
        let group = trans[0].group;
        let mut diffs = BTreeMap::new();
        for (id, t) in &trans_map {
            if let Some(n) = nat_map.get(id) {
                if let (Some(tc), Some(nc)) = (t.correct, n.correct) {
                    diffs.insert(
                        (*id).clone(),
                        nc as u8 as f64 - tc as u8 as f64,
                    );
                }
            }
        }
        if diffs.is_empty() {
            return Err(AuditError::Data(format!(
                "model `{model}` has no cells valid in both conditions"
            )));
        }
        model_diffs.push(ModelDiffs {
            model: model.clone(),
            group,
            validity_naturalized: validity,
            outlier: validity < outlier_threshold,
            diffs,
        });
    }

    let mut per_model = Vec::new();
    for md in &model_diffs {
        let clusters = singleton_clusters(&md.diffs);
        let delta = cluster_bootstrap(&clusters, b, seed, level)?;
        let mut strata_deltas = BTreeMap::new();
        for stratum in [Stratum::HighResidue, Stratum::LowResidue, Stratum::Disagreement] {
            let subset: BTreeMap<String, f64> = md
                .diffs
                .iter()
                .filter(|(id, _)| strata.get(*id) == Some(&stratum))
                .map(|(id, &d)| (id.clone(), d))
                .collect();
            if !subset.is_empty() {
                strata_deltas.insert(
                    stratum,
                    cluster_bootstrap(&singleton_clusters(&subset), b, seed, level)?,
                );
            }
        }
        per_model.push(E4Result {
            model: md.model.clone(),
            group: md.group,
            n_valid_pairs: md.diffs.len(),
            validity_naturalized: md.validity_naturalized,
            outlier: md.outlier,
            delta,
            strata_deltas,
        });
    }

    let main: Vec<&ModelDiffs> = model_diffs.iter().filter(|m| !m.outlier).collect();
    let everyone: Vec<&ModelDiffs> = model_diffs.iter().collect();
    let excluded_models: Vec<String> = model_diffs
        .iter()
        .filter(|m| m.outlier)
        .map(|m| m.model.clone())
        .collect();

    let pooled_main = pooled_estimate(&main, None, b, seed, level)?;
    let pooled_all = pooled_estimate(&everyone, None, b, seed, level)?;

    let mut group_deltas = BTreeMap::new();
    for group in [Group::A, Group::B, Group::C] {
        let members: Vec<&ModelDiffs> = main.iter().filter(|m| m.group == group).copied().collect();
        if let Some(est) = pooled_estimate(&members, None, b, seed, level)? {
            group_deltas.insert(group, est);
        }
    }

    let mut strata_pooled = BTreeMap::new();
    for stratum in [Stratum::HighResidue, Stratum::LowResidue, Stratum::Disagreement] {
        if let Some(est) = pooled_estimate(&main, Some((strata, stratum)), b, seed, level)? {
            strata_pooled.insert(stratum, est);
        }
    }

    let (did, did_n_clusters) = match (group_deltas.get(&Group::A), group_deltas.get(&Group::B)) {
        (Some(ga), Some(gb)) => {
            let (lo, hi, n_clusters) = did_interval(&main, b, seed, level)?;
            (
                Some(EstimateCI {
                    point: ga.point - gb.point,
                    lo,
                    hi,
                    level,
                    method: CiMethod::ClusterBootstrap,
                    b,
                    seed,
                }),
                n_clusters,
            )
        }
        _ => (None, 0),
    };

    let mut leave_one_out = Vec::new();
    for md in &main {
        let rest: Vec<&ModelDiffs> = main
            .iter()
            .filter(|m| m.model != md.model)
            .copied()
            .collect();
        if let Some(est) = pooled_estimate(&rest, None, b, seed, level)? {
            leave_one_out.push((md.model.clone(), est));
        }
    }

    Ok(E4Summary {
        outlier_threshold,
        excluded_models,
        per_model,
        pooled_main,
        pooled_all,
        group_deltas,
        did,
        did_n_clusters,
        strata_pooled,
        leave_one_out,
    })
}

fn index_by_item<'a>(
    records: &[&'a ScoreRecord],
    model: &str,
) -> Result<BTreeMap<&'a String, &'a ScoreRecord>> {
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert(&r.item_id, *r).is_some() {
            return Err(AuditError::Data(format!(
                "duplicate record for item `{}` under model `{model}`",
                r.item_id
            )));
        }
    }
    Ok(map)
}

fn singleton_clusters(diffs: &BTreeMap<String, f64>) -> Vec<Cluster> {
    diffs
        .iter()
        .map(|(id, &d)| Cluster {
            key: ("e4".to_string(), id.clone()),
            observations: vec![d],
        })
        .collect()
}

/// Item-clustered pooled delta over the given models, optionally restricted
/// to one stratum. None when no observations remain.
fn pooled_estimate(
    models: &[&ModelDiffs],
    restrict: Option<(&BTreeMap<String, Stratum>, Stratum)>,
    b: usize,
    seed: u64,
    level: f64,
) -> Result<Option<EstimateCI>> {
    let mut by_item: BTreeMap<&String, Vec<f64>> = BTreeMap::new();
    for md in models {
        for (id, &d) in &md.diffs {
            if let Some((strata, stratum)) = restrict {
                if strata.get(id) != Some(&stratum) {
                    continue;
                }
            }
            by_item.entry(id).or_default().push(d);
        }
    }
    if by_item.is_empty() {
        return Ok(None);
    }
    let clusters: Vec<Cluster> = by_item
        .into_iter()
        .map(|(id, observations)| Cluster {
            key: ("e4".to_string(), id.clone()),
            observations,
        })
        .collect();
    cluster_bootstrap(&clusters, b, seed, level).map(Some)
}

/// Clustered CI for the group-A minus group-B delta: resample the items
/// observed in both groups and recompute both pooled deltas per replicate.
fn did_interval(models: &[&ModelDiffs], b: usize, seed: u64, level: f64) -> Result<(f64, f64, usize)> {
    use rand::Rng;
    let mut items: BTreeMap<&String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for md in models {
        for (id, &d) in &md.diffs {
            let entry = items.entry(id).or_default();
            match md.group {
                Group::A => entry.0.push(d),
                Group::B => entry.1.push(d),
                Group::C => {}
            }
        }
    }
    let units: Vec<&(Vec<f64>, Vec<f64>)> = items
        .values()
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .collect();
    if units.is_empty() {
        return Err(AuditError::Data(
            "difference-in-differences needs items observed in both groups".to_string(),
        ));
    }
    let m = units.len();
    let mut stats: Vec<f64> = (0..b)
        .map(|r| {
            let mut rng = crate::inference::replicate_rng(seed, r as u64);
            let (mut sa, mut ca, mut sb, mut cb) = (0.0, 0usize, 0.0, 0usize);
            for _ in 0..m {
                let (a_obs, b_obs) = units[rng.random_range(0..m)];
                for &v in a_obs {
                    sa += v;
                    ca += 1;
                }
                for &v in b_obs {
                    sb += v;
                    cb += 1;
                }
            }
            sa / ca as f64 - sb / cb as f64
        })
        .collect();
    let (lo, hi) = crate::inference::percentile_interval(&mut stats, level);
    Ok((lo, hi, m))
}
