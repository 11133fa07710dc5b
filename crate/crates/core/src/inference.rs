//! Statistical kernel: exact sign test, seeded percentile bootstraps
//! (paired, cluster, unpaired), Wilson interval, Spearman with tied ranks,
//! and two-coder agreement statistics.
//!
//! All resampling follows one seed policy: replicate `r` of an analysis with
//! root seed `s` uses an independent ChaCha stream derived from `(s, r)`, so
//! truncating or parallelizing over replicates never changes results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{AuditError, Result};

/// Interval construction recorded alongside every estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    PairedBootstrap,
    ClusterBootstrap,
    UnpairedBootstrap,
    Wilson,
}

/// A point estimate with its interval and full re-derivation provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateCI {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: CiMethod,
    pub b: usize,
    pub seed: u64,
}

/// One resampling unit for clustered inference: a (benchmark, item) key and
/// the paired differences observed for it (one per model in scope).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cluster {
    pub key: (String, String),
    pub observations: Vec<f64>,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// RNG for replicate `r` under root seed `seed`: same key, distinct stream.
pub(crate) fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Linear-interpolation quantile of an ascending-sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn percentile_interval(stats: &mut [f64], level: f64) -> (f64, f64) {
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    (
        quantile_sorted(stats, alpha / 2.0),
        quantile_sorted(stats, 1.0 - alpha / 2.0),
    )
}

fn check_bootstrap_args(b: usize, level: f64) -> Result<()> {
    if b == 0 {
        return Err(AuditError::InvalidArgument(
            "resample count B must be at least 1".to_string(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(AuditError::InvalidArgument(format!(
            "CI level must lie in (0,1), got {level}"
        )));
    }
    Ok(())
}

/// Two-sided exact sign test on discordant counts: doubles the upper
/// binomial(n, 1/2) tail at max(pos, neg), capped at 1. Zero discordant
/// pairs give p = 1.
pub fn exact_sign_test(pos: usize, neg: usize) -> f64 {
    let n = pos + neg;
    if n == 0 {
        return 1.0;
    }
    let m = pos.max(neg);
    let ln2 = std::f64::consts::LN_2;
    let mut tail = 0.0;
    for k in m..=n {
        tail += (ln_choose(n, k) - n as f64 * ln2).exp();
    }
    (2.0 * tail).min(1.0)
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Percentile bootstrap CI for the mean of paired differences.
pub fn paired_bootstrap(diffs: &[f64], b: usize, seed: u64, level: f64) -> Result<EstimateCI> {
    if diffs.is_empty() {
        return Err(AuditError::EmptyInput(
            "paired_bootstrap needs at least one difference".to_string(),
        ));
    }
    check_bootstrap_args(b, level)?;
    let n = diffs.len();
    let mut stats: Vec<f64> = (0..b)
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let mut sum = 0.0;
            for _ in 0..n {
                sum += diffs[rng.random_range(0..n)];
            }
            sum / n as f64
        })
        .collect();
    let (lo, hi) = percentile_interval(&mut stats, level);
    Ok(EstimateCI {
        point: mean(diffs),
        lo,
        hi,
        level,
        method: CiMethod::PairedBootstrap,
        b,
        seed,
    })
}

/// Percentile bootstrap that resamples whole clusters with replacement and
/// pools their observations, so larger clusters weigh proportionally. With
/// singleton clusters this reproduces `paired_bootstrap` bit for bit under
/// the shared seed policy.
pub fn cluster_bootstrap(clusters: &[Cluster], b: usize, seed: u64, level: f64) -> Result<EstimateCI> {
    if clusters.is_empty() {
        return Err(AuditError::EmptyInput(
            "cluster_bootstrap needs at least one cluster".to_string(),
        ));
    }
    if let Some(c) = clusters.iter().find(|c| c.observations.is_empty()) {
        return Err(AuditError::InvalidArgument(format!(
            "cluster ({}, {}) has no observations",
            c.key.0, c.key.1
        )));
    }
    check_bootstrap_args(b, level)?;
    let m = clusters.len();
    let mut pooled_sum = 0.0;
    let mut pooled_count = 0usize;
    for c in clusters {
        for &v in &c.observations {
            pooled_sum += v;
            pooled_count += 1;
        }
    }
    let mut stats: Vec<f64> = (0..b)
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let mut sum = 0.0;
            let mut count = 0usize;
            for _ in 0..m {
                let cluster = &clusters[rng.random_range(0..m)];
                for &v in &cluster.observations {
                    sum += v;
                    count += 1;
                }
            }
            sum / count as f64
        })
        .collect();
    let (lo, hi) = percentile_interval(&mut stats, level);
    Ok(EstimateCI {
        point: pooled_sum / pooled_count as f64,
        lo,
        hi,
        level,
        method: CiMethod::ClusterBootstrap,
        b,
        seed,
    })
}

/// Percentile bootstrap for a difference of two independent proportions;
/// each replicate resamples both sides independently.
pub fn unpaired_gap_bootstrap(
    a: &[bool],
    b_side: &[bool],
    b: usize,
    seed: u64,
    level: f64,
) -> Result<EstimateCI> {
    if a.is_empty() || b_side.is_empty() {
        return Err(AuditError::EmptyInput(
            "unpaired_gap_bootstrap needs non-empty samples on both sides".to_string(),
        ));
    }
    check_bootstrap_args(b, level)?;
    let av: Vec<f64> = a.iter().map(|&x| x as u8 as f64).collect();
    let bv: Vec<f64> = b_side.iter().map(|&x| x as u8 as f64).collect();
    let point = mean(&av) - mean(&bv);
    let (na, nb) = (av.len(), bv.len());
    let mut stats: Vec<f64> = (0..b)
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let mut sum_a = 0.0;
            for _ in 0..na {
                sum_a += av[rng.random_range(0..na)];
            }
            let mut sum_b = 0.0;
            for _ in 0..nb {
                sum_b += bv[rng.random_range(0..nb)];
            }
            sum_a / na as f64 - sum_b / nb as f64
        })
        .collect();
    let (lo, hi) = percentile_interval(&mut stats, level);
    Ok(EstimateCI {
        point,
        lo,
        hi,
        level,
        method: CiMethod::UnpairedBootstrap,
        b,
        seed,
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, level: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(AuditError::InvalidArgument(
            "wilson_interval needs n >= 1".to_string(),
        ));
    }
    if successes > n {
        return Err(AuditError::InvalidArgument(format!(
            "successes {successes} > n {n}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(AuditError::InvalidArgument(format!(
            "CI level must lie in (0,1), got {level}"
        )));
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let margin = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let mut lo = ((center - margin) / denom).clamp(0.0, 1.0);
    let mut hi = ((center + margin) / denom).clamp(0.0, 1.0);
    if successes == 0 {
        lo = 0.0;
    }
    if successes == n {
        hi = 1.0;
    }
    Ok((lo, hi))
}

/// Spearman rank correlation with average-rank tie handling.
///
/// A constant input on either side returns (0, 1) by convention. The
/// p-value uses exact permutation enumeration for n <= 10 and the
/// t-approximation with n-2 degrees of freedom above that.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(AuditError::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(AuditError::InvalidArgument(format!(
            "spearman needs at least 3 pairs, got {n}"
        )));
    }
    if is_constant(xs) || is_constant(ys) {
        return Ok((0.0, 1.0));
    }
    let rx = midranks(xs);
    let ry = midranks(ys);
    let rho = pearson(&rx, &ry);
    let p = if n <= 10 {
        exact_permutation_p(&rx, &ry, rho)
    } else {
        let t2 = 1.0 - rho * rho;
        if t2 <= f64::EPSILON {
            0.0
        } else {
            let t = rho.abs() * ((n - 2) as f64 / t2).sqrt();
            let dist = StudentsT::new(0.0, 1.0, (n - 2) as f64)
                .expect("valid dof");
            (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
        }
    };
    Ok((rho, p))
}

fn is_constant(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// 1-based average ranks, ties share their mid-rank.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        dx += (x - mx) * (x - mx);
        dy += (y - my) * (y - my);
    }
    let denom = (dx * dy).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (num / denom).clamp(-1.0, 1.0)
    }
}

/// Two-sided exact permutation p: share of permutations of `ry` whose
/// correlation magnitude reaches the observed one.
fn exact_permutation_p(rx: &[f64], ry: &[f64], rho_obs: f64) -> f64 {
    let n = ry.len();
    let threshold = rho_obs.abs() - 1e-12;
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut perm: Vec<f64> = ry.to_vec();
    // Heap's algorithm, iterative form
    let mut counters = vec![0usize; n];
    let mut check = |perm: &[f64]| {
        total += 1;
        if pearson(rx, perm).abs() >= threshold {
            hits += 1;
        }
    };
    check(&perm);
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            check(&perm);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Cohen's kappa for a binary 2x2 table (a = both pass, b = first-only
/// pass, c = second-only pass, d = both fail). A degenerate chance
/// agreement of 1 yields kappa 1 when observed agreement is also 1, else 0.
pub fn kappa_binary(a: usize, b: usize, c: usize, d: usize) -> Result<f64> {
    let n = a + b + c + d;
    if n == 0 {
        return Err(AuditError::EmptyInput(
            "kappa_binary needs a non-empty table".to_string(),
        ));
    }
    let nf = n as f64;
    let po = (a + d) as f64 / nf;
    let pe = ((a + b) as f64 * (a + c) as f64 + (c + d) as f64 * (b + d) as f64) / (nf * nf);
    if (1.0 - pe).abs() < 1e-12 {
        return Ok(if (1.0 - po).abs() < 1e-12 { 1.0 } else { 0.0 });
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Raw observed agreement (a + d) / n for the same 2x2 table.
pub fn percent_agreement(a: usize, b: usize, c: usize, d: usize) -> Result<f64> {
    let n = a + b + c + d;
    if n == 0 {
        return Err(AuditError::EmptyInput(
            "percent_agreement needs a non-empty table".to_string(),
        ));
    }
    Ok((a + d) as f64 / n as f64)
}
