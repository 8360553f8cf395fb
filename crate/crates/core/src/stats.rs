//! Agreement, label summaries, clustering evaluation and sense-distribution
//! based variation and change measures.
//!
//! Statistics that are not defined for the given data (too little overlap,
//! zero variance, empty distributions) are returned as
//! [`Error::Undefined`] and never coerced to zero.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::cluster::Clustering;
use crate::error::{Error, Result};
use crate::ingest::write_table;
use crate::model::{is_high, Judgment, Label, PairKey, Use, UseId};
use crate::wug::Wug;

/// Average ranks (1-based), ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of two rank vectors. Average ranks are multiples of
/// one half, so the sums are formed exactly in integers over doubled ranks.
fn rank_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as i128;
    let doubled = |v: &[f64]| -> Vec<i128> { v.iter().map(|r| (r * 2.0).round() as i128).collect() };
    let (a, b) = (doubled(x), doubled(y));
    let (sa, sb) = (a.iter().sum::<i128>(), b.iter().sum::<i128>());
    let sab: i128 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    let saa: i128 = a.iter().map(|p| p * p).sum();
    let sbb: i128 = b.iter().map(|q| q * q).sum();
    let cov = n * sab - sa * sb;
    let (va, vb) = (n * saa - sa * sa, n * sbb - sb * sb);
    if va == 0 || vb == 0 {
        return Err(Error::Undefined("zero variance"));
    }
    if cov * cov == va * vb {
        return Ok(cov.signum() as f64);
    }
    Ok((cov as f64 / ((va as f64).sqrt() * (vb as f64).sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Undefined("series have different lengths"));
    }
    if x.len() < 2 {
        return Err(Error::Undefined("fewer than two paired values"));
    }
    rank_correlation(&average_ranks(x), &average_ranks(y))
}

/// Krippendorff's alpha with the ordinal difference function. Each unit
/// holds the values assigned to it by any number of coders; units with a
/// single value are not pairable and are ignored.
pub fn krippendorff_alpha_ordinal<T: Ord + Clone>(units: &[Vec<T>]) -> Result<f64> {
    let categories: Vec<T> = units
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<T>>()
        .into_iter()
        .collect();
    let index = |v: &T| categories.binary_search(v).expect("collected above");
    let k = categories.len();
    let mut coincidence = vec![0.0; k * k];
    for unit in units.iter().filter(|u| u.len() >= 2) {
        let m = unit.len() as f64;
        for (i, a) in unit.iter().enumerate() {
            for (j, b) in unit.iter().enumerate() {
                if i != j {
                    coincidence[index(a) * k + index(b)] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let marginals: Vec<f64> = (0..k).map(|c| (0..k).map(|d| coincidence[c * k + d]).sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n == 0.0 {
        return Err(Error::Undefined("no pairable values"));
    }
    let delta = |c: usize, d: usize| {
        let (lo, hi) = (c.min(d), c.max(d));
        let span: f64 = marginals[lo..=hi].iter().sum::<f64>() - (marginals[c] + marginals[d]) / 2.0;
        span * span
    };
    let (mut observed, mut expected) = (0.0, 0.0);
    for c in 0..k {
        for d in 0..k {
            let dd = delta(c, d);
            observed += coincidence[c * k + d] * dd;
            expected += marginals[c] * marginals[d] * dd;
        }
    }
    if expected == 0.0 {
        return Err(Error::Undefined("no variation in values"));
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Groups informative labels (Cannot decide dropped) by pair.
fn labels_by_pair(judgments: &[Judgment]) -> BTreeMap<&PairKey, Vec<Label>> {
    let mut out: BTreeMap<&PairKey, Vec<Label>> = BTreeMap::new();
    for j in judgments.iter().filter(|j| !j.label.is_cannot_decide()) {
        out.entry(&j.pair).or_default().push(j.label);
    }
    out
}

pub fn alpha_from_judgments(judgments: &[Judgment]) -> Result<f64> {
    let units: Vec<Vec<Label>> = labels_by_pair(judgments).into_values().collect();
    krippendorff_alpha_ordinal(&units)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotator1: String,
    pub annotator2: String,
    pub overlap: usize,
    /// `None` when undefined for this pair.
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pairs: Vec<PairAgreement>,
    /// Overlap-weighted mean over the pairs with a defined correlation.
    pub mean_spearman: Option<f64>,
    pub alpha: Option<f64>,
    pub cannot_decide: BTreeMap<String, usize>,
}

/// Informative labels of two annotators on the pairs both judged.
fn overlap(judgments: &[Judgment], a: &str, b: &str) -> Vec<(f64, f64)> {
    let of = |name: &str| -> BTreeMap<&PairKey, f64> {
        judgments
            .iter()
            .filter(|j| j.annotator == name)
            .filter_map(|j| j.label.score().map(|s| (&j.pair, s)))
            .collect()
    };
    let (la, lb) = (of(a), of(b));
    la.iter()
        .filter_map(|(p, &x)| lb.get(p).map(|&y| (x, y)))
        .collect()
}

pub fn agreement(judgments: &[Judgment]) -> AgreementReport {
    let annotators: BTreeSet<&str> = judgments.iter().map(|j| j.annotator.as_str()).collect();
    let annotators: Vec<&str> = annotators.into_iter().collect();
    let mut pairs = Vec::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let shared = overlap(judgments, a, b);
            let (x, y): (Vec<f64>, Vec<f64>) = shared.iter().copied().unzip();
            pairs.push(PairAgreement {
                annotator1: a.to_string(),
                annotator2: b.to_string(),
                overlap: shared.len(),
                spearman: spearman(&x, &y).ok(),
            });
        }
    }
    let (num, den) = pairs
        .iter()
        .filter_map(|p| p.spearman.map(|r| (r * p.overlap as f64, p.overlap as f64)))
        .fold((0.0, 0.0), |acc, (a, b)| (acc.0 + a, acc.1 + b));
    let mut cannot_decide: BTreeMap<String, usize> = annotators.iter().map(|a| (a.to_string(), 0)).collect();
    for j in judgments.iter().filter(|j| j.label.is_cannot_decide()) {
        *cannot_decide.entry(j.annotator.clone()).or_default() += 1;
    }
    AgreementReport {
        pairs,
        mean_spearman: (den > 0.0).then(|| num / den),
        alpha: alpha_from_judgments(judgments).ok(),
        cannot_decide,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Word,
    Grouping,
    Annotator,
}

/// Mean informative label per key. Under [`Scope::Grouping`], pairs whose
/// uses share a grouping count toward it; cross-grouping pairs are keyed
/// `g1|g2` (sorted).
pub fn mean_labels(judgments: &[Judgment], uses: &[Use], scope: Scope) -> BTreeMap<String, f64> {
    let by_id: HashMap<&UseId, &Use> = uses.iter().map(|u| (&u.id, u)).collect();
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for j in judgments {
        let Some(score) = j.label.score() else { continue };
        let key = match scope {
            Scope::Annotator => Some(j.annotator.clone()),
            Scope::Word => by_id.get(j.pair.first()).map(|u| u.lemma.clone()),
            Scope::Grouping => {
                let g = |id: &UseId| by_id.get(id).and_then(|u| u.grouping.clone());
                match (g(j.pair.first()), g(j.pair.second())) {
                    (Some(a), Some(b)) if a == b => Some(a),
                    (Some(a), Some(b)) => Some(if a < b { format!("{a}|{b}") } else { format!("{b}|{a}") }),
                    _ => None,
                }
            }
        };
        if let Some(key) = key {
            let e = acc.entry(key).or_default();
            e.0 += score;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub overlap: usize,
    pub spearman: Option<f64>,
    pub exact_match: f64,
    /// Agreement after mapping labels to low (< 2.5) / high (≥ 2.5).
    pub binarized_accuracy: f64,
}

/// Compares two annotators (typically a human and a computational one) on
/// the pairs both labelled with an informative label.
pub fn compare_annotators(judgments: &[Judgment], a: &str, b: &str) -> Result<Comparison> {
    let shared = overlap(judgments, a, b);
    if shared.is_empty() {
        return Err(Error::NoOverlap(a.to_owned(), b.to_owned()));
    }
    let n = shared.len() as f64;
    let exact = shared.iter().filter(|(x, y)| x == y).count() as f64;
    let binary = shared.iter().filter(|(x, y)| is_high(*x) == is_high(*y)).count() as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = shared.iter().copied().unzip();
    Ok(Comparison {
        overlap: shared.len(),
        spearman: spearman(&x, &y).ok(),
        exact_match: exact / n,
        binarized_accuracy: binary / n,
    })
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Hubert–Arabie adjusted Rand index of two labelings of the same elements
/// (`p[i]` and `q[i]` label element `i`).
pub fn adjusted_rand_index<A: Eq + Hash, B: Eq + Hash>(p: &[A], q: &[B]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ElementMismatch(format!("{} vs {} elements", p.len(), q.len())));
    }
    if p.is_empty() {
        return Err(Error::Undefined("empty element set"));
    }
    let mut table: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (a, b) in p.iter().zip(q) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_rows * sum_cols / choose2(p.len() as u64).max(f64::MIN_POSITIVE);
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        // Both labelings are all-singletons or a single cluster.
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// ARI between two cluster assignments. Uses marked -1 in either are dropped
/// from both; the remaining element sets must coincide.
pub fn ari_assignments(a: &BTreeMap<UseId, i64>, b: &BTreeMap<UseId, i64>) -> Result<f64> {
    let dropped: BTreeSet<&UseId> = a
        .iter()
        .chain(b.iter())
        .filter(|(_, &c)| c < 0)
        .map(|(id, _)| id)
        .collect();
    let ka: BTreeSet<&UseId> = a.keys().filter(|id| !dropped.contains(id)).collect();
    let kb: BTreeSet<&UseId> = b.keys().filter(|id| !dropped.contains(id)).collect();
    if ka != kb {
        let only_a: Vec<String> = ka.difference(&kb).map(|s| s.to_string()).collect();
        let only_b: Vec<String> = kb.difference(&ka).map(|s| s.to_string()).collect();
        return Err(Error::ElementMismatch(format!(
            "only in first: [{}]; only in second: [{}]",
            only_a.join(", "),
            only_b.join(", ")
        )));
    }
    let p: Vec<i64> = ka.iter().map(|id| a[*id]).collect();
    let q: Vec<i64> = ka.iter().map(|id| b[*id]).collect();
    adjusted_rand_index(&p, &q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseFrequencyDistribution {
    /// `None` when no grouping filter was applied.
    pub grouping: Option<String>,
    /// Count per cluster id, zero-filled over every cluster of the clustering.
    pub counts: BTreeMap<i64, u64>,
    /// `None` when the total count is zero.
    pub probabilities: Option<BTreeMap<i64, f64>>,
}

impl SenseFrequencyDistribution {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn attested(&self) -> usize {
        self.counts.values().filter(|&&c| c > 0).count()
    }
}

pub fn sense_frequency(clustering: &Clustering, wug: &Wug, grouping: Option<&str>) -> SenseFrequencyDistribution {
    let mut counts: BTreeMap<i64, u64> = (0..clustering.num_clusters() as i64).map(|c| (c, 0)).collect();
    for (id, u) in &wug.nodes {
        if wug.excluded.contains(id) || grouping.is_some_and(|g| u.grouping.as_deref() != Some(g)) {
            continue;
        }
        if let Some(c) = clustering.cluster_of(id).filter(|&c| c >= 0) {
            *counts.entry(c).or_default() += 1;
        }
    }
    let total: u64 = counts.values().sum();
    let probabilities =
        (total > 0).then(|| counts.iter().map(|(&c, &n)| (c, n as f64 / total as f64)).collect());
    SenseFrequencyDistribution {
        grouping: grouping.map(str::to_owned),
        counts,
        probabilities,
    }
}

fn aligned(d1: &SenseFrequencyDistribution, d2: &SenseFrequencyDistribution) -> Result<Vec<(f64, f64)>> {
    let (t1, t2) = (d1.total(), d2.total());
    if t1 == 0 || t2 == 0 {
        return Err(Error::Undefined("empty sense distribution"));
    }
    let ids: BTreeSet<i64> = d1.counts.keys().chain(d2.counts.keys()).copied().collect();
    Ok(ids
        .into_iter()
        .map(|c| {
            let p = *d1.counts.get(&c).unwrap_or(&0) as f64 / t1 as f64;
            let q = *d2.counts.get(&c).unwrap_or(&0) as f64 / t2 as f64;
            (p, q)
        })
        .collect())
}

/// Jensen–Shannon distance (square root of the base-2 divergence), in [0, 1].
pub fn graded_change(d1: &SenseFrequencyDistribution, d2: &SenseFrequencyDistribution) -> Result<f64> {
    let mut divergence = 0.0;
    for (p, q) in aligned(d1, d2)? {
        let m = (p + q) / 2.0;
        if p > 0.0 {
            divergence += 0.5 * p * (p / m).log2();
        }
        if q > 0.0 {
            divergence += 0.5 * q * (q / m).log2();
        }
    }
    Ok(divergence.clamp(0.0, 1.0).sqrt())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryChange {
    pub gained: BTreeSet<i64>,
    pub lost: BTreeSet<i64>,
}

/// A cluster is gained when it has at most `k` uses in the first grouping
/// and at least `n` in the second; lost is the mirror case.
pub fn binary_change(d1: &SenseFrequencyDistribution, d2: &SenseFrequencyDistribution, k: u64, n: u64) -> BinaryChange {
    let ids: BTreeSet<i64> = d1.counts.keys().chain(d2.counts.keys()).copied().collect();
    let mut out = BinaryChange::default();
    for c in ids {
        let (a, b) = (*d1.counts.get(&c).unwrap_or(&0), *d2.counts.get(&c).unwrap_or(&0));
        if a <= k && b >= n {
            out.gained.insert(c);
        } else if b <= k && a >= n {
            out.lost.insert(c);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub grouping1: String,
    pub grouping2: String,
    pub graded: Option<f64>,
    pub gained: BTreeSet<i64>,
    pub lost: BTreeSet<i64>,
    pub k: u64,
    pub n: u64,
}

pub fn change_report(clustering: &Clustering, wug: &Wug, g1: &str, g2: &str, k: u64, n: u64) -> ChangeReport {
    let d1 = sense_frequency(clustering, wug, Some(g1));
    let d2 = sense_frequency(clustering, wug, Some(g2));
    let binary = binary_change(&d1, &d2, k, n);
    ChangeReport {
        grouping1: g1.to_owned(),
        grouping2: g2.to_owned(),
        graded: graded_change(&d1, &d2).ok(),
        gained: binary.gained,
        lost: binary.lost,
        k,
        n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingVariation {
    pub distribution: SenseFrequencyDistribution,
    pub attested_clusters: usize,
}

/// Sense distributions and attested-cluster counts per grouping.
pub fn variation(clustering: &Clustering, wug: &Wug, groupings: &[String]) -> Result<BTreeMap<String, GroupingVariation>> {
    if groupings.is_empty() {
        return Err(Error::Undefined("no groupings given"));
    }
    Ok(groupings
        .iter()
        .map(|g| {
            let d = sense_frequency(clustering, wug, Some(g));
            let attested = d.attested();
            (
                g.clone(),
                GroupingVariation {
                    distribution: d,
                    attested_clusters: attested,
                },
            )
        })
        .collect())
}

/// Groupings present on the graph's uses, sorted.
pub fn groupings(wug: &Wug) -> Vec<String> {
    wug.nodes
        .values()
        .filter_map(|u| u.grouping.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_owned(), |x| format!("{x}"))
}

pub fn agreement_csv(report: &AgreementReport) -> Vec<u8> {
    let mut rows: Vec<Vec<String>> = report
        .pairs
        .iter()
        .map(|p| {
            vec![
                p.annotator1.clone(),
                p.annotator2.clone(),
                p.overlap.to_string(),
                fmt_opt(p.spearman),
            ]
        })
        .collect();
    rows.push(vec!["*".into(), "*".into(), String::new(), fmt_opt(report.mean_spearman)]);
    write_table(&["annotator1", "annotator2", "overlap", "spearman"], rows)
}

pub fn alpha_csv(report: &AgreementReport) -> Vec<u8> {
    let mut rows = vec![vec!["krippendorff_alpha_ordinal".to_owned(), fmt_opt(report.alpha)]];
    for (a, n) in &report.cannot_decide {
        rows.push(vec![format!("cannot_decide:{a}"), n.to_string()]);
    }
    write_table(&["measure", "value"], rows)
}

pub fn means_csv(scope: Scope, means: &BTreeMap<String, f64>) -> Vec<u8> {
    let scope = match scope {
        Scope::Word => "word",
        Scope::Grouping => "grouping",
        Scope::Annotator => "annotator",
    };
    write_table(
        &["scope", "key", "mean"],
        means.iter().map(|(k, v)| vec![scope.to_owned(), k.clone(), format!("{v}")]),
    )
}

pub fn frequencies_csv(distributions: &[SenseFrequencyDistribution]) -> Vec<u8> {
    let mut rows = Vec::new();
    for d in distributions {
        let g = d.grouping.clone().unwrap_or_else(|| "*".into());
        for (&c, &n) in &d.counts {
            let p = d.probabilities.as_ref().map(|ps| ps[&c]);
            rows.push(vec![g.clone(), c.to_string(), n.to_string(), fmt_opt(p)]);
        }
    }
    write_table(&["grouping", "cluster_id", "count", "probability"], rows)
}

pub fn change_csv(reports: &[ChangeReport]) -> Vec<u8> {
    let set = |s: &BTreeSet<i64>| s.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
    write_table(
        &["grouping1", "grouping2", "jsd_distance", "gained", "lost", "k", "n"],
        reports.iter().map(|r| {
            vec![
                r.grouping1.clone(),
                r.grouping2.clone(),
                fmt_opt(r.graded),
                set(&r.gained),
                set(&r.lost),
                r.k.to_string(),
                r.n.to_string(),
            ]
        }),
    )
}
