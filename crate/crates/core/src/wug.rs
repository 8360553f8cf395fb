//! Word Usage Graphs: uses as nodes, median judgments as edge weights.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dedup_judgments, Judgment, Label, PairKey, Use, UseId};

/// Median of the informative labels; NaN when every label is Cannot decide.
pub fn aggregate_edge(labels: &[Label]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyEdge);
    }
    let mut scores: Vec<f64> = labels.iter().filter_map(|l| l.score()).collect();
    if scores.is_empty() {
        return Ok(f64::NAN);
    }
    scores.sort_by(f64::total_cmp);
    let mid = scores.len() / 2;
    Ok(if scores.len() % 2 == 1 {
        scores[mid]
    } else {
        (scores[mid - 1] + scores[mid]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJudgment {
    pub annotator: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Median weight in [1, 4]; `None` marks a NaN edge.
    pub weight: Option<f64>,
    pub judgments: Vec<EdgeJudgment>,
}

impl Edge {
    pub fn is_nan(&self) -> bool {
        self.weight.is_none()
    }

    pub fn weight_or_nan(&self) -> f64 {
        self.weight.unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wug {
    pub nodes: BTreeMap<UseId, Use>,
    pub edges: BTreeMap<PairKey, Edge>,
    pub excluded: BTreeSet<UseId>,
}

pub fn build_wug(uses: &[Use], judgments: &[Judgment]) -> Result<Wug> {
    let nodes: BTreeMap<UseId, Use> = uses.iter().map(|u| (u.id.clone(), u.clone())).collect();
    let mut grouped: BTreeMap<PairKey, Vec<EdgeJudgment>> = BTreeMap::new();
    for j in dedup_judgments(judgments.iter().cloned()) {
        for id in [j.pair.first(), j.pair.second()] {
            if !nodes.contains_key(id) {
                return Err(Error::UnknownUse(id.clone()));
            }
        }
        grouped.entry(j.pair).or_default().push(EdgeJudgment {
            annotator: j.annotator,
            label: j.label,
        });
    }
    let mut edges = BTreeMap::new();
    for (pair, mut judgments) in grouped {
        judgments.sort_by(|a, b| a.annotator.cmp(&b.annotator));
        let labels: Vec<Label> = judgments.iter().map(|j| j.label).collect();
        let w = aggregate_edge(&labels)?;
        edges.insert(
            pair,
            Edge {
                weight: (!w.is_nan()).then_some(w),
                judgments,
            },
        );
    }
    let mut wug = Wug {
        nodes,
        edges,
        excluded: BTreeSet::new(),
    };
    wug.excluded = node_exclusion(&wug);
    Ok(wug)
}

/// Uses with at least half of the judgments on their incident edges being
/// Cannot decide. Uses without judgments are kept.
pub fn node_exclusion(wug: &Wug) -> BTreeSet<UseId> {
    let mut counts: HashMap<&UseId, (usize, usize)> = HashMap::new();
    for (pair, edge) in &wug.edges {
        let zeros = edge.judgments.iter().filter(|j| j.label.is_cannot_decide()).count();
        for id in [pair.first(), pair.second()] {
            let c = counts.entry(id).or_default();
            c.0 += zeros;
            c.1 += edge.judgments.len();
        }
    }
    counts
        .into_iter()
        .filter(|&(_, (zeros, total))| total > 0 && 2 * zeros >= total)
        .map(|(id, _)| id.clone())
        .collect()
}

/// Node criteria over use metadata. Unset fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groupings: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_from: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_to: Option<NaiveDate>,
}

impl UseFilter {
    pub fn grouping(g: impl Into<String>) -> Self {
        Self {
            groupings: Some(BTreeSet::from([g.into()])),
            ..Self::default()
        }
    }

    pub fn dates(from: Option<NaiveDate>, to: Option<NaiveDate>) -> Self {
        Self {
            date_from: from,
            date_to: to,
            ..Self::default()
        }
    }

    /// Uses without a date never match a date range; uses without a grouping
    /// never match a grouping set.
    pub fn matches(&self, u: &Use) -> bool {
        if let Some(gs) = &self.groupings {
            if !u.grouping.as_ref().is_some_and(|g| gs.contains(g)) {
                return false;
            }
        }
        if self.date_from.is_some() || self.date_to.is_some() {
            let Some(d) = u.date else { return false };
            if self.date_from.is_some_and(|f| d < f) || self.date_to.is_some_and(|t| d > t) {
                return false;
            }
        }
        true
    }

    pub fn and(&self, other: &UseFilter) -> UseFilter {
        let groupings = match (&self.groupings, &other.groupings) {
            (Some(a), Some(b)) => Some(a.intersection(b).cloned().collect()),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        UseFilter {
            groupings,
            date_from: self.date_from.max(other.date_from),
            date_to: match (self.date_to, other.date_to) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }
}

impl Wug {
    /// Induced subgraph on the uses matching `keep`. Edge weights and the
    /// exclusion flags are inherited from the parent graph.
    pub fn subgraph(&self, keep: impl Fn(&Use) -> bool) -> Wug {
        let nodes: BTreeMap<UseId, Use> = self
            .nodes
            .iter()
            .filter(|(_, u)| keep(u))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|(p, _)| nodes.contains_key(p.first()) && nodes.contains_key(p.second()))
            .map(|(p, e)| (p.clone(), e.clone()))
            .collect();
        let excluded = self
            .excluded
            .iter()
            .filter(|id| nodes.contains_key(*id))
            .cloned()
            .collect();
        Wug {
            nodes,
            edges,
            excluded,
        }
    }

    pub fn filter(&self, filter: &UseFilter) -> Wug {
        self.subgraph(|u| filter.matches(u))
    }

    /// Rebuilds the graph from the judgments of the selected annotators only.
    pub fn by_annotators(&self, keep: impl Fn(&str) -> bool) -> Wug {
        let mut edges = BTreeMap::new();
        for (pair, edge) in &self.edges {
            let judgments: Vec<EdgeJudgment> =
                edge.judgments.iter().filter(|j| keep(&j.annotator)).cloned().collect();
            if judgments.is_empty() {
                continue;
            }
            let labels: Vec<Label> = judgments.iter().map(|j| j.label).collect();
            let w = aggregate_edge(&labels).expect("non-empty");
            edges.insert(
                pair.clone(),
                Edge {
                    weight: (!w.is_nan()).then_some(w),
                    judgments,
                },
            );
        }
        let mut wug = Wug {
            nodes: self.nodes.clone(),
            edges,
            excluded: BTreeSet::new(),
        };
        wug.excluded = node_exclusion(&wug);
        wug
    }

    /// Non-excluded node ids in ascending order.
    pub fn clusterable(&self) -> Vec<&UseId> {
        self.nodes.keys().filter(|id| !self.excluded.contains(*id)).collect()
    }

    pub fn judgment_count(&self) -> usize {
        self.edges.values().map(|e| e.judgments.len()).sum()
    }
}
