//! Layout and filterable graph documents for clustered WUGs.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::Clustering;
use crate::error::{Error, Result};
use crate::model::{UseId, THRESHOLD};
use crate::wug::{UseFilter, Wug};

pub const SCHEMA_VERSION: u32 = 1;
pub const LAYOUT_METHOD: &str = "spring";
pub const LAYOUT_ITERATIONS: usize = 500;

/// Cluster colors; clusters beyond the palette reuse colors and are hatched.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78",
];

/// Spring embedding: edges above the threshold pull their endpoints
/// together in proportion to `w - 2.5`, edges below push them apart in
/// proportion to `2.5 - w`, every pair repels weakly. NaN edges exert no
/// force. Nodes start around per-cluster anchors with seeded jitter.
pub fn layout(wug: &Wug, clustering: &Clustering, seed: u64) -> BTreeMap<UseId, [f64; 2]> {
    layout_with(wug, clustering, seed, LAYOUT_ITERATIONS)
}

pub fn layout_with(wug: &Wug, clustering: &Clustering, seed: u64, iterations: usize) -> BTreeMap<UseId, [f64; 2]> {
    let ids: Vec<&UseId> = wug.nodes.keys().collect();
    let n = ids.len();
    if n == 0 {
        return BTreeMap::new();
    }
    if n == 1 {
        return BTreeMap::from([(ids[0].clone(), [0.0, 0.0])]);
    }
    let index: BTreeMap<&UseId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let edges: Vec<(usize, usize, f64)> = wug
        .edges
        .iter()
        .filter_map(|(p, e)| Some((*index.get(p.first())?, *index.get(p.second())?, e.weight?)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (4.0 / n as f64).sqrt();
    let anchors = clustering.num_clusters().max(1) as f64;
    let mut pos: Vec<[f64; 2]> = ids
        .iter()
        .map(|id| {
            let c = clustering.cluster_of(id).unwrap_or(-1);
            let angle = std::f64::consts::TAU * (c.max(0) as f64) / anchors;
            let r = if c < 0 { 0.0 } else { 0.5 };
            [
                r * angle.cos() + rng.random_range(-0.5..0.5),
                r * angle.sin() + rng.random_range(-0.5..0.5),
            ]
        })
        .collect();

    let t0 = 0.2;
    let mut disp = vec![[0.0f64; 2]; n];
    for it in 0..iterations {
        disp.iter_mut().for_each(|d| *d = [0.0, 0.0]);
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy, d) = separation(&pos, i, j);
                let f = k * k / d;
                push(&mut disp, i, j, dx / d * f, dy / d * f);
            }
        }
        for &(i, j, w) in &edges {
            let (dx, dy, d) = separation(&pos, i, j);
            let f = if w >= THRESHOLD {
                -(w - THRESHOLD) * d * d / k
            } else {
                (THRESHOLD - w) * k * k / d
            };
            push(&mut disp, i, j, dx / d * f, dy / d * f);
        }
        let t = t0 * (1.0 - it as f64 / iterations as f64);
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > 0.0 {
                let step = len.min(t) / len;
                p[0] += d[0] * step;
                p[1] += d[1] * step;
            }
        }
    }
    let cx = pos.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = pos.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    ids.into_iter()
        .zip(pos)
        .map(|(id, p)| (id.clone(), [p[0] - cx, p[1] - cy]))
        .collect()
}

fn separation(pos: &[[f64; 2]], i: usize, j: usize) -> (f64, f64, f64) {
    let (mut dx, mut dy) = (pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]);
    let mut d = (dx * dx + dy * dy).sqrt();
    if d < 1e-9 {
        // Coincident nodes: separate along a fixed direction.
        dx = 1e-9 * (1.0 + i as f64);
        dy = 1e-9 * (1.0 + j as f64);
        d = (dx * dx + dy * dy).sqrt();
    }
    (dx, dy, d)
}

fn push(disp: &mut [[f64; 2]], i: usize, j: usize, fx: f64, fy: f64) {
    disp[i][0] += fx;
    disp[i][1] += fy;
    disp[j][0] -= fx;
    disp[j][1] -= fy;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewNode {
    pub id: UseId,
    pub x: f64,
    pub y: f64,
    pub cluster: i64,
    /// Palette index; `None` for excluded nodes.
    pub color: Option<usize>,
    pub hatched: bool,
    pub excluded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<String>,
    pub context: String,
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeClass {
    High,
    Low,
    Nan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEdge {
    pub source: UseId,
    pub target: UseId,
    pub weight: Option<f64>,
    pub class: EdgeClass,
    pub nan: bool,
    pub annotators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequencies {
    pub grouping: Option<String>,
    pub counts: BTreeMap<i64, u64>,
    pub probabilities: Option<BTreeMap<i64, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cluster_sizes: BTreeMap<i64, usize>,
    pub frequencies: Vec<Frequencies>,
    pub clustering_method: String,
    pub layout_method: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphView {
    pub schema_version: u32,
    pub lemma: String,
    pub nodes: Vec<ViewNode>,
    pub edges: Vec<ViewEdge>,
    pub summary: Summary,
}

fn color_of(cluster: i64) -> (Option<usize>, bool) {
    if cluster < 0 {
        (None, false)
    } else {
        let c = cluster as usize;
        (Some(c % PALETTE.len()), c >= PALETTE.len())
    }
}

fn frequencies(nodes: &[ViewNode], ids: &BTreeSet<i64>, grouping: Option<&str>) -> Frequencies {
    let mut counts: BTreeMap<i64, u64> = ids.iter().map(|&c| (c, 0)).collect();
    for n in nodes.iter().filter(|n| !n.excluded && n.cluster >= 0) {
        if grouping.is_none_or(|g| n.grouping.as_deref() == Some(g)) {
            *counts.entry(n.cluster).or_default() += 1;
        }
    }
    let total: u64 = counts.values().sum();
    Frequencies {
        grouping: grouping.map(str::to_owned),
        probabilities: (total > 0).then(|| counts.iter().map(|(&c, &k)| (c, k as f64 / total as f64)).collect()),
        counts,
    }
}

fn summarize(nodes: &[ViewNode], clustering_method: String, layout_method: String, seed: u64) -> Summary {
    let mut cluster_sizes: BTreeMap<i64, usize> = BTreeMap::new();
    for n in nodes.iter().filter(|n| n.cluster >= 0) {
        *cluster_sizes.entry(n.cluster).or_default() += 1;
    }
    let ids: BTreeSet<i64> = cluster_sizes.keys().copied().collect();
    let groupings: BTreeSet<&str> = nodes.iter().filter_map(|n| n.grouping.as_deref()).collect();
    let mut freq = vec![frequencies(nodes, &ids, None)];
    freq.extend(groupings.into_iter().map(|g| frequencies(nodes, &ids, Some(g))));
    Summary {
        cluster_sizes,
        frequencies: freq,
        clustering_method,
        layout_method,
        seed,
    }
}

/// Assembles the graph document for a clustered WUG.
pub fn graph_view(lemma: &str, wug: &Wug, clustering: &Clustering, positions: &BTreeMap<UseId, [f64; 2]>) -> GraphView {
    let nodes: Vec<ViewNode> = wug
        .nodes
        .iter()
        .map(|(id, u)| {
            let cluster = clustering.cluster_of(id).unwrap_or(-1);
            let (color, hatched) = color_of(cluster);
            let [x, y] = positions.get(id).copied().unwrap_or([0.0, 0.0]);
            ViewNode {
                id: id.clone(),
                x,
                y,
                cluster,
                color,
                hatched,
                excluded: wug.excluded.contains(id),
                date: u.date,
                grouping: u.grouping.clone(),
                context: u.context.clone(),
                target: u.target().to_owned(),
            }
        })
        .collect();
    let edges = wug
        .edges
        .iter()
        .map(|(p, e)| ViewEdge {
            source: p.first().clone(),
            target: p.second().clone(),
            weight: e.weight,
            class: match e.weight {
                None => EdgeClass::Nan,
                Some(w) if w >= THRESHOLD => EdgeClass::High,
                Some(_) => EdgeClass::Low,
            },
            nan: e.weight.is_none(),
            annotators: e.judgments.iter().map(|j| j.annotator.clone()).collect(),
        })
        .collect();
    let summary = summarize(&nodes, clustering.meta.method.clone(), LAYOUT_METHOD.to_owned(), clustering.meta.seed);
    GraphView {
        schema_version: SCHEMA_VERSION,
        lemma: lemma.to_owned(),
        nodes,
        edges,
        summary,
    }
}

/// Criteria for trimming a graph view. Unset criteria keep everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewFilter {
    #[serde(default, flatten)]
    pub uses: UseFilter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_weight: Option<f64>,
    /// Edges must carry a judgment from each of these annotators.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub annotators: BTreeSet<String>,
    #[serde(default)]
    pub hide_nan: bool,
    /// Drops excluded (noise) nodes.
    #[serde(default)]
    pub hide_noise: bool,
}

impl ViewFilter {
    pub fn and(&self, other: &ViewFilter) -> ViewFilter {
        let pick = |a: Option<f64>, b: Option<f64>, f: fn(f64, f64) -> f64| match (a, b) {
            (Some(x), Some(y)) => Some(f(x, y)),
            (x, y) => x.or(y),
        };
        ViewFilter {
            uses: self.uses.and(&other.uses),
            min_weight: pick(self.min_weight, other.min_weight, f64::max),
            max_weight: pick(self.max_weight, other.max_weight, f64::min),
            annotators: self.annotators.union(&other.annotators).cloned().collect(),
            hide_nan: self.hide_nan || other.hide_nan,
            hide_noise: self.hide_noise || other.hide_noise,
        }
    }

    fn keeps_node(&self, n: &ViewNode) -> bool {
        if self.hide_noise && n.excluded {
            return false;
        }
        let groupings_ok = match &self.uses.groupings {
            Some(gs) => n.grouping.as_ref().is_some_and(|g| gs.contains(g)),
            None => true,
        };
        let dated = self.uses.date_from.is_some() || self.uses.date_to.is_some();
        let dates_ok = !dated
            || n.date.is_some_and(|d| {
                self.uses.date_from.is_none_or(|f| d >= f) && self.uses.date_to.is_none_or(|t| d <= t)
            });
        groupings_ok && dates_ok
    }

    fn keeps_edge(&self, e: &ViewEdge) -> bool {
        if let Some(w) = e.weight {
            if self.min_weight.is_some_and(|m| w < m) || self.max_weight.is_some_and(|m| w > m) {
                return false;
            }
        } else if self.hide_nan {
            return false;
        }
        self.annotators.iter().all(|a| e.annotators.contains(a))
    }
}

/// A filtered copy of `view`; the summary block describes the filtered nodes.
pub fn filter(view: &GraphView, criteria: &ViewFilter) -> GraphView {
    let nodes: Vec<ViewNode> = view.nodes.iter().filter(|n| criteria.keeps_node(n)).cloned().collect();
    let kept: BTreeSet<&UseId> = nodes.iter().map(|n| &n.id).collect();
    let edges = view
        .edges
        .iter()
        .filter(|e| kept.contains(&e.source) && kept.contains(&e.target) && criteria.keeps_edge(e))
        .cloned()
        .collect();
    let summary = summarize(
        &nodes,
        view.summary.clustering_method.clone(),
        view.summary.layout_method.clone(),
        view.summary.seed,
    );
    GraphView {
        schema_version: view.schema_version,
        lemma: view.lemma.clone(),
        nodes,
        edges,
        summary,
    }
}

pub fn export_view(view: &GraphView) -> String {
    serde_json::to_string_pretty(view).expect("graph views serialize")
}

pub fn parse_view(text: &str) -> Result<GraphView> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(Error::Document(format!("unsupported schema version {v}"))),
        None => return Err(Error::Document("missing schema_version".into())),
    }
    Ok(serde_json::from_value(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{solve, SolverParams};
    use crate::model::{validate_label, Judgment, PairKey, Span, Use};
    use crate::wug::build_wug;
    use chrono::{DateTime, Utc};

    fn pair_graph(label: i64) -> Wug {
        let uses: Vec<Use> = ["a", "b"]
            .iter()
            .map(|id| Use::new(*id, "w", "w", Span::new(0, 1).unwrap()).unwrap())
            .collect();
        let js = vec![Judgment::new(
            PairKey::new("a", "b").unwrap(),
            "x",
            validate_label(label).unwrap(),
            DateTime::<Utc>::UNIX_EPOCH,
        )];
        build_wug(&uses, &js).unwrap()
    }

    fn distance(p: &BTreeMap<UseId, [f64; 2]>) -> f64 {
        let a = p[&UseId::new("a")];
        let b = p[&UseId::new("b")];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn heavier_edges_pull_closer() {
        let high = pair_graph(4);
        let low = pair_graph(1);
        let ch = solve(&high, &SolverParams::seeded(1));
        let cl = solve(&low, &SolverParams::seeded(1));
        assert!(distance(&layout(&high, &ch, 4)) < distance(&layout(&low, &cl, 4)));
    }

    #[test]
    fn layout_is_deterministic_and_centered() {
        let g = pair_graph(3);
        let c = solve(&g, &SolverParams::seeded(1));
        assert_eq!(layout(&g, &c, 11), layout(&g, &c, 11));
        let single = g.subgraph(|u| u.id.as_str() == "a");
        let cs = solve(&single, &SolverParams::seeded(1));
        assert_eq!(layout(&single, &cs, 11)[&UseId::new("a")], [0.0, 0.0]);
    }

    #[test]
    fn palette_wraps_with_hatching() {
        assert_eq!(color_of(-1), (None, false));
        assert_eq!(color_of(3), (Some(3), false));
        assert_eq!(color_of(13), (Some(1), true));
    }

    #[test]
    fn schema_version_is_checked() {
        assert!(parse_view("{}").is_err());
        assert!(parse_view(r#"{"schema_version": 99}"#).is_err());
    }
}
