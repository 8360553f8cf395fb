//! Correlation clustering of Word Usage Graphs.
//!
//! Edge weights are shifted by the scale threshold: an edge with weight `w`
//! has signed strength `s = w - 2.5`. Placing both endpoints in one cluster
//! costs `max(0, -s)`, separating them costs `max(0, s)`. NaN edges and edges
//! touching excluded nodes cost nothing either way.
//!
//! [`solve`] minimises this loss with simulated annealing over single-node
//! reassignments and several restarts. [`brute_force`] enumerates every set
//! partition of small graphs and serves as the reference.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{UseId, THRESHOLD};
use crate::scheduler::derive_seed;
use crate::wug::Wug;

/// Cluster id carried by excluded uses.
pub const EXCLUDED: i64 = -1;
/// Largest graph [`brute_force`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub seed: u64,
    pub restarts: usize,
    pub max_clusters: Option<usize>,
    pub cooling: f64,
    pub moves_per_node: usize,
    pub min_temperature: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 10,
            max_clusters: None,
            cooling: 0.95,
            moves_per_node: 100,
            min_temperature: 1e-3,
        }
    }
}

impl SolverParams {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub method: String,
    pub seed: u64,
    pub restarts: usize,
    pub iterations: u64,
}

/// A partition of the non-excluded uses. Ids run 0..k by decreasing cluster
/// size, ties broken by the smallest member id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: BTreeMap<UseId, i64>,
    pub loss: f64,
    pub meta: SolverMeta,
}

impl Clustering {
    pub fn num_clusters(&self) -> usize {
        self.assignment
            .values()
            .filter(|&&c| c >= 0)
            .max()
            .map_or(0, |&m| m as usize + 1)
    }

    /// Members of each cluster, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<UseId>> {
        let mut out = vec![Vec::new(); self.num_clusters()];
        for (id, &c) in &self.assignment {
            if c >= 0 {
                out[c as usize].push(id.clone());
            }
        }
        out
    }

    pub fn cluster_of(&self, id: &UseId) -> Option<i64> {
        self.assignment.get(id).copied()
    }
}

/// Dense view of the clusterable part of a graph.
struct Problem {
    ids: Vec<UseId>,
    strength: Vec<f64>,
    present: Vec<bool>,
}

impl Problem {
    fn new(wug: &Wug, threshold: f64) -> Self {
        let ids: Vec<UseId> = wug.clusterable().into_iter().cloned().collect();
        let n = ids.len();
        let index: BTreeMap<&UseId, usize> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let mut strength = vec![0.0; n * n];
        let mut present = vec![false; n * n];
        for (pair, edge) in &wug.edges {
            let (Some(&i), Some(&j), Some(w)) = (index.get(pair.first()), index.get(pair.second()), edge.weight)
            else {
                continue;
            };
            strength[i * n + j] = w - threshold;
            strength[j * n + i] = w - threshold;
            present[i * n + j] = true;
            present[j * n + i] = true;
        }
        Self {
            ids,
            strength,
            present,
        }
    }

    fn n(&self) -> usize {
        self.ids.len()
    }

    fn s(&self, i: usize, j: usize) -> f64 {
        self.strength[i * self.n() + j]
    }

    fn loss(&self, labels: &[usize]) -> f64 {
        let n = self.n();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let s = self.s(i, j);
                total += if labels[i] == labels[j] { (-s).max(0.0) } else { s.max(0.0) };
            }
        }
        total
    }

    /// Loss change when node `v` moves to cluster `to`.
    fn delta(&self, labels: &[usize], v: usize, to: usize) -> f64 {
        let from = labels[v];
        let row = &self.strength[v * self.n()..(v + 1) * self.n()];
        let mut d = 0.0;
        for (u, &s) in row.iter().enumerate() {
            if u == v {
                continue;
            }
            if labels[u] == from {
                d += s;
            } else if labels[u] == to {
                d -= s;
            }
        }
        d
    }

    fn max_disagreement(&self) -> f64 {
        self.strength.iter().fold(0.0, |m: f64, s| m.max(s.abs()))
    }

    /// Connected components of the high-weight subgraph.
    fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut labels = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if labels[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            labels[start] = next;
            while let Some(v) = stack.pop() {
                #[allow(clippy::needless_range_loop)]
                for u in 0..n {
                    if labels[u] == usize::MAX && self.present[v * n + u] && self.s(v, u) >= 0.0 {
                        labels[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        labels
    }
}

/// Relabels clusters by decreasing size, ties by smallest member index.
fn normalize(labels: &[usize]) -> Vec<usize> {
    let mut stats: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        let e = stats.entry(l).or_insert((0, i));
        e.0 += 1;
    }
    let mut order: Vec<(usize, usize, usize)> = stats.into_iter().map(|(l, (size, first))| (l, size, first)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let rename: BTreeMap<usize, usize> = order.iter().enumerate().map(|(new, &(old, _, _))| (old, new)).collect();
    labels.iter().map(|l| rename[l]).collect()
}

fn better(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> bool {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)).is_lt()
}

fn build(wug: &Wug, problem: &Problem, labels: &[usize], meta: SolverMeta) -> Clustering {
    let mut assignment: BTreeMap<UseId, i64> = wug.nodes.keys().map(|id| (id.clone(), EXCLUDED)).collect();
    for (id, &l) in problem.ids.iter().zip(labels) {
        assignment.insert(id.clone(), l as i64);
    }
    Clustering {
        assignment,
        loss: problem.loss(labels),
        meta,
    }
}

/// Loss of an assignment at the default threshold.
pub fn correlation_loss(wug: &Wug, assignment: &BTreeMap<UseId, i64>) -> Result<f64> {
    correlation_loss_at(wug, assignment, THRESHOLD)
}

pub fn correlation_loss_at(wug: &Wug, assignment: &BTreeMap<UseId, i64>, threshold: f64) -> Result<f64> {
    let problem = Problem::new(wug, threshold);
    let labels = problem
        .ids
        .iter()
        .map(|id| match assignment.get(id) {
            Some(&c) if c >= 0 => Ok(c as usize),
            _ => Err(Error::UnassignedNode(id.clone())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(problem.loss(&labels))
}

struct Anneal<'a> {
    problem: &'a Problem,
    params: &'a SolverParams,
    max_clusters: usize,
}

impl Anneal<'_> {
    fn initial(&self, restart: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.problem.n();
        if restart == 0 {
            let comps = normalize(&self.problem.components());
            return comps.into_iter().map(|c| c.min(self.max_clusters - 1)).collect();
        }
        let k = rng.random_range(1..=self.max_clusters.min(n));
        (0..n).map(|_| rng.random_range(0..k)).collect()
    }

    fn run(&self, restart: usize) -> (f64, Vec<usize>, u64) {
        let n = self.problem.n();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.params.seed, "restart", &restart.to_string()));
        let mut labels = self.initial(restart, &mut rng);
        let mut sizes = vec![0usize; n];
        for &l in &labels {
            sizes[l] += 1;
        }
        let mut current = self.problem.loss(&labels);
        let mut best = labels.clone();
        let mut best_loss = current;
        let mut iterations = 0u64;

        let mut temperature = self.problem.max_disagreement();
        let moves = self.params.moves_per_node * n;
        let mut targets = Vec::with_capacity(n + 1);
        let mut occupied = sizes.iter().filter(|&&s| s > 0).count();
        while temperature >= self.params.min_temperature && n > 1 {
            for _ in 0..moves {
                iterations += 1;
                let v = rng.random_range(0..n);
                let from = labels[v];
                targets.clear();
                targets.extend((0..n).filter(|&c| c != from && sizes[c] > 0));
                if sizes[from] > 1 && occupied < self.max_clusters {
                    targets.push(sizes.iter().position(|&s| s == 0).expect("fewer clusters than nodes"));
                }
                if targets.is_empty() {
                    continue;
                }
                let to = targets[rng.random_range(0..targets.len())];
                let delta = self.problem.delta(&labels, v, to);
                if delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp() {
                    labels[v] = to;
                    if sizes[to] == 0 {
                        occupied += 1;
                    }
                    sizes[from] -= 1;
                    sizes[to] += 1;
                    if sizes[from] == 0 {
                        occupied -= 1;
                    }
                    current += delta;
                    if current < best_loss - 1e-9 {
                        best_loss = current;
                        best.clone_from(&labels);
                    }
                }
            }
            temperature *= self.params.cooling;
        }
        self.polish(&mut best);
        let best = normalize(&best);
        (self.problem.loss(&best), best, iterations)
    }

    /// Applies improving single-node moves until none is left.
    fn polish(&self, labels: &mut [usize]) {
        let n = self.problem.n();
        loop {
            let mut sizes = vec![0usize; n];
            for &l in labels.iter() {
                sizes[l] += 1;
            }
            let occupied = sizes.iter().filter(|&&s| s > 0).count();
            let mut improved = false;
            for v in 0..n {
                let from = labels[v];
                let mut best: Option<(f64, usize)> = None;
                for to in 0..n {
                    let allowed = to != from
                        && (sizes[to] > 0 || (sizes[from] > 1 && occupied < self.max_clusters));
                    if !allowed {
                        continue;
                    }
                    let d = self.problem.delta(labels, v, to);
                    if d < -1e-9 && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, to));
                    }
                }
                if let Some((_, to)) = best {
                    labels[v] = to;
                    improved = true;
                    break;
                }
            }
            if !improved {
                return;
            }
        }
    }
}

/// Simulated-annealing correlation clustering. Deterministic for a given
/// graph and parameter set; restarts run in parallel and the best result by
/// (loss, canonical assignment) is returned.
pub fn solve(wug: &Wug, params: &SolverParams) -> Clustering {
    let problem = Problem::new(wug, THRESHOLD);
    let n = problem.n();
    let restarts = params.restarts.max(1);
    let mut meta = SolverMeta {
        method: "correlation-clustering/annealing".into(),
        seed: params.seed,
        restarts,
        iterations: 0,
    };
    if n == 0 {
        return build(wug, &problem, &[], meta);
    }
    let anneal = Anneal {
        problem: &problem,
        params,
        max_clusters: params.max_clusters.unwrap_or(n).clamp(1, n),
    };
    let results: Vec<(f64, Vec<usize>, u64)> = (0..restarts).into_par_iter().map(|r| anneal.run(r)).collect();
    meta.iterations = results.iter().map(|r| r.2).sum();
    let best = results
        .into_iter()
        .map(|(loss, labels, _)| (loss, labels))
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .expect("at least one restart");
    build(wug, &problem, &best.1, meta)
}

/// Exhaustive search over all set partitions of the clusterable nodes.
pub fn brute_force(wug: &Wug) -> Result<Clustering> {
    let problem = Problem::new(wug, THRESHOLD);
    let n = problem.n();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            nodes: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut search = Exhaustive {
        problem: &problem,
        labels: vec![0; n],
        best: None,
        visited: 0,
    };
    if n > 0 {
        search.descend(0, 0, 0.0);
    }
    let meta = SolverMeta {
        method: "correlation-clustering/exhaustive".into(),
        seed: 0,
        restarts: 0,
        iterations: search.visited,
    };
    let labels = search.best.map(|b| b.1).unwrap_or_default();
    Ok(build(wug, &problem, &labels, meta))
}

struct Exhaustive<'a> {
    problem: &'a Problem,
    labels: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    visited: u64,
}

impl Exhaustive<'_> {
    /// Restricted-growth enumeration; `used` is the number of clusters
    /// opened by nodes before `i`.
    fn descend(&mut self, i: usize, used: usize, partial: f64) {
        let n = self.problem.n();
        if i == n {
            self.visited += 1;
            let candidate = (self.problem.loss(&self.labels), normalize(&self.labels));
            if self.best.as_ref().is_none_or(|b| better(&candidate, b)) {
                self.best = Some(candidate);
            }
            return;
        }
        for c in 0..=used {
            let mut cost = 0.0;
            for j in 0..i {
                let s = self.problem.s(i, j);
                cost += if self.labels[j] == c { (-s).max(0.0) } else { s.max(0.0) };
            }
            if self.best.as_ref().is_some_and(|b| partial + cost > b.0) {
                continue;
            }
            self.labels[i] = c;
            self.descend(i + 1, used.max(c + 1), partial + cost);
        }
    }
}
