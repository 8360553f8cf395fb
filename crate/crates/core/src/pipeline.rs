//! Batch processing of uses files: pairing, computational annotation,
//! clustering, statistics and export, without a server.
//!
//! The per-word export files (`uses.csv`, `judgments.csv`, `clusters.csv`)
//! are produced by [`export_word`], which the service uses as well, so both
//! paths yield identical bytes for identical inputs and seeds.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::annotators::{run_task, AnnotationTask, Annotator, MemoryStore, RandomAnnotator, StubAnnotator, RANDOM_NAME};
use crate::cluster::{solve, Clustering, SolverParams};
use crate::error::{Error, Result};
use crate::ingest;
use crate::model::{Judgment, Label, PairKey, Use, WordEntry};
use crate::scheduler::{derive_seed, generate_full_pairing};
use crate::stats;
use crate::viz;
use crate::wug::{build_wug, Wug};

pub const STUB_NAME: &str = "Stub";

pub enum AnnotatorChoice {
    Random,
    Stub(HashMap<PairKey, Label>),
}

impl AnnotatorChoice {
    fn build(&self, project_seed: u64, lemma: &str) -> Box<dyn Annotator> {
        match self {
            AnnotatorChoice::Random => Box::new(RandomAnnotator::new(derive_seed(project_seed, lemma, RANDOM_NAME))),
            AnnotatorChoice::Stub(table) => Box::new(StubAnnotator::new(STUB_NAME, table.clone())),
        }
    }
}

pub struct PipelineConfig {
    pub seed: u64,
    pub annotator: Option<AnnotatorChoice>,
    pub restarts: usize,
    /// Timestamp given to computational judgments, fixed for reproducible output.
    pub timestamp: DateTime<Utc>,
}

impl PipelineConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            annotator: None,
            restarts: SolverParams::default().restarts,
            timestamp: DateTime::<Utc>::UNIX_EPOCH,
        }
    }
}

/// Relative path → file contents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bundle {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }
}

/// Directory name for a lemma inside bundles.
pub fn word_dir(lemma: &str) -> String {
    let s: String = lemma
        .chars()
        .map(|c| if c.is_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if s.chars().all(|c| c == '.') {
        "_".repeat(s.len().max(1))
    } else {
        s
    }
}

/// Splits uses by lemma, keeping the first-appearance order of lemmas and
/// the file order of uses within each.
pub fn group_by_lemma(uses: Vec<Use>) -> Vec<(String, Vec<Use>)> {
    let mut out: Vec<(String, Vec<Use>)> = Vec::new();
    for u in uses {
        match out.iter_mut().find(|(l, _)| *l == u.lemma) {
            Some((_, v)) => v.push(u),
            None => out.push((u.lemma.clone(), vec![u])),
        }
    }
    out
}

pub fn solver_params(project_seed: u64, restarts: usize) -> SolverParams {
    SolverParams::seeded(project_seed).with_restarts(restarts)
}

/// Graph and clustering of one word. `None` when there is nothing to cluster.
pub fn analyze(word: &WordEntry, judgments: &[Judgment], params: &SolverParams) -> Result<(Wug, Option<Clustering>)> {
    let wug = build_wug(&word.uses, judgments)?;
    if wug.edges.is_empty() {
        return Ok((wug, None));
    }
    let clustering = solve(&wug, params);
    Ok((wug, Some(clustering)))
}

/// The re-importable files for one word. Words without judgments export
/// their uses only.
pub fn export_word(word: &WordEntry, judgments: &[Judgment], clustering: Option<&Clustering>) -> BTreeMap<String, Vec<u8>> {
    let dir = word_dir(&word.lemma);
    let mut files = BTreeMap::new();
    files.insert(format!("{dir}/uses.csv"), ingest::serialize_uses(&word.uses));
    if !judgments.is_empty() {
        files.insert(format!("{dir}/judgments.csv"), ingest::serialize_judgments(judgments));
    }
    if let Some(c) = clustering {
        files.insert(format!("{dir}/clusters.csv"), ingest::serialize_clusters(&c.assignment));
    }
    files
}

/// Statistics tables and the graph document for one analysed word.
pub fn report_files(word: &WordEntry, judgments: &[Judgment], wug: &Wug, clustering: &Clustering) -> BTreeMap<String, Vec<u8>> {
    let dir = word_dir(&word.lemma);
    let mut files = BTreeMap::new();
    let positions = viz::layout(wug, clustering, clustering.meta.seed);
    let view = viz::graph_view(&word.lemma, wug, clustering, &positions);
    files.insert(format!("{dir}/graph.json"), viz::export_view(&view).into_bytes());

    let agreement = stats::agreement(judgments);
    files.insert(format!("{dir}/stats/agreement.csv"), stats::agreement_csv(&agreement));
    files.insert(format!("{dir}/stats/alpha.csv"), stats::alpha_csv(&agreement));
    let mut means = Vec::new();
    for scope in [stats::Scope::Word, stats::Scope::Grouping, stats::Scope::Annotator] {
        let table = stats::means_csv(scope, &stats::mean_labels(judgments, &word.uses, scope));
        let skip = if means.is_empty() { 0 } else { table.iter().position(|&b| b == b'\n').map_or(0, |p| p + 1) };
        means.extend_from_slice(&table[skip..]);
    }
    files.insert(format!("{dir}/stats/label_means.csv"), means);

    let groupings = stats::groupings(wug);
    let mut dists = vec![stats::sense_frequency(clustering, wug, None)];
    dists.extend(groupings.iter().map(|g| stats::sense_frequency(clustering, wug, Some(g))));
    files.insert(format!("{dir}/stats/sense_frequencies.csv"), stats::frequencies_csv(&dists));
    let mut changes = Vec::new();
    for (i, g1) in groupings.iter().enumerate() {
        for g2 in &groupings[i + 1..] {
            changes.push(stats::change_report(clustering, wug, g1, g2, 0, 1));
        }
    }
    files.insert(format!("{dir}/stats/change.csv"), stats::change_csv(&changes));
    files
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Validation(Error),
    #[error("{0}")]
    Failure(Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Failure(_) => 2,
        }
    }
}

impl From<Error> for PipelineError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(_)
            | Error::InvalidLabel(_)
            | Error::InvalidSpan(_)
            | Error::InvalidUse(_)
            | Error::SelfPair(_)
            | Error::UnknownUse(_)
            | Error::MixedLemmas(..) => PipelineError::Validation(e),
            other => PipelineError::Failure(other),
        }
    }
}

/// Runs the full batch pipeline over a uses file and optional judgments.
pub fn run_pipeline(uses_csv: &[u8], judgments_csv: Option<&[u8]>, config: &PipelineConfig) -> Result<Bundle, PipelineError> {
    let uses = ingest::parse_uses(uses_csv)?;
    let provided = match judgments_csv {
        Some(bytes) => ingest::parse_judgments(bytes)?.judgments,
        None => Vec::new(),
    };
    ingest::check_known_uses(&provided, uses.iter().map(|u| &u.id))?;

    let mut bundle = Bundle::default();
    for (lemma, word_uses) in group_by_lemma(uses) {
        let instances = generate_full_pairing(&word_uses)?;
        let word = WordEntry::new(lemma.clone(), word_uses, instances)?;
        let mut store = MemoryStore {
            judgments: provided.iter().filter(|j| word.find_use(j.pair.first()).is_some()).cloned().collect(),
        };
        if let Some(choice) = &config.annotator {
            let mut annotator = choice.build(config.seed, &lemma);
            let mut task = AnnotationTask::new(format!("{lemma}:{}", annotator.name()), "cli", Some(lemma.clone()), annotator.name());
            let clock = || config.timestamp;
            run_task(&mut task, &word, annotator.as_mut(), &mut store, &clock);
            if let Some(e) = task.error {
                return Err(PipelineError::Failure(Error::Document(format!("annotation of {lemma} failed: {e}"))));
            }
        }
        let judgments = store.judgments;
        let (wug, clustering) = analyze(&word, &judgments, &solver_params(config.seed, config.restarts))?;
        bundle.files.extend(export_word(&word, &judgments, clustering.as_ref()));
        if let Some(c) = &clustering {
            bundle.files.extend(report_files(&word, &judgments, &wug, c));
        }
    }
    Ok(bundle)
}

/// ARI between a predicted and a gold clusters file.
pub fn evaluate(pred_csv: &[u8], gold_csv: &[u8]) -> Result<f64> {
    let pred = ingest::parse_clusters(pred_csv)?;
    let gold = ingest::parse_clusters(gold_csv)?;
    stats::ari_assignments(&pred, &gold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_dirs_are_safe() {
        assert_eq!(word_dir("arm"), "arm");
        assert_eq!(word_dir("skör"), "skör");
        assert_eq!(word_dir("a/b c"), "a_b_c");
        assert_eq!(word_dir(".."), "__");
    }

    #[test]
    fn grouping_keeps_order() {
        let csv = "lemma,identifier,context,indexes_target_token\nb,1,bb,0:1\na,2,aa,0:1\nb,3,bb,0:1\n";
        let groups = group_by_lemma(ingest::parse_uses(csv.as_bytes()).unwrap());
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].0, "b");
        assert_eq!(groups[0].1.len(), 2);
    }

    #[test]
    fn exit_codes() {
        let bad = run_pipeline(b"lemma,identifier\n", None, &PipelineConfig::new(1)).unwrap_err();
        assert_eq!(bad.exit_code(), 1);
    }

    #[test]
    fn uses_only_without_annotator() {
        let csv = "lemma,identifier,context,indexes_target_token\nw,1,ww,0:1\nw,2,ww,0:1\n";
        let bundle = run_pipeline(csv.as_bytes(), None, &PipelineConfig::new(1)).unwrap();
        assert_eq!(bundle.files.keys().collect::<Vec<_>>(), ["w/uses.csv"]);
    }
}
