use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use wugkit::annotators::{run_task, AnnotationItem, AnnotationTask, Annotator, AnnotatorError, MemoryStore, StubAnnotator, TaskStatus};
use wugkit::cluster::{brute_force, solve, SolverParams};
use wugkit::ingest::{parse_clusters, parse_label_table, parse_uses};
use wugkit::model::{Label, UseId, WordEntry};
use wugkit::pipeline::{evaluate, run_pipeline, AnnotatorChoice, PipelineConfig};
use wugkit::scheduler::generate_full_pairing;
use wugkit::stats::{change_report, sense_frequency};
use wugkit::viz::{self, parse_view, ViewFilter};
use wugkit::wug::build_wug;

const USES: &[u8] = include_bytes!("../fixtures/arm_uses.csv");
const STUB: &[u8] = include_bytes!("../fixtures/arm_stub.csv");
const GOLD: &[u8] = include_bytes!("../fixtures/arm_gold_clusters.csv");

fn word() -> WordEntry {
    let uses = parse_uses(USES).unwrap();
    let instances = generate_full_pairing(&uses).unwrap();
    WordEntry::new("arm", uses, instances).unwrap()
}

fn epoch() -> DateTime<Utc> {
    DateTime::<Utc>::UNIX_EPOCH
}

fn stub() -> StubAnnotator {
    StubAnnotator::new("Stub", parse_label_table(STUB).unwrap())
}

fn ids(s: &[&str]) -> BTreeSet<UseId> {
    s.iter().map(|&i| UseId::new(i)).collect()
}

#[test]
fn targets_are_arm() {
    let w = word();
    assert_eq!(w.instances.len(), 15);
    for u in &w.uses {
        assert!(u.target().starts_with("arm"), "{}: {}", u.id, u.target());
    }
}

#[test]
fn stub_judgments_recover_figure_clusters() {
    let w = word();
    let mut store = MemoryStore::default();
    let mut task = AnnotationTask::new("t", "p", Some("arm".into()), "Stub");
    assert_eq!(run_task(&mut task, &w, &mut stub(), &mut store, &epoch), TaskStatus::Done);
    assert_eq!(store.judgments.len(), 15);

    let g = build_wug(&w.uses, &store.judgments).unwrap();
    let c = solve(&g, &SolverParams::seeded(3));
    let clusters: BTreeSet<BTreeSet<UseId>> = c.clusters().into_iter().map(|v| v.into_iter().collect()).collect();
    let want: BTreeSet<BTreeSet<UseId>> = [ids(&["A", "C", "F"]), ids(&["D", "E"]), ids(&["B"])].into();
    assert_eq!(clusters, want);
    assert_eq!(c.loss, 0.0);
    assert_eq!(brute_force(&g).unwrap().assignment, c.assignment);

    let t1 = sense_frequency(&c, &g, Some("t1"));
    let t2 = sense_frequency(&c, &g, Some("t2"));
    assert_eq!((t1.attested(), t2.attested()), (2, 2));
    let (acf, de, b) = (c.cluster_of(&"A".into()).unwrap(), c.cluster_of(&"D".into()).unwrap(), c.cluster_of(&"B".into()).unwrap());
    assert_eq!(t2.counts[&acf], 1);
    assert_eq!(t2.counts[&de], 2);
    assert_eq!(t2.counts[&b], 0);

    let report = change_report(&c, &g, "t1", "t2", 0, 1);
    assert_eq!(report.gained, [de].into());
    assert_eq!(report.lost, [b].into());
    assert!(report.graded.unwrap() > 0.0);
    let strict = change_report(&c, &g, "t1", "t2", 0, 3);
    assert!(strict.gained.is_empty());

    let positions = viz::layout(&g, &c, 3);
    let view = viz::graph_view("arm", &g, &c, &positions);
    assert_eq!((view.nodes.len(), view.edges.len(), view.summary.cluster_sizes.len()), (6, 15, 3));
    assert_eq!(parse_view(&viz::export_view(&view)).unwrap(), view);
    let high = viz::filter(&view, &ViewFilter { min_weight: Some(2.5), ..Default::default() });
    assert_eq!(high.edges.len(), 3 + 1);
    for e in &high.edges {
        assert_eq!(c.cluster_of(&e.source), c.cluster_of(&e.target));
    }
    let t1_view = viz::filter(&view, &ViewFilter { uses: wugkit::wug::UseFilter::grouping("t1"), ..Default::default() });
    assert_eq!(t1_view.nodes.iter().map(|n| n.id.clone()).collect::<BTreeSet<_>>(), ids(&["A", "B", "C"]));
}

/// Fails every call after the first `ok` batches.
struct Flaky {
    inner: StubAnnotator,
    ok: usize,
}

impl Annotator for Flaky {
    fn name(&self) -> &str {
        "Stub"
    }
    fn batch_size(&self) -> usize {
        4
    }
    fn annotate(&mut self, items: &[AnnotationItem]) -> Result<Vec<Label>, AnnotatorError> {
        if self.ok == 0 {
            return Err(AnnotatorError::Timeout);
        }
        self.ok -= 1;
        self.inner.annotate(items)
    }
}

#[test]
fn interrupted_task_resumes_without_duplicates() {
    let w = word();
    let mut store = MemoryStore::default();
    let mut first = AnnotationTask::new("t1", "p", None, "Stub");
    let mut flaky = Flaky { inner: stub(), ok: 2 };
    assert_eq!(run_task(&mut first, &w, &mut flaky, &mut store, &epoch), TaskStatus::Failed);
    assert_eq!(first.progress.judged, 8);
    assert_eq!(store.judgments.len(), 8);

    let mut second = AnnotationTask::new("t2", "p", None, "Stub");
    assert_eq!(run_task(&mut second, &w, &mut stub(), &mut store, &epoch), TaskStatus::Done);
    assert_eq!(store.judgments.len(), 15);
    assert_eq!(second.progress.created, 7);

    let mut third = AnnotationTask::new("t3", "p", None, "Stub");
    assert_eq!(run_task(&mut third, &w, &mut stub(), &mut store, &epoch), TaskStatus::Done);
    assert_eq!(third.progress.created, 0);
    assert_eq!(store.judgments.len(), 15);
}

#[test]
fn pipeline_writes_gold_clustering() {
    let mut config = PipelineConfig::new(7);
    config.annotator = Some(AnnotatorChoice::Stub(parse_label_table(STUB).unwrap()));
    let bundle = run_pipeline(USES, None, &config).unwrap();
    let clusters = bundle.get("arm/clusters.csv").unwrap();
    assert_eq!(parse_clusters(clusters).unwrap().values().collect::<BTreeSet<_>>().len(), 3);
    assert_eq!(evaluate(clusters, GOLD).unwrap(), 1.0);
    for name in ["arm/uses.csv", "arm/judgments.csv", "arm/graph.json", "arm/stats/change.csv", "arm/stats/agreement.csv"] {
        assert!(bundle.get(name).is_some(), "{name}");
    }
}

#[test]
fn pipeline_is_deterministic() {
    let run = || {
        let mut config = PipelineConfig::new(7);
        config.annotator = Some(AnnotatorChoice::Random);
        run_pipeline(USES, None, &config).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    a.write_to(dir.path()).unwrap();
    assert_eq!(std::fs::read(dir.path().join("arm/judgments.csv")).unwrap(), a.get("arm/judgments.csv").unwrap());
}

#[test]
fn eval_reports_mismatched_elements() {
    let pred = b"identifier,cluster_id\nA,0\nB,0\nZ,1\n";
    let err = evaluate(pred, GOLD).unwrap_err().to_string();
    assert!(err.contains('Z'), "{err}");
}
