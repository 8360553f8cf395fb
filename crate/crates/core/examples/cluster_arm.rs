//! Builds the arm graph from a fixed label table and clusters it.

use wugkit::annotators::{run_task, AnnotationTask, MemoryStore, StubAnnotator};
use wugkit::cluster::{brute_force, solve, SolverParams};
use wugkit::ingest::{parse_label_table, parse_uses};
use wugkit::model::WordEntry;
use wugkit::scheduler::generate_full_pairing;
use wugkit::wug::build_wug;

const ARM: &[u8] = include_bytes!("../fixtures/arm_uses.csv");
const LABELS: &[u8] = include_bytes!("../fixtures/arm_stub.csv");

fn main() -> wugkit::Result<()> {
    let uses = parse_uses(ARM)?;
    let instances = generate_full_pairing(&uses)?;
    let word = WordEntry::new("arm", uses, instances)?;

    let mut annotator = StubAnnotator::new("table", parse_label_table(LABELS)?);
    let mut store = MemoryStore::default();
    let mut task = AnnotationTask::new("t", "demo", Some("arm".into()), "table");
    run_task(&mut task, &word, &mut annotator, &mut store, &chrono::Utc::now);
    println!("task {:?}: {} judgments", task.status, store.judgments.len());

    let wug = build_wug(&word.uses, &store.judgments)?;
    for (pair, e) in &wug.edges {
        println!("  {}-{}  {}", pair.first(), pair.second(), e.weight_or_nan());
    }
    let found = solve(&wug, &SolverParams::seeded(7));
    let exact = brute_force(&wug)?;
    println!("annealing loss {} ({}), exhaustive loss {}", found.loss, found.meta.method, exact.loss);
    for (i, members) in found.clusters().iter().enumerate() {
        let ids: Vec<&str> = members.iter().map(|u| u.as_str()).collect();
        println!("  cluster {i}: {}", ids.join(" "));
    }
    Ok(())
}
