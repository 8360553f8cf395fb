//! Sense frequencies per time period and the derived change measures.

use wugkit::cluster::{solve, SolverParams};
use wugkit::ingest::{parse_label_table, parse_uses};
use wugkit::model::Judgment;
use wugkit::stats::{binary_change, graded_change, sense_frequency, variation};
use wugkit::wug::build_wug;

const ARM: &[u8] = include_bytes!("../fixtures/arm_uses.csv");
const LABELS: &[u8] = include_bytes!("../fixtures/arm_stub.csv");

fn main() -> wugkit::Result<()> {
    let uses = parse_uses(ARM)?;
    let judgments: Vec<Judgment> = parse_label_table(LABELS)?
        .into_iter()
        .map(|(pair, label)| Judgment::new(pair, "table", label, chrono::DateTime::UNIX_EPOCH))
        .collect();
    let wug = build_wug(&uses, &judgments)?;
    let clustering = solve(&wug, &SolverParams::seeded(1));

    let t1 = sense_frequency(&clustering, &wug, Some("t1"));
    let t2 = sense_frequency(&clustering, &wug, Some("t2"));
    println!("t1 counts {:?}", t1.counts);
    println!("t2 counts {:?}", t2.counts);
    println!("graded change (JSD distance) {:.4}", graded_change(&t1, &t2)?);
    for (k, n) in [(0, 1), (0, 2), (1, 3)] {
        let b = binary_change(&t1, &t2, k, n);
        println!("k={k} n={n}: gained {:?} lost {:?}", b.gained, b.lost);
    }
    let per_period = variation(&clustering, &wug, &["t1".into(), "t2".into()])?;
    println!("variation {per_period:?}");
    Ok(())
}
