//! Lays out the arm graph and writes the JSON document a viewer consumes,
//! then filters it down to high-weight edges of the first period.
//!
//! cargo run -p wugkit --example graph_view -- arm.json

use wugkit::cluster::{solve, SolverParams};
use wugkit::ingest::{parse_label_table, parse_uses};
use wugkit::model::Judgment;
use wugkit::viz::{export_view, filter, graph_view, layout, parse_view, ViewFilter};
use wugkit::wug::{build_wug, UseFilter};

const ARM: &[u8] = include_bytes!("../fixtures/arm_uses.csv");
const LABELS: &[u8] = include_bytes!("../fixtures/arm_stub.csv");

fn main() -> wugkit::Result<()> {
    let uses = parse_uses(ARM)?;
    let judgments: Vec<Judgment> = parse_label_table(LABELS)?
        .into_iter()
        .map(|(pair, label)| Judgment::new(pair, "table", label, chrono::DateTime::UNIX_EPOCH))
        .collect();
    let wug = build_wug(&uses, &judgments)?;
    let clustering = solve(&wug, &SolverParams::seeded(3));
    let positions = layout(&wug, &clustering, 3);
    let view = graph_view("arm", &wug, &clustering, &positions);
    println!("{} nodes, {} edges", view.nodes.len(), view.edges.len());

    let narrowed = filter(&view, &ViewFilter { min_weight: Some(2.5), ..Default::default() });
    println!("weight >= 2.5: {} edges", narrowed.edges.len());
    let early = filter(&narrowed, &ViewFilter { uses: UseFilter::grouping("t1"), ..Default::default() });
    println!("t1 only: {} nodes, {} edges", early.nodes.len(), early.edges.len());

    let json = export_view(&view);
    assert_eq!(parse_view(&json)?, view);
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(&path, json)?,
        None => println!("{}", &json[..json.len().min(400)]),
    }
    Ok(())
}
