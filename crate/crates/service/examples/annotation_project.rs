//! A full annotation project driven through the service layer, without HTTP:
//! register, pass the tutorial, upload uses, annotate a few pairs by hand,
//! let the random annotator fill the rest, then read clusters and statistics.

use std::sync::Arc;

use wugkit::ingest::parse_label_table;
use wugkit::viz::ViewFilter;
use wugkit_service::app::{AnnotatorSpec, Submission, TaskRequest, Upload};
use wugkit_service::{App, Config};

const ARM: &[u8] = include_bytes!("../../core/fixtures/arm_uses.csv");
const TUTORIAL_GOLD: &[u8] = include_bytes!("../fixtures/tutorial_gold.csv");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app = Arc::new(App::in_memory(Config::default()));
    let token = app.register("ana")?;

    let gold = parse_label_table(TUTORIAL_GOLD)?;
    let answers: Vec<i64> = app
        .tutorial_items()
        .iter()
        .map(|item| gold[item.pair.as_ref().expect("tutorial items carry pairs")].value() as i64)
        .collect();
    let grade = app.submit_tutorial(&token, &answers)?;
    println!("tutorial: passed {} (rho {:?}, mean abs diff {})", grade.passed, grade.spearman, grade.mean_abs_diff);

    let project = app.create_project(
        &token,
        Upload {
            language: "en".into(),
            pairing: None,
            seed: Some(5),
            public: false,
            uses: vec![("arm.csv".into(), ARM.to_vec())],
            pairs: None,
            judgments: None,
        },
    )?;

    for _ in 0..3 {
        let next = app.next(&token, project, "arm")?;
        let Some(pair) = next.pair else { break };
        println!("{}/{}: [{}] vs [{}]", pair.position + 1, pair.total, pair.first.target, pair.second.target);
        let label = if pair.first.target == pair.second.target { 3 } else { 1 };
        app.submit(&token, &Submission { project, word: "arm".into(), instance: pair.instance, label, comment: String::new() })?;
    }

    let task = app.create_task(&token, TaskRequest { project, word: None, annotator: AnnotatorSpec::Random })?;
    let task = loop {
        let t = app.task(&task.id)?;
        if t.status.is_terminal() {
            break t;
        }
        std::thread::sleep(std::time::Duration::from_millis(20));
    };
    println!("random annotator: {:?}, {} judgments created", task.status, task.progress.created);

    let report = app.clustering(&token, project, "arm")?;
    let clusters: Vec<String> = report.clusters.iter().map(|c| c.iter().map(|u| u.as_str()).collect::<Vec<_>>().join(" ")).collect();
    println!("clusters [{}] (loss {})", clusters.join("] ["), report.clustering.loss);
    let stats = app.statistics(&token, project, "arm", 0, 1)?;
    println!("agreement {}", stats["agreement"]);
    let graph = app.graph(&token, project, "arm", &ViewFilter { annotators: ["ana".into()].into(), ..Default::default() })?;
    println!("edges judged by ana: {}", graph.edges.len());

    let bundle = app.export(&token, project)?;
    println!("export: {:?}", bundle.files.keys().collect::<Vec<_>>());
    Ok(())
}
