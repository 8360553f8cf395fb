//! Annotates the arm pairs through a model served over HTTP. A small local
//! server stands in for the model: it answers 4 when both target word forms
//! are equal and 1 otherwise.

use std::net::TcpListener;
use std::time::Duration;

use axum::{routing::post, Json, Router};
use serde_json::Value;
use wugkit::annotators::{run_task, AnnotationTask, MemoryStore, RemoteAnnotator, RemoteSpec};
use wugkit::ingest::parse_uses;
use wugkit::model::WordEntry;
use wugkit::scheduler::generate_full_pairing;

const ARM: &[u8] = include_bytes!("../fixtures/arm_uses.csv");

async fn annotate(Json(items): Json<Vec<Value>>) -> Json<Vec<i64>> {
    let target = |item: &Value, n: u8| -> Option<String> {
        let context = item[format!("context{n}")].as_str()?;
        let (start, end) = item[format!("span{n}")].as_str()?.split_once(':')?;
        let (start, end): (usize, usize) = (start.parse().ok()?, end.parse().ok()?);
        Some(context.chars().skip(start).take(end - start).collect())
    };
    Json(items.iter().map(|i| if target(i, 1) == target(i, 2) { 4 } else { 1 }).collect())
}

fn main() -> wugkit::Result<()> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, Router::new().route("/annotate", post(annotate))).await.unwrap();
        });
    });

    let uses = parse_uses(ARM)?;
    let instances = generate_full_pairing(&uses)?;
    let word = WordEntry::new("arm", uses, instances)?;
    let mut spec = RemoteSpec::new(format!("http://{addr}"));
    spec.batch_size = 4;
    spec.backoff = Duration::from_millis(50);
    let mut model = RemoteAnnotator::new("wic-model", spec).expect("valid spec");
    let mut store = MemoryStore::default();
    let mut task = AnnotationTask::new("remote", "demo", Some("arm".into()), "wic-model");
    let status = run_task(&mut task, &word, &mut model, &mut store, &chrono::Utc::now);
    println!("{status:?}, progress {:?}, error {:?}", task.progress, task.error);
    for j in &store.judgments {
        println!("  {} {} -> {}", j.pair.first(), j.pair.second(), j.label.value());
    }
    Ok(())
}
