mod common;

use std::collections::BTreeSet;

use axum::http::StatusCode;
use common::*;
use serde_json::{json, Value};

#[tokio::test]
async fn arm_upload_yields_fifteen_instances() {
    let c = Client::fresh();
    let owner = c.trained("owner").await;
    let id = c.arm_project(&owner, 1).await;
    let (status, project) = c.get(&format!("/projects/{id}"), &owner).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(project["words"], json!(["arm"]));
    let (_, next) = c.get(&format!("/projects/{id}/words/arm/next"), &owner).await;
    assert_eq!(next["pair"]["total"], 15);
    assert_eq!(next["pair"]["position"], 0);
}

#[tokio::test]
async fn bad_span_rejects_the_upload_with_a_report() {
    let c = Client::fresh();
    let owner = c.register("owner").await;
    let bad = b"lemma,identifier,context,indexes_target_token\narm,A,short,3:99\narm,B,arm,0:3\narm,C,x,1:0\n";
    let (status, body) = c.upload(&owner, &[Part::Text("language", "en"), Part::File("uses", "bad.csv", bad)]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let errors = body["report"]["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 2, "{body}");
    assert_eq!(body["report"]["file"], "bad.csv");
}

#[tokio::test]
async fn gold_upload_is_stored_under_gold() {
    let c = Client::fresh();
    let owner = c.register("owner").await;
    let judgments = arm_gold_judgments();
    let (status, body) = c
        .upload(
            &owner,
            &[Part::Text("language", "en"), Part::File("uses", "arm.csv", ARM_USES), Part::File("judgments", "gold.csv", &judgments)],
        )
        .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["id"].as_i64().unwrap();
    let (_, project) = c.get(&format!("/projects/{id}"), &owner).await;
    assert_eq!(project["pairing"], "gold");
    let (_, rows) = c.get(&format!("/projects/{id}/words/arm/data?view=judgments"), &owner).await;
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r["annotator"] == "gold"));
}

#[tokio::test]
async fn access_rules() {
    let c = Client::fresh();
    let owner = c.trained("owner").await;
    let guest = c.trained("guest").await;
    let id = c.arm_project(&owner, 1).await;
    let next = format!("/projects/{id}/words/arm/next");

    assert_eq!(c.get(&next, &guest).await.0, StatusCode::FORBIDDEN);
    let (status, _) = c.post(&format!("/projects/{id}/access"), &guest, json!({ "annotator": "guest" })).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    c.post(&format!("/projects/{id}/access"), &owner, json!({ "annotator": "guest" })).await;
    assert_eq!(c.get(&next, &guest).await.0, StatusCode::OK);

    let other = c.trained("other").await;
    assert_eq!(c.get(&next, &other).await.0, StatusCode::FORBIDDEN);
    let (_, project) = c.post(&format!("/projects/{id}/access"), &owner, json!({ "public": true })).await;
    assert_eq!(project["public"], true);
    assert_eq!(c.get(&next, &other).await.0, StatusCode::OK);
    assert_eq!(c.get(&format!("{next}?annotator=owner"), &other).await.0, StatusCode::FORBIDDEN);
    assert_eq!(c.get(&next, "nonsense").await.0, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn tutorial_gates_annotation() {
    let c = Client::fresh();
    let owner = c.register("owner").await;
    let id = c.arm_project(&owner, 1).await;
    let next = format!("/projects/{id}/words/arm/next");
    assert_eq!(c.get(&next, &owner).await.0, StatusCode::FORBIDDEN);

    let reversed: Vec<i64> = tutorial_gold().iter().map(|v| 5 - v).collect();
    let (_, grade) = c.post("/tutorial/submit", &owner, json!({ "labels": reversed })).await;
    assert_eq!(grade["passed"], false);
    assert_eq!(c.get(&next, &owner).await.0, StatusCode::FORBIDDEN);

    let (_, grade) = c.post("/tutorial/submit", &owner, json!({ "labels": tutorial_gold() })).await;
    assert_eq!(grade["passed"], true);
    assert_eq!(c.get(&next, &owner).await.0, StatusCode::OK);
    let (_, me) = c.get("/annotators/me", &owner).await;
    assert_eq!(me["passed_tutorial"], true);
}

#[tokio::test]
async fn annotation_flow() {
    let c = Client::fresh();
    let owner = c.trained("owner").await;
    let id = c.arm_project(&owner, 4).await;
    let next = format!("/projects/{id}/words/arm/next");

    let (_, first) = c.get(&next, &owner).await;
    let instance = first["pair"]["instance"].clone();
    let (status, _) = c
        .post("/judgments", &owner, json!({ "project": id, "word": "arm", "instance": instance, "label": 7 }))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(c.get(&next, &owner).await.1, first);

    let other_instance = (0..15).find(|i| json!(i) != instance).unwrap();
    let (status, _) = c
        .post("/judgments", &owner, json!({ "project": id, "word": "arm", "instance": other_instance, "label": 2 }))
        .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let mut seen = BTreeSet::new();
    for step in 0..15 {
        let (_, n) = c.get(&next, &owner).await;
        assert_eq!(n["done"], false);
        assert_eq!(n["pair"]["position"], step);
        let inst = n["pair"]["instance"].as_u64().unwrap();
        assert!(seen.insert(inst));
        let target = n["pair"]["first"]["target"].as_str().unwrap();
        assert!(target.starts_with("arm"));
        let label = if step == 0 { 0 } else { 1 + step % 4 };
        let (status, j) = c
            .post("/judgments", &owner, json!({ "project": id, "word": "arm", "instance": inst, "label": label, "comment": format!("c{step}") }))
            .await;
        assert_eq!(status, StatusCode::OK, "{j}");
        assert_eq!(j["judgment"], label);
    }
    assert_eq!(c.get(&next, &owner).await.1, json!({ "done": true }));

    let inst = *seen.iter().next().unwrap();
    c.post("/judgments", &owner, json!({ "project": id, "word": "arm", "instance": inst, "label": 3, "comment": "changed" }))
        .await;
    let (_, rows) = c.get(&format!("/projects/{id}/words/arm/data?view=judgments"), &owner).await;
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 15);
    assert_eq!(rows.iter().filter(|r| r["comment"] == "changed").count(), 1);
    let mut stamps: Vec<&str> = rows.iter().map(|r| r["timestamp"].as_str().unwrap()).collect();
    stamps.sort();
    assert!(stamps.iter().all(|s| s.ends_with('Z')));
}

#[tokio::test]
async fn computational_tasks() {
    let c = Client::fresh();
    let owner = c.register("owner").await;
    let id = c.arm_project(&owner, 9).await;
    let task = c.run_random(&owner, id).await;
    assert_eq!(task["status"], "done");
    assert_eq!(task["progress"]["created"], 15);
    let again = c.run_random(&owner, id).await;
    assert_eq!(again["status"], "done");
    assert_eq!(again["progress"]["created"], 0);
    let (_, rows) = c.get(&format!("/projects/{id}/words/arm/data?view=judgments"), &owner).await;
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r["annotator"] == "Random" && r["judgment"] != 0));

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let spec = json!({ "endpoint": dead, "retries": 2, "backoff": 1, "timeout": 500 });
    let (status, task) = c
        .post("/tasks", &owner, json!({ "project": id, "annotator": { "kind": "remote", "name": "XL-Lexeme", "spec": spec } }))
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{task}");
    let done = c.wait_task(task["id"].as_str().unwrap(), &owner).await;
    assert_eq!(done["status"], "failed");
    assert!(done["error"].as_str().unwrap().contains("gave up after 3 attempts"), "{done}");
    assert_eq!(done["progress"]["total"], 15);
    assert_eq!(done["progress"]["judged"], 0);
}

#[tokio::test]
async fn concordance_table() {
    let c = Client::fresh();
    let owner = c.register("owner").await;
    let id = c.arm_project(&owner, 1).await;
    let (_, rows) = c.get(&format!("/projects/{id}/words/arm/data?view=uses&sort=date&order=asc"), &owner).await;
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["date"], "1824-01-01");
    assert_eq!(rows[0]["target"], "arm");
    assert!(rows[0]["left"].as_str().unwrap().ends_with("her little "));
    let (_, desc) = c.get(&format!("/projects/{id}/words/arm/data?view=uses&sort=date&order=desc"), &owner).await;
    assert_eq!(desc[0]["date"], "1985-01-01");
    assert_eq!(c.get(&format!("/projects/{id}/words/arm/data?sort=nope"), &owner).await.0, StatusCode::BAD_REQUEST);
}

async fn gold_arm(c: &Client, owner: &str) -> i64 {
    let judgments = arm_gold_judgments();
    let (_, body) = c
        .upload(
            owner,
            &[
                Part::Text("language", "en"),
                Part::Text("pairing", "full"),
                Part::Text("seed", "5"),
                Part::File("uses", "arm.csv", ARM_USES),
                Part::File("judgments", "gold.csv", &judgments),
            ],
        )
        .await;
    body["id"].as_i64().unwrap()
}

#[tokio::test]
async fn reports_on_the_arm_fixture() {
    let c = Client::fresh();
    let owner = c.trained("owner").await;
    let id = gold_arm(&c, &owner).await;
    let base = format!("/projects/{id}/words/arm");

    let (status, clustering) = c.get(&format!("{base}/clustering"), &owner).await;
    assert_eq!(status, StatusCode::OK, "{clustering}");
    let clusters: BTreeSet<BTreeSet<String>> = serde_json::from_value(clustering["clusters"].clone()).unwrap();
    let want: BTreeSet<BTreeSet<String>> = [vec!["A", "C", "F"], vec!["D", "E"], vec!["B"]]
        .iter()
        .map(|c| c.iter().map(|s| s.to_string()).collect())
        .collect();
    assert_eq!(clusters, want);
    let cluster_of = |u: &str| clustering["clustering"]["assignment"][u].as_i64().unwrap();

    let (_, stats) = c.get(&format!("{base}/statistics"), &owner).await;
    let change = &stats["change"][0];
    assert_eq!(change["gained"], json!([cluster_of("D")]));
    assert_eq!(change["lost"], json!([cluster_of("B")]));
    assert!(change["graded"].as_f64().unwrap() > 0.0);

    let (_, graph) = c.get(&format!("{base}/graph"), &owner).await;
    assert_eq!((graph["nodes"].as_array().unwrap().len(), graph["edges"].as_array().unwrap().len()), (6, 15));
    assert_eq!(graph["schema_version"], 1);
    let (_, high) = c.get(&format!("{base}/graph?min_weight=2.5"), &owner).await;
    for e in high["edges"].as_array().unwrap() {
        assert_eq!(cluster_of(e["source"].as_str().unwrap()), cluster_of(e["target"].as_str().unwrap()));
    }
    assert_eq!(high["edges"].as_array().unwrap().len(), 4);
    let (_, t1) = c.get(&format!("{base}/graph?grouping=t1"), &owner).await;
    let ids: BTreeSet<&str> = t1["nodes"].as_array().unwrap().iter().map(|n| n["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["A", "B", "C"].into());
}

#[tokio::test]
async fn no_judgments_means_no_clustering() {
    let c = Client::fresh();
    let owner = c.register("owner").await;
    let id = c.arm_project(&owner, 1).await;
    let (status, body) = c.get(&format!("/projects/{id}/words/arm/clustering"), &owner).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("no edges"));
}

#[tokio::test]
async fn cache_follows_judgment_version() {
    let app = wugkit_service::App::in_memory(wugkit_service::Config::default());
    let app = std::sync::Arc::new(app);
    let c = Client { router: wugkit_service::router(app.clone()) };
    let owner = c.trained("owner").await;
    let id = gold_arm(&c, &owner).await;
    let url = format!("/projects/{id}/words/arm/clustering");
    let (_, first) = c.get(&url, &owner).await;
    c.get(&url, &owner).await;
    c.get(&format!("/projects/{id}/words/arm/statistics"), &owner).await;
    assert_eq!(app.computations(), 1);

    let (_, n) = c.get(&format!("/projects/{id}/words/arm/next"), &owner).await;
    c.post("/judgments", &owner, json!({ "project": id, "word": "arm", "instance": n["pair"]["instance"], "label": 4 }))
        .await;
    let (_, second) = c.get(&url, &owner).await;
    assert_eq!(app.computations(), 2);
    assert_ne!(first["version"], second["version"]);
}

#[tokio::test]
async fn export_and_delete() {
    let c = Client::fresh();
    let owner = c.register("owner").await;
    let id = c.arm_project(&owner, 1).await;
    let (_, bundle) = c.get(&format!("/projects/{id}/export"), &owner).await;
    let names: Vec<&String> = bundle["files"].as_object().unwrap().keys().collect();
    assert_eq!(names, ["arm/uses.csv", "project.json"]);

    let id = gold_arm(&c, &owner).await;
    let (_, bundle) = c.get(&format!("/projects/{id}/export"), &owner).await;
    let clusters = bundle["files"]["arm/clusters.csv"].as_str().unwrap();
    assert!(clusters.starts_with("identifier,cluster_id\n"));
    assert_eq!(clusters.lines().count(), 7);

    assert_eq!(c.call("DELETE", &format!("/projects/{id}"), Some(&owner), None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(c.get(&format!("/projects/{id}"), &owner).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn export_import_round_trip() {
    let c = Client::fresh();
    let owner = c.trained("owner").await;
    let id = c.arm_project(&owner, 21).await;
    // a human judgment with a comment next to the computational ones
    let (_, n) = c.get(&format!("/projects/{id}/words/arm/next"), &owner).await;
    c.post("/judgments", &owner, json!({ "project": id, "word": "arm", "instance": n["pair"]["instance"], "label": 0, "comment": "unclear, \"quoted\"" }))
        .await;
    c.run_random(&owner, id).await;
    let (_, exported) = c.get(&format!("/projects/{id}/export"), &owner).await;

    let (status, created) = c.post("/projects/import", &owner, exported.clone()).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let copy = created["id"].as_i64().unwrap();
    let (_, again) = c.get(&format!("/projects/{copy}/export"), &owner).await;
    assert_eq!(again, exported);

    let (_, a) = c.get(&format!("/projects/{id}/words/arm/graph"), &owner).await;
    let (_, b) = c.get(&format!("/projects/{copy}/words/arm/graph"), &owner).await;
    assert_eq!(a, b);
}

/// Collects every string and number in a response.
fn leaves(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Array(xs) => xs.iter().for_each(|x| leaves(x, out)),
        Value::Object(m) => m.iter().for_each(|(k, x)| {
            out.push(k.clone());
            leaves(x, out)
        }),
        other => out.push(other.to_string()),
    }
}

#[tokio::test]
async fn tutorial_gold_is_never_served() {
    let c = Client::fresh();
    let token = c.register("probe").await;
    let (status, items) = c.call("GET", "/tutorial", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let items = items.as_array().unwrap();
    assert_eq!(items.len(), 10);
    let allowed: BTreeSet<&str> = ["position", "lemma", "context1", "span1", "context2", "span2"].into();
    for item in items {
        for key in item.as_object().unwrap().keys() {
            assert!(allowed.contains(key.as_str()), "unexpected field {key}");
        }
    }
    let (_, grade) = c.post("/tutorial/submit", &token, json!({ "labels": [1, 1, 1, 1, 1, 1, 1, 1, 1, 1] })).await;
    let keys: BTreeSet<&String> = grade.as_object().unwrap().keys().collect();
    assert_eq!(keys, [&"passed".to_string(), &"spearman".to_string(), &"mean_abs_diff".to_string()].into());

    let gold = tutorial_gold();
    let gold_json = serde_json::to_string(&gold).unwrap();
    for uri in ["/tutorial", "/annotators/me", "/tutorial/gold", "/tutorial/0", "/projects/0", "/tasks/tutorial"] {
        let (_, body) = c.raw("GET", uri, Some(&token), None, Vec::new()).await;
        let text = String::from_utf8_lossy(&body);
        assert!(!text.contains(&gold_json), "{uri} leaks gold labels");
        assert!(!text.to_lowercase().contains("gold"), "{uri}: {text}");
        if let Ok(v) = serde_json::from_slice::<Value>(&body) {
            let mut all = Vec::new();
            leaves(&v, &mut all);
            assert!(!all.iter().any(|s| s.contains("judgment") || s == "label" || s == "labels"), "{uri}: {all:?}");
        }
    }
}
