#![allow(dead_code)]

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Utc};
use serde_json::{json, Value};
use tower::ServiceExt;
use wugkit_service::{router, App, Config};

pub const ARM_USES: &[u8] = include_bytes!("../../../core/fixtures/arm_uses.csv");
pub const ARM_STUB: &[u8] = include_bytes!("../../../core/fixtures/arm_stub.csv");
pub const TUTORIAL_GOLD: &str = include_str!("../../fixtures/tutorial_gold.csv");

pub struct Client {
    pub router: Router,
}

pub enum Part<'a> {
    Text(&'a str, &'a str),
    File(&'a str, &'a str, &'a [u8]),
}

const BOUNDARY: &str = "XwugkitBoundaryX";

pub fn multipart(parts: &[Part]) -> Vec<u8> {
    let mut body = Vec::new();
    for part in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match part {
            Part::Text(name, value) => {
                body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes());
            }
            Part::File(name, file, bytes) => {
                body.extend_from_slice(
                    format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{file}\"\r\nContent-Type: text/csv\r\n\r\n")
                        .as_bytes(),
                );
                body.extend_from_slice(bytes);
                body.extend_from_slice(b"\r\n");
            }
        }
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub fn epoch() -> DateTime<Utc> {
    DateTime::<Utc>::UNIX_EPOCH
}

/// Gold labels of the bundled tutorial, in presentation order.
pub fn tutorial_gold() -> Vec<i64> {
    TUTORIAL_GOLD.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect()
}

/// Stub table of the arm fixture rewritten as a judgments file.
pub fn arm_gold_judgments() -> Vec<u8> {
    let mut out = String::from("identifier1,identifier2,annotator,judgment,comment,timestamp\n");
    for line in std::str::from_utf8(ARM_STUB).unwrap().lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        out.push_str(&format!("{},{},expert,{},,2023-06-23T00:00:00Z\n", f[0], f[1], f[2]));
    }
    out.into_bytes()
}

impl Client {
    pub fn new(app: App) -> Self {
        Self { router: router(Arc::new(app)) }
    }

    pub fn fresh() -> Self {
        Self::new(App::in_memory(Config::default()))
    }

    pub fn fixed_clock() -> Self {
        Self::new(App::in_memory(Config::default()).with_clock(epoch))
    }

    pub async fn raw(&self, method: &str, uri: &str, token: Option<&str>, content_type: Option<String>, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        if let Some(ct) = content_type {
            req = req.header("content-type", ct);
        }
        let resp = self.router.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap();
        let status = resp.status();
        (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
    }

    pub async fn call(&self, method: &str, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let (ct, bytes) = match body {
            Some(v) => (Some("application/json".to_string()), serde_json::to_vec(&v).unwrap()),
            None => (None, Vec::new()),
        };
        let (status, bytes) = self.raw(method, uri, token, ct, bytes).await;
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    pub async fn get(&self, uri: &str, token: &str) -> (StatusCode, Value) {
        self.call("GET", uri, Some(token), None).await
    }

    pub async fn post(&self, uri: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call("POST", uri, Some(token), Some(body)).await
    }

    pub async fn register(&self, name: &str) -> String {
        let (status, body) = self.call("POST", "/annotators", None, Some(json!({ "name": name }))).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["token"].as_str().unwrap().to_owned()
    }

    /// Registers an annotator and passes the tutorial.
    pub async fn trained(&self, name: &str) -> String {
        let token = self.register(name).await;
        let (status, grade) = self.post("/tutorial/submit", &token, json!({ "labels": tutorial_gold() })).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(grade["passed"], true);
        token
    }

    pub async fn upload(&self, token: &str, parts: &[Part<'_>]) -> (StatusCode, Value) {
        let (status, bytes) = self
            .raw(
                "POST",
                "/projects",
                Some(token),
                Some(format!("multipart/form-data; boundary={BOUNDARY}")),
                multipart(parts),
            )
            .await;
        (status, serde_json::from_slice(&bytes).unwrap())
    }

    pub async fn arm_project(&self, token: &str, seed: u64) -> i64 {
        let seed = seed.to_string();
        let (status, body) = self
            .upload(token, &[Part::Text("language", "en"), Part::Text("seed", &seed), Part::File("uses", "arm.csv", ARM_USES)])
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["id"].as_i64().unwrap()
    }

    pub async fn wait_task(&self, id: &str, token: &str) -> Value {
        let start = Instant::now();
        loop {
            let (status, task) = self.get(&format!("/tasks/{id}"), token).await;
            assert_eq!(status, StatusCode::OK);
            if task["status"] == "done" || task["status"] == "failed" {
                return task;
            }
            assert!(start.elapsed() < Duration::from_secs(30), "task {id} did not finish");
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
    }

    pub async fn run_random(&self, token: &str, project: i64) -> Value {
        let (status, task) = self
            .post("/tasks", token, json!({ "project": project, "word": "arm", "annotator": { "kind": "random" } }))
            .await;
        assert_eq!(status, StatusCode::ACCEPTED, "{task}");
        self.wait_task(task["id"].as_str().unwrap(), token).await
    }
}
