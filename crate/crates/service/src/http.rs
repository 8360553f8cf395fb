use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Deserialize;
use serde_json::{json, Value};
use wugkit::viz::ViewFilter;
use wugkit::wug::UseFilter;

use crate::app::{AccessChange, ApiError, App, ExportBundle, Submission, TaskRequest, Upload};
use crate::store::ProjectId;

const UPLOAD_LIMIT: usize = 64 * 1024 * 1024;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = match &self {
            ApiError::Invalid(report) => json!({ "error": "validation failed", "report": report }),
            other => json!({ "error": other.to_string() }),
        };
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<App>;
type Reply = Result<Response, ApiError>;

fn token(headers: &HeaderMap) -> String {
    headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .unwrap_or_default()
        .trim()
        .to_owned()
}

/// Runs blocking application code off the async executor.
async fn blocking<T, F>(app: Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Shared) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&app))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

fn ok<T: serde::Serialize>(value: T) -> Reply {
    Ok(Json(value).into_response())
}

pub fn router(app: Shared) -> Router {
    let word = "/projects/{id}/words/{word}";
    Router::new()
        .route("/annotators", post(register))
        .route("/annotators/me", get(whoami))
        .route("/tutorial", get(tutorial))
        .route("/tutorial/submit", post(submit_tutorial))
        .route("/projects", post(create_project))
        .route("/projects/import", post(import_project))
        .route("/projects/{id}", get(get_project).delete(delete_project))
        .route("/projects/{id}/access", post(change_access))
        .route("/projects/{id}/export", get(export))
        .route(&format!("{word}/next"), get(next))
        .route(&format!("{word}/data"), get(data))
        .route(&format!("{word}/statistics"), get(statistics))
        .route(&format!("{word}/clustering"), get(clustering))
        .route(&format!("{word}/graph"), get(graph))
        .route("/judgments", post(submit))
        .route("/tasks", post(create_task))
        .route("/tasks/{id}", get(get_task))
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT))
        .with_state(app)
}

#[derive(Deserialize)]
struct Registration {
    name: String,
}

async fn register(State(app): State<Shared>, Json(r): Json<Registration>) -> Reply {
    let name = r.name.clone();
    let token = blocking(app, move |a| a.register(&r.name)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "name": name, "token": token }))).into_response())
}

async fn whoami(State(app): State<Shared>, headers: HeaderMap) -> Reply {
    let t = token(&headers);
    ok(blocking(app, move |a| a.whoami(&t)).await?)
}

async fn tutorial(State(app): State<Shared>) -> Reply {
    let items: Vec<Value> = app
        .tutorial_items()
        .iter()
        .enumerate()
        .map(|(i, item)| {
            json!({
                "position": i,
                "lemma": item.lemma,
                "context1": item.context1,
                "span1": item.span1,
                "context2": item.context2,
                "span2": item.span2,
            })
        })
        .collect();
    ok(items)
}

#[derive(Deserialize)]
struct TutorialAnswers {
    labels: Vec<i64>,
}

async fn submit_tutorial(State(app): State<Shared>, headers: HeaderMap, Json(body): Json<TutorialAnswers>) -> Reply {
    let t = token(&headers);
    ok(blocking(app, move |a| a.submit_tutorial(&t, &body.labels)).await?)
}

async fn read_upload(mut multipart: Multipart) -> Result<Upload, ApiError> {
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::BadRequest(e.to_string());
    let mut upload = Upload::default();
    while let Some(field) = multipart.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or_default().to_owned();
        let file_name = field.file_name().map(str::to_owned);
        let bytes = field.bytes().await.map_err(bad)?.to_vec();
        let text = || String::from_utf8_lossy(&bytes).trim().to_owned();
        match name.as_str() {
            "language" => upload.language = text(),
            "pairing" => upload.pairing = Some(text()),
            "seed" => {
                let raw = text();
                upload.seed = Some(raw.parse().map_err(|_| ApiError::BadRequest(format!("invalid seed {raw:?}")))?);
            }
            "public" => upload.public = matches!(text().as_str(), "true" | "1" | "yes" | "on"),
            "uses" => upload.uses.push((file_name.unwrap_or_else(|| "uses".into()), bytes)),
            "pairs" => upload.pairs = Some(bytes),
            "judgments" => upload.judgments = Some(bytes),
            other => return Err(ApiError::BadRequest(format!("unexpected field {other:?}"))),
        }
    }
    Ok(upload)
}

async fn create_project(State(app): State<Shared>, headers: HeaderMap, multipart: Multipart) -> Reply {
    let t = token(&headers);
    let upload = read_upload(multipart).await?;
    let id = blocking(app, move |a| a.create_project(&t, upload)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))).into_response())
}

async fn import_project(State(app): State<Shared>, headers: HeaderMap, Json(bundle): Json<ExportBundle>) -> Reply {
    let t = token(&headers);
    let id = blocking(app, move |a| a.import(&t, &bundle)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))).into_response())
}

async fn get_project(State(app): State<Shared>, headers: HeaderMap, Path(id): Path<ProjectId>) -> Reply {
    let t = token(&headers);
    ok(blocking(app, move |a| a.project(&t, id)).await?)
}

async fn delete_project(State(app): State<Shared>, headers: HeaderMap, Path(id): Path<ProjectId>) -> Reply {
    let t = token(&headers);
    blocking(app, move |a| a.delete_project(&t, id)).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn change_access(
    State(app): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<ProjectId>,
    Json(change): Json<AccessChange>,
) -> Reply {
    let t = token(&headers);
    ok(blocking(app, move |a| a.change_access(&t, id, &change)).await?)
}

async fn export(State(app): State<Shared>, headers: HeaderMap, Path(id): Path<ProjectId>) -> Reply {
    let t = token(&headers);
    ok(blocking(app, move |a| a.export(&t, id)).await?)
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

async fn next(
    State(app): State<Shared>,
    headers: HeaderMap,
    Path((id, word)): Path<(ProjectId, String)>,
    Query(q): Query<NextQuery>,
) -> Reply {
    let t = token(&headers);
    ok(blocking(app, move |a| {
        if let Some(name) = q.annotator {
            if a.whoami(&t)?.name != name {
                return Err(ApiError::Forbidden("token does not belong to this annotator".into()));
            }
        }
        a.next(&t, id, &word)
    })
    .await?)
}

async fn submit(State(app): State<Shared>, headers: HeaderMap, Json(s): Json<Submission>) -> Reply {
    let t = token(&headers);
    let j = blocking(app, move |a| a.submit(&t, &s)).await?;
    ok(json!({
        "identifier1": j.pair.first(),
        "identifier2": j.pair.second(),
        "annotator": j.annotator,
        "judgment": j.label.value(),
        "comment": j.comment,
        "timestamp": wugkit::ingest::format_timestamp(&j.timestamp),
    }))
}

async fn create_task(State(app): State<Shared>, headers: HeaderMap, Json(r): Json<TaskRequest>) -> Reply {
    let t = token(&headers);
    let task = blocking(app, move |a| a.create_task(&t, r)).await?;
    Ok((StatusCode::ACCEPTED, Json(task)).into_response())
}

async fn get_task(State(app): State<Shared>, Path(id): Path<String>) -> Reply {
    ok(blocking(app, move |a| a.task(&id)).await?)
}

#[derive(Deserialize)]
struct DataQuery {
    view: Option<String>,
    sort: Option<String>,
    order: Option<String>,
}

async fn data(
    State(app): State<Shared>,
    headers: HeaderMap,
    Path((id, word)): Path<(ProjectId, String)>,
    Query(q): Query<DataQuery>,
) -> Reply {
    let t = token(&headers);
    let descending = match q.order.as_deref() {
        None | Some("asc") => false,
        Some("desc") => true,
        Some(other) => return Err(ApiError::BadRequest(format!("order must be asc or desc, not {other:?}"))),
    };
    ok(blocking(app, move |a| {
        a.data(&t, id, &word, q.view.as_deref().unwrap_or("uses"), q.sort.as_deref(), descending)
    })
    .await?)
}

#[derive(Deserialize)]
struct ChangeQuery {
    k: Option<u64>,
    n: Option<u64>,
}

async fn statistics(
    State(app): State<Shared>,
    headers: HeaderMap,
    Path((id, word)): Path<(ProjectId, String)>,
    Query(q): Query<ChangeQuery>,
) -> Reply {
    let t = token(&headers);
    ok(blocking(app, move |a| a.statistics(&t, id, &word, q.k.unwrap_or(0), q.n.unwrap_or(1))).await?)
}

async fn clustering(State(app): State<Shared>, headers: HeaderMap, Path((id, word)): Path<(ProjectId, String)>) -> Reply {
    let t = token(&headers);
    ok(blocking(app, move |a| a.clustering(&t, id, &word)).await?)
}

#[derive(Deserialize, Default)]
pub struct GraphQuery {
    pub grouping: Option<String>,
    pub date_from: Option<String>,
    pub date_to: Option<String>,
    pub min_weight: Option<f64>,
    pub max_weight: Option<f64>,
    pub annotator: Option<String>,
    #[serde(default)]
    pub hide_nan: bool,
    #[serde(default)]
    pub hide_noise: bool,
}

fn list(raw: &Option<String>) -> impl Iterator<Item = String> + '_ {
    raw.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned)
}

impl GraphQuery {
    pub fn criteria(&self) -> Result<ViewFilter, ApiError> {
        let date = |raw: &Option<String>| -> Result<Option<NaiveDate>, ApiError> {
            raw.as_deref()
                .map(|d| wugkit::model::parse_date(d).map_err(|e| ApiError::BadRequest(e.to_string())))
                .transpose()
        };
        let groupings: std::collections::BTreeSet<String> = list(&self.grouping).collect();
        Ok(ViewFilter {
            uses: UseFilter {
                groupings: (!groupings.is_empty()).then_some(groupings),
                date_from: date(&self.date_from)?,
                date_to: date(&self.date_to)?,
            },
            min_weight: self.min_weight,
            max_weight: self.max_weight,
            annotators: list(&self.annotator).collect(),
            hide_nan: self.hide_nan,
            hide_noise: self.hide_noise,
        })
    }
}

async fn graph(
    State(app): State<Shared>,
    headers: HeaderMap,
    Path((id, word)): Path<(ProjectId, String)>,
    Query(q): Query<GraphQuery>,
) -> Reply {
    let t = token(&headers);
    let criteria = q.criteria()?;
    ok(blocking(app, move |a| a.graph(&t, id, &word, &criteria)).await?)
}
