use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wugkit::annotators::{
    run_task, AnnotationItem, AnnotationTask, Annotator, RandomAnnotator, RemoteAnnotator, RemoteSpec, TaskStatus,
    RANDOM_NAME,
};
use wugkit::cluster::Clustering;
use wugkit::ingest;
use wugkit::model::{dedup_judgments, validate_label, InstanceId, Judgment, Project, Span, UseId, WordEntry};
use wugkit::pipeline::{analyze, export_word, group_by_lemma, solver_params, word_dir};
use wugkit::scheduler::{accept_uploaded_pairs, build_sequence, derive_seed, generate_full_pairing, next_instance, Next};
use wugkit::stats::{self, Scope};
use wugkit::viz::{self, GraphView, ViewFilter};
use wugkit::wug::Wug;
use wugkit::{Error, ValidationReport};

use crate::config::Config;
use crate::store::{AnnotatorRecord, NewProject, Pairing, ProjectId, ProjectRecord, Store, StoreError, WordStore};
use crate::tutorial::{Grade, TutorialSet};

/// Annotator name under which uploaded gold judgments are stored.
pub const GOLD_NAME: &str = "gold";
pub const PROJECT_FILE: &str = "project.json";

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("missing or unknown token")]
    Unauthorized,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("{0}")]
    Invalid(ValidationReport),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(report) => ApiError::Invalid(report),
            Error::Io(e) => ApiError::Internal(e.to_string()),
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

/// Files of a new project, as uploaded.
#[derive(Debug, Clone, Default)]
pub struct Upload {
    pub language: String,
    pub pairing: Option<String>,
    pub seed: Option<u64>,
    pub public: bool,
    /// (file name, bytes); one or more uses files.
    pub uses: Vec<(String, Vec<u8>)>,
    pub pairs: Option<Vec<u8>>,
    pub judgments: Option<Vec<u8>>,
}

/// Export archive: relative path → file text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProjectMeta {
    language: String,
    seed: u64,
    public: bool,
    pairing: Pairing,
    words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UseView {
    pub identifier: UseId,
    pub context: String,
    pub span: Span,
    pub left: String,
    pub target: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub instance: InstanceId,
    pub position: usize,
    pub total: usize,
    pub first: UseView,
    pub second: UseView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextPair {
    pub done: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub project: ProjectId,
    pub word: String,
    pub instance: InstanceId,
    pub label: i64,
    #[serde(default)]
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnnotatorSpec {
    Random,
    Remote { name: String, spec: RemoteSpec },
}

impl AnnotatorSpec {
    fn name(&self) -> &str {
        match self {
            AnnotatorSpec::Random => RANDOM_NAME,
            AnnotatorSpec::Remote { name, .. } => name,
        }
    }

    fn build(&self, project_seed: u64, lemma: &str) -> Result<Box<dyn Annotator>, String> {
        match self {
            AnnotatorSpec::Random => Ok(Box::new(RandomAnnotator::new(derive_seed(project_seed, lemma, RANDOM_NAME)))),
            AnnotatorSpec::Remote { name, spec } => {
                RemoteAnnotator::new(name.clone(), spec.clone()).map(|a| Box::new(a) as Box<dyn Annotator>).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub project: ProjectId,
    #[serde(default)]
    pub word: Option<String>,
    pub annotator: AnnotatorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessChange {
    #[serde(default)]
    pub annotator: Option<String>,
    #[serde(default)]
    pub public: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub version: u64,
    pub clustering: Clustering,
    pub clusters: Vec<Vec<UseId>>,
}

struct Analysis {
    wug: Wug,
    clustering: Clustering,
    judgments: Vec<Judgment>,
    word: WordEntry,
}

type Clock = dyn Fn() -> DateTime<Utc> + Send + Sync;
type AnalysisCache = HashMap<(ProjectId, String), (u64, Arc<Analysis>)>;

pub struct App {
    pub config: Config,
    store: Store,
    tutorial: TutorialSet,
    cache: Mutex<AnalysisCache>,
    computations: AtomicUsize,
    clock: Box<Clock>,
}

impl App {
    pub fn new(config: Config, store: Store) -> Self {
        Self {
            config,
            store,
            tutorial: TutorialSet::default_set(),
            cache: Mutex::new(HashMap::new()),
            computations: AtomicUsize::new(0),
            clock: Box::new(Utc::now),
        }
    }

    pub fn in_memory(config: Config) -> Self {
        Self::new(config, Store::in_memory().expect("in-memory database"))
    }

    pub fn with_tutorial(mut self, tutorial: TutorialSet) -> Self {
        self.tutorial = tutorial;
        self
    }

    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// Number of clusterings computed so far; cached results do not count.
    pub fn computations(&self) -> usize {
        self.computations.load(Ordering::SeqCst)
    }

    fn caller(&self, token: &str) -> ApiResult<AnnotatorRecord> {
        self.store.annotator_by_token(token)?.ok_or(ApiError::Unauthorized)
    }

    fn project_record(&self, id: ProjectId) -> ApiResult<ProjectRecord> {
        self.store.project(id)?.ok_or_else(|| ApiError::NotFound(format!("project {id}")))
    }

    fn owned(&self, token: &str, id: ProjectId) -> ApiResult<(AnnotatorRecord, ProjectRecord)> {
        let who = self.caller(token)?;
        let project = self.project_record(id)?;
        if project.owner != who.name {
            return Err(ApiError::Forbidden("only the owner may do this".into()));
        }
        Ok((who, project))
    }

    fn may_view(who: &AnnotatorRecord, project: &ProjectRecord) -> bool {
        project.public || project.owner == who.name || project.access.contains(&who.name)
    }

    fn viewed(&self, token: &str, id: ProjectId) -> ApiResult<(AnnotatorRecord, ProjectRecord)> {
        let who = self.caller(token)?;
        let project = self.project_record(id)?;
        if !Self::may_view(&who, &project) {
            return Err(ApiError::Forbidden(format!("no access to project {id}")));
        }
        Ok((who, project))
    }

    fn annotating(&self, token: &str, id: ProjectId) -> ApiResult<(AnnotatorRecord, ProjectRecord)> {
        let (who, project) = self.viewed(token, id)?;
        if !who.passed_tutorial {
            return Err(ApiError::Forbidden("the tutorial has not been passed yet".into()));
        }
        Ok((who, project))
    }

    fn word(&self, id: ProjectId, lemma: &str) -> ApiResult<WordEntry> {
        self.store
            .word(id, lemma)?
            .ok_or_else(|| ApiError::NotFound(format!("word {lemma:?} in project {id}")))
    }

    // Annotators and tutorial

    pub fn register(&self, name: &str) -> ApiResult<String> {
        let name = name.trim();
        if name.is_empty() || name == GOLD_NAME || name == RANDOM_NAME {
            return Err(ApiError::BadRequest(format!("name {name:?} is not available")));
        }
        let token = uuid::Uuid::new_v4().simple().to_string();
        if !self.store.register_annotator(name, &token)? {
            return Err(ApiError::Conflict(format!("annotator {name:?} exists")));
        }
        Ok(token)
    }

    pub fn whoami(&self, token: &str) -> ApiResult<AnnotatorRecord> {
        self.caller(token)
    }

    pub fn tutorial_items(&self) -> &[AnnotationItem] {
        self.tutorial.items()
    }

    pub fn submit_tutorial(&self, token: &str, labels: &[i64]) -> ApiResult<Grade> {
        let who = self.caller(token)?;
        let grade = self.tutorial.grade(labels, &self.config.gate).map_err(ApiError::BadRequest)?;
        self.store
            .record_tutorial(&who.name, grade.passed, grade.spearman, grade.mean_abs_diff, (self.clock)())?;
        Ok(grade)
    }

    // Projects

    pub fn create_project(&self, token: &str, upload: Upload) -> ApiResult<ProjectId> {
        let who = self.caller(token)?;
        let pairing = match upload.pairing.as_deref() {
            None | Some("") => {
                if upload.pairs.is_some() {
                    Pairing::Pairs
                } else if upload.judgments.is_some() {
                    Pairing::Gold
                } else {
                    Pairing::Full
                }
            }
            Some(raw) => Pairing::parse(raw).ok_or_else(|| ApiError::BadRequest(format!("unknown pairing mode {raw:?}")))?,
        };
        if upload.uses.is_empty() {
            return Err(ApiError::BadRequest("at least one uses file is required".into()));
        }
        let mut uses = Vec::new();
        for (name, bytes) in &upload.uses {
            uses.extend(ingest::parse_uses_named(name, bytes)?);
        }
        let judgments = match &upload.judgments {
            Some(bytes) => ingest::parse_judgments_named("judgments", bytes)?
                .judgments
                .into_iter()
                .map(|mut j| {
                    j.annotator = GOLD_NAME.into();
                    j
                })
                .collect(),
            None => Vec::new(),
        };
        let judgments = dedup_judgments(judgments);
        let pairs = match (&upload.pairs, pairing) {
            (Some(bytes), _) => Some(ingest::parse_pairs(bytes)?),
            (None, Pairing::Pairs) => return Err(ApiError::BadRequest("pairing mode 'pairs' needs a pairs file".into())),
            (None, _) => None,
        };
        if pairing == Pairing::Gold && judgments.is_empty() {
            return Err(ApiError::BadRequest("pairing mode 'gold' needs a judgments file".into()));
        }
        let seed = upload.seed.unwrap_or_else(rand::random::<u64>);
        self.store_project(who.name, upload.language, seed, upload.public, pairing, uses, pairs, judgments)
    }

    #[allow(clippy::too_many_arguments)]
    fn store_project(
        &self,
        owner: String,
        language: String,
        seed: u64,
        public: bool,
        pairing: Pairing,
        uses: Vec<wugkit::model::Use>,
        pairs: Option<Vec<(UseId, UseId)>>,
        judgments: Vec<Judgment>,
    ) -> ApiResult<ProjectId> {
        ingest::check_known_uses(&judgments, uses.iter().map(|u| &u.id))?;
        let mut project = Project::new("new", language.clone(), seed);
        let mut entries = Vec::new();
        for (lemma, word_uses) in group_by_lemma(uses) {
            let instances = match pairing {
                Pairing::Full => generate_full_pairing(&word_uses)?,
                Pairing::Pairs => {
                    let own: Vec<(UseId, UseId)> = pairs
                        .iter()
                        .flatten()
                        .filter(|(a, _)| word_uses.iter().any(|u| &u.id == a))
                        .cloned()
                        .collect();
                    accept_uploaded_pairs(&word_uses, &own)?
                }
                Pairing::Gold => {
                    let mut seen = Vec::new();
                    for j in &judgments {
                        if word_uses.iter().any(|u| &u.id == j.pair.first()) && !seen.contains(&j.pair) {
                            seen.push(j.pair.clone());
                        }
                    }
                    let own: Vec<(UseId, UseId)> = seen.into_iter().map(|p| (p.first().clone(), p.second().clone())).collect();
                    accept_uploaded_pairs(&word_uses, &own)?
                }
            };
            let entry = WordEntry::new(lemma, word_uses, instances)?;
            project.add_word(entry.clone())?;
            entries.push(entry);
        }
        let id = self.store.create_project(NewProject {
            owner,
            language,
            seed,
            public,
            pairing,
            words: entries,
            judgments,
        })?;
        Ok(id)
    }

    pub fn project(&self, token: &str, id: ProjectId) -> ApiResult<ProjectRecord> {
        Ok(self.viewed(token, id)?.1)
    }

    pub fn delete_project(&self, token: &str, id: ProjectId) -> ApiResult<()> {
        self.owned(token, id)?;
        self.store.delete_project(id)?;
        self.cache.lock().unwrap_or_else(|p| p.into_inner()).retain(|(p, _), _| *p != id);
        Ok(())
    }

    pub fn change_access(&self, token: &str, id: ProjectId, change: &AccessChange) -> ApiResult<ProjectRecord> {
        self.owned(token, id)?;
        if let Some(name) = &change.annotator {
            self.store.grant(id, name)?;
        }
        if let Some(public) = change.public {
            self.store.set_public(id, public)?;
        }
        self.project_record(id)
    }

    // Annotation flow

    fn sequence_for(&self, project: &ProjectRecord, word: &WordEntry, annotator: &str) -> ApiResult<wugkit::scheduler::AnnotatorSequence> {
        let seed = derive_seed(project.seed, &word.lemma, annotator);
        let mut seq = build_sequence(&word.instances, annotator, seed);
        let judged = self.store.judged_pairs(project.id, &word.lemma, annotator)?;
        seq.resume(&word.instances, &judged);
        Ok(seq)
    }

    pub fn next(&self, token: &str, id: ProjectId, lemma: &str) -> ApiResult<NextPair> {
        let (who, project) = self.annotating(token, id)?;
        let word = self.word(id, lemma)?;
        let seq = self.sequence_for(&project, &word, &who.name)?;
        Ok(match next_instance(&seq, &word.instances) {
            Next::Done => NextPair { done: true, pair: None },
            Next::Instance(p) => {
                let view = |uid: &UseId| -> ApiResult<UseView> {
                    let u = word.find_use(uid).ok_or_else(|| ApiError::Internal(format!("missing use {uid}")))?;
                    let (left, target, right) = u.concordance();
                    Ok(UseView {
                        identifier: u.id.clone(),
                        context: u.context.clone(),
                        span: u.span,
                        left: left.into(),
                        target: target.into(),
                        right: right.into(),
                    })
                };
                NextPair {
                    done: false,
                    pair: Some(PairView {
                        instance: p.instance,
                        position: p.position,
                        total: p.total,
                        first: view(&p.left)?,
                        second: view(&p.right)?,
                    }),
                }
            }
        })
    }

    pub fn submit(&self, token: &str, submission: &Submission) -> ApiResult<Judgment> {
        let label = validate_label(submission.label)?;
        let (who, project) = self.annotating(token, submission.project)?;
        let word = self.word(project.id, &submission.word)?;
        let instance = word
            .instance(submission.instance)
            .ok_or_else(|| ApiError::NotFound(format!("instance {}", submission.instance)))?;
        let mut seq = self.sequence_for(&project, &word, &who.name)?;
        if !seq.answered(instance.id) {
            seq.submit(instance.id).map_err(|e| ApiError::Conflict(e.to_string()))?;
        }
        let now = (self.clock)();
        let timestamp = match self.store.latest_timestamp(&who.name)? {
            Some(last) if last > now => last,
            _ => now,
        };
        let judgment = Judgment::new(instance.pair.clone(), who.name, label, timestamp).with_comment(submission.comment.clone());
        self.store.save_judgments(project.id, &word.lemma, std::slice::from_ref(&judgment))?;
        Ok(judgment)
    }

    // Computational annotation

    pub fn create_task(self: &Arc<Self>, token: &str, request: TaskRequest) -> ApiResult<AnnotationTask> {
        let (_, project) = self.owned(token, request.project)?;
        let lemmas = match &request.word {
            Some(w) => {
                self.word(project.id, w)?;
                vec![w.clone()]
            }
            None => project.words.clone(),
        };
        if let AnnotatorSpec::Remote { spec, .. } = &request.annotator {
            spec.validate().map_err(ApiError::BadRequest)?;
        }
        let task = AnnotationTask::new(
            uuid::Uuid::new_v4().simple().to_string(),
            project.id.to_string(),
            request.word.clone(),
            request.annotator.name(),
        );
        self.store.save_task(&task, project.id)?;
        let app = Arc::clone(self);
        let spawned = task.clone();
        std::thread::spawn(move || app.execute(spawned, project, lemmas, request.annotator));
        Ok(task)
    }

    /// Runs a task synchronously, one word after the other.
    fn execute(&self, mut task: AnnotationTask, project: ProjectRecord, lemmas: Vec<String>, spec: AnnotatorSpec) -> AnnotationTask {
        let save = |t: &AnnotationTask| {
            let _ = self.store.save_task(t, project.id);
        };
        task.transition(TaskStatus::Running).expect("queued task starts");
        save(&task);
        for lemma in lemmas {
            let outcome = (|| -> Result<AnnotationTask, String> {
                let word = self.store.word(project.id, &lemma).map_err(|e| e.to_string())?.ok_or("word vanished")?;
                let mut annotator = spec.build(project.seed, &lemma)?;
                let mut part = AnnotationTask::new(task.id.clone(), task.project.clone(), Some(lemma.clone()), task.annotator.clone());
                let mut sink = WordStore {
                    store: &self.store,
                    project: project.id,
                    lemma: lemma.clone(),
                };
                run_task(&mut part, &word, annotator.as_mut(), &mut sink, &*self.clock);
                Ok(part)
            })();
            match outcome {
                Ok(part) => {
                    task.progress.total += part.progress.total;
                    task.progress.judged += part.progress.judged;
                    task.progress.created += part.progress.created;
                    if part.status == TaskStatus::Failed {
                        task.error = Some(format!("{lemma}: {}", part.error.unwrap_or_default()));
                        task.transition(TaskStatus::Failed).expect("running task may fail");
                        save(&task);
                        return task;
                    }
                    save(&task);
                }
                Err(e) => {
                    task.error = Some(format!("{lemma}: {e}"));
                    task.transition(TaskStatus::Failed).expect("running task may fail");
                    save(&task);
                    return task;
                }
            }
        }
        task.transition(TaskStatus::Done).expect("running task may finish");
        save(&task);
        task
    }

    pub fn task(&self, id: &str) -> ApiResult<AnnotationTask> {
        self.store.task(id)?.ok_or_else(|| ApiError::NotFound(format!("task {id}")))
    }

    // Data and reports

    pub fn data(&self, token: &str, id: ProjectId, lemma: &str, view: &str, sort: Option<&str>, descending: bool) -> ApiResult<Vec<Value>> {
        self.viewed(token, id)?;
        let word = self.word(id, lemma)?;
        let mut rows: Vec<Value> = match view {
            "uses" => word
                .uses
                .iter()
                .map(|u| {
                    let (left, target, right) = u.concordance();
                    json!({
                        "identifier": u.id,
                        "date": u.date.map(|d| d.format("%Y-%m-%d").to_string()),
                        "grouping": u.grouping,
                        "pos": u.pos,
                        "left": left,
                        "target": target,
                        "right": right,
                    })
                })
                .collect(),
            "judgments" => self
                .store
                .judgments(id, lemma)?
                .iter()
                .map(|j| {
                    let ctx = |uid: &UseId| word.find_use(uid).map(|u| u.context.clone());
                    json!({
                        "identifier1": j.pair.first(),
                        "identifier2": j.pair.second(),
                        "context1": ctx(j.pair.first()),
                        "context2": ctx(j.pair.second()),
                        "annotator": j.annotator,
                        "judgment": j.label.value(),
                        "comment": j.comment,
                        "timestamp": ingest::format_timestamp(&j.timestamp),
                    })
                })
                .collect(),
            other => return Err(ApiError::BadRequest(format!("unknown view {other:?}"))),
        };
        if let Some(column) = sort {
            if rows.first().is_some_and(|r| r.get(column).is_none()) {
                return Err(ApiError::BadRequest(format!("unknown column {column:?}")));
            }
            rows.sort_by(|a, b| compare_values(&a[column], &b[column]));
            if descending {
                rows.reverse();
            }
        }
        Ok(rows)
    }

    fn analysis(&self, id: ProjectId, lemma: &str, seed: u64) -> ApiResult<(u64, Arc<Analysis>)> {
        let version = self
            .store
            .word_version(id, lemma)?
            .ok_or_else(|| ApiError::NotFound(format!("word {lemma:?} in project {id}")))?;
        let key = (id, lemma.to_owned());
        if let Some((v, a)) = self.cache.lock().unwrap_or_else(|p| p.into_inner()).get(&key) {
            if *v == version {
                return Ok((version, Arc::clone(a)));
            }
        }
        let word = self.word(id, lemma)?;
        let judgments = self.store.judgments(id, lemma)?;
        let (wug, clustering) = analyze(&word, &judgments, &solver_params(seed, self.config.restarts))?;
        let clustering = clustering.ok_or_else(|| ApiError::Conflict("no edges: the word has no judgments yet".into()))?;
        self.computations.fetch_add(1, Ordering::SeqCst);
        let analysis = Arc::new(Analysis {
            wug,
            clustering,
            judgments,
            word,
        });
        self.cache
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(key, (version, Arc::clone(&analysis)));
        Ok((version, analysis))
    }

    pub fn clustering(&self, token: &str, id: ProjectId, lemma: &str) -> ApiResult<ClusteringReport> {
        let (_, project) = self.viewed(token, id)?;
        let (version, a) = self.analysis(id, lemma, project.seed)?;
        Ok(ClusteringReport {
            version,
            clusters: a.clustering.clusters(),
            clustering: a.clustering.clone(),
        })
    }

    pub fn statistics(&self, token: &str, id: ProjectId, lemma: &str, k: u64, n: u64) -> ApiResult<Value> {
        let (_, project) = self.viewed(token, id)?;
        let (version, a) = self.analysis(id, lemma, project.seed)?;
        let groupings = stats::groupings(&a.wug);
        let mut changes = Vec::new();
        for (i, g1) in groupings.iter().enumerate() {
            for g2 in &groupings[i + 1..] {
                changes.push(stats::change_report(&a.clustering, &a.wug, g1, g2, k, n));
            }
        }
        let means = |scope| stats::mean_labels(&a.judgments, &a.word.uses, scope);
        Ok(json!({
            "version": version,
            "agreement": stats::agreement(&a.judgments),
            "label_means": {
                "word": means(Scope::Word),
                "grouping": means(Scope::Grouping),
                "annotator": means(Scope::Annotator),
            },
            "sense_frequencies": stats::sense_frequency(&a.clustering, &a.wug, None),
            "variation": stats::variation(&a.clustering, &a.wug, &groupings).unwrap_or_default(),
            "change": changes,
        }))
    }

    pub fn graph(&self, token: &str, id: ProjectId, lemma: &str, criteria: &ViewFilter) -> ApiResult<GraphView> {
        let (_, project) = self.viewed(token, id)?;
        let (_, a) = self.analysis(id, lemma, project.seed)?;
        let positions = viz::layout(&a.wug, &a.clustering, a.clustering.meta.seed);
        let view = viz::graph_view(lemma, &a.wug, &a.clustering, &positions);
        Ok(viz::filter(&view, criteria))
    }

    // Export and import

    pub fn export(&self, token: &str, id: ProjectId) -> ApiResult<ExportBundle> {
        let (_, project) = self.owned(token, id)?;
        let mut files = BTreeMap::new();
        for lemma in &project.words {
            let word = self.word(id, lemma)?;
            let judgments = self.store.judgments(id, lemma)?;
            let clustering = if judgments.is_empty() {
                None
            } else {
                match self.analysis(id, lemma, project.seed) {
                    Ok((_, a)) => Some(a.clustering.clone()),
                    Err(ApiError::Conflict(_)) => None,
                    Err(e) => return Err(e),
                }
            };
            files.extend(export_word(&word, &judgments, clustering.as_ref()));
            if project.pairing == Pairing::Pairs {
                let pairs: Vec<(UseId, UseId)> = word.instances.iter().map(|i| (i.first.clone(), i.second.clone())).collect();
                files.insert(format!("{}/pairs.csv", word_dir(lemma)), ingest::serialize_pairs(&pairs));
            }
        }
        let meta = ProjectMeta {
            language: project.language,
            seed: project.seed,
            public: project.public,
            pairing: project.pairing,
            words: project.words,
        };
        let mut bundle = ExportBundle::default();
        bundle
            .files
            .insert(PROJECT_FILE.into(), serde_json::to_string_pretty(&meta).expect("plain data"));
        for (name, bytes) in files {
            let text = String::from_utf8(bytes).map_err(|e| ApiError::Internal(e.to_string()))?;
            bundle.files.insert(name, text);
        }
        Ok(bundle)
    }

    /// Creates a project from an export bundle. Annotator names, labels,
    /// comments and timestamps are kept as exported.
    pub fn import(&self, token: &str, bundle: &ExportBundle) -> ApiResult<ProjectId> {
        let who = self.caller(token)?;
        let meta: ProjectMeta = bundle
            .files
            .get(PROJECT_FILE)
            .ok_or_else(|| ApiError::BadRequest(format!("bundle has no {PROJECT_FILE}")))
            .and_then(|t| serde_json::from_str(t).map_err(|e| ApiError::BadRequest(format!("{PROJECT_FILE}: {e}"))))?;
        let mut uses = Vec::new();
        let mut judgments = Vec::new();
        let mut pairs = Vec::new();
        for lemma in &meta.words {
            let dir = word_dir(lemma);
            let file = |name: &str| bundle.files.get(&format!("{dir}/{name}"));
            let u = file("uses.csv").ok_or_else(|| ApiError::BadRequest(format!("bundle has no {dir}/uses.csv")))?;
            uses.extend(ingest::parse_uses_named(&format!("{dir}/uses.csv"), u.as_bytes())?);
            if let Some(j) = file("judgments.csv") {
                judgments.extend(ingest::parse_judgments_named(&format!("{dir}/judgments.csv"), j.as_bytes())?.judgments);
            }
            if let Some(p) = file("pairs.csv") {
                pairs.extend(ingest::parse_pairs(p.as_bytes())?);
            }
        }
        let pairs = (meta.pairing == Pairing::Pairs).then_some(pairs);
        self.store_project(who.name, meta.language, meta.seed, meta.public, meta.pairing, uses, pairs, judgments)
    }
}

fn compare_values(a: &Value, b: &Value) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a, b) {
        (Value::Null, Value::Null) => Equal,
        (Value::Null, _) => Less,
        (_, Value::Null) => Greater,
        (Value::Number(x), Value::Number(y)) => x.as_f64().partial_cmp(&y.as_f64()).unwrap_or(Equal),
        (Value::String(x), Value::String(y)) => x.cmp(y),
        (x, y) => x.to_string().cmp(&y.to_string()),
    }
}
