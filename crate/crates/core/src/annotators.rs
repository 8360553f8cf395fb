//! Computational annotators and the task runner that applies them to a word.
//!
//! Three annotators exist: [`RandomAnnotator`] (uniform baseline),
//! [`StubAnnotator`] (table lookup, used as a hermetic stand-in for models)
//! and [`RemoteAnnotator`], a client for Word-in-Context models served
//! elsewhere.
//!
//! # Remote protocol
//!
//! `POST {endpoint}/annotate` with a JSON array of
//! `{"context1", "span1", "context2", "span2", "lemma"}` objects, spans as
//! `"start:end"` character offsets. The response is a JSON array of integer
//! labels aligned with the request items.

use std::collections::{HashMap, HashSet};
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{validate_label, AnnotationInstance, Judgment, Label, PairKey, Span, WordEntry};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotatorError {
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("server answered with status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("label {label} violates the {contract:?} label contract")]
    Contract { label: i64, contract: LabelContract },
    #[error("no label for pair {0}")]
    MissingPair(PairKey),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: usize,
        last: Box<AnnotatorError>,
    },
}

impl AnnotatorError {
    fn retryable(&self) -> bool {
        matches!(
            self,
            AnnotatorError::Timeout | AnnotatorError::Transport(_) | AnnotatorError::Status(_) | AnnotatorError::Malformed(_)
        )
    }
}

/// Which labels an annotator may emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelContract {
    /// Any of 1..=4.
    #[default]
    Full,
    /// Only 1 or 4.
    Binary,
}

impl LabelContract {
    pub fn check(self, raw: i64) -> Result<Label, AnnotatorError> {
        let allowed = match self {
            LabelContract::Full => (1..=4).contains(&raw),
            LabelContract::Binary => raw == 1 || raw == 4,
        };
        if !allowed {
            return Err(AnnotatorError::Contract {
                label: raw,
                contract: self,
            });
        }
        Ok(validate_label(raw).expect("checked range"))
    }
}

/// One pair as sent to an annotator, with both contexts resolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    #[serde(skip)]
    pub pair: Option<PairKey>,
    pub context1: String,
    pub span1: Span,
    pub context2: String,
    pub span2: Span,
    pub lemma: String,
}

impl AnnotationItem {
    pub fn from_instance(word: &WordEntry, instance: &AnnotationInstance) -> Option<Self> {
        let a = word.find_use(&instance.first)?;
        let b = word.find_use(&instance.second)?;
        Some(Self {
            pair: Some(instance.pair.clone()),
            context1: a.context.clone(),
            span1: a.span,
            context2: b.context.clone(),
            span2: b.span,
            lemma: word.lemma.clone(),
        })
    }
}

pub trait Annotator: Send {
    fn name(&self) -> &str;

    fn batch_size(&self) -> usize {
        32
    }

    /// One label per item, positionally aligned.
    fn annotate(&mut self, items: &[AnnotationItem]) -> Result<Vec<Label>, AnnotatorError>;
}

pub const RANDOM_NAME: &str = "Random";

pub fn random_label(rng: &mut impl Rng) -> Label {
    validate_label(rng.random_range(1..=4)).expect("in range")
}

/// A uniformly random judgment for `instance`, attributed to "Random".
pub fn random_annotate(instance: &AnnotationInstance, rng: &mut impl Rng, timestamp: DateTime<Utc>) -> Judgment {
    Judgment::new(instance.pair.clone(), RANDOM_NAME, random_label(rng), timestamp)
}

/// Uniform baseline over 1..=4.
pub struct RandomAnnotator {
    rng: ChaCha8Rng,
}

impl RandomAnnotator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Annotator for RandomAnnotator {
    fn name(&self) -> &str {
        RANDOM_NAME
    }

    fn annotate(&mut self, items: &[AnnotationItem]) -> Result<Vec<Label>, AnnotatorError> {
        Ok(items.iter().map(|_| random_label(&mut self.rng)).collect())
    }
}

/// Looks up `instance` in `table`, falling back to `default` when given.
pub fn stub_annotate(
    instance: &AnnotationInstance,
    table: &HashMap<PairKey, Label>,
    default: Option<Label>,
    name: &str,
    timestamp: DateTime<Utc>,
) -> Result<Judgment, AnnotatorError> {
    let label = table
        .get(&instance.pair)
        .copied()
        .or(default)
        .ok_or_else(|| AnnotatorError::MissingPair(instance.pair.clone()))?;
    Ok(Judgment::new(instance.pair.clone(), name, label, timestamp))
}

/// Deterministic table-backed annotator.
pub struct StubAnnotator {
    name: String,
    table: HashMap<PairKey, Label>,
    default: Option<Label>,
}

impl StubAnnotator {
    pub fn new(name: impl Into<String>, table: HashMap<PairKey, Label>) -> Self {
        Self {
            name: name.into(),
            table,
            default: None,
        }
    }

    pub fn with_default(mut self, label: Label) -> Self {
        self.default = Some(label);
        self
    }
}

impl Annotator for StubAnnotator {
    fn name(&self) -> &str {
        &self.name
    }

    fn annotate(&mut self, items: &[AnnotationItem]) -> Result<Vec<Label>, AnnotatorError> {
        items
            .iter()
            .map(|item| {
                let pair = item
                    .pair
                    .clone()
                    .ok_or_else(|| AnnotatorError::Malformed("item without pair key".into()))?;
                self.table
                    .get(&pair)
                    .copied()
                    .or(self.default)
                    .ok_or(AnnotatorError::MissingPair(pair))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteSpec {
    pub endpoint: String,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_timeout", with = "millis")]
    pub timeout: Duration,
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default = "default_backoff", with = "millis")]
    pub backoff: Duration,
    #[serde(default)]
    pub contract: LabelContract,
}

fn default_batch() -> usize {
    32
}
fn default_timeout() -> Duration {
    Duration::from_secs(30)
}
fn default_retries() -> usize {
    3
}
fn default_backoff() -> Duration {
    Duration::from_millis(500)
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

impl RemoteSpec {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            batch_size: default_batch(),
            timeout: default_timeout(),
            retries: default_retries(),
            backoff: default_backoff(),
            contract: LabelContract::Full,
        }
    }

    pub fn binary(mut self) -> Self {
        self.contract = LabelContract::Binary;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.endpoint.trim().is_empty() {
            return Err("remote annotator needs an endpoint".into());
        }
        if self.batch_size == 0 {
            return Err("batch size must be at least 1".into());
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/annotate") {
            base.to_owned()
        } else {
            format!("{base}/annotate")
        }
    }
}

/// Client for a Word-in-Context model behind the remote protocol.
pub struct RemoteAnnotator {
    name: String,
    spec: RemoteSpec,
    client: reqwest::blocking::Client,
}

impl RemoteAnnotator {
    pub fn new(name: impl Into<String>, spec: RemoteSpec) -> Result<Self, AnnotatorError> {
        spec.validate().map_err(AnnotatorError::Transport)?;
        let client = reqwest::blocking::Client::builder()
            .timeout(spec.timeout)
            .build()
            .map_err(|e| AnnotatorError::Transport(e.to_string()))?;
        Ok(Self {
            name: name.into(),
            spec,
            client,
        })
    }

    fn attempt(&self, items: &[AnnotationItem]) -> Result<Vec<Label>, AnnotatorError> {
        let response = self.client.post(self.spec.url()).json(items).send().map_err(|e| {
            if e.is_timeout() {
                AnnotatorError::Timeout
            } else {
                AnnotatorError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(AnnotatorError::Status(status.as_u16()));
        }
        let raw: Vec<i64> = response
            .json()
            .map_err(|e| AnnotatorError::Malformed(e.to_string()))?;
        if raw.len() != items.len() {
            return Err(AnnotatorError::Malformed(format!(
                "expected {} labels, got {}",
                items.len(),
                raw.len()
            )));
        }
        raw.into_iter().map(|v| self.spec.contract.check(v)).collect()
    }
}

impl Annotator for RemoteAnnotator {
    fn name(&self) -> &str {
        &self.name
    }

    fn batch_size(&self) -> usize {
        self.spec.batch_size
    }

    /// Retries transport, status and decoding failures with exponential
    /// backoff; contract violations fail immediately.
    fn annotate(&mut self, items: &[AnnotationItem]) -> Result<Vec<Label>, AnnotatorError> {
        let attempts = self.spec.retries + 1;
        let mut delay = self.spec.backoff;
        for attempt in 1..=attempts {
            match self.attempt(items) {
                Ok(labels) => return Ok(labels),
                Err(e) if !e.retryable() => return Err(e),
                Err(e) if attempt == attempts => {
                    return Err(AnnotatorError::Exhausted {
                        attempts,
                        last: Box::new(e),
                    })
                }
                Err(_) => {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Done | TaskStatus::Failed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskProgress {
    /// Instances in scope.
    pub total: usize,
    /// Instances judged by this annotator, including earlier runs.
    pub judged: usize,
    /// Judgments created by this run.
    pub created: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub id: String,
    pub project: String,
    /// `None` for every word of the project.
    pub word: Option<String>,
    pub annotator: String,
    pub status: TaskStatus,
    pub progress: TaskProgress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AnnotationTask {
    pub fn new(id: impl Into<String>, project: impl Into<String>, word: Option<String>, annotator: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            project: project.into(),
            word,
            annotator: annotator.into(),
            status: TaskStatus::Queued,
            progress: TaskProgress::default(),
            error: None,
        }
    }

    /// Moves forward in queued → running → done | failed.
    pub fn transition(&mut self, to: TaskStatus) -> Result<(), String> {
        let ok = matches!(
            (self.status, to),
            (TaskStatus::Queued, TaskStatus::Running)
                | (TaskStatus::Running, TaskStatus::Done)
                | (TaskStatus::Running, TaskStatus::Failed)
                | (TaskStatus::Queued, TaskStatus::Failed)
        );
        if !ok {
            return Err(format!("illegal task transition {:?} -> {:?}", self.status, to));
        }
        self.status = to;
        Ok(())
    }
}

/// Where a task reads existing judgments from and writes new ones to.
pub trait JudgmentStore {
    fn judged_pairs(&self, annotator: &str) -> crate::Result<HashSet<PairKey>>;
    /// Inserts or overwrites per (annotator, pair).
    fn persist(&mut self, judgments: &[Judgment]) -> crate::Result<()>;
}

/// Judgment store kept in memory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryStore {
    pub judgments: Vec<Judgment>,
}

impl JudgmentStore for MemoryStore {
    fn judged_pairs(&self, annotator: &str) -> crate::Result<HashSet<PairKey>> {
        Ok(self
            .judgments
            .iter()
            .filter(|j| j.annotator == annotator)
            .map(|j| j.pair.clone())
            .collect())
    }

    fn persist(&mut self, judgments: &[Judgment]) -> crate::Result<()> {
        for j in judgments {
            match self
                .judgments
                .iter_mut()
                .find(|k| k.annotator == j.annotator && k.pair == j.pair)
            {
                Some(existing) => *existing = j.clone(),
                None => self.judgments.push(j.clone()),
            }
        }
        Ok(())
    }
}

/// Annotates every instance of `word` the annotator has not judged yet, in
/// sequential batches. Each batch is persisted before the next one starts, so
/// a failed run keeps its progress and a rerun only fills the gaps.
pub fn run_task(
    task: &mut AnnotationTask,
    word: &WordEntry,
    annotator: &mut dyn Annotator,
    store: &mut dyn JudgmentStore,
    clock: &dyn Fn() -> DateTime<Utc>,
) -> TaskStatus {
    if let Err(e) = task.transition(TaskStatus::Running) {
        task.error = Some(e);
        return task.status;
    }
    let fail = |task: &mut AnnotationTask, msg: String| {
        task.error = Some(msg);
        task.transition(TaskStatus::Failed).expect("running task may fail");
        task.status
    };
    let judged = match store.judged_pairs(annotator.name()) {
        Ok(j) => j,
        Err(e) => return fail(task, e.to_string()),
    };
    let pending: Vec<&AnnotationInstance> = word.instances.iter().filter(|i| !judged.contains(&i.pair)).collect();
    task.progress.total += word.instances.len();
    task.progress.judged += word.instances.len() - pending.len();

    for batch in pending.chunks(annotator.batch_size().max(1)) {
        let items: Vec<AnnotationItem> = match batch
            .iter()
            .map(|i| AnnotationItem::from_instance(word, i).ok_or_else(|| format!("instance {} has unknown uses", i.id)))
            .collect()
        {
            Ok(items) => items,
            Err(e) => return fail(task, e),
        };
        let labels = match annotator.annotate(&items) {
            Ok(l) => l,
            Err(e) => return fail(task, e.to_string()),
        };
        let now = clock();
        let judgments: Vec<Judgment> = batch
            .iter()
            .zip(labels)
            .map(|(i, l)| Judgment::new(i.pair.clone(), annotator.name(), l, now))
            .collect();
        if let Err(e) = store.persist(&judgments) {
            return fail(task, e.to_string());
        }
        task.progress.judged += judgments.len();
        task.progress.created += judgments.len();
    }
    task.transition(TaskStatus::Done).expect("running task may finish");
    task.status
}
