use std::collections::HashSet;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};
use wugkit::annotators::{AnnotationTask, JudgmentStore, TaskProgress, TaskStatus};
use wugkit::ingest::format_timestamp;
use wugkit::model::{validate_label, AnnotationInstance, Judgment, PairKey, Span, Use, UseId, WordEntry};

const SCHEMA: &str = "
PRAGMA foreign_keys = ON;
CREATE TABLE IF NOT EXISTS annotators (
    name TEXT PRIMARY KEY,
    token TEXT NOT NULL UNIQUE,
    passed_tutorial INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS tutorial_attempts (
    id INTEGER PRIMARY KEY,
    annotator TEXT NOT NULL REFERENCES annotators(name),
    passed INTEGER NOT NULL,
    spearman REAL,
    mean_abs_diff REAL NOT NULL,
    at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS projects (
    id INTEGER PRIMARY KEY,
    owner TEXT NOT NULL,
    language TEXT NOT NULL,
    seed INTEGER NOT NULL,
    public INTEGER NOT NULL DEFAULT 0,
    pairing TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS access (
    project INTEGER NOT NULL REFERENCES projects(id) ON DELETE CASCADE,
    annotator TEXT NOT NULL,
    PRIMARY KEY (project, annotator)
);
CREATE TABLE IF NOT EXISTS words (
    project INTEGER NOT NULL REFERENCES projects(id) ON DELETE CASCADE,
    lemma TEXT NOT NULL,
    position INTEGER NOT NULL,
    version INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (project, lemma)
);
CREATE TABLE IF NOT EXISTS uses (
    project INTEGER NOT NULL REFERENCES projects(id) ON DELETE CASCADE,
    lemma TEXT NOT NULL,
    position INTEGER NOT NULL,
    identifier TEXT NOT NULL,
    context TEXT NOT NULL,
    span TEXT NOT NULL,
    pos TEXT,
    date TEXT,
    grouping TEXT,
    PRIMARY KEY (project, identifier)
);
CREATE TABLE IF NOT EXISTS instances (
    project INTEGER NOT NULL REFERENCES projects(id) ON DELETE CASCADE,
    lemma TEXT NOT NULL,
    id INTEGER NOT NULL,
    first TEXT NOT NULL,
    second TEXT NOT NULL,
    PRIMARY KEY (project, lemma, id)
);
CREATE TABLE IF NOT EXISTS judgments (
    project INTEGER NOT NULL REFERENCES projects(id) ON DELETE CASCADE,
    lemma TEXT NOT NULL,
    identifier1 TEXT NOT NULL,
    identifier2 TEXT NOT NULL,
    annotator TEXT NOT NULL,
    judgment INTEGER NOT NULL,
    comment TEXT NOT NULL,
    timestamp TEXT NOT NULL,
    PRIMARY KEY (project, identifier1, identifier2, annotator)
);
CREATE TABLE IF NOT EXISTS tasks (
    id TEXT PRIMARY KEY,
    project INTEGER NOT NULL,
    lemma TEXT,
    annotator TEXT NOT NULL,
    status TEXT NOT NULL,
    total INTEGER NOT NULL,
    judged INTEGER NOT NULL,
    created INTEGER NOT NULL,
    error TEXT
);
";

pub type ProjectId = i64;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Sql(#[from] rusqlite::Error),
    #[error("stored data is corrupt: {0}")]
    Corrupt(String),
}

impl From<wugkit::Error> for StoreError {
    fn from(e: wugkit::Error) -> Self {
        StoreError::Corrupt(e.to_string())
    }
}

impl From<StoreError> for wugkit::Error {
    fn from(e: StoreError) -> Self {
        wugkit::Error::Io(std::io::Error::other(e.to_string()))
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorRecord {
    pub name: String,
    pub passed_tutorial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    Full,
    Pairs,
    Gold,
}

impl Pairing {
    pub fn name(self) -> &'static str {
        match self {
            Pairing::Full => "full",
            Pairing::Pairs => "pairs",
            Pairing::Gold => "gold",
        }
    }

    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "full" => Some(Pairing::Full),
            "pairs" => Some(Pairing::Pairs),
            "gold" => Some(Pairing::Gold),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub id: ProjectId,
    pub owner: String,
    pub language: String,
    pub seed: u64,
    pub public: bool,
    pub pairing: Pairing,
    pub words: Vec<String>,
    pub access: Vec<String>,
}

pub struct NewProject {
    pub owner: String,
    pub language: String,
    pub seed: u64,
    pub public: bool,
    pub pairing: Pairing,
    pub words: Vec<WordEntry>,
    pub judgments: Vec<Judgment>,
}

pub struct Store {
    conn: Mutex<Connection>,
}

fn parse_time(raw: &str) -> StoreResult<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| StoreError::Corrupt(format!("timestamp {raw:?}: {e}")))
}

fn status_name(s: TaskStatus) -> &'static str {
    match s {
        TaskStatus::Queued => "queued",
        TaskStatus::Running => "running",
        TaskStatus::Done => "done",
        TaskStatus::Failed => "failed",
    }
}

fn parse_status(raw: &str) -> StoreResult<TaskStatus> {
    Ok(match raw {
        "queued" => TaskStatus::Queued,
        "running" => TaskStatus::Running,
        "done" => TaskStatus::Done,
        "failed" => TaskStatus::Failed,
        other => return Err(StoreError::Corrupt(format!("task status {other:?}"))),
    })
}

fn upsert(tx: &Transaction<'_>, project: ProjectId, lemma: &str, judgments: &[Judgment]) -> StoreResult<()> {
    let mut stmt = tx.prepare_cached(
        "INSERT INTO judgments (project, lemma, identifier1, identifier2, annotator, judgment, comment, timestamp)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)
         ON CONFLICT (project, identifier1, identifier2, annotator)
         DO UPDATE SET judgment = excluded.judgment, comment = excluded.comment, timestamp = excluded.timestamp",
    )?;
    for j in judgments {
        stmt.execute(params![
            project,
            lemma,
            j.pair.first().as_str(),
            j.pair.second().as_str(),
            j.annotator,
            j.label.value(),
            j.comment,
            format_timestamp(&j.timestamp),
        ])?;
    }
    if !judgments.is_empty() {
        tx.execute(
            "UPDATE words SET version = version + 1 WHERE project = ?1 AND lemma = ?2",
            params![project, lemma],
        )?;
    }
    Ok(())
}

impl Store {
    pub fn open(path: &Path) -> StoreResult<Self> {
        Self::init(Connection::open(path)?)
    }

    pub fn in_memory() -> StoreResult<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> StoreResult<Self> {
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn register_annotator(&self, name: &str, token: &str) -> StoreResult<bool> {
        let n = self.conn().execute(
            "INSERT OR IGNORE INTO annotators (name, token) VALUES (?1, ?2)",
            params![name, token],
        )?;
        Ok(n == 1)
    }

    pub fn annotator_by_token(&self, token: &str) -> StoreResult<Option<AnnotatorRecord>> {
        Ok(self
            .conn()
            .query_row(
                "SELECT name, passed_tutorial FROM annotators WHERE token = ?1",
                [token],
                |r| {
                    Ok(AnnotatorRecord {
                        name: r.get(0)?,
                        passed_tutorial: r.get(1)?,
                    })
                },
            )
            .optional()?)
    }

    pub fn record_tutorial(
        &self,
        annotator: &str,
        passed: bool,
        spearman: Option<f64>,
        mean_abs_diff: f64,
        at: DateTime<Utc>,
    ) -> StoreResult<()> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute(
            "INSERT INTO tutorial_attempts (annotator, passed, spearman, mean_abs_diff, at) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![annotator, passed, spearman, mean_abs_diff, format_timestamp(&at)],
        )?;
        if passed {
            tx.execute("UPDATE annotators SET passed_tutorial = 1 WHERE name = ?1", [annotator])?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn tutorial_attempts(&self, annotator: &str) -> StoreResult<usize> {
        Ok(self.conn().query_row(
            "SELECT COUNT(*) FROM tutorial_attempts WHERE annotator = ?1",
            [annotator],
            |r| r.get::<_, i64>(0),
        )? as usize)
    }

    pub fn create_project(&self, project: NewProject) -> StoreResult<ProjectId> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute(
            "INSERT INTO projects (owner, language, seed, public, pairing) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![project.owner, project.language, project.seed as i64, project.public, project.pairing.name()],
        )?;
        let id = tx.last_insert_rowid();
        for (wi, word) in project.words.iter().enumerate() {
            tx.execute(
                "INSERT INTO words (project, lemma, position) VALUES (?1, ?2, ?3)",
                params![id, word.lemma, wi as i64],
            )?;
            for (ui, u) in word.uses.iter().enumerate() {
                tx.execute(
                    "INSERT INTO uses (project, lemma, position, identifier, context, span, pos, date, grouping)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
                    params![
                        id,
                        word.lemma,
                        ui as i64,
                        u.id.as_str(),
                        u.context,
                        u.span.to_string(),
                        u.pos,
                        u.date.map(|d| d.format("%Y-%m-%d").to_string()),
                        u.grouping,
                    ],
                )?;
            }
            for i in &word.instances {
                tx.execute(
                    "INSERT INTO instances (project, lemma, id, first, second) VALUES (?1, ?2, ?3, ?4, ?5)",
                    params![id, word.lemma, i.id as i64, i.first.as_str(), i.second.as_str()],
                )?;
            }
            let own: Vec<Judgment> = project
                .judgments
                .iter()
                .filter(|j| word.find_use(j.pair.first()).is_some())
                .cloned()
                .collect();
            upsert(&tx, id, &word.lemma, &own)?;
        }
        tx.commit()?;
        Ok(id)
    }

    pub fn project(&self, id: ProjectId) -> StoreResult<Option<ProjectRecord>> {
        let conn = self.conn();
        let row = conn
            .query_row(
                "SELECT owner, language, seed, public, pairing FROM projects WHERE id = ?1",
                [id],
                |r| {
                    Ok((
                        r.get::<_, String>(0)?,
                        r.get::<_, String>(1)?,
                        r.get::<_, i64>(2)?,
                        r.get::<_, bool>(3)?,
                        r.get::<_, String>(4)?,
                    ))
                },
            )
            .optional()?;
        let Some((owner, language, seed, public, pairing)) = row else {
            return Ok(None);
        };
        let words = conn
            .prepare("SELECT lemma FROM words WHERE project = ?1 ORDER BY position")?
            .query_map([id], |r| r.get(0))?
            .collect::<Result<_, _>>()?;
        let access = conn
            .prepare("SELECT annotator FROM access WHERE project = ?1 ORDER BY annotator")?
            .query_map([id], |r| r.get(0))?
            .collect::<Result<_, _>>()?;
        Ok(Some(ProjectRecord {
            id,
            owner,
            language,
            seed: seed as u64,
            public,
            pairing: Pairing::parse(&pairing).ok_or_else(|| StoreError::Corrupt(format!("pairing {pairing:?}")))?,
            words,
            access,
        }))
    }

    pub fn delete_project(&self, id: ProjectId) -> StoreResult<bool> {
        Ok(self.conn().execute("DELETE FROM projects WHERE id = ?1", [id])? == 1)
    }

    pub fn grant(&self, id: ProjectId, annotator: &str) -> StoreResult<()> {
        self.conn().execute(
            "INSERT OR IGNORE INTO access (project, annotator) VALUES (?1, ?2)",
            params![id, annotator],
        )?;
        Ok(())
    }

    pub fn set_public(&self, id: ProjectId, public: bool) -> StoreResult<()> {
        self.conn()
            .execute("UPDATE projects SET public = ?2 WHERE id = ?1", params![id, public])?;
        Ok(())
    }

    pub fn word(&self, id: ProjectId, lemma: &str) -> StoreResult<Option<WordEntry>> {
        let conn = self.conn();
        let uses = conn
            .prepare(
                "SELECT identifier, context, span, pos, date, grouping FROM uses
                 WHERE project = ?1 AND lemma = ?2 ORDER BY position",
            )?
            .query_map(params![id, lemma], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, Option<String>>(3)?,
                    r.get::<_, Option<String>>(4)?,
                    r.get::<_, Option<String>>(5)?,
                ))
            })?
            .collect::<Result<Vec<_>, _>>()?;
        if uses.is_empty() {
            return Ok(None);
        }
        let uses = uses
            .into_iter()
            .map(|(identifier, context, span, pos, date, grouping)| {
                let span: Span = span.parse()?;
                let mut u = Use::new(identifier, lemma, context, span)?;
                u.pos = pos;
                u.grouping = grouping;
                u.date = date.map(|d| wugkit::model::parse_date(&d)).transpose()?;
                Ok(u)
            })
            .collect::<StoreResult<Vec<_>>>()?;
        let instances = conn
            .prepare("SELECT id, first, second FROM instances WHERE project = ?1 AND lemma = ?2 ORDER BY id")?
            .query_map(params![id, lemma], |r| {
                Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?))
            })?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|(i, a, b)| AnnotationInstance::new(i as usize, UseId::new(a), UseId::new(b)))
            .collect::<wugkit::Result<Vec<_>>>()?;
        Ok(Some(WordEntry::new(lemma, uses, instances)?))
    }

    pub fn word_version(&self, id: ProjectId, lemma: &str) -> StoreResult<Option<u64>> {
        Ok(self
            .conn()
            .query_row(
                "SELECT version FROM words WHERE project = ?1 AND lemma = ?2",
                params![id, lemma],
                |r| r.get::<_, i64>(0),
            )
            .optional()?
            .map(|v| v as u64))
    }

    pub fn judgments(&self, id: ProjectId, lemma: &str) -> StoreResult<Vec<Judgment>> {
        self.conn()
            .prepare(
                "SELECT identifier1, identifier2, annotator, judgment, comment, timestamp FROM judgments
                 WHERE project = ?1 AND lemma = ?2 ORDER BY identifier1, identifier2, annotator",
            )?
            .query_map(params![id, lemma], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, i64>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                ))
            })?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|(a, b, annotator, label, comment, ts)| {
                Ok(Judgment::new(PairKey::new(a, b)?, annotator, validate_label(label)?, parse_time(&ts)?).with_comment(comment))
            })
            .collect()
    }

    pub fn judged_pairs(&self, id: ProjectId, lemma: &str, annotator: &str) -> StoreResult<HashSet<PairKey>> {
        self.conn()
            .prepare("SELECT identifier1, identifier2 FROM judgments WHERE project = ?1 AND lemma = ?2 AND annotator = ?3")?
            .query_map(params![id, lemma, annotator], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|(a, b)| Ok(PairKey::new(a, b)?))
            .collect()
    }

    pub fn latest_timestamp(&self, annotator: &str) -> StoreResult<Option<DateTime<Utc>>> {
        let raw: Vec<String> = self
            .conn()
            .prepare("SELECT timestamp FROM judgments WHERE annotator = ?1")?
            .query_map([annotator], |r| r.get(0))?
            .collect::<Result<_, _>>()?;
        Ok(raw.iter().map(|t| parse_time(t)).collect::<StoreResult<Vec<_>>>()?.into_iter().max())
    }

    pub fn save_judgments(&self, id: ProjectId, lemma: &str, judgments: &[Judgment]) -> StoreResult<()> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        upsert(&tx, id, lemma, judgments)?;
        tx.commit()?;
        Ok(())
    }

    pub fn save_task(&self, task: &AnnotationTask, project: ProjectId) -> StoreResult<()> {
        self.conn().execute(
            "INSERT INTO tasks (id, project, lemma, annotator, status, total, judged, created, error)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)
             ON CONFLICT (id) DO UPDATE SET status = excluded.status, total = excluded.total,
                 judged = excluded.judged, created = excluded.created, error = excluded.error",
            params![
                task.id,
                project,
                task.word,
                task.annotator,
                status_name(task.status),
                task.progress.total as i64,
                task.progress.judged as i64,
                task.progress.created as i64,
                task.error,
            ],
        )?;
        Ok(())
    }

    pub fn task(&self, id: &str) -> StoreResult<Option<AnnotationTask>> {
        let row = self
            .conn()
            .query_row(
                "SELECT project, lemma, annotator, status, total, judged, created, error FROM tasks WHERE id = ?1",
                [id],
                |r| {
                    Ok((
                        r.get::<_, i64>(0)?,
                        r.get::<_, Option<String>>(1)?,
                        r.get::<_, String>(2)?,
                        r.get::<_, String>(3)?,
                        r.get::<_, i64>(4)?,
                        r.get::<_, i64>(5)?,
                        r.get::<_, i64>(6)?,
                        r.get::<_, Option<String>>(7)?,
                    ))
                },
            )
            .optional()?;
        let Some((project, lemma, annotator, status, total, judged, created, error)) = row else {
            return Ok(None);
        };
        let mut task = AnnotationTask::new(id, project.to_string(), lemma, annotator);
        task.status = parse_status(&status)?;
        task.progress = TaskProgress {
            total: total as usize,
            judged: judged as usize,
            created: created as usize,
        };
        task.error = error;
        Ok(Some(task))
    }
}

/// One word of a project seen as a judgment store for computational tasks.
pub struct WordStore<'a> {
    pub store: &'a Store,
    pub project: ProjectId,
    pub lemma: String,
}

impl JudgmentStore for WordStore<'_> {
    fn judged_pairs(&self, annotator: &str) -> wugkit::Result<HashSet<PairKey>> {
        Ok(self.store.judged_pairs(self.project, &self.lemma, annotator)?)
    }

    fn persist(&mut self, judgments: &[Judgment]) -> wugkit::Result<()> {
        Ok(self.store.save_judgments(self.project, &self.lemma, judgments)?)
    }
}
