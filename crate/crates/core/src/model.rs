//! Domain types shared by every module: uses, use pairs, judgments and the
//! four-level relatedness scale.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Threshold separating low (< 2.5) from high (≥ 2.5) relatedness.
pub const THRESHOLD: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UseId(String);

impl UseId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UseId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for UseId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Character offsets of the target word, start inclusive, end exclusive,
/// counted in Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidSpan(format!(
                "{start}:{end} is empty (start must be below end)"
            )));
        }
        Ok(Self { start, end })
    }

    /// Checks the span against a context and returns the covered substring.
    pub fn extract<'a>(&self, context: &'a str) -> Result<&'a str> {
        let len = context.chars().count();
        if self.end > len {
            return Err(Error::InvalidSpan(format!(
                "span out of bounds: {self} on a context of {len} characters"
            )));
        }
        let (start, end) = byte_range(context, self.start, self.end);
        Ok(&context[start..end])
    }
}

fn byte_range(text: &str, start: usize, end: usize) -> (usize, usize) {
    let mut indices = text.char_indices().map(|(i, _)| i).chain(Some(text.len()));
    let first = indices.nth(start).unwrap_or(text.len());
    let last = indices.nth(end - start - 1).unwrap_or(text.len());
    (first, last)
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for Span {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidSpan(format!("{s:?} is not of the form start:end")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidSpan(format!("{s:?} is not of the form start:end")))
        };
        Span::new(parse(a)?, parse(b)?)
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses an ISO-8601 calendar date or a bare year (normalized to January 1).
pub fn parse_date(raw: &str) -> Result<NaiveDate> {
    let raw = raw.trim();
    if !raw.is_empty() && raw.len() <= 4 && raw.bytes().all(|b| b.is_ascii_digit()) {
        let year: i32 = raw.parse().expect("digits");
        return NaiveDate::from_ymd_opt(year, 1, 1)
            .ok_or_else(|| Error::InvalidUse(format!("invalid year {raw:?}")));
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| Error::InvalidUse(format!("invalid date {raw:?}, expected YYYY or YYYY-MM-DD")))
}

/// One word usage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Use {
    pub id: UseId,
    pub lemma: String,
    pub context: String,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<String>,
}

impl Use {
    pub fn new(
        id: impl Into<UseId>,
        lemma: impl Into<String>,
        context: impl Into<String>,
        span: Span,
    ) -> Result<Self> {
        let u = Self {
            id: id.into(),
            lemma: lemma.into(),
            context: context.into(),
            span,
            pos: None,
            date: None,
            grouping: None,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn with_date(mut self, date: NaiveDate) -> Self {
        self.date = Some(date);
        self
    }

    pub fn with_grouping(mut self, grouping: impl Into<String>) -> Self {
        self.grouping = Some(grouping.into());
        self
    }

    pub fn with_pos(mut self, pos: impl Into<String>) -> Self {
        self.pos = Some(pos.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.as_str().trim().is_empty() {
            return Err(Error::InvalidUse("empty identifier".into()));
        }
        if self.lemma.trim().is_empty() {
            return Err(Error::InvalidUse("empty lemma".into()));
        }
        self.span.extract(&self.context)?;
        Ok(())
    }

    pub fn target(&self) -> &str {
        self.span.extract(&self.context).unwrap_or_default()
    }

    /// Splits the context into (left, target, right) at the span.
    pub fn concordance(&self) -> (&str, &str, &str) {
        let (s, e) = byte_range(&self.context, self.span.start, self.span.end);
        (&self.context[..s], &self.context[s..e], &self.context[e..])
    }
}

/// Canonical unordered pair of use identifiers, smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey(UseId, UseId);

impl PairKey {
    pub fn new(a: impl Into<UseId>, b: impl Into<UseId>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self(a, b)),
            std::cmp::Ordering::Greater => Ok(Self(b, a)),
            std::cmp::Ordering::Equal => Err(Error::SelfPair(a)),
        }
    }

    pub fn first(&self) -> &UseId {
        &self.0
    }

    pub fn second(&self) -> &UseId {
        &self.1
    }

    pub fn contains(&self, id: &UseId) -> bool {
        &self.0 == id || &self.1 == id
    }

    pub fn other(&self, id: &UseId) -> Option<&UseId> {
        if &self.0 == id {
            Some(&self.1)
        } else if &self.1 == id {
            Some(&self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

pub type InstanceId = usize;

/// An unordered use pair to be judged. `first`/`second` keep the order the
/// pair was created with; presentation order is decided per annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationInstance {
    pub id: InstanceId,
    pub first: UseId,
    pub second: UseId,
    pub pair: PairKey,
}

impl AnnotationInstance {
    pub fn new(id: InstanceId, first: UseId, second: UseId) -> Result<Self> {
        let pair = PairKey::new(first.clone(), second.clone())?;
        Ok(Self {
            id,
            first,
            second,
            pair,
        })
    }
}

/// A judgment label; 0 encodes Cannot decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Label(u8);

impl Label {
    pub const CANNOT_DECIDE: Label = Label(0);

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_cannot_decide(self) -> bool {
        self.0 == 0
    }

    /// The label as a scale value, `None` for Cannot decide.
    pub fn score(self) -> Option<f64> {
        (self.0 != 0).then_some(f64::from(self.0))
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = i64::deserialize(deserializer)?;
        validate_label(raw).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn validate_label(raw: i64) -> Result<Label> {
    match raw {
        0..=4 => Ok(Label(raw as u8)),
        _ => Err(Error::InvalidLabel(raw)),
    }
}

/// The four ordered levels of the relatedness scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Unrelated = 1,
    DistantlyRelated = 2,
    CloselyRelated = 3,
    Identical = 4,
}

impl Level {
    pub const ALL: [Level; 4] = [
        Level::Unrelated,
        Level::DistantlyRelated,
        Level::CloselyRelated,
        Level::Identical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Level::Unrelated => "Unrelated",
            Level::DistantlyRelated => "Distantly Related",
            Level::CloselyRelated => "Closely Related",
            Level::Identical => "Identical",
        }
    }

    pub fn relation(self) -> Relation {
        match self {
            Level::Unrelated => Relation::Homonymy,
            Level::DistantlyRelated => Relation::Polysemy,
            Level::CloselyRelated => Relation::ContextVariance,
            Level::Identical => Relation::Identity,
        }
    }

    pub fn label(self) -> Label {
        Label(self as u8)
    }
}

impl TryFrom<Label> for Level {
    type Error = Error;

    fn try_from(label: Label) -> Result<Self> {
        match label.0 {
            1 => Ok(Level::Unrelated),
            2 => Ok(Level::DistantlyRelated),
            3 => Ok(Level::CloselyRelated),
            4 => Ok(Level::Identical),
            _ => Err(Error::NoRelation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Homonymy,
    Polysemy,
    ContextVariance,
    Identity,
}

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Relation::Homonymy => "Homonymy",
            Relation::Polysemy => "Polysemy",
            Relation::ContextVariance => "Context Variance",
            Relation::Identity => "Identity",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn interpret_label(label: Label) -> Result<Relation> {
    Level::try_from(label).map(Level::relation)
}

/// True when a weight counts as high relatedness.
pub fn is_high(weight: f64) -> bool {
    weight >= THRESHOLD
}

/// One annotator's judgment of one use pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub pair: PairKey,
    pub annotator: String,
    pub label: Label,
    /// Empty when the annotator left no comment.
    #[serde(default)]
    pub comment: String,
    pub timestamp: DateTime<Utc>,
}

impl Judgment {
    pub fn new(pair: PairKey, annotator: impl Into<String>, label: Label, timestamp: DateTime<Utc>) -> Self {
        Self {
            pair,
            annotator: annotator.into(),
            label,
            comment: String::new(),
            timestamp,
        }
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Self {
        self.comment = comment.into();
        self
    }
}

/// Keeps the last judgment per (annotator, pair), preserving the position
/// of the first occurrence.
pub fn dedup_judgments(judgments: impl IntoIterator<Item = Judgment>) -> Vec<Judgment> {
    let mut index: BTreeMap<(String, PairKey), usize> = BTreeMap::new();
    let mut out: Vec<Judgment> = Vec::new();
    for j in judgments {
        let key = (j.annotator.clone(), j.pair.clone());
        match index.get(&key) {
            Some(&i) => out[i] = j,
            None => {
                index.insert(key, out.len());
                out.push(j);
            }
        }
    }
    out
}

/// The uses of one lemma and the pairs to annotate for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEntry {
    pub lemma: String,
    pub uses: Vec<Use>,
    pub instances: Vec<AnnotationInstance>,
}

impl WordEntry {
    pub fn new(lemma: impl Into<String>, uses: Vec<Use>, instances: Vec<AnnotationInstance>) -> Result<Self> {
        let lemma = lemma.into();
        let mut ids = BTreeSet::new();
        for u in &uses {
            if u.lemma != lemma {
                return Err(Error::MixedLemmas(lemma, u.lemma.clone()));
            }
            if !ids.insert(&u.id) {
                return Err(Error::InvalidUse(format!("duplicate identifier {}", u.id)));
            }
        }
        for inst in &instances {
            for id in [&inst.first, &inst.second] {
                if !ids.contains(id) {
                    return Err(Error::UnknownUse(id.clone()));
                }
            }
        }
        Ok(Self {
            lemma,
            uses,
            instances,
        })
    }

    pub fn find_use(&self, id: &UseId) -> Option<&Use> {
        self.uses.iter().find(|u| &u.id == id)
    }

    pub fn instance(&self, id: InstanceId) -> Option<&AnnotationInstance> {
        self.instances.iter().find(|i| i.id == id)
    }
}

/// An annotation project. The seed is fixed at creation and drives every
/// randomized step (sequences, computational annotation, clustering).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub language: String,
    pub words: BTreeMap<String, WordEntry>,
    pub access: BTreeSet<String>,
    pub public: bool,
    seed: u64,
}

impl Project {
    pub fn new(id: impl Into<String>, language: impl Into<String>, seed: u64) -> Self {
        Self {
            id: id.into(),
            language: language.into(),
            words: BTreeMap::new(),
            access: BTreeSet::new(),
            public: false,
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Adds a word, rejecting use identifiers already used by another word.
    pub fn add_word(&mut self, word: WordEntry) -> Result<()> {
        for other in self.words.values().filter(|w| w.lemma != word.lemma) {
            if let Some(u) = word.uses.iter().find(|u| other.find_use(&u.id).is_some()) {
                return Err(Error::InvalidUse(format!(
                    "identifier {} already used by lemma {}",
                    u.id, other.lemma
                )));
            }
        }
        self.words.insert(word.lemma.clone(), word);
        Ok(())
    }

    pub fn may_annotate(&self, annotator: &str) -> bool {
        self.public || self.access.contains(annotator)
    }
}
