//! CSV formats for uses, judgments, uploaded pair lists and cluster
//! assignments.
//!
//! All files are UTF-8, comma separated, quoted only where a field needs it,
//! and carry a mandatory header row. Writers emit `\n` line endings and are
//! deterministic, so identical inputs produce identical bytes.
//!
//! Parsers report every row-level problem at once in a
//! [`ValidationReport`] rather than stopping at the first one.

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result, ValidationReport};
use crate::model::{parse_date, validate_label, Judgment, Label, PairKey, Span, Use, UseId};

pub const USES_HEADER: [&str; 7] = [
    "lemma",
    "identifier",
    "context",
    "indexes_target_token",
    "pos",
    "date",
    "grouping",
];
pub const JUDGMENTS_HEADER: [&str; 6] = [
    "identifier1",
    "identifier2",
    "annotator",
    "judgment",
    "comment",
    "timestamp",
];
pub const PAIRS_HEADER: [&str; 2] = ["identifier1", "identifier2"];
pub const CLUSTERS_HEADER: [&str; 2] = ["identifier", "cluster_id"];

/// Parsed judgments plus non-fatal notes (overwritten duplicates).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JudgmentsFile {
    pub judgments: Vec<Judgment>,
    pub warnings: Vec<String>,
}

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn get<'a>(&self, row: &'a [String], column: &str) -> Option<&'a str> {
        self.columns
            .get(column)
            .and_then(|&i| row.get(i))
            .map(String::as_str)
    }
}

fn read_table(bytes: &[u8], required: &[&str], report: &mut ValidationReport) -> Option<Table> {
    if std::str::from_utf8(bytes).is_err() {
        report.push(0, "input is not valid UTF-8");
        return None;
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let header = match reader.headers() {
        Ok(h) if !(h.len() == 1 && h[0].is_empty()) && !h.is_empty() => h.clone(),
        Ok(_) => {
            report.push(0, "missing header row");
            return None;
        }
        Err(e) => {
            report.push(1, format!("malformed header: {e}"));
            return None;
        }
    };
    let columns: HashMap<String, usize> = header
        .iter()
        .enumerate()
        .map(|(i, name)| (name.trim().trim_start_matches('\u{feff}').to_owned(), i))
        .collect();
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|c| !columns.contains_key(*c))
        .collect();
    if !missing.is_empty() {
        report.push(1, format!("missing required column(s): {}", missing.join(", ")));
        return None;
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        match record {
            Ok(r) => {
                let line = r.position().map_or(0, |p| p.line());
                rows.push((line, r.iter().map(str::to_owned).collect()));
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.push(line, format!("malformed CSV row: {e}"));
            }
        }
    }
    Some(Table { columns, rows })
}

fn non_empty(v: Option<&str>) -> Option<String> {
    v.map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned)
}

/// Parses a uses file into one [`Use`] per data row.
pub fn parse_uses(bytes: &[u8]) -> Result<Vec<Use>> {
    parse_uses_named("uses", bytes)
}

pub fn parse_uses_named(file: &str, bytes: &[u8]) -> Result<Vec<Use>> {
    let mut report = ValidationReport::new(file);
    let Some(table) = read_table(bytes, &USES_HEADER[..4], &mut report) else {
        return Err(Error::Validation(report));
    };
    let mut uses = Vec::with_capacity(table.rows.len());
    let mut seen: HashMap<String, u64> = HashMap::new();
    for (line, row) in &table.rows {
        let field = |c| table.get(row, c).unwrap_or_default();
        let id = field("identifier").trim();
        if let Some(first) = seen.get(id) {
            report.push(*line, format!("duplicate identifier {id:?} (first seen on line {first})"));
            continue;
        }
        seen.insert(id.to_owned(), *line);
        match build_use(&table, row) {
            Ok(u) => uses.push(u),
            Err(e) => report.push(*line, e.to_string()),
        }
    }
    if report.is_empty() {
        Ok(uses)
    } else {
        Err(Error::Validation(report))
    }
}

fn build_use(table: &Table, row: &[String]) -> Result<Use> {
    let field = |c| table.get(row, c).unwrap_or_default();
    let span: Span = field("indexes_target_token").parse()?;
    let mut u = Use::new(
        field("identifier").trim(),
        field("lemma").trim(),
        field("context"),
        span,
    )?;
    u.pos = non_empty(table.get(row, "pos"));
    u.grouping = non_empty(table.get(row, "grouping"));
    if let Some(d) = non_empty(table.get(row, "date")) {
        u.date = Some(parse_date(&d)?);
    }
    Ok(u)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer cannot fail")
}

/// Writes uses in the given order. Dates are written as `YYYY-MM-DD`.
pub fn serialize_uses(uses: &[Use]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(USES_HEADER).expect("in-memory");
    for u in uses {
        let date = u.date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default();
        w.write_record([
            u.lemma.as_str(),
            u.id.as_str(),
            u.context.as_str(),
            &u.span.to_string(),
            u.pos.as_deref().unwrap_or_default(),
            &date,
            u.grouping.as_deref().unwrap_or_default(),
        ])
        .expect("in-memory");
    }
    finish(w)
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(DateTime::<Utc>::UNIX_EPOCH);
    }
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| format!("malformed timestamp {raw:?}, expected ISO-8601 such as 2023-01-01T00:00:00Z"))
}

/// Parses a judgments file. Pair keys are canonicalized; a later row for the
/// same (annotator, pair) replaces the earlier one and produces a warning.
pub fn parse_judgments(bytes: &[u8]) -> Result<JudgmentsFile> {
    parse_judgments_named("judgments", bytes)
}

pub fn parse_judgments_named(file: &str, bytes: &[u8]) -> Result<JudgmentsFile> {
    let mut report = ValidationReport::new(file);
    let Some(table) = read_table(bytes, &JUDGMENTS_HEADER[..4], &mut report) else {
        return Err(Error::Validation(report));
    };
    let mut judgments: Vec<Judgment> = Vec::with_capacity(table.rows.len());
    let mut index: HashMap<(String, PairKey), (usize, u64)> = HashMap::new();
    let mut warnings = Vec::new();
    for (line, row) in &table.rows {
        let field = |c| table.get(row, c).unwrap_or_default();
        let mut problems = Vec::new();
        let pair = PairKey::new(field("identifier1").trim(), field("identifier2").trim())
            .map_err(|e| problems.push(e.to_string()))
            .ok();
        let annotator = field("annotator").trim();
        if annotator.is_empty() {
            problems.push("empty annotator".to_owned());
        }
        let token = field("judgment").trim();
        let label = token
            .parse::<i64>()
            .map_err(|_| problems.push(format!("unknown label token {token:?}")))
            .and_then(|v| validate_label(v).map_err(|e| problems.push(e.to_string())))
            .ok();
        let timestamp = parse_timestamp(field("timestamp"))
            .map_err(|e| problems.push(e))
            .ok();
        if !problems.is_empty() {
            for p in problems {
                report.push(*line, p);
            }
            continue;
        }
        let (pair, label, timestamp) = (pair.unwrap(), label.unwrap(), timestamp.unwrap());
        let j = Judgment::new(pair.clone(), annotator, label, timestamp).with_comment(field("comment"));
        let key = (annotator.to_owned(), pair);
        match index.get(&key) {
            Some(&(i, first)) => {
                warnings.push(format!(
                    "line {line}: judgment by {} on {} overrides line {first}",
                    key.0, key.1
                ));
                judgments[i] = j;
            }
            None => {
                index.insert(key, (judgments.len(), *line));
                judgments.push(j);
            }
        }
    }
    if report.is_empty() {
        Ok(JudgmentsFile {
            judgments,
            warnings,
        })
    } else {
        Err(Error::Validation(report))
    }
}

/// Writes judgments sorted by (pair, annotator).
pub fn serialize_judgments(judgments: &[Judgment]) -> Vec<u8> {
    let mut sorted: Vec<&Judgment> = judgments.iter().collect();
    sorted.sort_by(|a, b| (&a.pair, &a.annotator).cmp(&(&b.pair, &b.annotator)));
    let mut w = writer();
    w.write_record(JUDGMENTS_HEADER).expect("in-memory");
    for j in sorted {
        w.write_record([
            j.pair.first().as_str(),
            j.pair.second().as_str(),
            j.annotator.as_str(),
            &j.label.to_string(),
            j.comment.as_str(),
            &format_timestamp(&j.timestamp),
        ])
        .expect("in-memory");
    }
    finish(w)
}

/// Reports judgments whose pair references a use outside `known`.
pub fn check_known_uses<'a>(
    judgments: &[Judgment],
    known: impl IntoIterator<Item = &'a UseId>,
) -> Result<()> {
    let known: HashSet<&UseId> = known.into_iter().collect();
    let mut report = ValidationReport::new("judgments");
    for (i, j) in judgments.iter().enumerate() {
        for id in [j.pair.first(), j.pair.second()] {
            if !known.contains(id) {
                report.push(i as u64 + 2, format!("unknown use identifier {id}"));
            }
        }
    }
    if report.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(report))
    }
}

/// Parses an uploaded pair list, keeping the order of the file.
pub fn parse_pairs(bytes: &[u8]) -> Result<Vec<(UseId, UseId)>> {
    let mut report = ValidationReport::new("pairs");
    let Some(table) = read_table(bytes, &PAIRS_HEADER, &mut report) else {
        return Err(Error::Validation(report));
    };
    let pairs = table
        .rows
        .iter()
        .map(|(_, row)| {
            let f = |c| UseId::new(table.get(row, c).unwrap_or_default().trim());
            (f("identifier1"), f("identifier2"))
        })
        .collect();
    if report.is_empty() {
        Ok(pairs)
    } else {
        Err(Error::Validation(report))
    }
}

pub fn serialize_pairs(pairs: &[(UseId, UseId)]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(PAIRS_HEADER).expect("in-memory");
    for (a, b) in pairs {
        w.write_record([a.as_str(), b.as_str()]).expect("in-memory");
    }
    finish(w)
}

/// Parses a pair-to-label table with columns `identifier1,identifier2,judgment`
/// (other columns are ignored, so a judgments file also qualifies).
pub fn parse_label_table(bytes: &[u8]) -> Result<HashMap<PairKey, Label>> {
    let mut report = ValidationReport::new("label table");
    let Some(table) = read_table(bytes, &["identifier1", "identifier2", "judgment"], &mut report) else {
        return Err(Error::Validation(report));
    };
    let mut out = HashMap::new();
    for (line, row) in &table.rows {
        let field = |c| table.get(row, c).unwrap_or_default().trim();
        let parsed = PairKey::new(field("identifier1"), field("identifier2")).and_then(|p| {
            let token = field("judgment");
            let raw = token
                .parse::<i64>()
                .map_err(|_| Error::InvalidUse(format!("unknown label token {token:?}")))?;
            Ok((p, validate_label(raw)?))
        });
        match parsed {
            Ok((p, l)) => {
                out.insert(p, l);
            }
            Err(e) => report.push(*line, e.to_string()),
        }
    }
    if report.is_empty() {
        Ok(out)
    } else {
        Err(Error::Validation(report))
    }
}

/// Writes a cluster assignment sorted by identifier; excluded uses carry -1.
pub fn serialize_clusters(assignment: &BTreeMap<UseId, i64>) -> Vec<u8> {
    let mut w = writer();
    w.write_record(CLUSTERS_HEADER).expect("in-memory");
    for (id, c) in assignment {
        w.write_record([id.as_str(), &c.to_string()]).expect("in-memory");
    }
    finish(w)
}

pub fn parse_clusters(bytes: &[u8]) -> Result<BTreeMap<UseId, i64>> {
    let mut report = ValidationReport::new("clusters");
    let Some(table) = read_table(bytes, &CLUSTERS_HEADER, &mut report) else {
        return Err(Error::Validation(report));
    };
    let mut out = BTreeMap::new();
    for (line, row) in &table.rows {
        let id = table.get(row, "identifier").unwrap_or_default().trim();
        let raw = table.get(row, "cluster_id").unwrap_or_default().trim();
        match raw.parse::<i64>() {
            Ok(c) if c >= -1 => {
                if out.insert(UseId::new(id), c).is_some() {
                    report.push(*line, format!("duplicate identifier {id:?}"));
                }
            }
            _ => report.push(*line, format!("invalid cluster id {raw:?}")),
        }
    }
    if report.is_empty() {
        Ok(out)
    } else {
        Err(Error::Validation(report))
    }
}

/// Writes a generic table with the shared dialect.
pub fn write_table<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = writer();
    w.write_record(header).expect("in-memory");
    for row in rows {
        w.write_record(row).expect("in-memory");
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARM_ROW: &str = "lemma,identifier,context,indexes_target_token,pos,date,grouping\n\
        arm,U1,\"and taking a knife from her pocket, she opened a vein in her little arm, and dipping a feather in the blood\",68:71,NN,1824,t1\n";

    #[test]
    fn parses_arm_row() {
        let uses = parse_uses(ARM_ROW.as_bytes()).unwrap();
        assert_eq!(uses.len(), 1);
        assert_eq!(uses[0].lemma, "arm");
        assert_eq!(uses[0].target(), "arm");
        assert_eq!(uses[0].grouping.as_deref(), Some("t1"));
        assert_eq!(uses[0].date.unwrap().to_string(), "1824-01-01");
    }

    #[test]
    fn header_only_is_empty() {
        let uses = parse_uses(b"lemma,identifier,context,indexes_target_token\n").unwrap();
        assert!(uses.is_empty());
    }

    #[test]
    fn reports_every_bad_row() {
        let ctx = "x".repeat(40);
        let csv = format!(
            "lemma,identifier,context,indexes_target_token\n\
             w,a,{ctx},50:60\n\
             w,b,{ctx},0:1\n\
             w,b,{ctx},0:1\n\
             w,c,{ctx},5:5\n"
        );
        let Err(Error::Validation(report)) = parse_uses(csv.as_bytes()) else {
            panic!("expected validation report");
        };
        assert_eq!(report.errors.len(), 3);
        assert_eq!(report.errors[0].line, 2);
        assert!(report.errors[0].message.contains("span out of bounds"));
        assert!(report.errors[1].message.contains("duplicate identifier"));
        assert!(report.errors[2].message.contains("empty"));
    }

    #[test]
    fn missing_columns_and_bad_rows() {
        let Err(Error::Validation(r)) = parse_uses(b"lemma,identifier,context\n") else {
            panic!()
        };
        assert!(r.errors[0].message.contains("indexes_target_token"));
        let Err(Error::Validation(r)) =
            parse_uses(b"lemma,identifier,context,indexes_target_token\nw,a,\"abc,0:1\nw,b\n")
        else {
            panic!()
        };
        assert!(r.errors.iter().any(|e| e.message.contains("malformed CSV")));
        assert!(parse_uses(b"").is_err());
        assert!(parse_uses(&[0xff, 0xfe, b'\n']).is_err());
    }

    #[test]
    fn judgments_canonicalize_and_overwrite() {
        let csv = "identifier1,identifier2,annotator,judgment,comment,timestamp\n\
                   U1,U3,gold,4,,2023-01-01T00:00:00Z\n\
                   U3,U1,gold,3,late,2023-01-02T00:00:00Z\n\
                   U3,U1,other,0,,2023-01-02T00:00:00Z\n";
        let f = parse_judgments(csv.as_bytes()).unwrap();
        assert_eq!(f.judgments.len(), 2);
        assert_eq!(f.judgments[0].pair, PairKey::new("U1", "U3").unwrap());
        assert_eq!(f.judgments[0].label.value(), 3);
        assert_eq!(f.judgments[0].comment, "late");
        assert_eq!(f.warnings.len(), 1);
        assert!(f.judgments[1].label.is_cannot_decide());
    }

    #[test]
    fn judgment_errors() {
        let csv = "identifier1,identifier2,annotator,judgment,comment,timestamp\n\
                   U1,U3,gold,x,,2023-01-01T00:00:00Z\n\
                   U1,U3,gold,7,,2023-01-01T00:00:00Z\n\
                   U1,U3,gold,4,,yesterday\n\
                   U1,U1,gold,4,,2023-01-01T00:00:00Z\n";
        let Err(Error::Validation(r)) = parse_judgments(csv.as_bytes()) else {
            panic!()
        };
        assert_eq!(r.errors.len(), 4);
        assert!(r.errors[0].message.contains("unknown label token \"x\""));
        assert!(r.errors[1].message.contains("invalid label 7"));
        assert!(r.errors[2].message.contains("malformed timestamp"));
        assert!(r.errors[3].message.contains("itself"));
    }

    #[test]
    fn serialize_shapes() {
        assert_eq!(
            serialize_judgments(&[]),
            b"identifier1,identifier2,annotator,judgment,comment,timestamp\n"
        );
        let j = Judgment::new(
            PairKey::new("b", "a").unwrap(),
            "gold",
            validate_label(4).unwrap(),
            "2023-01-01T00:00:00Z".parse().unwrap(),
        )
        .with_comment("one, two");
        let text = String::from_utf8(serialize_judgments(&[j])).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "a,b,gold,4,\"one, two\",2023-01-01T00:00:00Z"
        );
    }

    #[test]
    fn known_use_check() {
        let j = Judgment::new(
            PairKey::new("a", "zz").unwrap(),
            "x",
            validate_label(1).unwrap(),
            DateTime::<Utc>::UNIX_EPOCH,
        );
        let known = [UseId::new("a")];
        assert!(check_known_uses(&[j], &known).is_err());
    }

    #[test]
    fn clusters_round_trip() {
        let mut m = BTreeMap::new();
        m.insert(UseId::new("A"), 0);
        m.insert(UseId::new("B"), -1);
        let bytes = serialize_clusters(&m);
        assert_eq!(bytes, b"identifier,cluster_id\nA,0\nB,-1\n");
        assert_eq!(parse_clusters(&bytes).unwrap(), m);
        assert!(parse_clusters(b"identifier,cluster_id\nA,-4\n").is_err());
    }
}
