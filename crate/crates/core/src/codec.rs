//! Log records and their on-chain encodings.
//!
//! A log line has seven whitespace-separated fields. Two encodings map a
//! record onto one transaction:
//!
//! * **Baseline**: one item per field, keyed by the field value, each item's
//!   value holding the whole record line.
//! * **Enhanced**: the same seven keys with empty values, plus one item per
//!   coarse timestamp level (`L0` .. `L{L-2}`) keyed by the bucket start. The
//!   finest level is the `Timestamp` stream. With normalization, follow-up
//!   records (`ref_id != id`) drop the `User`/`Resource` items that equal
//!   those of the record they reference, and rebuild recovers them from it.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ledger::{StreamItem, StreamName, Transaction};
use crate::tsindex::{bucket_keys, TsIndexParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("no record with id {id} on node {node} to resolve a reference")]
    MissingRoot { node: String, id: String },
    #[error("malformed transaction: {0}")]
    MalformedTransaction(String),
}

/// The seven record attributes, in line order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Timestamp,
    Node,
    Id,
    RefId,
    User,
    Activity,
    Resource,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Timestamp,
        Field::Node,
        Field::Id,
        Field::RefId,
        Field::User,
        Field::Activity,
        Field::Resource,
    ];

    /// Stream name used for this field.
    pub fn name(self) -> &'static str {
        match self {
            Field::Timestamp => "Timestamp",
            Field::Node => "Node",
            Field::Id => "ID",
            Field::RefId => "Ref-ID",
            Field::User => "User",
            Field::Activity => "Activity",
            Field::Resource => "Resource",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn stream(self) -> StreamName {
        StreamName::new(self.name()).expect("field names are non-empty")
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match norm.as_str() {
            "timestamp" => Field::Timestamp,
            "node" => Field::Node,
            "id" => Field::Id,
            "refid" => Field::RefId,
            "user" => Field::User,
            "activity" => Field::Activity,
            "resource" => Field::Resource,
            _ => return Err(CodecError::Parse(format!("unknown field {s:?}"))),
        })
    }
}

/// One access-log entry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LogRecord {
    pub timestamp: u64,
    pub node: String,
    pub id: String,
    pub ref_id: String,
    pub user: String,
    pub activity: String,
    pub resource: String,
}

impl LogRecord {
    /// Checks that every text field is non-empty and free of whitespace, so
    /// the record survives a trip through its line form.
    pub fn validate(&self) -> Result<(), CodecError> {
        for field in &Field::ALL[1..] {
            let v = self.text(*field).expect("text field");
            if v.is_empty() {
                return Err(CodecError::InvalidRecord(format!("{field} is empty")));
            }
            if v.chars().any(char::is_whitespace) {
                return Err(CodecError::InvalidRecord(format!("{field} contains whitespace")));
            }
        }
        Ok(())
    }

    /// Referencing record: its Ref-ID points at a different record.
    pub fn is_follow_up(&self) -> bool {
        self.ref_id != self.id
    }

    fn text(&self, field: Field) -> Option<&str> {
        Some(match field {
            Field::Timestamp => return None,
            Field::Node => &self.node,
            Field::Id => &self.id,
            Field::RefId => &self.ref_id,
            Field::User => &self.user,
            Field::Activity => &self.activity,
            Field::Resource => &self.resource,
        })
    }

    /// Field value in its textual (key) form.
    pub fn value(&self, field: Field) -> String {
        match self.text(field) {
            Some(s) => s.to_owned(),
            None => self.timestamp.to_string(),
        }
    }

    pub fn matches(&self, field: Field, value: &str) -> bool {
        match self.text(field) {
            Some(s) => s == value,
            None => parse_timestamp(value).is_ok_and(|t| t == self.timestamp),
        }
    }

    /// Canonical line: the seven fields joined by single spaces.
    pub fn to_line(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {}",
            self.timestamp, self.node, self.id, self.ref_id, self.user, self.activity, self.resource
        )
    }
}

impl FromStr for LogRecord {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_log_line(s)
    }
}

/// Canonical unsigned decimal: digits only, no leading zeros except "0".
pub fn parse_timestamp(s: &str) -> Result<u64, CodecError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
        return Err(CodecError::Parse(format!("timestamp {s:?} is not a canonical decimal")));
    }
    s.parse()
        .map_err(|_| CodecError::Parse(format!("timestamp {s:?} out of range")))
}

pub fn parse_log_line(line: &str) -> Result<LogRecord, CodecError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [ts, node, id, ref_id, user, activity, resource] = fields[..] else {
        return Err(CodecError::Parse(format!(
            "expected 7 fields, found {}",
            fields.len()
        )));
    };
    Ok(LogRecord {
        timestamp: parse_timestamp(ts)?,
        node: node.to_owned(),
        id: id.to_owned(),
        ref_id: ref_id.to_owned(),
        user: user.to_owned(),
        activity: activity.to_owned(),
        resource: resource.to_owned(),
    })
}

/// Parses a whole log file. Blank lines are skipped; the error carries the
/// 1-based number of the first bad line.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, (usize, CodecError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| parse_log_line(l).map_err(|e| (n + 1, e)))
        .collect()
}

/// How records are laid out on chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EncodingMode {
    Baseline,
    Enhanced { params: TsIndexParams, normalize: bool },
}

impl EncodingMode {
    pub fn enhanced(params: TsIndexParams) -> Self {
        EncodingMode::Enhanced {
            params,
            normalize: false,
        }
    }

    pub fn normalized(params: TsIndexParams) -> Self {
        EncodingMode::Enhanced {
            params,
            normalize: true,
        }
    }

    pub fn params(&self) -> Option<&TsIndexParams> {
        match self {
            EncodingMode::Baseline => None,
            EncodingMode::Enhanced { params, .. } => Some(params),
        }
    }

    pub fn normalizes(&self) -> bool {
        matches!(self, EncodingMode::Enhanced { normalize: true, .. })
    }

    /// Every stream a chain encoded this way needs.
    pub fn streams(&self) -> Vec<StreamName> {
        let mut out: Vec<StreamName> = Field::ALL.iter().map(|f| f.stream()).collect();
        if let Some(p) = self.params() {
            out.extend((0..p.finest_level()).map(|l| level_stream(l, p)));
        }
        out
    }
}

/// Stream that serves bucket lookups at `level`. The finest level is the
/// `Timestamp` stream.
pub fn level_stream(level: usize, params: &TsIndexParams) -> StreamName {
    if level >= params.finest_level() {
        Field::Timestamp.stream()
    } else {
        StreamName::new(format!("L{level}")).expect("non-empty")
    }
}

/// Resolves the record a follow-up references, by (node, id).
pub trait RootLookup {
    fn root(&mut self, node: &str, id: &str) -> Option<LogRecord>;
}

impl<F> RootLookup for F
where
    F: FnMut(&str, &str) -> Option<LogRecord>,
{
    fn root(&mut self, node: &str, id: &str) -> Option<LogRecord> {
        self(node, id)
    }
}

/// Lookup that never resolves; for encodings without normalization.
pub struct NoRoots;

impl RootLookup for NoRoots {
    fn root(&mut self, _node: &str, _id: &str) -> Option<LogRecord> {
        None
    }
}

pub fn encode_baseline(record: &LogRecord, publisher: u32) -> Result<Transaction, CodecError> {
    record.validate()?;
    let line = record.to_line();
    let items = Field::ALL
        .iter()
        .map(|f| StreamItem::new(f.stream(), record.value(*f), line.as_bytes()))
        .collect();
    Transaction::new(publisher, items).map_err(|e| CodecError::MalformedTransaction(e.to_string()))
}

pub fn encode_enhanced(
    record: &LogRecord,
    params: &TsIndexParams,
    normalize: bool,
    roots: &mut dyn RootLookup,
    publisher: u32,
) -> Result<Transaction, CodecError> {
    record.validate()?;
    let (mut keep_user, mut keep_resource) = (true, true);
    if normalize && record.is_follow_up() {
        let root = roots.root(&record.node, &record.ref_id).ok_or_else(|| CodecError::MissingRoot {
            node: record.node.clone(),
            id: record.ref_id.clone(),
        })?;
        keep_user = root.user != record.user;
        keep_resource = root.resource != record.resource;
    }
    let mut items = Vec::with_capacity(7 + params.finest_level());
    for field in Field::ALL {
        if (field == Field::User && !keep_user) || (field == Field::Resource && !keep_resource) {
            continue;
        }
        items.push(StreamItem::new(field.stream(), record.value(field), Vec::new()));
    }
    for (level, start) in bucket_keys(record.timestamp, params).into_iter().take(params.finest_level()) {
        items.push(StreamItem::new(level_stream(level, params), start.to_string(), Vec::new()));
    }
    Transaction::new(publisher, items).map_err(|e| CodecError::MalformedTransaction(e.to_string()))
}

/// Encodes under `mode`; `roots` is only consulted for normalized follow-ups.
pub fn encode(
    record: &LogRecord,
    mode: &EncodingMode,
    roots: &mut dyn RootLookup,
    publisher: u32,
) -> Result<Transaction, CodecError> {
    match mode {
        EncodingMode::Baseline => encode_baseline(record, publisher),
        EncodingMode::Enhanced { params, normalize } => {
            encode_enhanced(record, params, *normalize, roots, publisher)
        }
    }
}

/// Recovers the record a transaction encodes.
pub fn rebuild_record(
    tx: &Transaction,
    mode: &EncodingMode,
    roots: &mut dyn RootLookup,
) -> Result<LogRecord, CodecError> {
    match mode {
        EncodingMode::Baseline => {
            let first = tx
                .items()
                .first()
                .ok_or_else(|| CodecError::MalformedTransaction("no items".into()))?;
            let line = std::str::from_utf8(&first.value)
                .map_err(|_| CodecError::MalformedTransaction("value is not UTF-8".into()))?;
            parse_log_line(line).map_err(|e| CodecError::MalformedTransaction(e.to_string()))
        }
        EncodingMode::Enhanced { .. } => rebuild_from_keys(tx, roots),
    }
}

fn key_of(tx: &Transaction, field: Field) -> Result<Option<String>, CodecError> {
    tx.item(field.name())
        .map(|i| {
            String::from_utf8(i.key.clone())
                .map_err(|_| CodecError::MalformedTransaction(format!("{field} key is not UTF-8")))
        })
        .transpose()
}

fn rebuild_from_keys(tx: &Transaction, roots: &mut dyn RootLookup) -> Result<LogRecord, CodecError> {
    let required = |f: Field| -> Result<String, CodecError> {
        key_of(tx, f)?.ok_or_else(|| CodecError::MalformedTransaction(format!("missing {f} item")))
    };
    let timestamp = parse_timestamp(&required(Field::Timestamp)?)
        .map_err(|e| CodecError::MalformedTransaction(e.to_string()))?;
    let node = required(Field::Node)?;
    let id = required(Field::Id)?;
    let ref_id = required(Field::RefId)?;
    let activity = required(Field::Activity)?;
    let user = key_of(tx, Field::User)?;
    let resource = key_of(tx, Field::Resource)?;
    let (user, resource) = match (user, resource) {
        (Some(u), Some(r)) => (u, r),
        (user, resource) => {
            if ref_id == id {
                return Err(CodecError::MalformedTransaction(
                    "record without a reference is missing User or Resource".into(),
                ));
            }
            let root = roots.root(&node, &ref_id).ok_or_else(|| CodecError::MissingRoot {
                node: node.clone(),
                id: ref_id.clone(),
            })?;
            (user.unwrap_or(root.user), resource.unwrap_or(root.resource))
        }
    };
    Ok(LogRecord {
        timestamp,
        node,
        id,
        ref_id,
        user,
        activity,
        resource,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_LOG: [&str; 4] = [
        "152202801 1 1 1 1 REQ_RESOURCE MOD_FlyBase",
        "152208352 1 2 1 1 VIEW_RESOURCE MOD_FlyBase",
        "152216966 1 3 3 6 FILE_ACCESS GTEx",
        "152237149 1 9 9 10 REQ_RESOURCE MOD_SGD",
    ];

    fn rec(line: &str) -> LogRecord {
        parse_log_line(line).unwrap()
    }

    #[test]
    fn parses_insertion_example() {
        let r = rec("152202801 1 1 1 1 REQ_RESOURCE MOD_FlyBase");
        assert_eq!(
            r,
            LogRecord {
                timestamp: 152202801,
                node: "1".into(),
                id: "1".into(),
                ref_id: "1".into(),
                user: "1".into(),
                activity: "REQ_RESOURCE".into(),
                resource: "MOD_FlyBase".into(),
            }
        );
        let r3 = rec("152216966 1 3 3 6 FILE_ACCESS GTEx");
        assert_eq!((r3.id.as_str(), r3.user.as_str(), r3.resource.as_str()), ("3", "6", "GTEx"));
        assert_eq!(rec("1522000002418 2 5 5 7 A B").timestamp, 1522000002418);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(parse_log_line("1 2 3 4 5 6"), Err(CodecError::Parse(_))));
        assert!(matches!(parse_log_line("1 2 3 4 5 6 7 8"), Err(CodecError::Parse(_))));
        assert!(matches!(parse_log_line("12x 1 1 1 1 A B"), Err(CodecError::Parse(_))));
        assert!(matches!(parse_log_line("012 1 1 1 1 A B"), Err(CodecError::Parse(_))));
        assert!(matches!(parse_log_line("-1 1 1 1 1 A B"), Err(CodecError::Parse(_))));
        assert!(matches!(
            parse_log_line("99999999999999999999 1 1 1 1 A B"),
            Err(CodecError::Parse(_))
        ));
    }

    #[test]
    fn parse_log_reports_line_numbers() {
        let text = format!("{}\n\n{}\nbad line\n", SAMPLE_LOG[0], SAMPLE_LOG[1]);
        assert_eq!(parse_log(&text).unwrap_err().0, 4);
        assert!(parse_log("").unwrap().is_empty());
        assert_eq!(parse_log(&SAMPLE_LOG.join("\n")).unwrap().len(), 4);
    }

    #[test]
    fn field_names_parse() {
        for f in Field::ALL {
            assert_eq!(f.name().parse::<Field>().unwrap(), f);
        }
        assert_eq!("ref_id".parse::<Field>().unwrap(), Field::RefId);
        assert!("color".parse::<Field>().is_err());
    }

    #[test]
    fn baseline_duplicates_the_line() {
        let r = rec(SAMPLE_LOG[0]);
        let tx = encode_baseline(&r, 0).unwrap();
        assert_eq!(tx.items().len(), 7);
        let streams: Vec<_> = tx.items().iter().map(|i| i.stream.as_str()).collect();
        assert_eq!(streams, ["Timestamp", "Node", "ID", "Ref-ID", "User", "Activity", "Resource"]);
        for item in tx.items() {
            assert_eq!(item.value, SAMPLE_LOG[0].as_bytes());
        }
        assert_eq!(tx.item("Activity").unwrap().key, b"REQ_RESOURCE");
        assert_eq!(rebuild_record(&tx, &EncodingMode::Baseline, &mut NoRoots).unwrap(), r);
    }

    #[test]
    fn enhanced_adds_level_keys_with_empty_values() {
        let r = rec("111 1 1 1 1 A B");
        let params = TsIndexParams::new(3, 10).unwrap();
        let tx = encode_enhanced(&r, &params, false, &mut NoRoots, 0).unwrap();
        assert_eq!(tx.items().len(), 7 + 2);
        assert!(tx.items().iter().all(|i| i.value.is_empty()));
        assert_eq!(tx.item("L0").unwrap().key, b"100");
        assert_eq!(tx.item("L1").unwrap().key, b"110");
        assert_eq!(tx.item("Timestamp").unwrap().key, b"111");
        assert!(tx.item("L2").is_none());
    }

    #[test]
    fn enhanced_round_trips_sample_log() {
        let mode = EncodingMode::enhanced(TsIndexParams::default());
        for line in SAMPLE_LOG {
            let r = rec(line);
            let tx = encode(&r, &mode, &mut NoRoots, 1).unwrap();
            assert_eq!(rebuild_record(&tx, &mode, &mut NoRoots).unwrap(), r);
        }
    }

    #[test]
    fn normalization_drops_and_recovers_user_resource() {
        let params = TsIndexParams::new(3, 10).unwrap();
        let root = rec(SAMPLE_LOG[0]);
        let follow = rec(SAMPLE_LOG[1]);
        let mut lookup = |node: &str, id: &str| (node == "1" && id == "1").then(|| root.clone());
        let tx = encode_enhanced(&follow, &params, true, &mut lookup, 0).unwrap();
        assert!(tx.item("User").is_none());
        assert!(tx.item("Resource").is_none());
        let mode = EncodingMode::normalized(params.clone());
        let back = rebuild_record(&tx, &mode, &mut lookup).unwrap();
        assert_eq!(back.user, "1");
        assert_eq!(back.resource, "MOD_FlyBase");
        assert_eq!(back, follow);

        assert_eq!(
            rebuild_record(&tx, &mode, &mut NoRoots),
            Err(CodecError::MissingRoot { node: "1".into(), id: "1".into() })
        );
        assert!(matches!(
            encode_enhanced(&follow, &params, true, &mut NoRoots, 0),
            Err(CodecError::MissingRoot { .. })
        ));
        // Roots are never normalized.
        let tx = encode_enhanced(&root, &params, true, &mut NoRoots, 0).unwrap();
        assert_eq!(tx.items().len(), 9);
    }

    #[test]
    fn normalization_keeps_fields_that_differ_from_root() {
        let params = TsIndexParams::new(2, 10).unwrap();
        let root = rec("5 1 1 1 u1 A R1");
        let follow = rec("6 1 2 1 u1 B R2");
        let mut lookup = |_: &str, _: &str| Some(root.clone());
        let tx = encode_enhanced(&follow, &params, true, &mut lookup, 0).unwrap();
        assert!(tx.item("User").is_none());
        assert_eq!(tx.item("Resource").unwrap().key, b"R2");
        let back = rebuild_record(&tx, &EncodingMode::normalized(params), &mut lookup).unwrap();
        assert_eq!(back, follow);
    }

    #[test]
    fn enhanced_is_smaller_for_typical_lines() {
        let params = TsIndexParams::default();
        for line in SAMPLE_LOG {
            let r = rec(line);
            let b = encode_baseline(&r, 0).unwrap().encoded_len();
            let e = encode_enhanced(&r, &params, false, &mut NoRoots, 0).unwrap().encoded_len();
            assert!(e < b, "{line}: enhanced {e} >= baseline {b}");
        }
    }

    #[test]
    fn invalid_records_are_rejected() {
        let mut r = rec(SAMPLE_LOG[0]);
        r.user = String::new();
        assert!(matches!(encode_baseline(&r, 0), Err(CodecError::InvalidRecord(_))));
        r.user = "a b".into();
        assert!(matches!(encode_baseline(&r, 0), Err(CodecError::InvalidRecord(_))));
    }

    #[test]
    fn streams_for_modes() {
        assert_eq!(EncodingMode::Baseline.streams().len(), 7);
        let names: Vec<_> = EncodingMode::enhanced(TsIndexParams::default())
            .streams()
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(&names[7..], ["L0", "L1"]);
    }
}
