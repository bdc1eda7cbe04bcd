//! On-disk artifacts: encoded datasets, pattern lines and reports.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use coordmine_core::model::{
    fraction_to_f64, AttributeId, ContrastPattern, Growth, ItemDictionary, ItemId, PatternStats, Schema,
    Transaction, TransactionDataset, Window,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{CliError, CliResult};

pub const DATASET_FORMAT: &str = "coordmine-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetHeader {
    format: String,
    version: u32,
    window: Window,
    schema: Schema,
    /// `[attribute, value]` per item id, in id order.
    dictionary: Vec<(String, String)>,
    transactions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TransactionRecord {
    id: String,
    items: Vec<u32>,
}

fn data_err(path: &Path, what: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {what}", path.display()))
}

/// Creates `path` and its parent directories.
pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(coordmine_core::Error::from)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(coordmine_core::Error::from)?))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| data_err(path, format!("cannot open: {e}")))
}

fn io(e: std::io::Error) -> CliError {
    CliError::Core(e.into())
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> CliResult<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| CliError::Internal(e.to_string()))?;
    out.write_all(b"\n").map_err(io)
}

/// Writes one window as a self-contained JSON-lines file: a header carrying
/// the schema and full dictionary, then one line per transaction.
pub fn write_dataset(path: &Path, dataset: &TransactionDataset, dictionary: &ItemDictionary) -> CliResult<()> {
    let schema = dictionary.schema();
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        window: dataset.window,
        schema: schema.clone(),
        dictionary: dictionary
            .entries()
            .iter()
            .map(|(a, v)| (schema.name(*a).to_string(), v.clone()))
            .collect(),
        transactions: dataset.len(),
    };
    let mut out = create(path)?;
    write_line(&mut out, &header)?;
    for t in &dataset.transactions {
        let record = TransactionRecord {
            id: t.id.clone(),
            items: t.items().iter().map(|i| i.0).collect(),
        };
        write_line(&mut out, &record)?;
    }
    out.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> CliResult<(TransactionDataset, ItemDictionary)> {
    let mut lines = open(path)?.lines();
    let first = lines
        .next()
        .ok_or_else(|| data_err(path, "missing header"))?
        .map_err(|e| data_err(path, e))?;
    let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| data_err(path, format!("bad header: {e}")))?;
    if header.format != DATASET_FORMAT {
        return Err(data_err(path, format!("not a {DATASET_FORMAT} file")));
    }
    if header.version != DATASET_VERSION {
        return Err(data_err(
            path,
            format!("unsupported format version {} (expected {DATASET_VERSION})", header.version),
        ));
    }
    let entries = header
        .dictionary
        .into_iter()
        .map(|(a, v)| Ok((header.schema.id_of(&a)?, v)))
        .collect::<coordmine_core::Result<Vec<(AttributeId, String)>>>()
        .map_err(|e| data_err(path, e))?;
    let dictionary = ItemDictionary::from_entries(header.schema, entries).map_err(|e| data_err(path, e))?;
    let mut transactions = Vec::with_capacity(header.transactions);
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| data_err(path, e))?;
        let record: TransactionRecord =
            serde_json::from_str(&line).map_err(|e| data_err(path, format!("line {}: {e}", n + 2)))?;
        if let Some(bad) = record.items.iter().find(|&&i| i as usize >= dictionary.len()) {
            return Err(data_err(path, format!("line {}: unknown item id {bad}", n + 2)));
        }
        transactions.push(Transaction::new(record.id, record.items.into_iter().map(ItemId).collect()));
    }
    if transactions.len() != header.transactions {
        return Err(data_err(
            path,
            format!("header announces {} transactions, found {}", header.transactions, transactions.len()),
        ));
    }
    Ok((TransactionDataset::new(header.window, transactions), dictionary))
}

pub struct LoadedDatasets {
    pub background: TransactionDataset,
    pub target: TransactionDataset,
    pub dictionary: ItemDictionary,
}

/// Loads both windows and checks they share one dictionary.
pub fn load_datasets(background: &Path, target: &Path) -> CliResult<LoadedDatasets> {
    let (b, db) = read_dataset(background)?;
    let (t, dt) = read_dataset(target)?;
    if b.window != Window::Background || t.window != Window::Target {
        return Err(CliError::Data("dataset files carry the wrong window labels".into()));
    }
    if db.entries() != dt.entries() || db.schema() != dt.schema() {
        return Err(CliError::Data("background and target datasets use different dictionaries".into()));
    }
    Ok(LoadedDatasets {
        background: b,
        target: t,
        dictionary: db,
    })
}

/// A decoded pattern with its counts and derived measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub items: Vec<(String, String)>,
    pub sc_b: u64,
    pub sc_t: u64,
    pub size_b: u64,
    pub size_t: u64,
    pub supp_b: String,
    pub supp_t: String,
    pub growth: String,
    /// `null` when the growth is infinite.
    pub growth_value: Option<f64>,
    pub delta: String,
}

impl PatternRecord {
    pub fn new(pattern: &ContrastPattern, dictionary: &ItemDictionary) -> Self {
        let s = &pattern.stats;
        let growth = s.growth();
        PatternRecord {
            items: dictionary.decode_all(&pattern.items),
            sc_b: s.sc_b,
            sc_t: s.sc_t,
            size_b: s.size_b,
            size_t: s.size_t,
            supp_b: s.supp_b().to_string(),
            supp_t: s.supp_t().to_string(),
            growth: growth.to_string(),
            growth_value: match growth {
                Growth::Finite(g) => Some(fraction_to_f64(g)),
                Growth::Infinite => None,
            },
            delta: s.delta().to_string(),
        }
    }

    /// Re-encodes the items; counts are taken as stored.
    pub fn to_pattern(&self, dictionary: &ItemDictionary) -> CliResult<ContrastPattern> {
        let items = self
            .items
            .iter()
            .map(|(a, v)| {
                dictionary
                    .lookup(a, v)?
                    .ok_or_else(|| CliError::Data(format!("pattern item {a}={v} is not in the dictionary")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        if self.sc_b > self.size_b || self.sc_t > self.size_t {
            return Err(CliError::Data("pattern counts exceed the window sizes".into()));
        }
        Ok(ContrastPattern::new(
            items,
            PatternStats::new(self.sc_b, self.sc_t, self.size_b, self.size_t),
        ))
    }
}

/// `attr: value, attr: value`.
pub fn describe(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, v)| format!("{a}: {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Descending growth, then ascending item ids.
pub fn canonical_order(patterns: &mut [ContrastPattern]) {
    patterns.sort_by(|a, b| {
        b.stats
            .growth()
            .cmp(&a.stats.growth())
            .then_with(|| a.items.cmp(&b.items))
    });
}

pub fn write_patterns(path: &Path, patterns: &[ContrastPattern], dictionary: &ItemDictionary) -> CliResult<()> {
    let mut out = create(path)?;
    for p in patterns {
        write_line(&mut out, &PatternRecord::new(p, dictionary))?;
    }
    out.flush().map_err(io)
}

pub fn read_patterns(path: &Path, dictionary: &ItemDictionary) -> CliResult<Vec<ContrastPattern>> {
    read_lines::<PatternRecord>(path)?
        .iter()
        .map(|r| r.to_pattern(dictionary))
        .collect()
}

pub fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| data_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| data_err(path, format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

pub fn write_lines<T: Serialize>(path: &Path, values: &[T]) -> CliResult<()> {
    let mut out = create(path)?;
    for v in values {
        write_line(&mut out, v)?;
    }
    out.flush().map_err(io)
}

/// Writes a JSON report; `generated_at` is added only when `timestamp` is set.
pub fn write_report<T: Serialize>(path: &Path, report: &T, timestamp: bool) -> CliResult<()> {
    let mut value = serde_json::to_value(report).map_err(|e| CliError::Internal(e.to_string()))?;
    if timestamp {
        if let Value::Object(map) = &mut value {
            let mut with = Map::new();
            with.insert(
                "generated_at".into(),
                Value::String(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
            );
            with.append(map);
            *map = with;
        }
    }
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &value).map_err(|e| CliError::Internal(e.to_string()))?;
    out.write_all(b"\n").map_err(io)?;
    out.flush().map_err(io)
}

/// Writes rows as CSV with the given header.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use coordmine_core::model::example::datasets;

    #[test]
    fn dataset_round_trip() {
        let (b, t, d) = datasets();
        let dir = tempfile::tempdir().unwrap();
        let (pb, pt) = (dir.path().join("b.jsonl"), dir.path().join("t.jsonl"));
        write_dataset(&pb, &b, &d).unwrap();
        write_dataset(&pt, &t, &d).unwrap();
        let loaded = load_datasets(&pb, &pt).unwrap();
        assert_eq!(loaded.background, b);
        assert_eq!(loaded.target, t);
        assert_eq!(loaded.dictionary.entries(), d.entries());
        assert_eq!(loaded.dictionary.schema(), d.schema());
        assert!(loaded.dictionary.is_frozen());
        assert!(load_datasets(&pt, &pb).is_err());
    }

    #[test]
    fn version_is_checked() {
        let (b, _, d) = datasets();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        write_dataset(&p, &b, &d).unwrap();
        let text = fs::read_to_string(&p).unwrap().replacen("\"version\":1", "\"version\":9", 1);
        fs::write(&p, text).unwrap();
        let err = read_dataset(&p).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("version 9"));
    }

    #[test]
    fn pattern_record_round_trip() {
        let (b, t, d) = datasets();
        let items = coordmine_core::model::example::items(&d, &[("u", "u1"), ("r", "yes"), ("ota", "u2")]);
        let p = ContrastPattern::new(items.clone(), coordmine_core::model::pattern_stats(&items, &b, &t));
        let r = PatternRecord::new(&p, &d);
        assert_eq!((r.sc_b, r.sc_t), (1, 3));
        assert_eq!((r.supp_b.as_str(), r.supp_t.as_str()), ("1/5", "3/5"));
        assert_eq!((r.growth.as_str(), r.growth_value, r.delta.as_str()), ("3", Some(3.0), "2/5"));
        assert_eq!(r.to_pattern(&d).unwrap(), p);
        assert_eq!(describe(&r.items[..1]), "u: u1");
    }
}
