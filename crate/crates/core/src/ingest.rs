//! Raw post records to encoded background/target transaction datasets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeSpec, ItemDictionary, Schema, TransactionDataset, Window};

pub mod attr {
    pub const USERID: &str = "userid";
    pub const LOCATION: &str = "user_reported_location";
    pub const LANGUAGE: &str = "tweet_language";
    pub const DAY_OF_WEEK: &str = "day_of_week";
    pub const TIME_OF_DAY: &str = "time_of_day";
    pub const CLIENT: &str = "tweet_client_name";
    pub const IS_RETWEET: &str = "is_retweet";
    pub const RETWEET_USERID: &str = "retweet_userid";
    pub const HASHTAG: &str = "hashtag";
    pub const USER_MENTIONS: &str = "user_mentions";

    /// Every derivable attribute, in emission order.
    pub const ALL: [&str; 10] = [
        USERID,
        LOCATION,
        LANGUAGE,
        DAY_OF_WEEK,
        TIME_OF_DAY,
        CLIENT,
        IS_RETWEET,
        RETWEET_USERID,
        HASHTAG,
        USER_MENTIONS,
    ];
}

/// The post attribute space with `userid` as the user attribute.
pub fn post_schema() -> Schema {
    Schema::new(
        attr::ALL
            .iter()
            .map(|&name| AttributeSpec {
                name: name.to_string(),
                multi_valued: name == attr::HASHTAG || name == attr::USER_MENTIONS,
            })
            .collect(),
        attr::USERID,
    )
    .expect("static schema is valid")
}

pub const WEEKDAYS: [&str; 7] = [
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawPost {
    pub post_id: String,
    pub user_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    #[serde(default)]
    pub reported_location: Option<String>,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub client_name: Option<String>,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default)]
    pub retweeted_user_id: Option<String>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub user_mentions: Vec<String>,
}

impl RawPost {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.post_id.is_empty() {
            return Err("empty post id".into());
        }
        if self.user_id.is_empty() {
            return Err("empty user id".into());
        }
        if self.timestamp <= 0 {
            return Err(format!("non-positive timestamp {}", self.timestamp));
        }
        if self.is_retweet != self.retweeted_user_id.is_some() {
            return Err("retweet flag and retweeted user disagree".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Csv,
    #[serde(alias = "jsonl", alias = "json-lines")]
    Jsonl,
}

/// Source column (CSV) or key (JSON-lines) for each post field. `None`
/// means the field is not present in the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub post_id: Option<String>,
    pub user_id: Option<String>,
    pub timestamp: Option<String>,
    pub reported_location: Option<String>,
    pub language: Option<String>,
    pub client_name: Option<String>,
    pub is_retweet: Option<String>,
    pub retweeted_user_id: Option<String>,
    pub hashtags: Option<String>,
    pub user_mentions: Option<String>,
}

impl Default for FieldMapping {
    fn default() -> Self {
        let s = |v: &str| Some(v.to_string());
        Self {
            post_id: s("post_id"),
            user_id: s("user_id"),
            timestamp: s("timestamp"),
            reported_location: s("reported_location"),
            language: s("language"),
            client_name: s("client_name"),
            is_retweet: s("is_retweet"),
            retweeted_user_id: s("retweeted_user_id"),
            hashtags: s("hashtags"),
            user_mentions: s("user_mentions"),
        }
    }
}

impl FieldMapping {
    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("post_id", &self.post_id),
            ("user_id", &self.user_id),
            ("timestamp", &self.timestamp),
        ] {
            if v.as_deref().is_none_or(str::is_empty) {
                return Err(Error::BadMapping(name.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub total: usize,
    pub parsed: usize,
    pub skipped: usize,
    /// The first few skip reasons, prefixed with their record number.
    pub errors: Vec<String>,
}

const MAX_REPORTED_ERRORS: usize = 20;

impl ParseReport {
    fn skip(&mut self, record: usize, reason: impl fmt::Display) {
        self.skipped += 1;
        if self.errors.len() < MAX_REPORTED_ERRORS {
            self.errors.push(format!("record {record}: {reason}"));
        }
    }
}

/// Accepts integer epoch seconds, RFC 3339, `YYYY-MM-DD HH:MM:SS` (UTC) or
/// `YYYY-MM-DD` (UTC midnight).
pub fn parse_timestamp(text: &str) -> Option<i64> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp())
}

fn parse_bool(text: &str) -> Option<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" | "t" => Some(true),
        "false" | "0" | "no" | "n" | "f" | "" => Some(false),
        _ => None,
    }
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

fn split_list(text: &str, sep: &str) -> Vec<String> {
    text.split(sep)
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .collect()
}

/// Field values of one record before validation.
#[derive(Default)]
struct RecordFields {
    post_id: Option<String>,
    user_id: Option<String>,
    timestamp: Option<String>,
    reported_location: Option<String>,
    language: Option<String>,
    client_name: Option<String>,
    is_retweet: Option<String>,
    retweeted_user_id: Option<String>,
    hashtags: Vec<String>,
    user_mentions: Vec<String>,
}

impl RecordFields {
    fn into_post(self) -> std::result::Result<RawPost, String> {
        let post_id = non_empty(self.post_id).ok_or("missing post id")?;
        let user_id = non_empty(self.user_id).ok_or("missing user id")?;
        let ts_text = non_empty(self.timestamp).ok_or("missing timestamp")?;
        let timestamp = parse_timestamp(&ts_text).ok_or_else(|| format!("bad timestamp `{ts_text}`"))?;
        let retweeted_user_id = non_empty(self.retweeted_user_id);
        let is_retweet = match non_empty(self.is_retweet) {
            Some(v) => parse_bool(&v).ok_or_else(|| format!("bad retweet flag `{v}`"))?,
            None => retweeted_user_id.is_some(),
        };
        let post = RawPost {
            post_id,
            user_id,
            timestamp,
            reported_location: non_empty(self.reported_location),
            language: non_empty(self.language),
            client_name: non_empty(self.client_name),
            is_retweet,
            retweeted_user_id,
            hashtags: self.hashtags,
            user_mentions: self.user_mentions,
        };
        post.validate()?;
        Ok(post)
    }
}

/// Reads posts from CSV (with header) or JSON-lines. Malformed records are
/// skipped and counted; valid posts keep their input order.
pub fn parse_posts<R: Read>(
    source: R,
    format: InputFormat,
    mapping: &FieldMapping,
    list_separator: &str,
) -> Result<(Vec<RawPost>, ParseReport)> {
    mapping.check()?;
    match format {
        InputFormat::Csv => parse_csv(source, mapping, list_separator),
        InputFormat::Jsonl => parse_jsonl(source, mapping, list_separator),
    }
}

fn parse_csv<R: Read>(
    source: R,
    mapping: &FieldMapping,
    sep: &str,
) -> Result<(Vec<RawPost>, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(source);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) if e.is_io_error() => return Err(csv_io(e)),
        Err(_) => csv::StringRecord::new(),
    };
    let mut report = ParseReport::default();
    if headers.is_empty() {
        return Ok((Vec::new(), report));
    }
    let col = |m: &Option<String>| m.as_ref().and_then(|n| headers.iter().position(|h| h.trim() == n));
    let cols = [
        col(&mapping.post_id),
        col(&mapping.user_id),
        col(&mapping.timestamp),
    ];
    for (name, c) in ["post_id", "user_id", "timestamp"].iter().zip(cols) {
        if c.is_none() {
            return Err(Error::BadMapping(name.to_string()));
        }
    }
    let location = col(&mapping.reported_location);
    let language = col(&mapping.language);
    let client = col(&mapping.client_name);
    let retweet = col(&mapping.is_retweet);
    let retweeted = col(&mapping.retweeted_user_id);
    let hashtags = col(&mapping.hashtags);
    let mentions = col(&mapping.user_mentions);

    let mut posts = Vec::new();
    for (n, record) in reader.records().enumerate() {
        report.total += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(csv_io(e)),
            Err(e) => {
                report.skip(n + 1, e);
                continue;
            }
        };
        let get = |c: Option<usize>| c.and_then(|i| record.get(i)).map(str::to_string);
        let fields = RecordFields {
            post_id: get(cols[0]),
            user_id: get(cols[1]),
            timestamp: get(cols[2]),
            reported_location: get(location),
            language: get(language),
            client_name: get(client),
            is_retweet: get(retweet),
            retweeted_user_id: get(retweeted),
            hashtags: get(hashtags).map(|v| split_list(&v, sep)).unwrap_or_default(),
            user_mentions: get(mentions).map(|v| split_list(&v, sep)).unwrap_or_default(),
        };
        match fields.into_post() {
            Ok(p) => posts.push(p),
            Err(e) => report.skip(n + 1, e),
        }
    }
    report.parsed = posts.len();
    Ok((posts, report))
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn json_text(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::Null => None,
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        other => Some(other.to_string()),
    }
}

fn json_list(v: Option<&serde_json::Value>, sep: &str) -> Vec<String> {
    match v {
        Some(serde_json::Value::Array(items)) => items
            .iter()
            .filter_map(json_text)
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
        Some(other) => json_text(other).map(|s| split_list(&s, sep)).unwrap_or_default(),
        None => Vec::new(),
    }
}

fn parse_jsonl<R: Read>(
    source: R,
    mapping: &FieldMapping,
    sep: &str,
) -> Result<(Vec<RawPost>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut posts = Vec::new();
    for (n, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.total += 1;
        let obj: serde_json::Map<String, serde_json::Value> = match serde_json::from_str(&line) {
            Ok(o) => o,
            Err(e) => {
                report.skip(n + 1, e);
                continue;
            }
        };
        let get = |m: &Option<String>| m.as_ref().and_then(|k| obj.get(k));
        let text = |m: &Option<String>| get(m).and_then(json_text);
        let fields = RecordFields {
            post_id: text(&mapping.post_id),
            user_id: text(&mapping.user_id),
            timestamp: text(&mapping.timestamp),
            reported_location: text(&mapping.reported_location),
            language: text(&mapping.language),
            client_name: text(&mapping.client_name),
            is_retweet: text(&mapping.is_retweet),
            retweeted_user_id: text(&mapping.retweeted_user_id),
            hashtags: json_list(get(&mapping.hashtags), sep),
            user_mentions: json_list(get(&mapping.user_mentions), sep),
        };
        match fields.into_post() {
            Ok(p) => posts.push(p),
            Err(e) => report.skip(n + 1, e),
        }
    }
    report.parsed = posts.len();
    Ok((posts, report))
}

/// Writes posts as CSV using the default field mapping.
pub fn write_posts_csv<W: Write>(out: W, posts: &[RawPost], list_separator: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| csv_io(e);
    w.write_record([
        "post_id",
        "user_id",
        "timestamp",
        "reported_location",
        "language",
        "client_name",
        "is_retweet",
        "retweeted_user_id",
        "hashtags",
        "user_mentions",
    ])
    .map_err(io)?;
    for p in posts {
        let opt = |o: &Option<String>| o.clone().unwrap_or_default();
        w.write_record([
            p.post_id.clone(),
            p.user_id.clone(),
            p.timestamp.to_string(),
            opt(&p.reported_location),
            opt(&p.language),
            opt(&p.client_name),
            p.is_retweet.to_string(),
            opt(&p.retweeted_user_id),
            p.hashtags.join(list_separator),
            p.user_mentions.join(list_separator),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes posts as JSON-lines using the default field mapping.
pub fn write_posts_jsonl<W: Write>(mut out: W, posts: &[RawPost]) -> Result<()> {
    for p in posts {
        serde_json::to_writer(&mut out, p).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Background window `[t0, t1]` and target window `[t2, t3]`, both closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub t0: i64,
    pub t1: i64,
    pub t2: i64,
    pub t3: i64,
}

impl PartitionSpec {
    /// Checks ordering; returns warnings for a short gap between the windows
    /// (shorter than either window).
    pub fn validate(&self) -> Result<Vec<String>> {
        let PartitionSpec { t0, t1, t2, t3 } = *self;
        if !(t0 < t1 && t1 < t2 && t2 < t3) {
            return Err(Error::BadConfig(format!(
                "partition needs t0 < t1 < t2 < t3, got {t0}, {t1}, {t2}, {t3}"
            )));
        }
        let mut warnings = Vec::new();
        if t2 - t1 < (t1 - t0).min(t3 - t2) {
            let w = format!("gap between windows ({}s) is shorter than the windows themselves", t2 - t1);
            warn!("{w}");
            warnings.push(w);
        }
        Ok(warnings)
    }

    pub fn window_of(&self, timestamp: i64) -> Option<Window> {
        if (self.t0..=self.t1).contains(&timestamp) {
            Some(Window::Background)
        } else if (self.t2..=self.t3).contains(&timestamp) {
            Some(Window::Target)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partitioned {
    pub background: Vec<RawPost>,
    pub target: Vec<RawPost>,
    /// Posts outside both windows.
    pub dropped: usize,
    pub warnings: Vec<String>,
}

pub fn partition(posts: Vec<RawPost>, spec: &PartitionSpec) -> Result<Partitioned> {
    let warnings = spec.validate()?;
    let (mut background, mut target, mut dropped) = (Vec::new(), Vec::new(), 0);
    for p in posts {
        match spec.window_of(p.timestamp) {
            Some(Window::Background) => background.push(p),
            Some(Window::Target) => target.push(p),
            None => dropped += 1,
        }
    }
    if background.is_empty() {
        return Err(Error::EmptyWindow("background"));
    }
    if target.is_empty() {
        return Err(Error::EmptyWindow("target"));
    }
    Ok(Partitioned {
        background,
        target,
        dropped,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommonUsers {
    pub users: BTreeSet<String>,
    pub background: Vec<RawPost>,
    pub target: Vec<RawPost>,
}

/// Keeps only users with at least one post in each window.
pub fn common_users(background: Vec<RawPost>, target: Vec<RawPost>) -> Result<CommonUsers> {
    let in_b: BTreeSet<&str> = background.iter().map(|p| p.user_id.as_str()).collect();
    let users: BTreeSet<String> = target
        .iter()
        .map(|p| p.user_id.as_str())
        .filter(|u| in_b.contains(u))
        .map(str::to_string)
        .collect();
    if users.is_empty() {
        return Err(Error::NoCommonUsers);
    }
    let keep = |v: Vec<RawPost>| -> Vec<RawPost> {
        v.into_iter().filter(|p| users.contains(&p.user_id)).collect()
    };
    let (background, target) = (keep(background), keep(target));
    Ok(CommonUsers {
        users,
        background,
        target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserClass {
    Coordinated,
    Normal,
}

impl std::str::FromStr for UserClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coordinated" | "1" => Ok(UserClass::Coordinated),
            "normal" | "0" => Ok(UserClass::Normal),
            other => Err(Error::BadConfig(format!("unknown user class `{other}`"))),
        }
    }
}

impl fmt::Display for UserClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UserClass::Coordinated => "coordinated",
            UserClass::Normal => "normal",
        })
    }
}

/// Ground-truth class per user, for evaluation only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledUserSet {
    labels: BTreeMap<String, UserClass>,
}

impl LabeledUserSet {
    pub fn new(labels: BTreeMap<String, UserClass>) -> Self {
        Self { labels }
    }

    pub fn insert(&mut self, user: impl Into<String>, class: UserClass) {
        self.labels.insert(user.into(), class);
    }

    pub fn class_of(&self, user: &str) -> Option<UserClass> {
        self.labels.get(user).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, UserClass)> {
        self.labels.iter().map(|(u, c)| (u.as_str(), *c))
    }

    pub fn users_of(&self, class: UserClass) -> BTreeSet<String> {
        self.iter()
            .filter(|(_, c)| *c == class)
            .map(|(u, _)| u.to_string())
            .collect()
    }

    pub fn coordinated(&self) -> BTreeSet<String> {
        self.users_of(UserClass::Coordinated)
    }

    /// Labels restricted to `users`.
    pub fn restrict<'a>(&self, users: impl IntoIterator<Item = &'a String>) -> Self {
        Self {
            labels: users
                .into_iter()
                .filter_map(|u| self.labels.get(u).map(|c| (u.clone(), *c)))
                .collect(),
        }
    }

    /// Reads `user_id,class` CSV with a header row.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(source);
        let mut labels = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                if e.is_io_error() {
                    csv_io(e)
                } else {
                    Error::BadConfig(format!("labels: {e}"))
                }
            })?;
            let user = record.get(0).unwrap_or("").trim();
            let class: UserClass = record.get(1).unwrap_or("").parse()?;
            if user.is_empty() {
                return Err(Error::BadConfig("labels: empty user id".into()));
            }
            labels.insert(user.to_string(), class);
        }
        Ok(Self { labels })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user_id", "class"]).map_err(csv_io)?;
        for (u, c) in self.iter() {
            w.write_record([u, &c.to_string()]).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopUsers {
    pub users: BTreeSet<String>,
    pub warnings: Vec<String>,
}

/// The `n_c` coordinated and `n_n` normal users with the most posts across
/// both windows; ties go to the smaller user id.
pub fn top_users(
    background: &[RawPost],
    target: &[RawPost],
    labels: &LabeledUserSet,
    n_c: usize,
    n_n: usize,
) -> Result<TopUsers> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for p in background.iter().chain(target) {
        *freq.entry(p.user_id.as_str()).or_default() += 1;
    }
    let mut by_class: BTreeMap<UserClass, Vec<(usize, &str)>> = BTreeMap::new();
    for (&user, &n) in &freq {
        let class = labels
            .class_of(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
        by_class.entry(class).or_default().push((n, user));
    }
    let mut users = BTreeSet::new();
    let mut warnings = Vec::new();
    for (class, want) in [(UserClass::Coordinated, n_c), (UserClass::Normal, n_n)] {
        let mut ranked = by_class.remove(&class).unwrap_or_default();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        if ranked.len() < want {
            let w = format!("requested {want} {class} users but only {} are available", ranked.len());
            warn!("{w}");
            warnings.push(w);
        }
        users.extend(ranked.into_iter().take(want).map(|(_, u)| u.to_string()));
    }
    Ok(TopUsers { users, warnings })
}

/// Hook applied to each hashtag before it becomes an item. Returning `None`
/// drops the hashtag.
pub trait HashtagNormalizer: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn normalize(&self, tag: &str) -> Option<String>;
}

/// Strips a leading `#` and lowercases; no segmentation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lowercase;

impl HashtagNormalizer for Lowercase {
    fn name(&self) -> &str {
        "lowercase"
    }

    fn normalize(&self, tag: &str) -> Option<String> {
        let t = tag.trim().trim_start_matches('#').to_lowercase();
        (!t.is_empty()).then_some(t)
    }
}

/// Keeps hashtags verbatim apart from surrounding whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct Verbatim;

impl HashtagNormalizer for Verbatim {
    fn name(&self) -> &str {
        "identity"
    }

    fn normalize(&self, tag: &str) -> Option<String> {
        let t = tag.trim();
        (!t.is_empty()).then(|| t.to_string())
    }
}

pub fn normalizer_by_name(name: &str) -> Result<Arc<dyn HashtagNormalizer>> {
    match name {
        "lowercase" => Ok(Arc::new(Lowercase)),
        "identity" => Ok(Arc::new(Verbatim)),
        other => Err(Error::BadConfig(format!("unknown hashtag normalizer `{other}`"))),
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub slots_per_day: u32,
    /// Fixed offset from UTC used for day-of-week and time-of-day.
    pub timezone_offset_minutes: i32,
    pub hashtag_normalizer: Arc<dyn HashtagNormalizer>,
    pub enabled_attributes: BTreeSet<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            slots_per_day: 12,
            timezone_offset_minutes: 0,
            hashtag_normalizer: Arc::new(Lowercase),
            enabled_attributes: attr::ALL.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl PreprocessConfig {
    pub fn with_attributes<'a>(attributes: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            enabled_attributes: attributes.into_iter().map(str::to_string).collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots_per_day == 0 || 1440 % self.slots_per_day != 0 {
            return Err(Error::BadConfig(format!(
                "slots_per_day must divide 1440, got {}",
                self.slots_per_day
            )));
        }
        if self.timezone_offset_minutes.abs() >= 1440 {
            return Err(Error::BadConfig("timezone offset must be under 24h".into()));
        }
        if !self.enabled_attributes.contains(attr::USERID) {
            return Err(Error::BadConfig("enabled attributes must include userid".into()));
        }
        for a in &self.enabled_attributes {
            if !attr::ALL.contains(&a.as_str()) {
                return Err(Error::UnknownAttribute(a.clone()));
            }
        }
        Ok(())
    }

    fn enabled(&self, name: &str) -> bool {
        self.enabled_attributes.contains(name)
    }

    pub fn slot_minutes(&self) -> u32 {
        1440 / self.slots_per_day
    }
}

/// Local seconds for day/slot computation.
fn local_seconds(timestamp: i64, offset_minutes: i32) -> i64 {
    timestamp + offset_minutes as i64 * 60
}

/// Monday-based weekday index (0 = Monday).
pub fn weekday_index(timestamp: i64, offset_minutes: i32) -> usize {
    let days = local_seconds(timestamp, offset_minutes).div_euclid(86_400);
    // 1970-01-01 was a Thursday
    (days + 3).rem_euclid(7) as usize
}

/// Index of the equal-width time-of-day slot containing `timestamp`.
pub fn time_slot(timestamp: i64, offset_minutes: i32, slots_per_day: u32) -> u32 {
    let minutes = local_seconds(timestamp, offset_minutes).rem_euclid(86_400) / 60;
    (minutes / (1440 / slots_per_day as i64)) as u32
}

/// `HH:MM-HH:MM` label of a slot, for display.
pub fn slot_label(slot: u32, slots_per_day: u32) -> String {
    let w = 1440 / slots_per_day;
    let (a, b) = (slot * w, (slot + 1) * w);
    format!("{:02}:{:02}-{:02}:{:02}", a / 60, a % 60, b / 60, b % 60)
}

/// The `(attribute, value)` pairs of one post, in schema order. Attributes
/// not enabled in `config` are left out; missing optional fields produce no
/// item.
pub fn derive_attributes(post: &RawPost, config: &PreprocessConfig) -> Vec<(&'static str, String)> {
    let mut out = Vec::with_capacity(8 + post.hashtags.len() + post.user_mentions.len());
    let mut push = |name: &'static str, value: String| {
        if config.enabled(name) {
            out.push((name, value));
        }
    };
    push(attr::USERID, post.user_id.clone());
    if let Some(l) = &post.reported_location {
        push(attr::LOCATION, l.clone());
    }
    if let Some(l) = &post.language {
        push(attr::LANGUAGE, l.clone());
    }
    let offset = config.timezone_offset_minutes;
    push(attr::DAY_OF_WEEK, WEEKDAYS[weekday_index(post.timestamp, offset)].to_string());
    push(
        attr::TIME_OF_DAY,
        time_slot(post.timestamp, offset, config.slots_per_day).to_string(),
    );
    if let Some(c) = &post.client_name {
        push(attr::CLIENT, c.clone());
    }
    push(attr::IS_RETWEET, post.is_retweet.to_string());
    if post.is_retweet {
        if let Some(u) = &post.retweeted_user_id {
            push(attr::RETWEET_USERID, u.clone());
        }
    }
    let mut tags: Vec<String> = post
        .hashtags
        .iter()
        .filter_map(|h| config.hashtag_normalizer.normalize(h))
        .collect();
    tags.sort();
    tags.dedup();
    for t in tags {
        push(attr::HASHTAG, t);
    }
    let mut mentions: Vec<&String> = post.user_mentions.iter().collect();
    mentions.sort();
    mentions.dedup();
    for m in mentions {
        push(attr::USER_MENTIONS, m.clone());
    }
    out
}

type DerivedRow<'a> = (&'a str, Vec<(&'static str, String)>);

fn derive_sorted<'a>(posts: &'a [RawPost], config: &PreprocessConfig) -> Vec<DerivedRow<'a>> {
    let mut rows: Vec<DerivedRow<'a>> = posts
        .par_iter()
        .map(|p| (p.post_id.as_str(), derive_attributes(p, config)))
        .collect();
    rows.par_sort();
    rows
}

#[derive(Debug, Clone)]
pub struct Datasets {
    pub background: TransactionDataset,
    pub target: TransactionDataset,
    pub dictionary: ItemDictionary,
}

/// Encodes both windows with one dictionary: posts are ordered by id (then
/// content) within each window and the background window is encoded first,
/// so the result is independent of input order. The dictionary is frozen on
/// return.
pub fn build_datasets(
    background: &[RawPost],
    target: &[RawPost],
    config: &PreprocessConfig,
) -> Result<Datasets> {
    config.validate()?;
    if background.is_empty() {
        return Err(Error::EmptyWindow("background"));
    }
    if target.is_empty() {
        return Err(Error::EmptyWindow("target"));
    }
    let (rows_b, rows_t) = (derive_sorted(background, config), derive_sorted(target, config));

    let mut dictionary = ItemDictionary::new(post_schema());
    let mut encode = |window, rows: Vec<DerivedRow<'_>>| -> Result<TransactionDataset> {
        let mut txns = Vec::with_capacity(rows.len());
        for (id, raw) in rows {
            let t = dictionary.encode_transaction(id, &raw, true)?.transaction;
            if !t.is_empty() {
                txns.push(t);
            }
        }
        Ok(TransactionDataset::new(window, txns))
    };
    let background = encode(Window::Background, rows_b)?;
    let target = encode(Window::Target, rows_t)?;
    dictionary.freeze();
    Ok(Datasets {
        background,
        target,
        dictionary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn post(id: &str, user: &str, ts: i64) -> RawPost {
        RawPost {
            post_id: id.into(),
            user_id: user.into(),
            timestamp: ts,
            reported_location: None,
            language: None,
            client_name: None,
            is_retweet: false,
            retweeted_user_id: None,
            hashtags: vec![],
            user_mentions: vec![],
        }
    }

    fn mapping() -> FieldMapping {
        FieldMapping::default()
    }

    #[test]
    fn csv_parsing_skips_malformed_rows() {
        let csv = "post_id,user_id,timestamp,hashtags,is_retweet,retweeted_user_id\n\
                   1,u1,100,a;b;c,false,\n\
                   2,u2,,x,false,\n\
                   3,u3,abc,,false,\n\
                   4,u4,200,,true,\n\
                   5,u5,300,,,u9\n";
        let (posts, report) = parse_posts(csv.as_bytes(), InputFormat::Csv, &mapping(), ";").unwrap();
        assert_eq!(report.total, 5);
        assert_eq!(report.skipped, 3);
        assert_eq!(posts.len(), 2);
        assert_eq!(posts[0].hashtags, vec!["a", "b", "c"]);
        assert!(posts[1].is_retweet);
        assert_eq!(posts[1].retweeted_user_id.as_deref(), Some("u9"));
    }

    #[test]
    fn empty_input_yields_empty_report() {
        let (posts, report) = parse_posts("".as_bytes(), InputFormat::Csv, &mapping(), ";").unwrap();
        assert!(posts.is_empty());
        assert_eq!(report, ParseReport::default());
        let (posts, report) = parse_posts("".as_bytes(), InputFormat::Jsonl, &mapping(), ";").unwrap();
        assert!(posts.is_empty());
        assert_eq!(report.total, 0);
    }

    #[test]
    fn mapping_must_cover_mandatory_fields() {
        let m = FieldMapping {
            timestamp: None,
            ..mapping()
        };
        assert!(matches!(
            parse_posts("".as_bytes(), InputFormat::Csv, &m, ";"),
            Err(Error::BadMapping(f)) if f == "timestamp"
        ));
        let csv = "post_id,user_id\n1,u1\n";
        assert!(matches!(
            parse_posts(csv.as_bytes(), InputFormat::Csv, &mapping(), ";"),
            Err(Error::BadMapping(_))
        ));
    }

    #[test]
    fn jsonl_accepts_arrays_and_numbers() {
        let src = r##"{"post_id": 7, "user_id": "u1", "timestamp": "2016-11-07T08:30:00Z", "hashtags": ["#MAGA", "x"], "user_mentions": "1;2"}
not json
{"post_id": "8", "user_id": "u2"}
"##;
        let (posts, report) = parse_posts(src.as_bytes(), InputFormat::Jsonl, &mapping(), ";").unwrap();
        assert_eq!(report.total, 3);
        assert_eq!(report.skipped, 2);
        assert_eq!(posts[0].post_id, "7");
        assert_eq!(posts[0].hashtags.len(), 2);
        assert_eq!(posts[0].user_mentions, vec!["1", "2"]);
        assert_eq!(posts[0].timestamp, Utc.with_ymd_and_hms(2016, 11, 7, 8, 30, 0).unwrap().timestamp());
    }

    fn spec() -> PartitionSpec {
        PartitionSpec {
            t0: 100,
            t1: 200,
            t2: 1000,
            t3: 1100,
        }
    }

    #[test]
    fn partition_uses_closed_intervals() {
        let posts = vec![
            post("a", "u", 100),
            post("b", "u", 200),
            post("c", "u", 500),
            post("d", "u", 1000),
            post("e", "u", 1101),
        ];
        let p = partition(posts, &spec()).unwrap();
        assert_eq!(p.background.len(), 2);
        assert_eq!(p.target.len(), 1);
        assert_eq!(p.dropped, 2);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(
            partition(vec![post("a", "u", 150)], &spec()),
            Err(Error::EmptyWindow("target"))
        ));
        let bad = PartitionSpec { t1: 1000, ..spec() };
        assert!(matches!(partition(vec![], &bad), Err(Error::BadConfig(_))));
        let close = PartitionSpec { t0: 0, t1: 100, t2: 110, t3: 200 };
        assert_eq!(close.validate().unwrap().len(), 1);
    }

    #[test]
    fn common_users_filters_one_sided_users() {
        let b = vec![post("1", "u1", 150), post("2", "u2", 150)];
        let t = vec![post("3", "u1", 1050), post("4", "u4", 1050)];
        let c = common_users(b, t).unwrap();
        assert_eq!(c.users.iter().collect::<Vec<_>>(), vec!["u1"]);
        assert_eq!(c.background.len(), 1);
        assert_eq!(c.target.len(), 1);
        assert!(matches!(
            common_users(vec![post("1", "a", 1)], vec![post("2", "b", 2)]),
            Err(Error::NoCommonUsers)
        ));
    }

    #[test]
    fn top_users_breaks_ties_by_user_id() {
        let mut labels = LabeledUserSet::default();
        for u in ["a", "b", "c"] {
            labels.insert(u, UserClass::Normal);
        }
        labels.insert("z", UserClass::Coordinated);
        // a: 3 posts, b and c: 2 posts each -> {a, b}
        let b = vec![post("1", "a", 1), post("2", "a", 1), post("3", "b", 1), post("4", "c", 1)];
        let t = vec![post("5", "a", 2), post("6", "b", 2), post("7", "c", 2), post("8", "z", 2)];
        let top = top_users(&b, &t, &labels, 1, 2).unwrap();
        assert_eq!(top.users.iter().map(String::as_str).collect::<Vec<_>>(), vec!["a", "b", "z"]);
        assert!(top.warnings.is_empty());
        let none = top_users(&b, &t, &labels, 0, 0).unwrap();
        assert!(none.users.is_empty());
        let short = top_users(&b, &t, &labels, 5, 0).unwrap();
        assert_eq!(short.users.len(), 1);
        assert_eq!(short.warnings.len(), 1);
    }

    #[test]
    fn time_attributes() {
        let ts = Utc.with_ymd_and_hms(2016, 11, 7, 8, 30, 0).unwrap().timestamp();
        let p = post("1", "u1", ts);
        let items = derive_attributes(&p, &PreprocessConfig::default());
        assert!(items.contains(&(attr::DAY_OF_WEEK, "Monday".into())));
        assert!(items.contains(&(attr::TIME_OF_DAY, "4".into())));
        assert_eq!(slot_label(4, 12), "08:00-10:00");
        // +10h offset moves the post to Monday 18:30 local
        assert_eq!(time_slot(ts, 600, 12), 9);
        // -9h offset moves it back to Sunday
        assert_eq!(WEEKDAYS[weekday_index(ts, -540)], "Sunday");
    }

    #[test]
    fn optional_fields_and_hashtags() {
        let mut p = post("1", "u1", 1_000_000);
        p.hashtags = vec!["MAGA".into(), "maga".into(), "#Maga".into()];
        let items = derive_attributes(&p, &PreprocessConfig::default());
        assert_eq!(items.iter().filter(|(a, _)| *a == attr::HASHTAG).count(), 1);
        assert!(items.contains(&(attr::HASHTAG, "maga".into())));
        assert!(items.contains(&(attr::IS_RETWEET, "false".into())));
        assert!(!items.iter().any(|(a, _)| *a == attr::RETWEET_USERID || *a == attr::LANGUAGE));
        assert_eq!(items.iter().filter(|(a, _)| *a == attr::USERID).count(), 1);

        let verbatim = PreprocessConfig {
            hashtag_normalizer: normalizer_by_name("identity").unwrap(),
            ..PreprocessConfig::default()
        };
        let items = derive_attributes(&p, &verbatim);
        assert_eq!(items.iter().filter(|(a, _)| *a == attr::HASHTAG).count(), 3);
    }

    #[test]
    fn disabled_attributes_are_suppressed() {
        let mut p = post("1", "u1", 1_000_000);
        p.language = Some("en".into());
        let cfg = PreprocessConfig::with_attributes([attr::USERID, attr::IS_RETWEET]);
        let items = derive_attributes(&p, &cfg);
        assert_eq!(items, vec![(attr::USERID, "u1".into()), (attr::IS_RETWEET, "false".into())]);
    }

    #[test]
    fn config_validation() {
        let mut c = PreprocessConfig {
            slots_per_day: 7,
            ..PreprocessConfig::default()
        };
        assert!(c.validate().is_err());
        c.slots_per_day = 24;
        assert!(c.validate().is_ok());
        c.enabled_attributes.remove(attr::USERID);
        assert!(c.validate().is_err());
        let unknown = PreprocessConfig::with_attributes([attr::USERID, "shoe_size"]);
        assert!(matches!(unknown.validate(), Err(Error::UnknownAttribute(_))));
    }

    #[test]
    fn minimal_post_has_user_and_retweet_items() {
        let d = build_datasets(&[post("1", "u", 10)], &[post("2", "u", 20)], &PreprocessConfig::default()).unwrap();
        assert!(d.background.transactions[0].items().len() >= 2);
        assert!(d.dictionary.is_frozen());
    }

    #[test]
    fn build_is_order_independent() {
        let b = vec![post("2", "u1", 10), post("1", "u2", 11)];
        let t = vec![post("4", "u1", 20), post("3", "u2", 21)];
        let cfg = PreprocessConfig::default();
        let d1 = build_datasets(&b, &t, &cfg).unwrap();
        let (mut rb, mut rt) = (b.clone(), t.clone());
        rb.reverse();
        rt.reverse();
        let d2 = build_datasets(&rb, &rt, &cfg).unwrap();
        assert_eq!(d1.background, d2.background);
        assert_eq!(d1.target, d2.target);
        assert_eq!(d1.dictionary.entries(), d2.dictionary.entries());
        assert_eq!(d1.background.transactions[0].id, "1");
    }

    #[test]
    fn labels_csv_roundtrip() {
        let csv = "user_id,class\nu1,coordinated\nu2,normal\nu3,1\n";
        let labels = LabeledUserSet::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(labels.coordinated().len(), 2);
        let mut out = Vec::new();
        labels.write_csv(&mut out).unwrap();
        assert_eq!(LabeledUserSet::read_csv(out.as_slice()).unwrap(), labels);
        assert!(LabeledUserSet::read_csv("user_id,class\nu1,maybe\n".as_bytes()).is_err());
    }
}
