//! Items, transactions and the support/growth algebra over a pair of
//! transaction datasets (a background window and a target window).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact non-negative fraction, used for supports and thresholds.
pub type Fraction = Ratio<u64>;

/// Exact signed fraction, used for support deltas.
pub type SignedFraction = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One column of the attribute space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    /// Multi-valued attributes (hashtags, mentions) may contribute several
    /// items to a single transaction.
    pub multi_valued: bool,
}

/// The attribute space. Attribute ids are dense indices into `attributes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    attributes: Vec<AttributeSpec>,
    user_attribute: AttributeId,
}

impl Schema {
    pub fn new(attributes: Vec<AttributeSpec>, user_attribute: &str) -> Result<Self> {
        if attributes.len() > u16::MAX as usize {
            return Err(Error::BadConfig("too many attributes".into()));
        }
        for (i, a) in attributes.iter().enumerate() {
            if attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::BadConfig(format!("duplicate attribute `{}`", a.name)));
            }
        }
        let user = attributes
            .iter()
            .position(|a| a.name == user_attribute)
            .ok_or_else(|| Error::UnknownAttribute(user_attribute.to_string()))?;
        if attributes[user].multi_valued {
            return Err(Error::BadConfig("the user attribute must be single-valued".into()));
        }
        Ok(Self {
            attributes,
            user_attribute: AttributeId(user as u16),
        })
    }

    /// Shorthand for a schema of single-valued attributes.
    pub fn single_valued(names: &[&str], user_attribute: &str) -> Result<Self> {
        Self::new(
            names
                .iter()
                .map(|n| AttributeSpec {
                    name: n.to_string(),
                    multi_valued: false,
                })
                .collect(),
            user_attribute,
        )
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    pub fn id_of(&self, name: &str) -> Result<AttributeId> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .map(|i| AttributeId(i as u16))
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn name(&self, id: AttributeId) -> &str {
        &self.attributes[id.0 as usize].name
    }

    pub fn is_multi_valued(&self, id: AttributeId) -> bool {
        self.attributes[id.0 as usize].multi_valued
    }

    pub fn user_attribute(&self) -> AttributeId {
        self.user_attribute
    }
}

/// Bidirectional mapping between `(attribute, value text)` pairs and dense
/// item ids. Ids are handed out in first-seen order.
#[derive(Debug, Clone)]
pub struct ItemDictionary {
    schema: Schema,
    forward: HashMap<(AttributeId, String), ItemId>,
    reverse: Vec<(AttributeId, String)>,
    frozen: bool,
}

/// Result of encoding one raw record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub transaction: Transaction,
    /// Pairs dropped because the dictionary was frozen and had never seen them.
    pub dropped: usize,
}

impl ItemDictionary {
    pub fn new(schema: Schema) -> Self {
        Self {
            schema,
            forward: HashMap::new(),
            reverse: Vec::new(),
            frozen: false,
        }
    }

    /// Rebuilds a dictionary from its entries in id order. The result is frozen.
    pub fn from_entries(schema: Schema, entries: Vec<(AttributeId, String)>) -> Result<Self> {
        let mut forward = HashMap::with_capacity(entries.len());
        for (i, (attr, value)) in entries.iter().enumerate() {
            if attr.0 as usize >= schema.len() {
                return Err(Error::BadConfig(format!("attribute id {} out of range", attr.0)));
            }
            if forward.insert((*attr, value.clone()), ItemId(i as u32)).is_some() {
                return Err(Error::BadConfig(format!(
                    "duplicate dictionary entry {}={value}",
                    schema.name(*attr)
                )));
            }
        }
        Ok(Self {
            schema,
            forward,
            reverse: entries,
            frozen: true,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn entries(&self) -> &[(AttributeId, String)] {
        &self.reverse
    }

    pub fn lookup(&self, attribute: &str, value: &str) -> Result<Option<ItemId>> {
        let attr = self.schema.id_of(attribute)?;
        Ok(self.forward.get(&(attr, value.to_string())).copied())
    }

    pub fn attribute_of(&self, item: ItemId) -> AttributeId {
        self.reverse[item.index()].0
    }

    pub fn value_of(&self, item: ItemId) -> &str {
        &self.reverse[item.index()].1
    }

    pub fn is_user_item(&self, item: ItemId) -> bool {
        self.attribute_of(item) == self.schema.user_attribute()
    }

    /// `(attribute name, value text)` for an item.
    pub fn decode(&self, item: ItemId) -> (&str, &str) {
        let (attr, value) = &self.reverse[item.index()];
        (self.schema.name(*attr), value)
    }

    pub fn decode_all(&self, items: &[ItemId]) -> Vec<(String, String)> {
        items
            .iter()
            .map(|&i| {
                let (a, v) = self.decode(i);
                (a.to_string(), v.to_string())
            })
            .collect()
    }

    /// Encodes raw `(attribute, value)` pairs into a transaction. With
    /// `mutable` set, unseen pairs get fresh ids; otherwise they are dropped
    /// and counted.
    pub fn encode_transaction<A, V>(
        &mut self,
        id: impl Into<String>,
        raw: &[(A, V)],
        mutable: bool,
    ) -> Result<Encoded>
    where
        A: AsRef<str>,
        V: AsRef<str>,
    {
        if mutable && self.frozen {
            return Err(Error::FrozenDictionary);
        }
        let mut items = Vec::with_capacity(raw.len());
        let mut single: HashMap<AttributeId, &str> = HashMap::new();
        let mut dropped = 0;
        for (name, value) in raw {
            let attr = self.schema.id_of(name.as_ref())?;
            let value = value.as_ref();
            if !self.schema.is_multi_valued(attr) {
                if let Some(prev) = single.insert(attr, value) {
                    if prev != value {
                        return Err(Error::SingleValuedConflict {
                            attribute: name.as_ref().to_string(),
                            first: prev.to_string(),
                            second: value.to_string(),
                        });
                    }
                }
            }
            let key = (attr, value.to_string());
            match self.forward.get(&key) {
                Some(&id) => items.push(id),
                None if mutable => {
                    let id = ItemId(self.reverse.len() as u32);
                    self.forward.insert(key.clone(), id);
                    self.reverse.push(key);
                    items.push(id);
                }
                None => dropped += 1,
            }
        }
        Ok(Encoded {
            transaction: Transaction::new(id, items),
            dropped,
        })
    }
}

/// A set of items with an opaque identifier. Items are kept strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transaction {
    pub id: String,
    items: Vec<ItemId>,
}

impl Transaction {
    pub fn new(id: impl Into<String>, mut items: Vec<ItemId>) -> Self {
        items.sort_unstable();
        items.dedup();
        Self {
            id: id.into(),
            items,
        }
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, pattern: &[ItemId]) -> bool {
        is_sorted_subset(pattern, &self.items)
    }
}

/// `needle ⊆ haystack` for strictly ascending slices.
pub fn is_sorted_subset(needle: &[ItemId], haystack: &[ItemId]) -> bool {
    if needle.len() > haystack.len() {
        return false;
    }
    let mut hay = haystack.iter();
    'outer: for n in needle {
        for h in hay.by_ref() {
            match h.cmp(n) {
                Ordering::Less => continue,
                Ordering::Equal => continue 'outer,
                Ordering::Greater => return false,
            }
        }
        return false;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Background,
    Target,
}

impl Window {
    pub fn as_str(self) -> &'static str {
        match self {
            Window::Background => "background",
            Window::Target => "target",
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionDataset {
    pub window: Window,
    pub transactions: Vec<Transaction>,
}

impl TransactionDataset {
    pub fn new(window: Window, transactions: Vec<Transaction>) -> Self {
        Self {
            window,
            transactions,
        }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }
}

/// `SC(pattern, D)`: the number of transactions containing `pattern`.
/// `pattern` must be sorted ascending.
pub fn support_count(pattern: &[ItemId], dataset: &TransactionDataset) -> u64 {
    dataset
        .transactions
        .iter()
        .filter(|t| t.contains(pattern))
        .count() as u64
}

pub fn support(pattern: &[ItemId], dataset: &TransactionDataset) -> Result<Fraction> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Fraction::new(support_count(pattern, dataset), dataset.len() as u64))
}

/// Parses `"1.5"`, `"3/2"` or `"2"` into an exact fraction.
pub fn parse_fraction(text: &str) -> Result<Fraction> {
    let bad = || Error::InvalidParams(format!("`{text}` is not a non-negative number"));
    let s = text.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Fraction::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty()) || frac.len() > 18 {
        return Err(bad());
    }
    let digits = |p: &str| p.chars().all(|c| c.is_ascii_digit());
    if !digits(int) || !digits(frac) {
        return Err(bad());
    }
    let scale = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let numer = int
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Fraction::new(numer, scale))
}

/// Exact fraction for the shortest decimal rendering of `x`, so `1.1`
/// becomes `11/10`.
pub fn fraction_from_f64(x: f64) -> Result<Fraction> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidParams(format!("{x} is not a non-negative number")));
    }
    parse_fraction(&format!("{x}"))
}

pub fn fraction_to_f64(f: Fraction) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}

/// Growth rate of a pattern between windows. `Infinite` is a distinct value,
/// never a float.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Growth {
    Finite(Fraction),
    Infinite,
}

impl Growth {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Growth::Infinite)
    }

    pub fn at_least(&self, threshold: Fraction) -> bool {
        match self {
            Growth::Infinite => true,
            Growth::Finite(g) => *g >= threshold,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Growth::Infinite => f64::INFINITY,
            Growth::Finite(g) => *g.numer() as f64 / *g.denom() as f64,
        }
    }
}

impl PartialOrd for Growth {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Growth {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Growth::Infinite, Growth::Infinite) => Ordering::Equal,
            (Growth::Infinite, _) => Ordering::Greater,
            (_, Growth::Infinite) => Ordering::Less,
            (Growth::Finite(a), Growth::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Growth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Growth::Infinite => f.write_str("infinite"),
            Growth::Finite(g) if *g.denom() == 1 => write!(f, "{}", g.numer()),
            Growth::Finite(g) => write!(f, "{}/{}", g.numer(), g.denom()),
        }
    }
}

pub fn growth_rate(supp_t: Fraction, supp_b: Fraction) -> Growth {
    if supp_b.is_zero() {
        if supp_t.is_zero() {
            Growth::Finite(Fraction::zero())
        } else {
            Growth::Infinite
        }
    } else {
        Growth::Finite(supp_t / supp_b)
    }
}

pub fn support_delta(supp_t: Fraction, supp_b: Fraction) -> SignedFraction {
    to_signed(supp_t) - to_signed(supp_b)
}

fn to_signed(f: Fraction) -> SignedFraction {
    SignedFraction::new(*f.numer() as i64, *f.denom() as i64)
}

/// Dual support counts of a pattern together with the sizes of the windows
/// they were counted against. Fractions are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatternStats {
    pub sc_b: u64,
    pub sc_t: u64,
    pub size_b: u64,
    pub size_t: u64,
}

impl PatternStats {
    pub fn new(sc_b: u64, sc_t: u64, size_b: u64, size_t: u64) -> Self {
        debug_assert!(sc_b <= size_b && sc_t <= size_t);
        Self {
            sc_b,
            sc_t,
            size_b,
            size_t,
        }
    }

    pub fn supp_b(&self) -> Fraction {
        fraction_or_zero(self.sc_b, self.size_b)
    }

    pub fn supp_t(&self) -> Fraction {
        fraction_or_zero(self.sc_t, self.size_t)
    }

    pub fn growth(&self) -> Growth {
        growth_rate(self.supp_t(), self.supp_b())
    }

    pub fn delta(&self) -> SignedFraction {
        support_delta(self.supp_t(), self.supp_b())
    }

    /// Union support count `SC(X, D_b ∪ D_t)`.
    pub fn union_count(&self) -> u64 {
        self.sc_b + self.sc_t
    }

    /// `gr ≥ threshold`, by cross-multiplying counts.
    pub fn growth_at_least(&self, threshold: Fraction) -> bool {
        if self.sc_b == 0 {
            // zero growth passes only a zero threshold
            return self.sc_t > 0 || threshold.is_zero();
        }
        let lhs = self.sc_t as u128 * self.size_b as u128 * *threshold.denom() as u128;
        let rhs = *threshold.numer() as u128 * self.sc_b as u128 * self.size_t as u128;
        lhs >= rhs
    }

    /// `supp_t − supp_b ≥ threshold`, by cross-multiplying counts.
    pub fn delta_at_least(&self, threshold: Fraction) -> bool {
        let (n, d) = (*threshold.numer() as i128, *threshold.denom() as i128);
        let (nb, nt) = (self.size_b.max(1) as i128, self.size_t.max(1) as i128);
        let lhs = (self.sc_t as i128 * nb - self.sc_b as i128 * nt) * d;
        lhs >= n * nb * nt
    }
}

fn fraction_or_zero(count: u64, size: u64) -> Fraction {
    if size == 0 {
        Fraction::zero()
    } else {
        Fraction::new(count, size)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContrastPattern {
    /// Strictly ascending item ids.
    pub items: Vec<ItemId>,
    pub stats: PatternStats,
}

impl ContrastPattern {
    pub fn new(mut items: Vec<ItemId>, stats: PatternStats) -> Self {
        items.sort_unstable();
        items.dedup();
        Self { items, stats }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Stats for `pattern` by scanning both datasets.
pub fn pattern_stats(
    pattern: &[ItemId],
    background: &TransactionDataset,
    target: &TransactionDataset,
) -> PatternStats {
    PatternStats::new(
        support_count(pattern, background),
        support_count(pattern, target),
        background.len() as u64,
        target.len() as u64,
    )
}

/// Whether `pattern` is closed in the multiset union of both windows: no
/// strict superset has the same union support count. A pattern that occurs
/// nowhere is not closed.
pub fn is_closed(
    pattern: &[ItemId],
    background: &TransactionDataset,
    target: &TransactionDataset,
) -> bool {
    // closure(X) is the intersection of every transaction containing X
    let mut closure: Option<Vec<ItemId>> = None;
    for t in background.transactions.iter().chain(&target.transactions) {
        if !t.contains(pattern) {
            continue;
        }
        closure = Some(match closure {
            None => t.items().to_vec(),
            Some(c) => intersect_sorted(&c, t.items()),
        });
        if closure.as_ref().is_some_and(|c| c.len() == pattern.len()) {
            return true;
        }
    }
    closure.is_some_and(|c| c.len() == pattern.len())
}

pub(crate) fn intersect_sorted(a: &[ItemId], b: &[ItemId]) -> Vec<ItemId> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// The two-window example table used throughout the docs and tests: columns
/// `u` (user id), `r` (is retweet?) and `ota` (original tweet's author).
pub mod example {
    use super::*;

    pub const BACKGROUND: [(&str, &str, Option<&str>); 5] = [
        ("u2", "no", None),
        ("u1", "yes", Some("u2")),
        ("u1", "no", None),
        ("u2", "yes", Some("u3")),
        ("u2", "no", None),
    ];

    pub const TARGET: [(&str, &str, Option<&str>); 5] = [
        ("u1", "yes", Some("u2")),
        ("u1", "yes", Some("u2")),
        ("u2", "no", None),
        ("u1", "yes", Some("u2")),
        ("u4", "no", None),
    ];

    /// Encoded `(background, target, dictionary)`. Missing `ota` values
    /// produce no item.
    pub fn datasets() -> (TransactionDataset, TransactionDataset, ItemDictionary) {
        let schema = Schema::single_valued(&["u", "r", "ota"], "u").expect("valid schema");
        let mut dict = ItemDictionary::new(schema);
        let mut encode = |window: Window, rows: &[(&str, &str, Option<&str>)], prefix: &str| {
            let txns = rows
                .iter()
                .enumerate()
                .map(|(i, (u, r, ota))| {
                    let mut raw = vec![("u", *u), ("r", *r)];
                    if let Some(o) = ota {
                        raw.push(("ota", o));
                    }
                    dict.encode_transaction(format!("{prefix}{}", i + 1), &raw, true)
                        .expect("schema-valid row")
                        .transaction
                })
                .collect();
            TransactionDataset::new(window, txns)
        };
        let b = encode(Window::Background, &BACKGROUND, "b");
        let t = encode(Window::Target, &TARGET, "t");
        dict.freeze();
        (b, t, dict)
    }

    /// Item ids for `pairs`, sorted. Panics on pairs not in the table.
    pub fn items(dict: &ItemDictionary, pairs: &[(&str, &str)]) -> Vec<ItemId> {
        let mut v: Vec<_> = pairs
            .iter()
            .map(|(a, val)| dict.lookup(a, val).unwrap().expect("item in example table"))
            .collect();
        v.sort_unstable();
        v
    }
}
