//! Closed contrast pattern mining over a dual-count FP-tree.
//!
//! Every transaction of both windows is inserted into one FP-tree whose nodes
//! carry a background and a target counter. A depth-first walk over
//! conditional trees enumerates, for each reachable prefix, the prefix plus
//! the items that co-occur with it in every transaction of its conditional
//! base. Each such candidate passes the support threshold by construction.
//! The closed patterns are exactly the candidates that no other candidate
//! with the same count pair strictly contains; [`ClosedIndex`] performs that
//! sweep. Growth and delta predicates are applied last.

use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    is_sorted_subset, pattern_stats, ContrastPattern, Fraction, ItemId, PatternStats,
    TransactionDataset,
};

const NIL: u32 = u32::MAX;

/// Largest item universe [`oracle_mine`] accepts.
pub const ORACLE_ITEM_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSide {
    /// Minimum support count applies to the background window.
    #[default]
    Background,
    /// Minimum support count applies to the target window.
    Target,
}

impl std::str::FromStr for ThresholdSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "background" | "b" => Ok(ThresholdSide::Background),
            "target" | "t" => Ok(ThresholdSide::Target),
            other => Err(Error::InvalidParams(format!("unknown threshold side `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningParams {
    /// Minimum support count on `threshold_side`.
    pub sigma: u64,
    /// Growth rate threshold, strictly greater than one.
    pub rho: Fraction,
    pub threshold_side: ThresholdSide,
    /// Optional minimum support delta; a pattern passes if either its growth
    /// or its delta clears the respective threshold.
    pub sigma_delta: Option<Fraction>,
    pub min_pattern_len: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            sigma: 10,
            rho: Fraction::new(3, 2),
            threshold_side: ThresholdSide::Background,
            sigma_delta: None,
            min_pattern_len: 1,
        }
    }
}

impl MiningParams {
    pub fn new(sigma: u64, rho: Fraction, threshold_side: ThresholdSide) -> Self {
        Self {
            sigma,
            rho,
            threshold_side,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma < 1 {
            return Err(Error::InvalidParams("sigma must be at least 1".into()));
        }
        if self.rho <= Fraction::from_integer(1) {
            return Err(Error::InvalidParams("rho must be greater than 1".into()));
        }
        if let Some(d) = self.sigma_delta {
            if d == Fraction::from_integer(0) {
                return Err(Error::InvalidParams("sigma_delta must be positive".into()));
            }
        }
        if self.min_pattern_len < 1 {
            return Err(Error::InvalidParams("min_pattern_len must be at least 1".into()));
        }
        Ok(())
    }

    fn passes_threshold(&self, sc_b: u64, sc_t: u64) -> bool {
        threshold_count(self.threshold_side, sc_b, sc_t) >= self.sigma
    }

    /// Growth-or-delta predicate.
    pub fn is_contrast(&self, stats: &PatternStats) -> bool {
        stats.growth_at_least(self.rho)
            || self.sigma_delta.is_some_and(|d| stats.delta_at_least(d))
    }

    /// The full predicate minus closedness.
    pub fn accepts(&self, items_len: usize, stats: &PatternStats) -> bool {
        items_len >= self.min_pattern_len
            && self.passes_threshold(stats.sc_b, stats.sc_t)
            && self.is_contrast(stats)
    }
}

fn threshold_count(side: ThresholdSide, sc_b: u64, sc_t: u64) -> u64 {
    match side {
        ThresholdSide::Background => sc_b,
        ThresholdSide::Target => sc_t,
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    /// Header slot of this node's item; `NIL` for the root.
    slot: u32,
    count_b: u32,
    count_t: u32,
    parent: u32,
    /// Next node carrying the same item.
    next: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeaderEntry {
    /// Global rank of the item: lower ranks are more frequent overall.
    pub rank: u32,
    head: u32,
    pub count_b: u64,
    pub count_t: u64,
}

/// Prefix tree over rank-ordered transactions. Header entries are sorted by
/// rank, so every ancestor of a node has a lower header slot.
#[derive(Debug, Clone)]
struct CondTree {
    nodes: Vec<Node>,
    header: Vec<HeaderEntry>,
}

impl CondTree {
    fn with_header(ranks: impl IntoIterator<Item = u32>) -> Self {
        let header = ranks
            .into_iter()
            .map(|rank| HeaderEntry {
                rank,
                head: NIL,
                count_b: 0,
                count_t: 0,
            })
            .collect();
        Self {
            nodes: vec![Node {
                slot: NIL,
                count_b: 0,
                count_t: 0,
                parent: NIL,
                next: NIL,
            }],
            header,
        }
    }

    /// Inserts a path of strictly ascending header slots.
    fn insert(
        &mut self,
        children: &mut FxHashMap<(u32, u32), u32>,
        slots: impl IntoIterator<Item = u32>,
        count_b: u32,
        count_t: u32,
    ) {
        let mut cur = 0u32;
        for slot in slots {
            let idx = match children.get(&(cur, slot)) {
                Some(&idx) => idx,
                None => {
                    let idx = self.nodes.len() as u32;
                    let entry = &mut self.header[slot as usize];
                    self.nodes.push(Node {
                        slot,
                        count_b: 0,
                        count_t: 0,
                        parent: cur,
                        next: entry.head,
                    });
                    entry.head = idx;
                    children.insert((cur, slot), idx);
                    idx
                }
            };
            let node = &mut self.nodes[idx as usize];
            node.count_b += count_b;
            node.count_t += count_t;
            let entry = &mut self.header[slot as usize];
            entry.count_b += count_b as u64;
            entry.count_t += count_t as u64;
            cur = idx;
        }
    }
}

/// Dual-count FP-tree over both windows.
#[derive(Debug, Clone)]
pub struct FpTree {
    tree: CondTree,
    /// Item at each rank.
    ranked_items: Vec<ItemId>,
    size_b: u64,
    size_t: u64,
    side: ThresholdSide,
    sigma: u64,
}

impl FpTree {
    pub fn header(&self) -> &[HeaderEntry] {
        &self.tree.header
    }

    /// Items retained in the tree, most frequent first.
    pub fn items(&self) -> &[ItemId] {
        &self.ranked_items
    }

    pub fn node_count(&self) -> usize {
        self.tree.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.node_count() == 0
    }

    /// `(count_b, count_t)` for every non-root node, grouped by item.
    pub fn node_counts(&self, item: ItemId) -> Vec<(u64, u64)> {
        let Some(rank) = self.ranked_items.iter().position(|&i| i == item) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut n = self.tree.header[rank].head;
        while n != NIL {
            let node = &self.tree.nodes[n as usize];
            out.push((node.count_b as u64, node.count_t as u64));
            n = node.next;
        }
        out
    }

    /// Root-to-leaf chains as item lists with the leaf's counts.
    pub fn paths(&self) -> Vec<(Vec<ItemId>, u64, u64)> {
        let nodes = &self.tree.nodes;
        let mut has_child = vec![false; nodes.len()];
        for n in &nodes[1..] {
            has_child[n.parent as usize] = true;
        }
        let mut out = Vec::new();
        for (idx, n) in nodes.iter().enumerate().skip(1) {
            if has_child[idx] {
                continue;
            }
            let mut items = Vec::new();
            let mut cur = idx as u32;
            while cur != 0 {
                let node = &nodes[cur as usize];
                items.push(self.ranked_items[node.slot as usize]);
                cur = node.parent;
            }
            items.reverse();
            out.push((items, n.count_b as u64, n.count_t as u64));
        }
        out
    }
}

/// Builds the dual-count FP-tree. Items whose threshold-side count is below
/// `sigma` are left out; the remaining items are ordered by descending total
/// count with ascending item id as tiebreak.
pub fn build_tree(
    background: &TransactionDataset,
    target: &TransactionDataset,
    params: &MiningParams,
) -> Result<FpTree> {
    if background.is_empty() && target.is_empty() {
        return Err(Error::EmptyInput);
    }
    params.validate()?;

    let universe = background
        .transactions
        .iter()
        .chain(&target.transactions)
        .flat_map(|t| t.items().last())
        .map(|i| i.index() + 1)
        .max()
        .unwrap_or(0);
    let mut counts = vec![(0u64, 0u64); universe];
    for t in &background.transactions {
        for i in t.items() {
            counts[i.index()].0 += 1;
        }
    }
    for t in &target.transactions {
        for i in t.items() {
            counts[i.index()].1 += 1;
        }
    }

    let mut ranked: Vec<(u64, ItemId)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &(b, t))| threshold_count(params.threshold_side, b, t) >= params.sigma)
        .map(|(i, &(b, t))| (b + t, ItemId(i as u32)))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let ranked_items: Vec<ItemId> = ranked.into_iter().map(|(_, i)| i).collect();

    let mut rank_of = vec![NIL; universe];
    for (r, item) in ranked_items.iter().enumerate() {
        rank_of[item.index()] = r as u32;
    }

    let mut tree = CondTree::with_header(0..ranked_items.len() as u32);
    let mut children = FxHashMap::default();
    let mut path = Vec::new();
    for (dataset, (cb, ct)) in [(background, (1, 0)), (target, (0, 1))] {
        for t in &dataset.transactions {
            path.clear();
            path.extend(t.items().iter().map(|i| rank_of[i.index()]).filter(|&r| r != NIL));
            if path.is_empty() {
                continue;
            }
            path.sort_unstable();
            tree.insert(&mut children, path.iter().copied(), cb, ct);
        }
    }

    Ok(FpTree {
        tree,
        ranked_items,
        size_b: background.len() as u64,
        size_t: target.len() as u64,
        side: params.threshold_side,
        sigma: params.sigma,
    })
}

/// A threshold-passing itemset produced during the tree walk. Not
/// necessarily closed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    items: Vec<ItemId>,
    sc_b: u64,
    sc_t: u64,
}

struct Walker<'a> {
    ranked_items: &'a [ItemId],
    side: ThresholdSide,
    sigma: u64,
}

impl Walker<'_> {
    fn walk(&self, tree: &CondTree, prefix: &mut Vec<u32>, out: &mut Vec<Candidate>) {
        for slot in 0..tree.header.len() {
            self.extend(tree, slot, prefix, out);
        }
    }

    /// Visits `prefix ∪ {item at slot}` in `tree`.
    fn extend(&self, tree: &CondTree, slot: usize, prefix: &mut Vec<u32>, out: &mut Vec<Candidate>) {
        let entry = tree.header[slot];
        if threshold_count(self.side, entry.count_b, entry.count_t) < self.sigma {
            return;
        }

        // conditional pattern base: ancestor slots of every node of this item
        let mut flat: Vec<u32> = Vec::new();
        let mut bases: Vec<(usize, usize, u32, u32)> = Vec::new();
        let mut acc: FxHashMap<u32, (u64, u64)> = FxHashMap::default();
        let mut n = entry.head;
        while n != NIL {
            let node = tree.nodes[n as usize];
            let start = flat.len();
            let mut p = node.parent;
            while p != 0 {
                let anc = tree.nodes[p as usize];
                flat.push(anc.slot);
                let a = acc.entry(anc.slot).or_default();
                a.0 += node.count_b as u64;
                a.1 += node.count_t as u64;
                p = anc.parent;
            }
            bases.push((start, flat.len(), node.count_b, node.count_t));
            n = node.next;
        }

        let mut closure: Vec<u32> = Vec::new();
        let mut keep: Vec<u32> = Vec::new();
        for (&s, &(b, t)) in &acc {
            if b == entry.count_b && t == entry.count_t {
                closure.push(s);
            } else if threshold_count(self.side, b, t) >= self.sigma {
                keep.push(s);
            }
        }

        let depth = prefix.len();
        prefix.push(entry.rank);
        prefix.extend(closure.iter().map(|&s| tree.header[s as usize].rank));
        let mut items: Vec<ItemId> = prefix.iter().map(|&r| self.ranked_items[r as usize]).collect();
        items.sort_unstable();
        out.push(Candidate {
            items,
            sc_b: entry.count_b,
            sc_t: entry.count_t,
        });

        if !keep.is_empty() {
            keep.sort_unstable();
            let mut remap: FxHashMap<u32, u32> = FxHashMap::default();
            for (new, &old) in keep.iter().enumerate() {
                remap.insert(old, new as u32);
            }
            let mut child = CondTree::with_header(keep.iter().map(|&s| tree.header[s as usize].rank));
            let mut children = FxHashMap::default();
            let mut path = Vec::new();
            for &(start, end, cb, ct) in &bases {
                path.clear();
                // ancestors were collected leaf-to-root; slots descend along them
                path.extend(flat[start..end].iter().rev().filter_map(|s| remap.get(s).copied()));
                if !path.is_empty() {
                    child.insert(&mut children, path.iter().copied(), cb, ct);
                }
            }
            self.walk(&child, prefix, out);
        }
        prefix.truncate(depth);
    }
}

/// Groups candidates by `(sc_b, sc_t)` and answers "does any other candidate
/// with this count pair strictly contain this itemset?". Two itemsets with
/// equal union count, one containing the other, are supported by the same
/// transactions, so the count pair is a sound bucket key.
#[derive(Debug, Default)]
pub struct ClosedIndex {
    buckets: HashMap<(u64, u64), Bucket>,
}

#[derive(Debug, Default)]
struct Bucket {
    members: Vec<Vec<ItemId>>,
    postings: FxHashMap<ItemId, Vec<u32>>,
}

impl ClosedIndex {
    pub fn insert(&mut self, items: Vec<ItemId>, sc_b: u64, sc_t: u64) {
        let bucket = self.buckets.entry((sc_b, sc_t)).or_default();
        let id = bucket.members.len() as u32;
        for &i in &items {
            bucket.postings.entry(i).or_default().push(id);
        }
        bucket.members.push(items);
    }

    /// True iff a stored itemset with the same count pair strictly contains
    /// `items`.
    pub fn has_strict_superset(&self, items: &[ItemId], sc_b: u64, sc_t: u64) -> bool {
        let Some(bucket) = self.buckets.get(&(sc_b, sc_t)) else {
            return false;
        };
        let shortest = items
            .iter()
            .map(|i| bucket.postings.get(i).map_or(&[][..], |v| v.as_slice()))
            .min_by_key(|v| v.len());
        let scan: Box<dyn Iterator<Item = u32>> = match shortest {
            Some(list) => Box::new(list.iter().copied()),
            None => Box::new(0..bucket.members.len() as u32),
        };
        scan.map(|id| &bucket.members[id as usize])
            .any(|m| m.len() > items.len() && is_sorted_subset(items, m))
    }
}

fn closed_candidates(mut candidates: Vec<Candidate>) -> Vec<Candidate> {
    candidates.par_sort_unstable();
    candidates.dedup();
    let mut index = ClosedIndex::default();
    for c in &candidates {
        index.insert(c.items.clone(), c.sc_b, c.sc_t);
    }
    candidates
        .into_par_iter()
        .filter(|c| !index.has_strict_superset(&c.items, c.sc_b, c.sc_t))
        .collect()
}

/// Every pattern closed in `D_b ∪ D_t` whose threshold-side support count is
/// at least `params.sigma`, regardless of growth. Sorted by item list.
pub fn mine_closed(
    background: &TransactionDataset,
    target: &TransactionDataset,
    params: &MiningParams,
) -> Result<Vec<ContrastPattern>> {
    let tree = build_tree(background, target, params)?;
    let walker = Walker {
        ranked_items: &tree.ranked_items,
        side: tree.side,
        sigma: tree.sigma,
    };
    let candidates: Vec<Candidate> = (0..tree.tree.header.len())
        .into_par_iter()
        .flat_map_iter(|slot| {
            let mut out = Vec::new();
            let mut prefix = Vec::new();
            walker.extend(&tree.tree, slot, &mut prefix, &mut out);
            out
        })
        .collect();
    let (size_b, size_t) = (tree.size_b, tree.size_t);
    let mut closed: Vec<ContrastPattern> = closed_candidates(candidates)
        .into_iter()
        .map(|c| ContrastPattern {
            items: c.items,
            stats: PatternStats::new(c.sc_b, c.sc_t, size_b, size_t),
        })
        .collect();
    closed.sort_by(|a, b| a.items.cmp(&b.items));
    Ok(closed)
}

/// Applies the growth-or-delta predicate and the length floor to closed
/// patterns mined at a threshold no stricter than `params.sigma`.
pub fn select_contrast(closed: &[ContrastPattern], params: &MiningParams) -> Vec<ContrastPattern> {
    closed
        .iter()
        .filter(|p| params.accepts(p.items.len(), &p.stats))
        .cloned()
        .collect()
}

/// The closed contrast patterns of `(background, target)`: closed in the
/// union of both windows, at least `sigma` occurrences on the threshold side,
/// growth at least `rho` (or delta at least `sigma_delta` when set), and at
/// least `min_pattern_len` items. Sorted by item list.
pub fn mine_closed_contrast(
    background: &TransactionDataset,
    target: &TransactionDataset,
    params: &MiningParams,
) -> Result<Vec<ContrastPattern>> {
    let closed = mine_closed(background, target, params)?;
    Ok(select_contrast(&closed, params))
}

/// Brute-force reference for [`mine_closed_contrast`]: enumerates every
/// itemset contained in some transaction and checks the predicate by
/// scanning. Exponential; limited to [`ORACLE_ITEM_LIMIT`] distinct items.
pub fn oracle_mine(
    background: &TransactionDataset,
    target: &TransactionDataset,
    params: &MiningParams,
) -> Result<Vec<ContrastPattern>> {
    if background.is_empty() && target.is_empty() {
        return Err(Error::EmptyInput);
    }
    params.validate()?;
    let all = || background.transactions.iter().chain(&target.transactions);
    let universe: BTreeSet<ItemId> = all().flat_map(|t| t.items().iter().copied()).collect();
    if universe.len() > ORACLE_ITEM_LIMIT {
        return Err(Error::OracleLimit {
            limit: ORACLE_ITEM_LIMIT,
            actual: universe.len(),
        });
    }

    let mut occurring: HashSet<Vec<ItemId>> = HashSet::new();
    for t in all() {
        let items = t.items();
        for mask in 1u32..(1 << items.len()) {
            let subset: Vec<ItemId> = (0..items.len())
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| items[b])
                .collect();
            occurring.insert(subset);
        }
    }

    let with_stats: Vec<(Vec<ItemId>, PatternStats)> = occurring
        .into_iter()
        .map(|p| {
            let s = pattern_stats(&p, background, target);
            (p, s)
        })
        .collect();

    let mut out: Vec<ContrastPattern> = with_stats
        .iter()
        .filter(|(p, s)| params.accepts(p.len(), s))
        .filter(|(p, s)| {
            !with_stats.iter().any(|(q, qs)| {
                q.len() > p.len() && qs.union_count() == s.union_count() && is_sorted_subset(p, q)
            })
        })
        .map(|(p, s)| ContrastPattern {
            items: p.clone(),
            stats: *s,
        })
        .collect();
    out.sort_by(|a, b| a.items.cmp(&b.items));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example::{datasets, items};
    use crate::model::{is_closed, Growth, Transaction, Window};

    fn f(n: u64, d: u64) -> Fraction {
        Fraction::new(n, d)
    }

    #[test]
    fn example_target_side() {
        let (b, t, dict) = datasets();
        let params = MiningParams::new(2, f(3, 2), ThresholdSide::Target);
        let out = mine_closed_contrast(&b, &t, &params).unwrap();
        let p0 = items(&dict, &[("u", "u1"), ("r", "yes"), ("ota", "u2")]);
        let hit = out.iter().find(|p| p.items == p0).expect("p0 mined");
        assert_eq!((hit.stats.sc_b, hit.stats.sc_t), (1, 3));
        assert_eq!(hit.stats.growth(), Growth::Finite(f(3, 1)));
        assert_eq!(hit.stats.delta(), crate::model::SignedFraction::new(2, 5));
        assert!(is_closed(&hit.items, &b, &t));
    }

    #[test]
    fn example_background_side_full_set() {
        // worked by hand over the ten rows and confirmed by the oracle
        let (b, t, dict) = datasets();
        let params = MiningParams::new(1, f(3, 2), ThresholdSide::Background);
        let out = mine_closed_contrast(&b, &t, &params).unwrap();
        let mut expected = vec![
            items(&dict, &[("u", "u1"), ("r", "yes"), ("ota", "u2")]),
            items(&dict, &[("u", "u1")]),
            items(&dict, &[("r", "yes")]),
        ];
        expected.sort();
        let got: Vec<_> = out.iter().map(|p| p.items.clone()).collect();
        assert_eq!(got, expected);
        let u1 = out.iter().find(|p| p.items == items(&dict, &[("u", "u1")])).unwrap();
        assert_eq!((u1.stats.sc_b, u1.stats.sc_t), (2, 3));
        assert_eq!(out, oracle_mine(&b, &t, &params).unwrap());
        let not_closed = items(&dict, &[("r", "yes"), ("ota", "u2")]);
        assert!(out.iter().all(|p| p.items != not_closed));
    }

    #[test]
    fn build_tree_prunes_background_absent_items() {
        let (b, t, dict) = datasets();
        let tree = build_tree(&b, &t, &MiningParams::new(1, f(3, 2), ThresholdSide::Background)).unwrap();
        assert_eq!(tree.items().len(), 6);
        let u4 = dict.lookup("u", "u4").unwrap().unwrap();
        assert!(!tree.items().contains(&u4));
        for e in tree.header() {
            let item = tree.items()[e.rank as usize];
            let sum = tree.node_counts(item).iter().fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
            assert_eq!(sum, (e.count_b, e.count_t));
        }
    }

    #[test]
    fn build_tree_large_sigma_is_empty() {
        let (b, t, _) = datasets();
        let tree = build_tree(&b, &t, &MiningParams::new(6, f(3, 2), ThresholdSide::Background)).unwrap();
        assert!(tree.is_empty());
        let out = mine_closed_contrast(&b, &t, &MiningParams::new(6, f(3, 2), ThresholdSide::Background)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn repeated_transaction_is_a_single_path() {
        let ids = |xs: &[u32]| xs.iter().map(|&x| ItemId(x)).collect::<Vec<_>>();
        let rep = |w, n| {
            TransactionDataset::new(
                w,
                (0..n).map(|i| Transaction::new(format!("{i}"), ids(&[0, 1, 2]))).collect(),
            )
        };
        let (b, t) = (rep(Window::Background, 3), rep(Window::Target, 4));
        let tree = build_tree(&b, &t, &MiningParams::new(1, f(11, 10), ThresholdSide::Background)).unwrap();
        let paths = tree.paths();
        assert_eq!(paths, vec![(ids(&[0, 1, 2]), 3, 4)]);
        let closed = mine_closed(&b, &t, &MiningParams::new(1, f(11, 10), ThresholdSide::Background)).unwrap();
        assert_eq!(closed.len(), 1);
        assert_eq!(closed[0].items, ids(&[0, 1, 2]));
    }

    #[test]
    fn empty_input_is_an_error() {
        let e = TransactionDataset::new(Window::Background, vec![]);
        let e2 = TransactionDataset::new(Window::Target, vec![]);
        assert!(matches!(
            mine_closed_contrast(&e, &e2, &MiningParams::default()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn rho_above_max_growth_yields_nothing() {
        let (b, t, _) = datasets();
        let out = mine_closed_contrast(&b, &t, &MiningParams::new(1, f(4, 1), ThresholdSide::Background)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn invalid_params_rejected() {
        let (b, t, _) = datasets();
        for p in [
            MiningParams::new(0, f(2, 1), ThresholdSide::Background),
            MiningParams::new(1, f(1, 1), ThresholdSide::Background),
            MiningParams { sigma_delta: Some(f(0, 1)), ..MiningParams::default() },
            MiningParams { min_pattern_len: 0, ..MiningParams::default() },
        ] {
            assert!(matches!(mine_closed_contrast(&b, &t, &p), Err(Error::InvalidParams(_))));
        }
    }

    #[test]
    fn sigma_delta_branch_admits_low_growth_patterns() {
        let (b, t, dict) = datasets();
        // (r,yes): supp 2/5 -> 3/5, growth 1.5, delta 1/5
        let mut p = MiningParams::new(1, f(2, 1), ThresholdSide::Background);
        let yes = items(&dict, &[("r", "yes")]);
        assert!(!mine_closed_contrast(&b, &t, &p).unwrap().iter().any(|x| x.items == yes));
        p.sigma_delta = Some(f(1, 5));
        let out = mine_closed_contrast(&b, &t, &p).unwrap();
        assert!(out.iter().any(|x| x.items == yes));
        assert_eq!(out, oracle_mine(&b, &t, &p).unwrap());
    }

    #[test]
    fn oracle_limit_enforced() {
        let ids: Vec<ItemId> = (0..21).map(ItemId).collect();
        let b = TransactionDataset::new(Window::Background, vec![Transaction::new("a", ids.clone())]);
        let t = TransactionDataset::new(Window::Target, vec![Transaction::new("b", ids)]);
        assert!(matches!(
            oracle_mine(&b, &t, &MiningParams::new(1, f(2, 1), ThresholdSide::Background)),
            Err(Error::OracleLimit { limit: 20, actual: 21 })
        ));
    }

    #[test]
    fn closed_index_detects_strict_supersets_only() {
        let ids = |xs: &[u32]| xs.iter().map(|&x| ItemId(x)).collect::<Vec<_>>();
        let mut idx = ClosedIndex::default();
        idx.insert(ids(&[1, 2, 3]), 2, 3);
        idx.insert(ids(&[1, 2]), 2, 3);
        idx.insert(ids(&[4]), 1, 1);
        assert!(idx.has_strict_superset(&ids(&[1, 2]), 2, 3));
        assert!(!idx.has_strict_superset(&ids(&[1, 2, 3]), 2, 3));
        assert!(!idx.has_strict_superset(&ids(&[1, 2]), 2, 4));
        assert!(!idx.has_strict_superset(&ids(&[4]), 1, 1));
    }
}
