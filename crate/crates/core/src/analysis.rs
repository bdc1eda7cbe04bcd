//! Evaluation, baselines, parameter sweeps, purity and attribute ablation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::suspicious_users;
use crate::error::{Error, Result};
use crate::ingest::{attr, build_datasets, common_users, LabeledUserSet, PreprocessConfig, RawPost, UserClass};
use crate::miner::{mine_closed, select_contrast, MiningParams};
use crate::model::{
    fraction_from_f64, support_count, ContrastPattern, Fraction, ItemDictionary, ItemId, Transaction,
    TransactionDataset,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalMetrics {
    /// Metrics from confusion counts; every ratio with a zero denominator is 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // 2PR/(P+R) = 2tp/(2tp+fp+fn)
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            ratio(2 * tp, 2 * tp + fp + fn_)
        };
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }
}

/// Confusion counts of `predicted` against `labels`; the label set is the
/// evaluation universe.
pub fn evaluate(predicted: &BTreeSet<String>, labels: &LabeledUserSet) -> Result<EvalMetrics> {
    let (mut tp, mut fp) = (0, 0);
    for u in predicted {
        match labels.class_of(u) {
            Some(UserClass::Coordinated) => tp += 1,
            Some(UserClass::Normal) => fp += 1,
            None => return Err(Error::UnknownUser(u.clone())),
        }
    }
    let coordinated = labels.iter().filter(|(_, c)| *c == UserClass::Coordinated).count();
    let normal = labels.len() - coordinated;
    Ok(EvalMetrics::from_counts(tp, fp, coordinated - tp, normal - fp))
}

/// The author of a transaction: the value of its user item.
pub fn author<'d>(transaction: &Transaction, dictionary: &'d ItemDictionary) -> Option<&'d str> {
    transaction
        .items()
        .iter()
        .find(|&&i| dictionary.is_user_item(i))
        .map(|&i| dictionary.value_of(i))
}

/// Every user authoring a transaction in either window.
pub fn dataset_users(
    background: &TransactionDataset,
    target: &TransactionDataset,
    dictionary: &ItemDictionary,
) -> BTreeSet<String> {
    background
        .transactions
        .iter()
        .chain(&target.transactions)
        .filter_map(|t| author(t, dictionary))
        .map(str::to_string)
        .collect()
}

fn post_counts<'d>(dataset: &TransactionDataset, dictionary: &'d ItemDictionary) -> HashMap<&'d str, u64> {
    let mut freq = HashMap::new();
    for t in &dataset.transactions {
        if let Some(u) = author(t, dictionary) {
            *freq.entry(u).or_default() += 1;
        }
    }
    freq
}

/// Users whose background post count is at least `sigma` and whose
/// normalised post frequency grows by at least `rho`.
pub fn baseline_frequency(
    background: &TransactionDataset,
    target: &TransactionDataset,
    dictionary: &ItemDictionary,
    sigma: u64,
    rho: Fraction,
) -> BTreeSet<String> {
    let fb = post_counts(background, dictionary);
    let ft = post_counts(target, dictionary);
    let (nb, nt) = (background.len() as u128, target.len() as u128);
    let users: BTreeSet<&str> = fb.keys().chain(ft.keys()).copied().collect();
    users
        .into_iter()
        .filter(|u| {
            let b = fb.get(u).copied().unwrap_or(0) as u128;
            let t = ft.get(u).copied().unwrap_or(0) as u128;
            if b < sigma as u128 {
                return false;
            }
            if b == 0 {
                // only reachable with sigma = 0; growth is infinite or 0/0
                return t > 0 || *rho.numer() == 0;
            }
            // (t/nt) / (b/nb) >= p/q  <=>  t*nb*q >= p*b*nt
            t * nb * *rho.denom() as u128 >= *rho.numer() as u128 * b * nt
        })
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePoint {
    pub sigma: u64,
    pub rho: Fraction,
    pub predicted: usize,
    pub metrics: EvalMetrics,
}

/// The frequency baseline over a grid; returns every point in sigma-major
/// order and the index of the first point with the highest F1.
pub fn baseline_frequency_sweep(
    background: &TransactionDataset,
    target: &TransactionDataset,
    dictionary: &ItemDictionary,
    labels: &LabeledUserSet,
    sigmas: &[u64],
    rhos: &[Fraction],
) -> Result<(Vec<BaselinePoint>, usize)> {
    check_grids(sigmas, rhos)?;
    let labels = labels.restrict(&dataset_users(background, target, dictionary));
    let mut points = Vec::with_capacity(sigmas.len() * rhos.len());
    for &sigma in sigmas {
        for &rho in rhos {
            let predicted = baseline_frequency(background, target, dictionary, sigma, rho);
            let metrics = evaluate(&predicted, &labels)?;
            points.push(BaselinePoint {
                sigma,
                rho,
                predicted: predicted.len(),
                metrics,
            });
        }
    }
    let best = argmax_first(points.iter().map(|p| p.metrics.f1));
    Ok((points, best))
}

/// Users whose strict-majority language over their target posts is
/// `suspect_language`. Untagged posts are ignored.
pub fn baseline_language(target: &[RawPost], suspect_language: &str) -> BTreeSet<String> {
    majority_language(
        target
            .iter()
            .filter_map(|p| p.language.as_deref().map(|l| (p.user_id.as_str(), l))),
        suspect_language,
    )
}

/// [`baseline_language`] over an encoded target window.
pub fn baseline_language_encoded(
    target: &TransactionDataset,
    dictionary: &ItemDictionary,
    suspect_language: &str,
) -> BTreeSet<String> {
    let language = dictionary.schema().id_of(attr::LANGUAGE).ok();
    let tagged = target.transactions.iter().filter_map(|t| {
        let user = author(t, dictionary)?;
        let lang = t
            .items()
            .iter()
            .find(|&&i| Some(dictionary.attribute_of(i)) == language)?;
        Some((user, dictionary.value_of(*lang)))
    });
    majority_language(tagged, suspect_language)
}

fn majority_language<'a>(posts: impl Iterator<Item = (&'a str, &'a str)>, suspect_language: &str) -> BTreeSet<String> {
    let mut counts: BTreeMap<&str, HashMap<&str, usize>> = BTreeMap::new();
    for (user, lang) in posts {
        *counts.entry(user).or_default().entry(lang).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|(_, langs)| {
            let suspect = langs.get(suspect_language).copied().unwrap_or(0);
            suspect > 0
                && langs
                    .iter()
                    .all(|(l, &n)| *l == suspect_language || n < suspect)
        })
        .map(|(u, _)| u.to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PurityClass {
    PureCoordinated,
    PureNormal,
    Mixed,
}

impl PurityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PurityClass::PureCoordinated => "PURE_COORDINATED",
            PurityClass::PureNormal => "PURE_NORMAL",
            PurityClass::Mixed => "MIXED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PurityRecord {
    /// b(p): the pattern without its user items.
    pub behavioural_pattern: Vec<ItemId>,
    pub purity: Fraction,
    pub posts_in_target: u64,
    pub coordinated_posts: u64,
    pub user_count: usize,
    pub class: PurityClass,
}

impl PurityRecord {
    pub fn purity_f64(&self) -> f64 {
        crate::model::fraction_to_f64(self.purity)
    }
}

fn behaviour_of(pattern: &ContrastPattern, dictionary: &ItemDictionary) -> (Vec<ItemId>, Vec<ItemId>) {
    pattern.items.iter().partition(|&&i| !dictionary.is_user_item(i))
}

/// Target-window postings for the items of interest, plus which
/// transactions coordinated users wrote.
struct TargetIndex {
    postings: HashMap<ItemId, Vec<u32>>,
    coordinated: Vec<bool>,
}

impl TargetIndex {
    fn new(
        items: &BTreeSet<ItemId>,
        target: &TransactionDataset,
        coordinated: &BTreeSet<String>,
        dictionary: &ItemDictionary,
    ) -> Self {
        let mut postings: HashMap<ItemId, Vec<u32>> = items.iter().map(|&i| (i, Vec::new())).collect();
        let mut flags = Vec::with_capacity(target.len());
        for (n, t) in target.transactions.iter().enumerate() {
            flags.push(author(t, dictionary).is_some_and(|u| coordinated.contains(u)));
            for i in t.items() {
                if let Some(list) = postings.get_mut(i) {
                    list.push(n as u32);
                }
            }
        }
        Self {
            postings,
            coordinated: flags,
        }
    }

    fn matches(&self, pattern: &[ItemId]) -> Vec<u32> {
        let mut lists: Vec<&Vec<u32>> = pattern.iter().map(|i| &self.postings[i]).collect();
        lists.sort_by_key(|l| l.len());
        let mut acc = lists[0].clone();
        for l in &lists[1..] {
            acc.retain(|x| l.binary_search(x).is_ok());
        }
        acc
    }

    fn record(&self, behaviour: Vec<ItemId>, user_count: usize) -> PurityRecord {
        let hits = self.matches(&behaviour);
        let all = hits.len() as u64;
        let coord = hits.iter().filter(|&&n| self.coordinated[n as usize]).count() as u64;
        assert!(all > 0, "behavioural pattern does not occur in the target window");
        let purity = Fraction::new(coord, all);
        let class = if coord == all {
            PurityClass::PureCoordinated
        } else if coord == 0 {
            PurityClass::PureNormal
        } else {
            PurityClass::Mixed
        };
        PurityRecord {
            behavioural_pattern: behaviour,
            purity,
            posts_in_target: all,
            coordinated_posts: coord,
            user_count,
            class,
        }
    }
}

/// Share of the target posts matching b(p) that coordinated users wrote.
/// Panics if b(p) never occurs in `target`, which a mined pattern rules out.
pub fn purity(
    pattern: &ContrastPattern,
    target: &TransactionDataset,
    coordinated: &BTreeSet<String>,
    dictionary: &ItemDictionary,
) -> Result<PurityRecord> {
    let (behaviour, users) = behaviour_of(pattern, dictionary);
    if behaviour.is_empty() {
        return Err(Error::EmptyBehaviour);
    }
    let users: BTreeSet<ItemId> = users.into_iter().collect();
    let index = TargetIndex::new(&behaviour.iter().copied().collect(), target, coordinated, dictionary);
    debug_assert!(index.matches(&behaviour).len() as u64 == support_count(&behaviour, target));
    Ok(index.record(behaviour, users.len()))
}

/// One record per distinct b(p) among user-bearing patterns, with
/// `user_count` the number of distinct users whose patterns share it.
/// Sorted by purity descending, then b(p).
pub fn purity_table(
    patterns: &[ContrastPattern],
    target: &TransactionDataset,
    coordinated: &BTreeSet<String>,
    dictionary: &ItemDictionary,
) -> Vec<PurityRecord> {
    let mut groups: BTreeMap<Vec<ItemId>, BTreeSet<ItemId>> = BTreeMap::new();
    for p in patterns {
        let (behaviour, users) = behaviour_of(p, dictionary);
        if behaviour.is_empty() || users.is_empty() {
            continue;
        }
        groups.entry(behaviour).or_default().extend(users);
    }
    let items: BTreeSet<ItemId> = groups.keys().flatten().copied().collect();
    let index = TargetIndex::new(&items, target, coordinated, dictionary);
    let mut out: Vec<PurityRecord> = groups
        .into_par_iter()
        .map(|(b, users)| index.record(b, users.len()))
        .collect();
    out.sort_by(|a, b| {
        b.purity
            .cmp(&a.purity)
            .then_with(|| a.behavioural_pattern.cmp(&b.behavioural_pattern))
    });
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub sigma: u64,
    pub rho: Fraction,
    pub metrics: EvalMetrics,
    /// |𝒫_user|.
    pub pattern_count: usize,
    /// |𝒫| before the user filter.
    pub total_patterns: usize,
    pub suspicious_users: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sigmas: Vec<u64>,
    pub rhos: Vec<Fraction>,
    /// Sigma-major: cell `(i, j)` is at `i * rhos.len() + j`.
    pub cells: Vec<SweepCell>,
    /// First cell with the highest F1.
    pub best: usize,
}

impl SweepResult {
    pub fn best_cell(&self) -> &SweepCell {
        &self.cells[self.best]
    }

    pub fn cell(&self, sigma_index: usize, rho_index: usize) -> &SweepCell {
        &self.cells[sigma_index * self.rhos.len() + rho_index]
    }

    /// Grid neighbours where `pattern_count` rises along an axis whose
    /// threshold rises. Empty when both axes are ascending and the miner is
    /// monotone.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.sigmas.len() {
            for j in 0..self.rhos.len() {
                let here = self.cell(i, j);
                if i + 1 < self.sigmas.len() && self.sigmas[i + 1] >= self.sigmas[i] {
                    let next = self.cell(i + 1, j);
                    if next.pattern_count > here.pattern_count {
                        out.push((i, j, i + 1, j));
                    }
                }
                if j + 1 < self.rhos.len() && self.rhos[j + 1] >= self.rhos[j] {
                    let next = self.cell(i, j + 1);
                    if next.pattern_count > here.pattern_count {
                        out.push((i, j, i, j + 1));
                    }
                }
            }
        }
        out
    }
}

pub fn default_sigma_grid() -> Vec<u64> {
    vec![1, 2, 5, 10, 20, 50, 100]
}

pub fn default_rho_grid() -> Vec<Fraction> {
    [1.1, 1.2, 1.5, 2.0, 3.0, 5.0, 10.0]
        .iter()
        .map(|&r| fraction_from_f64(r).expect("static grid"))
        .collect()
}

fn check_grids(sigmas: &[u64], rhos: &[Fraction]) -> Result<()> {
    if sigmas.is_empty() || rhos.is_empty() {
        return Err(Error::InvalidParams("sweep grids must be non-empty".into()));
    }
    Ok(())
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Runs mine, detect and evaluate at every `(sigma, rho)` grid point. The
/// remaining mining parameters come from `fixed`. Closed patterns are mined
/// once per sigma and filtered per rho. Labels are restricted to the users
/// present in the datasets.
pub fn sweep(
    background: &TransactionDataset,
    target: &TransactionDataset,
    dictionary: &ItemDictionary,
    labels: &LabeledUserSet,
    sigmas: &[u64],
    rhos: &[Fraction],
    fixed: &MiningParams,
) -> Result<SweepResult> {
    check_grids(sigmas, rhos)?;
    let params_at = |sigma: u64, rho: Fraction| MiningParams {
        sigma,
        rho,
        ..fixed.clone()
    };
    for &s in sigmas {
        for &r in rhos {
            params_at(s, r).validate()?;
        }
    }
    let labels = labels.restrict(&dataset_users(background, target, dictionary));
    let rows: Vec<Vec<SweepCell>> = sigmas
        .par_iter()
        .map(|&sigma| -> Result<Vec<SweepCell>> {
            let closed = mine_closed(background, target, &params_at(sigma, rhos[0]))?;
            rhos.iter()
                .map(|&rho| {
                    let params = params_at(sigma, rho);
                    let patterns = select_contrast(&closed, &params);
                    let report = suspicious_users(&patterns, dictionary, Some(&params))?;
                    Ok(SweepCell {
                        sigma,
                        rho,
                        metrics: evaluate(&report.suspicious_users, &labels)?,
                        pattern_count: report.user_pattern_count,
                        total_patterns: patterns.len(),
                        suspicious_users: report.suspicious_users.len(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let cells: Vec<SweepCell> = rows.into_iter().flatten().collect();
    let best = argmax_first(cells.iter().map(|c| c.metrics.f1));
    Ok(SweepResult {
        sigmas: sigmas.to_vec(),
        rhos: rhos.to_vec(),
        cells,
        best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationMode {
    Subtractive,
    Additive,
}

impl std::str::FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "subtractive" => Ok(AblationMode::Subtractive),
            "additive" => Ok(AblationMode::Additive),
            other => Err(Error::BadConfig(format!("unknown ablation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationStep {
    /// Attribute removed (subtractive) or added (additive).
    pub attribute: String,
    /// Attribute set after the step, in schema order.
    pub attributes: Vec<String>,
    pub best_sigma: u64,
    pub best_rho: Fraction,
    pub best_f1: f64,
    pub pattern_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTrace {
    pub mode: AblationMode,
    pub steps: Vec<AblationStep>,
}

/// Inputs shared by every ablation candidate.
#[derive(Debug, Clone)]
pub struct AblationSetup<'a> {
    pub background: &'a [RawPost],
    pub target: &'a [RawPost],
    pub labels: &'a LabeledUserSet,
    /// Base preprocessing; its enabled attributes are the full set 𝒜.
    pub preprocess: &'a PreprocessConfig,
    /// Restrict both windows to users active in each before encoding.
    pub common_users: bool,
    pub sigmas: &'a [u64],
    pub rhos: &'a [Fraction],
    pub fixed: &'a MiningParams,
}

fn schema_order(set: &BTreeSet<String>) -> Vec<String> {
    attr::ALL
        .iter()
        .filter(|a| set.contains(**a))
        .map(|a| a.to_string())
        .collect()
}

fn evaluate_attributes(setup: &AblationSetup<'_>, attributes: &BTreeSet<String>) -> Result<SweepCell> {
    let config = PreprocessConfig {
        enabled_attributes: attributes.clone(),
        ..setup.preprocess.clone()
    };
    let data = if setup.common_users {
        let c = common_users(setup.background.to_vec(), setup.target.to_vec())?;
        build_datasets(&c.background, &c.target, &config)?
    } else {
        build_datasets(setup.background, setup.target, &config)?
    };
    let result = sweep(
        &data.background,
        &data.target,
        &data.dictionary,
        setup.labels,
        setup.sigmas,
        setup.rhos,
        setup.fixed,
    )?;
    Ok(result.best_cell().clone())
}

/// Greedy attribute ablation. Subtractive removes, at each step, the
/// attribute whose removal gives the lowest best-F1 until only the user
/// attribute is left; additive adds the attribute giving the highest best-F1
/// until the full set is reached. Ties go to the smaller attribute name.
pub fn ablate(setup: &AblationSetup<'_>, mode: AblationMode) -> Result<AblationTrace> {
    setup.preprocess.validate()?;
    let full = &setup.preprocess.enabled_attributes;
    if full.len() < 2 {
        return Err(Error::InvalidParams("ablation needs at least two attributes".into()));
    }
    let mut current: BTreeSet<String> = match mode {
        AblationMode::Subtractive => full.clone(),
        AblationMode::Additive => [attr::USERID.to_string()].into(),
    };
    let mut steps = Vec::with_capacity(full.len() - 1);
    loop {
        // BTreeSet iteration gives candidates in name order
        let candidates: Vec<&String> = match mode {
            AblationMode::Subtractive => current.iter().filter(|a| *a != attr::USERID).collect(),
            AblationMode::Additive => full.iter().filter(|a| !current.contains(*a)).collect(),
        };
        if candidates.is_empty() {
            break;
        }
        let scored: Vec<(String, BTreeSet<String>, SweepCell)> = candidates
            .par_iter()
            .map(|&a| {
                let mut next = current.clone();
                match mode {
                    AblationMode::Subtractive => next.remove(a),
                    AblationMode::Additive => next.insert(a.clone()),
                };
                let cell = evaluate_attributes(setup, &next)?;
                Ok((a.clone(), next, cell))
            })
            .collect::<Result<_>>()?;
        let mut pick = 0;
        for (i, (_, _, cell)) in scored.iter().enumerate().skip(1) {
            let best = scored[pick].2.metrics.f1;
            let better = match mode {
                AblationMode::Subtractive => cell.metrics.f1 < best,
                AblationMode::Additive => cell.metrics.f1 > best,
            };
            if better {
                pick = i;
            }
        }
        let (attribute, next, cell) = scored.into_iter().nth(pick).expect("non-empty candidates");
        steps.push(AblationStep {
            attribute,
            attributes: schema_order(&next),
            best_sigma: cell.sigma,
            best_rho: cell.rho,
            best_f1: cell.metrics.f1,
            pattern_count: cell.pattern_count,
        });
        current = next;
    }
    Ok(AblationTrace { mode, steps })
}
