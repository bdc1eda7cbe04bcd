//! Pattern filtering and suspicious-user extraction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::miner::MiningParams;
use crate::model::{AttributeId, ContrastPattern, Growth, ItemDictionary, ItemId};

/// Attributes a pattern must mention to pass the filter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeFilter {
    pub required: BTreeSet<String>,
}

impl AttributeFilter {
    pub fn new<'a>(required: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            required: required.into_iter().map(str::to_string).collect(),
        }
    }

    /// The filter used for detection: `{user attribute}`.
    pub fn user(dictionary: &ItemDictionary) -> Self {
        let schema = dictionary.schema();
        Self::new([schema.name(schema.user_attribute())])
    }

    fn resolve(&self, dictionary: &ItemDictionary) -> Result<Vec<AttributeId>> {
        self.required
            .iter()
            .map(|name| dictionary.schema().id_of(name))
            .collect()
    }
}

pub fn attributes_of(pattern: &ContrastPattern, dictionary: &ItemDictionary) -> BTreeSet<AttributeId> {
    pattern
        .items
        .iter()
        .map(|&i| dictionary.attribute_of(i))
        .collect()
}

/// Patterns whose attribute set covers `filter.required`. Unknown attribute
/// names are an error.
pub fn filter_patterns(
    patterns: &[ContrastPattern],
    filter: &AttributeFilter,
    dictionary: &ItemDictionary,
) -> Result<Vec<ContrastPattern>> {
    let required = filter.resolve(dictionary)?;
    Ok(patterns
        .iter()
        .filter(|p| {
            let attrs = attributes_of(p, dictionary);
            required.iter().all(|a| attrs.contains(a))
        })
        .cloned()
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionReport {
    pub suspicious_users: BTreeSet<String>,
    pub supporting_patterns: BTreeMap<String, Vec<ContrastPattern>>,
    pub params: Option<MiningParams>,
    /// |𝒫|: patterns handed to the extractor.
    pub pattern_count: usize,
    /// |𝒫_user|: user-bearing patterns with behavioural content.
    pub user_pattern_count: usize,
}

impl DetectionReport {
    /// Largest growth among a user's supporting patterns.
    pub fn max_growth(&self, user: &str) -> Option<Growth> {
        self.supporting_patterns
            .get(user)?
            .iter()
            .map(|p| p.stats.growth())
            .max()
    }

    /// Users by descending max growth, then id. Informational only.
    pub fn ranked_users(&self) -> Vec<(&str, Growth)> {
        let mut out: Vec<(&str, Growth)> = self
            .suspicious_users
            .iter()
            .filter_map(|u| self.max_growth(u).map(|g| (u.as_str(), g)))
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        out
    }
}

/// Keeps user-bearing patterns with at least one non-user item and credits
/// each one to every user value it contains.
pub fn suspicious_users(
    patterns: &[ContrastPattern],
    dictionary: &ItemDictionary,
    params: Option<&MiningParams>,
) -> Result<DetectionReport> {
    let with_user = filter_patterns(patterns, &AttributeFilter::user(dictionary), dictionary)?;
    let mut supporting: BTreeMap<String, Vec<ContrastPattern>> = BTreeMap::new();
    let mut user_pattern_count = 0;
    for p in with_user {
        let (users, behaviour): (Vec<&ItemId>, Vec<&ItemId>) =
            p.items.iter().partition(|&&i| dictionary.is_user_item(i));
        if behaviour.is_empty() {
            continue;
        }
        user_pattern_count += 1;
        for u in users {
            supporting
                .entry(dictionary.value_of(*u).to_string())
                .or_default()
                .push(p.clone());
        }
    }
    Ok(DetectionReport {
        suspicious_users: supporting.keys().cloned().collect(),
        supporting_patterns: supporting,
        params: params.cloned(),
        pattern_count: patterns.len(),
        user_pattern_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::{mine_closed_contrast, ThresholdSide};
    use crate::model::example::{datasets, items};
    use crate::model::{pattern_stats, Fraction, PatternStats, Schema};

    fn dict() -> ItemDictionary {
        let schema = Schema::new(
            vec![
                crate::model::AttributeSpec { name: "userid".into(), multi_valued: false },
                crate::model::AttributeSpec { name: "is_retweet".into(), multi_valued: false },
                crate::model::AttributeSpec { name: "hashtag".into(), multi_valued: true },
            ],
            "userid",
        )
        .unwrap();
        let mut d = ItemDictionary::new(schema);
        d.encode_transaction(
            "x",
            &[("userid", "u1"), ("userid", "u1"), ("is_retweet", "true"), ("hashtag", "maga")],
            true,
        )
        .unwrap();
        d.encode_transaction("y", &[("userid", "u2")], true).unwrap();
        d.freeze();
        d
    }

    fn pat(d: &ItemDictionary, pairs: &[(&str, &str)]) -> ContrastPattern {
        ContrastPattern::new(items(d, pairs), PatternStats::new(1, 3, 5, 5))
    }

    #[test]
    fn filter_examples() {
        let d = dict();
        let a = pat(&d, &[("hashtag", "maga"), ("is_retweet", "true")]);
        let b = pat(&d, &[("userid", "u1"), ("is_retweet", "true")]);
        let all = vec![a.clone(), b.clone()];
        let user = AttributeFilter::new(["userid"]);
        assert_eq!(filter_patterns(&all, &user, &d).unwrap(), vec![b.clone()]);
        assert_eq!(filter_patterns(&all, &AttributeFilter::default(), &d).unwrap(), all);
        let both = AttributeFilter::new(["userid", "hashtag"]);
        assert!(filter_patterns(&all, &both, &d).unwrap().is_empty());
        assert!(filter_patterns(&all, &AttributeFilter::new(["nope"]), &d).is_err());
    }

    #[test]
    fn singleton_user_patterns_are_dropped() {
        let d = dict();
        let r = suspicious_users(&[pat(&d, &[("userid", "u1")])], &d, None).unwrap();
        assert!(r.suspicious_users.is_empty());
        assert_eq!(r.pattern_count, 1);
        assert_eq!(r.user_pattern_count, 0);
        let empty = suspicious_users(&[], &d, None).unwrap();
        assert!(empty.suspicious_users.is_empty());
        assert_eq!(empty.pattern_count, 0);
    }

    #[test]
    fn every_user_value_is_credited() {
        let d = dict();
        let p = pat(&d, &[("userid", "u1"), ("userid", "u2"), ("hashtag", "maga")]);
        let r = suspicious_users(&[p], &d, None).unwrap();
        assert_eq!(r.suspicious_users.len(), 2);
        assert_eq!(r.user_pattern_count, 1);
    }

    #[test]
    fn example_table_yields_u1() {
        let (b, t, d) = datasets();
        let params = MiningParams::new(2, Fraction::new(3, 2), ThresholdSide::Target);
        let pats = mine_closed_contrast(&b, &t, &params).unwrap();
        let r = suspicious_users(&pats, &d, Some(&params)).unwrap();
        assert_eq!(r.suspicious_users.iter().collect::<Vec<_>>(), vec!["u1"]);
        let p0 = items(&d, &[("u", "u1"), ("r", "yes"), ("ota", "u2")]);
        assert_eq!(r.supporting_patterns["u1"][0].items, p0);
        assert_eq!(r.supporting_patterns["u1"][0].stats, pattern_stats(&p0, &b, &t));
        assert_eq!(r.max_growth("u1"), Some(Growth::Finite(Fraction::from_integer(3))));
        assert_eq!(r.ranked_users().len(), 1);
    }
}
