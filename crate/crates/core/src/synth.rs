//! Seeded two-window post corpora with planted coordinated behaviour.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{attr, time_slot, weekday_index, LabeledUserSet, PartitionSpec, RawPost, UserClass, WEEKDAYS};

/// A behavioural item set that participating coordinated users adopt with
/// a per-post probability that rises between the windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPattern {
    /// `(attribute, value)` pairs; any attribute except `userid`.
    pub items: Vec<(String, String)>,
    /// Fraction of coordinated users adopting the pattern.
    pub participation: f64,
    pub background_rate: f64,
    pub target_rate: f64,
}

impl PlantedPattern {
    pub fn new(items: &[(&str, &str)], participation: f64, background_rate: f64, target_rate: f64) -> Self {
        Self {
            items: items.iter().map(|(a, v)| (a.to_string(), v.to_string())).collect(),
            participation,
            background_rate,
            target_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_normal: usize,
    pub n_coordinated: usize,
    /// Mean posts per normal user per window.
    pub posts_per_user_background: usize,
    pub posts_per_user_target: usize,
    /// Coordinated users post this many times more than normal users, in
    /// both windows alike.
    pub coordinated_volume_factor: usize,
    /// Per-user, per-window post counts vary uniformly by ± this fraction.
    pub volume_jitter: f64,
    pub hashtag_vocab: usize,
    pub client_vocab: usize,
    pub language_vocab: usize,
    pub location_vocab: usize,
    pub mention_pool: usize,
    pub planted_patterns: Vec<PlantedPattern>,
    /// Per-post probability that a normal user picks up a trending hashtag
    /// in the target window; a quarter of it applies to the background.
    pub noise_drift: f64,
    pub drift_vocab: usize,
    pub partition: PartitionSpec,
    pub slots_per_day: u32,
}

/// 2015-01-01 to 2015-05-31 and 2016-07-01 to 2016-11-30, UTC.
pub const DEFAULT_PARTITION: PartitionSpec = PartitionSpec {
    t0: 1_420_070_400,
    t1: 1_433_116_799,
    t2: 1_467_331_200,
    t3: 1_480_550_399,
};

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_normal: 50,
            n_coordinated: 50,
            posts_per_user_background: 12,
            posts_per_user_target: 12,
            coordinated_volume_factor: 25,
            volume_jitter: 0.1,
            hashtag_vocab: 300,
            client_vocab: 6,
            language_vocab: 8,
            location_vocab: 40,
            mention_pool: 500,
            planted_patterns: campaign_patterns(10, 0.6, 0.05, 0.4),
            noise_drift: 0.3,
            drift_vocab: 1,
            partition: DEFAULT_PARTITION,
            slots_per_day: 12,
        }
    }
}

/// `k` disjoint campaign patterns, each two campaign hashtags plus a
/// mentioned account.
pub fn campaign_patterns(k: usize, participation: f64, background_rate: f64, target_rate: f64) -> Vec<PlantedPattern> {
    (0..k)
        .map(|i| PlantedPattern {
            items: vec![
                (attr::HASHTAG.into(), format!("op{i}a")),
                (attr::HASHTAG.into(), format!("op{i}b")),
                (attr::USER_MENTIONS.into(), format!("c{i:03}")),
            ],
            participation,
            background_rate,
            target_rate,
        })
        .collect()
}

/// One pattern per listed slot, each fixing only `time_of_day`.
pub fn time_slot_patterns(slots: &[u32], participation: f64, background_rate: f64, target_rate: f64) -> Vec<PlantedPattern> {
    slots
        .iter()
        .map(|s| PlantedPattern {
            items: vec![(attr::TIME_OF_DAY.into(), s.to_string())],
            participation,
            background_rate,
            target_rate,
        })
        .collect()
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if self.n_normal + self.n_coordinated == 0 {
            return bad("synthetic corpus needs at least one user".into());
        }
        if self.posts_per_user_background == 0 || self.posts_per_user_target == 0 || self.coordinated_volume_factor == 0 {
            return bad("synthetic corpus needs a positive post volume".into());
        }
        if !(0.0..1.0).contains(&self.volume_jitter) {
            return bad(format!("volume_jitter must be in [0, 1), got {}", self.volume_jitter));
        }
        if !(0.0..=1.0).contains(&self.noise_drift) {
            return bad(format!("noise_drift must be in [0, 1], got {}", self.noise_drift));
        }
        for (name, v) in [
            ("hashtag_vocab", self.hashtag_vocab),
            ("client_vocab", self.client_vocab),
            ("language_vocab", self.language_vocab),
            ("location_vocab", self.location_vocab),
            ("mention_pool", self.mention_pool),
            ("drift_vocab", self.drift_vocab),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.slots_per_day == 0 || 1440 % self.slots_per_day != 0 {
            return bad(format!("slots_per_day must divide 1440, got {}", self.slots_per_day));
        }
        self.partition.validate()?;
        for (i, p) in self.planted_patterns.iter().enumerate() {
            let rates = [p.participation, p.background_rate, p.target_rate];
            if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return bad(format!("planted pattern {i}: rates must be in [0, 1]"));
            }
            if p.target_rate <= p.background_rate {
                return bad(format!("planted pattern {i}: target rate must exceed background rate"));
            }
            if p.items.is_empty() {
                return bad(format!("planted pattern {i} has no items"));
            }
            for (a, v) in &p.items {
                Override::parse(a, v, self.slots_per_day).map_err(|m| Error::BadConfig(format!("planted pattern {i}: {m}")))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRecord {
    pub items: Vec<(String, String)>,
    pub participants: Vec<String>,
    pub background_rate: f64,
    pub target_rate: f64,
    /// `target_rate / background_rate`.
    pub expected_growth: f64,
    /// Posts the pattern was written into, per window.
    pub applied_background: usize,
    pub applied_target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    pub partition: PartitionSpec,
    pub planted: Vec<PlantedRecord>,
    /// Items normal users drift towards in the target window.
    pub drift_items: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub background: Vec<RawPost>,
    pub target: Vec<RawPost>,
    pub labels: LabeledUserSet,
    pub manifest: SynthManifest,
}

impl SynthCorpus {
    pub fn all_posts(&self) -> Vec<RawPost> {
        self.background.iter().chain(&self.target).cloned().collect()
    }
}

/// A single planted item, resolved to the post field it fixes.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Override {
    Location(String),
    Language(String),
    Client(String),
    Retweet(bool),
    RetweetOf(String),
    Hashtag(String),
    Mention(String),
    Day(usize),
    Slot(u32),
}

impl Override {
    fn parse(attribute: &str, value: &str, slots_per_day: u32) -> std::result::Result<Self, String> {
        Ok(match attribute {
            attr::LOCATION => Override::Location(value.into()),
            attr::LANGUAGE => Override::Language(value.into()),
            attr::CLIENT => Override::Client(value.into()),
            attr::IS_RETWEET => Override::Retweet(match value {
                "true" => true,
                "false" => false,
                _ => return Err(format!("is_retweet must be true or false, got `{value}`")),
            }),
            attr::RETWEET_USERID => Override::RetweetOf(value.into()),
            attr::HASHTAG => Override::Hashtag(value.into()),
            attr::USER_MENTIONS => Override::Mention(value.into()),
            attr::DAY_OF_WEEK => Override::Day(
                WEEKDAYS
                    .iter()
                    .position(|d| *d == value)
                    .ok_or_else(|| format!("unknown weekday `{value}`"))?,
            ),
            attr::TIME_OF_DAY => {
                let s: u32 = value.parse().map_err(|_| format!("bad time slot `{value}`"))?;
                if s >= slots_per_day {
                    return Err(format!("time slot {s} out of range"));
                }
                Override::Slot(s)
            }
            attr::USERID => return Err("planted patterns cannot fix the user".into()),
            other => return Err(format!("unknown attribute `{other}`")),
        })
    }
}

/// Fields fixed so far by planted patterns on one post.
#[derive(Default)]
struct Fixed {
    location: Option<String>,
    language: Option<String>,
    client: Option<String>,
    retweet: Option<bool>,
    retweet_of: Option<String>,
    day: Option<usize>,
    slot: Option<u32>,
    hashtags: Vec<String>,
    mentions: Vec<String>,
}

impl Fixed {
    /// Adds all overrides of one pattern, or none if any conflicts.
    fn try_apply(&mut self, overrides: &[Override]) -> bool {
        let mut next = Fixed {
            location: self.location.clone(),
            language: self.language.clone(),
            client: self.client.clone(),
            retweet: self.retweet,
            retweet_of: self.retweet_of.clone(),
            day: self.day,
            slot: self.slot,
            hashtags: self.hashtags.clone(),
            mentions: self.mentions.clone(),
        };
        fn set<T: PartialEq + Clone>(slot: &mut Option<T>, v: &T) -> bool {
            match slot {
                Some(cur) => cur == v,
                None => {
                    *slot = Some(v.clone());
                    true
                }
            }
        }
        for o in overrides {
            let ok = match o {
                Override::Location(v) => set(&mut next.location, v),
                Override::Language(v) => set(&mut next.language, v),
                Override::Client(v) => set(&mut next.client, v),
                Override::Retweet(v) => set(&mut next.retweet, v),
                Override::RetweetOf(v) => set(&mut next.retweet, &true) && set(&mut next.retweet_of, v),
                Override::Day(v) => set(&mut next.day, v),
                Override::Slot(v) => set(&mut next.slot, v),
                Override::Hashtag(v) => {
                    next.hashtags.push(v.clone());
                    true
                }
                Override::Mention(v) => {
                    next.mentions.push(v.clone());
                    true
                }
            };
            if !ok || (next.retweet == Some(false) && next.retweet_of.is_some()) {
                return false;
            }
        }
        *self = next;
        true
    }
}

/// Stationary per-user preferences.
struct Persona {
    location: usize,
    language: usize,
    client: usize,
    retweet_p: f64,
    hashtags: Vec<usize>,
    mentions: Vec<usize>,
    retweets_of: Vec<usize>,
}

const DOMINANT_P: f64 = 0.9;

struct Generator<'a> {
    config: &'a SynthConfig,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn pick(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn skewed(&mut self, n: usize) -> usize {
        // squaring a uniform draw favours small indices
        let u: f64 = self.rng.gen();
        ((u * u * n as f64) as usize).min(n - 1)
    }

    fn persona(&mut self) -> Persona {
        let c = self.config;
        let distinct = |g: &mut Self, n: usize, k: usize| -> Vec<usize> {
            let mut v: Vec<usize> = (0..k).map(|_| g.pick(n)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        Persona {
            location: self.skewed(c.location_vocab),
            language: self.skewed(c.language_vocab),
            client: self.skewed(c.client_vocab),
            retweet_p: self.rng.gen_range(0.1..0.5),
            hashtags: distinct(self, c.hashtag_vocab, 5),
            mentions: distinct(self, c.mention_pool, 3),
            retweets_of: distinct(self, c.mention_pool, 3),
        }
    }

    fn dominant(&mut self, own: usize, n: usize) -> usize {
        if self.rng.gen_bool(DOMINANT_P) {
            own
        } else {
            self.pick(n)
        }
    }

    fn volume(&mut self, mean: usize) -> usize {
        let j = self.config.volume_jitter;
        let f: f64 = if j > 0.0 { self.rng.gen_range(1.0 - j..=1.0 + j) } else { 1.0 };
        ((mean as f64 * f).round() as usize).max(1)
    }

    fn timestamp(&mut self, lo: i64, hi: i64, day: Option<usize>, slot: Option<u32>) -> i64 {
        loop {
            let ts = self.rng.gen_range(lo..=hi);
            if day.is_some_and(|d| weekday_index(ts, 0) != d) {
                continue;
            }
            if slot.is_some_and(|s| time_slot(ts, 0, self.config.slots_per_day) != s) {
                continue;
            }
            return ts;
        }
    }

    fn base_post(&mut self, user: &str, who: &Persona, window: (i64, i64), fixed: Fixed) -> RawPost {
        let c = self.config;
        let location = fixed
            .location
            .unwrap_or_else(|| format!("loc{:02}", self.dominant(who.location, c.location_vocab)));
        let language = fixed
            .language
            .unwrap_or_else(|| LANGUAGES[self.dominant(who.language, c.language_vocab) % LANGUAGES.len()].to_string());
        let client = fixed
            .client
            .unwrap_or_else(|| format!("client{:02}", self.dominant(who.client, c.client_vocab)));
        let is_retweet = fixed
            .retweet
            .unwrap_or_else(|| self.rng.gen_bool(who.retweet_p));
        let retweeted_user_id = is_retweet.then(|| {
            fixed.retweet_of.clone().unwrap_or_else(|| {
                let id = if self.rng.gen_bool(0.7) {
                    who.retweets_of[self.pick(who.retweets_of.len())]
                } else {
                    self.pick(c.mention_pool)
                };
                format!("m{id:05}")
            })
        });
        let mut hashtags = Vec::new();
        for _ in 0..self.pick(3) {
            let h = if self.rng.gen_bool(0.8) {
                who.hashtags[self.pick(who.hashtags.len())]
            } else {
                self.pick(c.hashtag_vocab)
            };
            hashtags.push(format!("tag{h:03}"));
        }
        hashtags.extend(fixed.hashtags);
        let mut user_mentions = Vec::new();
        if self.rng.gen_bool(0.3) {
            user_mentions.push(format!("m{:05}", who.mentions[self.pick(who.mentions.len())]));
        }
        user_mentions.extend(fixed.mentions);
        let timestamp = self.timestamp(window.0, window.1, fixed.day, fixed.slot);
        RawPost {
            post_id: String::new(),
            user_id: user.to_string(),
            timestamp,
            reported_location: Some(location),
            language: Some(language),
            client_name: Some(client),
            is_retweet,
            retweeted_user_id,
            hashtags,
            user_mentions,
        }
    }
}

const LANGUAGES: [&str; 12] = ["en", "es", "ru", "de", "fr", "pt", "ar", "it", "ja", "tr", "nl", "ko"];

/// Generates a labelled corpus. The output depends only on `config`.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut g = Generator {
        config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };
    let n_users = config.n_normal + config.n_coordinated;
    let mut ids: Vec<usize> = (0..n_users).collect();
    ids.shuffle(&mut g.rng);
    let user_name = |i: usize| format!("u{:05}", ids[i]);
    // users 0..n_coordinated are coordinated
    let mut labels = LabeledUserSet::default();
    for i in 0..n_users {
        let class = if i < config.n_coordinated { UserClass::Coordinated } else { UserClass::Normal };
        labels.insert(user_name(i), class);
    }

    let overrides: Vec<Vec<Override>> = config
        .planted_patterns
        .iter()
        .map(|p| {
            p.items
                .iter()
                .map(|(a, v)| Override::parse(a, v, config.slots_per_day).expect("validated"))
                .collect()
        })
        .collect();
    let participants: Vec<BTreeSet<usize>> = config
        .planted_patterns
        .iter()
        .map(|p| {
            let k = ((p.participation * config.n_coordinated as f64).round() as usize).min(config.n_coordinated);
            let mut all: Vec<usize> = (0..config.n_coordinated).collect();
            all.shuffle(&mut g.rng);
            all.into_iter().take(k).collect()
        })
        .collect();
    let drift_items: Vec<String> = (0..config.drift_vocab).map(|k| format!("trend{k}")).collect();

    let spec = config.partition;
    let windows = [(spec.t0, spec.t1), (spec.t2, spec.t3)];
    let means = [config.posts_per_user_background, config.posts_per_user_target];
    let mut applied = vec![[0usize; 2]; config.planted_patterns.len()];
    let mut posts: [Vec<RawPost>; 2] = [Vec::new(), Vec::new()];

    for u in 0..n_users {
        let coordinated = u < config.n_coordinated;
        let name = user_name(u);
        let persona = g.persona();
        for w in 0..2 {
            let mean = means[w] * if coordinated { config.coordinated_volume_factor } else { 1 };
            let n = g.volume(mean);
            for _ in 0..n {
                let mut fixed = Fixed::default();
                if coordinated {
                    for (k, p) in config.planted_patterns.iter().enumerate() {
                        if !participants[k].contains(&u) {
                            continue;
                        }
                        let rate = if w == 0 { p.background_rate } else { p.target_rate };
                        if g.rng.gen_bool(rate) && fixed.try_apply(&overrides[k]) {
                            applied[k][w] += 1;
                        }
                    }
                } else {
                    let drift = if w == 0 { config.noise_drift / 4.0 } else { config.noise_drift };
                    if g.rng.gen_bool(drift) {
                        fixed.hashtags.push(drift_items[g.pick(drift_items.len())].clone());
                    }
                }
                let post = g.base_post(&name, &persona, windows[w], fixed);
                posts[w].push(post);
            }
        }
    }

    let mut next_id = 0usize;
    for window in posts.iter_mut() {
        window.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.user_id.cmp(&b.user_id)));
        for p in window.iter_mut() {
            p.post_id = format!("{next_id:08}");
            next_id += 1;
        }
    }
    let [background, target] = posts;

    let planted = config
        .planted_patterns
        .iter()
        .enumerate()
        .map(|(k, p)| PlantedRecord {
            items: p.items.clone(),
            participants: participants[k].iter().map(|&u| user_name(u)).collect::<BTreeSet<_>>().into_iter().collect(),
            background_rate: p.background_rate,
            target_rate: p.target_rate,
            expected_growth: if p.background_rate > 0.0 {
                p.target_rate / p.background_rate
            } else {
                f64::INFINITY
            },
            applied_background: applied[k][0],
            applied_target: applied[k][1],
        })
        .collect();
    Ok(SynthCorpus {
        background,
        target,
        labels,
        manifest: SynthManifest {
            seed: config.seed,
            partition: spec,
            planted,
            drift_items: drift_items.into_iter().map(|t| (attr::HASHTAG.to_string(), t)).collect(),
        },
    })
}

/// Posts per user in one window.
pub fn posts_per_user(posts: &[RawPost]) -> BTreeMap<&str, usize> {
    let mut out = BTreeMap::new();
    for p in posts {
        *out.entry(p.user_id.as_str()).or_default() += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_datasets, PreprocessConfig};

    fn small() -> SynthConfig {
        SynthConfig {
            n_normal: 10,
            n_coordinated: 10,
            posts_per_user_background: 10,
            posts_per_user_target: 10,
            planted_patterns: campaign_patterns(3, 0.6, 0.05, 0.4),
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.background, c.background);
    }

    #[test]
    fn posts_are_valid_and_in_window() {
        let c = generate(&small()).unwrap();
        let spec = c.manifest.partition;
        for p in &c.background {
            p.validate().unwrap();
            assert!((spec.t0..=spec.t1).contains(&p.timestamp));
        }
        for p in &c.target {
            p.validate().unwrap();
            assert!((spec.t2..=spec.t3).contains(&p.timestamp));
        }
        let ids: BTreeSet<&str> = c.background.iter().chain(&c.target).map(|p| p.post_id.as_str()).collect();
        assert_eq!(ids.len(), c.background.len() + c.target.len());
    }

    #[test]
    fn labels_and_participants() {
        let c = generate(&small()).unwrap();
        assert_eq!(c.labels.len(), 20);
        assert_eq!(c.labels.coordinated().len(), 10);
        for rec in &c.manifest.planted {
            assert_eq!(rec.participants.len(), 6);
            for u in &rec.participants {
                assert_eq!(c.labels.class_of(u), Some(UserClass::Coordinated));
            }
            assert!(rec.applied_target > rec.applied_background);
            assert!((rec.expected_growth - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn volumes_track_config_means() {
        let cfg = SynthConfig {
            n_normal: 20,
            n_coordinated: 5,
            posts_per_user_background: 60,
            posts_per_user_target: 80,
            coordinated_volume_factor: 3,
            ..SynthConfig::default()
        };
        let c = generate(&cfg).unwrap();
        for (posts, mean) in [(&c.background, 60.0), (&c.target, 80.0)] {
            for (u, n) in posts_per_user(posts) {
                let want = match c.labels.class_of(u).unwrap() {
                    UserClass::Coordinated => mean * 3.0,
                    UserClass::Normal => mean,
                };
                assert!((n as f64 - want).abs() <= 0.2 * want, "{u}: {n} vs {want}");
            }
        }
    }

    #[test]
    fn empirical_growth_near_rate_ratio() {
        let cfg = SynthConfig {
            n_normal: 5,
            n_coordinated: 20,
            posts_per_user_background: 10,
            posts_per_user_target: 10,
            coordinated_volume_factor: 10,
            volume_jitter: 0.0,
            planted_patterns: campaign_patterns(1, 1.0, 0.05, 0.5),
            ..SynthConfig::default()
        };
        let c = generate(&cfg).unwrap();
        let coordinated = c.labels.coordinated();
        let rate = |posts: &[RawPost]| {
            let mine: Vec<&RawPost> = posts.iter().filter(|p| coordinated.contains(&p.user_id)).collect();
            let hits = mine.iter().filter(|p| p.hashtags.iter().any(|h| h == "op0a")).count();
            hits as f64 / mine.len() as f64
        };
        let growth = rate(&c.target) / rate(&c.background);
        assert!((7.0..14.0).contains(&growth), "growth {growth}");
    }

    #[test]
    fn time_constraints_are_met() {
        let cfg = SynthConfig {
            planted_patterns: vec![PlantedPattern::new(
                &[(attr::TIME_OF_DAY, "3"), (attr::DAY_OF_WEEK, "Friday"), (attr::LANGUAGE, "xx")],
                1.0,
                0.2,
                0.9,
            )],
            ..small()
        };
        let c = generate(&cfg).unwrap();
        let marked: Vec<&RawPost> = c.target.iter().filter(|p| p.language.as_deref() == Some("xx")).collect();
        assert_eq!(marked.len(), c.manifest.planted[0].applied_target);
        for p in marked {
            assert_eq!(time_slot(p.timestamp, 0, 12), 3);
            assert_eq!(WEEKDAYS[weekday_index(p.timestamp, 0)], "Friday");
        }
    }

    #[test]
    fn conflicting_patterns_are_skipped_per_post() {
        let cfg = SynthConfig {
            planted_patterns: vec![
                PlantedPattern::new(&[(attr::LANGUAGE, "xx")], 1.0, 0.5, 1.0),
                PlantedPattern::new(&[(attr::LANGUAGE, "yy")], 1.0, 0.5, 1.0),
            ],
            ..small()
        };
        let c = generate(&cfg).unwrap();
        let p = &c.manifest.planted;
        // the first pattern claims every target post
        assert_eq!(p[1].applied_target, 0);
        assert!(p[0].applied_target > 0);
    }

    #[test]
    fn no_coordinated_users() {
        let c = generate(&SynthConfig { n_coordinated: 0, ..small() }).unwrap();
        assert!(c.labels.coordinated().is_empty());
        assert!(c.manifest.planted.iter().all(|r| r.participants.is_empty()));
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SynthConfig { n_normal: 0, n_coordinated: 0, ..small() },
            SynthConfig { posts_per_user_target: 0, ..small() },
            SynthConfig { planted_patterns: campaign_patterns(1, 0.5, 0.4, 0.4), ..small() },
            SynthConfig { planted_patterns: vec![PlantedPattern::new(&[(attr::USERID, "x")], 1.0, 0.1, 0.2)], ..small() },
            SynthConfig { planted_patterns: vec![PlantedPattern::new(&[(attr::TIME_OF_DAY, "12")], 1.0, 0.1, 0.2)], ..small() },
        ];
        for cfg in bad {
            assert!(matches!(generate(&cfg), Err(Error::BadConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn corpus_encodes() {
        let c = generate(&small()).unwrap();
        let d = build_datasets(&c.background, &c.target, &PreprocessConfig::default()).unwrap();
        assert_eq!(d.background.len(), c.background.len());
        assert!(d.dictionary.lookup(attr::HASHTAG, "op0a").unwrap().is_some());
    }
}
