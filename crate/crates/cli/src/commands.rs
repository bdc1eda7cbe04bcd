//! Subcommand implementations. Each stage reads its prerequisites from the
//! output directory and writes its own artifacts there.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use coordmine_core::analysis::{
    self, ablate, baseline_frequency, baseline_frequency_sweep, baseline_language_encoded, dataset_users,
    evaluate, purity_table, AblationSetup, AblationTrace, EvalMetrics,
};
use coordmine_core::detect::suspicious_users;
use coordmine_core::ingest::{
    self, build_datasets, common_users, parse_posts, partition, top_users, LabeledUserSet, ParseReport, RawPost,
    UserClass,
};
use coordmine_core::miner::{mine_closed_contrast, MiningParams};
use coordmine_core::model::{fraction_to_f64, Fraction};
use coordmine_core::synth;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::formats::{
    canonical_order, create, describe, load_datasets, read_lines, read_patterns, write_csv, write_dataset,
    write_lines, write_patterns, write_report, LoadedDatasets, PatternRecord,
};
use crate::{CliError, CliResult};

pub const BACKGROUND_FILE: &str = "background.dataset.jsonl";
pub const TARGET_FILE: &str = "target.dataset.jsonl";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const PATTERNS_FILE: &str = "patterns.jsonl";
pub const MINE_REPORT: &str = "mine_report.json";
pub const DETECTION_FILE: &str = "detection.jsonl";
pub const DETECTION_SUMMARY: &str = "detection_summary.json";
pub const EVAL_CSV: &str = "eval.csv";
pub const EVAL_JSON: &str = "eval.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const ABLATION_JSON: &str = "ablation.json";
pub const PURITY_CSV: &str = "purity.csv";
pub const SYNTH_DIR: &str = "synth";

/// Shared state for one invocation.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    /// Whether JSON reports carry `generated_at`.
    pub timestamp: bool,
}

impl Context {
    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn prerequisite(&self, name: &str, stage: &str) -> CliResult<PathBuf> {
        let p = self.out(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::Data(format!("{} is missing; run `{stage}` first", p.display())))
        }
    }

    fn datasets(&self) -> CliResult<LoadedDatasets> {
        let b = self.prerequisite(BACKGROUND_FILE, "ingest")?;
        let t = self.prerequisite(TARGET_FILE, "ingest")?;
        load_datasets(&b, &t)
    }

    fn labels(&self) -> CliResult<LabeledUserSet> {
        let path = self.config.require_labels()?;
        let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(LabeledUserSet::read_csv(BufReader::new(file))?)
    }
}

fn ratio(f: Fraction) -> String {
    f.to_string()
}

/// Posts after parsing, partitioning and the configured user filters.
struct Prepared {
    background: Vec<RawPost>,
    target: Vec<RawPost>,
    report: IngestReport,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub input: String,
    pub parse: ParseReport,
    pub outside_windows: usize,
    pub background_posts: usize,
    pub target_posts: usize,
    /// Users active in both windows, when the common-user filter is on.
    pub common_users: Option<usize>,
    /// Users kept by the top-activity selection, when configured.
    pub selected_users: Option<usize>,
    pub background_transactions: usize,
    pub target_transactions: usize,
    pub dictionary_size: usize,
    pub attributes: Vec<String>,
    pub warnings: Vec<String>,
}

fn prepare(ctx: &Context) -> CliResult<Prepared> {
    let c = &ctx.config;
    let (input, spec) = c.require_input()?;
    let file = File::open(&input.posts).map_err(|e| CliError::Data(format!("{}: {e}", input.posts.display())))?;
    let (posts, parse) = parse_posts(BufReader::new(file), input.format, &input.fields, &input.list_separator)?;
    info!("parsed {} of {} records", parse.parsed, parse.total);
    let split = partition(posts, &spec)?;
    let mut report = IngestReport {
        input: input.posts.display().to_string(),
        parse,
        outside_windows: split.dropped,
        warnings: split.warnings,
        ..Default::default()
    };
    let (mut background, mut target) = (split.background, split.target);
    if c.common_users {
        let common = common_users(background, target)?;
        report.common_users = Some(common.users.len());
        background = common.background;
        target = common.target;
    }
    if c.n_c.is_some() || c.n_n.is_some() {
        let labels = ctx.labels()?;
        let all = |class| labels.users_of(class).len();
        let n_c = c.n_c.unwrap_or_else(|| all(UserClass::Coordinated));
        let n_n = c.n_n.unwrap_or_else(|| all(UserClass::Normal));
        let top = top_users(&background, &target, &labels, n_c, n_n)?;
        report.selected_users = Some(top.users.len());
        report.warnings.extend(top.warnings);
        background.retain(|p| top.users.contains(&p.user_id));
        target.retain(|p| top.users.contains(&p.user_id));
    }
    report.background_posts = background.len();
    report.target_posts = target.len();
    Ok(Prepared {
        background,
        target,
        report,
    })
}

pub fn ingest(ctx: &Context) -> CliResult<IngestReport> {
    let Prepared {
        background,
        target,
        mut report,
    } = prepare(ctx)?;
    let encoded = build_datasets(&background, &target, &ctx.config.preprocess)?;
    report.background_transactions = encoded.background.len();
    report.target_transactions = encoded.target.len();
    report.dictionary_size = encoded.dictionary.len();
    report.attributes = ingest::attr::ALL
        .iter()
        .filter(|a| ctx.config.preprocess.enabled_attributes.contains(**a))
        .map(|a| a.to_string())
        .collect();
    for w in &report.warnings {
        warn!("{w}");
    }
    write_dataset(&ctx.out(BACKGROUND_FILE), &encoded.background, &encoded.dictionary)?;
    write_dataset(&ctx.out(TARGET_FILE), &encoded.target, &encoded.dictionary)?;
    write_report(&ctx.out(INGEST_REPORT), &report, ctx.timestamp)?;
    println!(
        "ingest: {} background / {} target transactions, {} items",
        report.background_transactions, report.target_transactions, report.dictionary_size
    );
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub sigma: u64,
    pub rho: String,
    pub threshold_side: coordmine_core::miner::ThresholdSide,
    pub sigma_delta: Option<String>,
    pub min_pattern_len: usize,
}

impl From<&MiningParams> for ParamsRecord {
    fn from(p: &MiningParams) -> Self {
        ParamsRecord {
            sigma: p.sigma,
            rho: ratio(p.rho),
            threshold_side: p.threshold_side,
            sigma_delta: p.sigma_delta.map(ratio),
            min_pattern_len: p.min_pattern_len,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MineReport {
    pub params: ParamsRecord,
    pub background_transactions: usize,
    pub target_transactions: usize,
    pub patterns: usize,
    pub infinite_growth: usize,
}

pub fn mine(ctx: &Context) -> CliResult<MineReport> {
    let d = ctx.datasets()?;
    let params = &ctx.config.mining;
    let start = Instant::now();
    let mut patterns = mine_closed_contrast(&d.background, &d.target, params)?;
    info!("mined {} patterns in {:.2?}", patterns.len(), start.elapsed());
    canonical_order(&mut patterns);
    write_patterns(&ctx.out(PATTERNS_FILE), &patterns, &d.dictionary)?;
    let report = MineReport {
        params: params.into(),
        background_transactions: d.background.len(),
        target_transactions: d.target.len(),
        patterns: patterns.len(),
        infinite_growth: patterns.iter().filter(|p| p.stats.growth().is_infinite()).count(),
    };
    write_report(&ctx.out(MINE_REPORT), &report, ctx.timestamp)?;
    println!("mine: {} closed contrast patterns", report.patterns);
    Ok(report)
}

/// One line of the detection file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub user: String,
    pub max_growth: String,
    pub patterns: Vec<PatternRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionSummary {
    /// |𝒫|
    pub patterns: usize,
    /// |𝒫_user|
    pub user_patterns: usize,
    /// |U_suspicious|
    pub suspicious_users: usize,
}

pub fn detect(ctx: &Context) -> CliResult<DetectionSummary> {
    let d = ctx.datasets()?;
    let patterns = read_patterns(&ctx.prerequisite(PATTERNS_FILE, "mine")?, &d.dictionary)?;
    let report = suspicious_users(&patterns, &d.dictionary, None)?;
    let records: Vec<DetectionRecord> = report
        .suspicious_users
        .iter()
        .map(|u| DetectionRecord {
            user: u.clone(),
            max_growth: report.max_growth(u).map(|g| g.to_string()).unwrap_or_default(),
            patterns: report.supporting_patterns[u]
                .iter()
                .map(|p| PatternRecord::new(p, &d.dictionary))
                .collect(),
        })
        .collect();
    write_lines(&ctx.out(DETECTION_FILE), &records)?;
    let summary = DetectionSummary {
        patterns: report.pattern_count,
        user_patterns: report.user_pattern_count,
        suspicious_users: report.suspicious_users.len(),
    };
    write_report(&ctx.out(DETECTION_SUMMARY), &summary, ctx.timestamp)?;
    println!(
        "detect: |P| = {}, |P_user| = {}, |U_suspicious| = {}",
        summary.patterns, summary.user_patterns, summary.suspicious_users
    );
    Ok(summary)
}

fn detected_users(ctx: &Context) -> CliResult<BTreeSet<String>> {
    let records: Vec<DetectionRecord> = read_lines(&ctx.prerequisite(DETECTION_FILE, "detect")?)?;
    Ok(records.into_iter().map(|r| r.user).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub sigma: Option<u64>,
    pub rho: Option<String>,
    pub predicted: usize,
    pub metrics: EvalMetrics,
}

fn metric_cells(m: &EvalMetrics) -> Vec<String> {
    vec![
        m.tp.to_string(),
        m.fp.to_string(),
        m.fn_.to_string(),
        m.tn.to_string(),
        m.precision.to_string(),
        m.recall.to_string(),
        m.f1.to_string(),
    ]
}

const METRIC_HEADER: [&str; 7] = ["tp", "fp", "fn", "tn", "precision", "recall", "f1"];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub fn eval(ctx: &Context) -> CliResult<Vec<EvalRow>> {
    let d = ctx.datasets()?;
    let labels = ctx.labels()?.restrict(&dataset_users(&d.background, &d.target, &d.dictionary));
    let params = &ctx.config.mining;
    let predicted = detected_users(ctx)?;
    let mut rows = vec![EvalRow {
        method: "contrast".into(),
        sigma: Some(params.sigma),
        rho: Some(ratio(params.rho)),
        predicted: predicted.len(),
        metrics: evaluate(&predicted, &labels)?,
    }];
    let freq = baseline_frequency(&d.background, &d.target, &d.dictionary, params.sigma, params.rho);
    rows.push(EvalRow {
        method: "baseline_frequency".into(),
        sigma: Some(params.sigma),
        rho: Some(ratio(params.rho)),
        predicted: freq.len(),
        metrics: evaluate(&freq, &labels)?,
    });
    let (points, best) = baseline_frequency_sweep(
        &d.background,
        &d.target,
        &d.dictionary,
        &labels,
        &ctx.config.sweep_sigmas,
        &ctx.config.sweep_rhos,
    )?;
    let b = &points[best];
    rows.push(EvalRow {
        method: "baseline_frequency_best".into(),
        sigma: Some(b.sigma),
        rho: Some(ratio(b.rho)),
        predicted: b.predicted,
        metrics: b.metrics,
    });
    if let Some(lang) = &ctx.config.suspect_language {
        let by_lang = baseline_language_encoded(&d.target, &d.dictionary, lang);
        rows.push(EvalRow {
            method: format!("baseline_language:{lang}"),
            sigma: None,
            rho: None,
            predicted: by_lang.len(),
            metrics: evaluate(&by_lang, &labels)?,
        });
    }
    let mut header = vec!["method", "sigma", "rho", "predicted"];
    header.extend(METRIC_HEADER);
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.method.clone(), opt(&r.sigma), opt(&r.rho), r.predicted.to_string()];
            v.extend(metric_cells(&r.metrics));
            v
        })
        .collect();
    write_csv(&ctx.out(EVAL_CSV), &header, &csv_rows)?;
    write_report(&ctx.out(EVAL_JSON), &serde_json::json!({ "rows": rows }), ctx.timestamp)?;
    for r in &rows {
        println!(
            "eval: {:<26} P={:.3} R={:.3} F1={:.3}",
            r.method, r.metrics.precision, r.metrics.recall, r.metrics.f1
        );
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellRecord {
    sigma: u64,
    rho: String,
    rho_value: f64,
    pattern_count: usize,
    total_patterns: usize,
    suspicious_users: usize,
    metrics: EvalMetrics,
}

pub fn sweep(ctx: &Context) -> CliResult<analysis::SweepResult> {
    let d = ctx.datasets()?;
    let labels = ctx.labels()?;
    let c = &ctx.config;
    let result = analysis::sweep(
        &d.background,
        &d.target,
        &d.dictionary,
        &labels,
        &c.sweep_sigmas,
        &c.sweep_rhos,
        &c.mining,
    )?;
    let (points, best_baseline) =
        baseline_frequency_sweep(&d.background, &d.target, &d.dictionary, &labels, &c.sweep_sigmas, &c.sweep_rhos)?;
    let cells: Vec<CellRecord> = result
        .cells
        .iter()
        .map(|cell| CellRecord {
            sigma: cell.sigma,
            rho: ratio(cell.rho),
            rho_value: fraction_to_f64(cell.rho),
            pattern_count: cell.pattern_count,
            total_patterns: cell.total_patterns,
            suspicious_users: cell.suspicious_users,
            metrics: cell.metrics,
        })
        .collect();
    let mut header = vec!["sigma", "rho", "rho_value", "pattern_count", "total_patterns", "suspicious_users"];
    header.extend(METRIC_HEADER);
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            let mut v = vec![
                c.sigma.to_string(),
                c.rho.clone(),
                c.rho_value.to_string(),
                c.pattern_count.to_string(),
                c.total_patterns.to_string(),
                c.suspicious_users.to_string(),
            ];
            v.extend(metric_cells(&c.metrics));
            v
        })
        .collect();
    write_csv(&ctx.out(SWEEP_CSV), &header, &rows)?;
    let b = &points[best_baseline];
    let report = serde_json::json!({
        "sigmas": result.sigmas,
        "rhos": result.rhos.iter().map(|r| ratio(*r)).collect::<Vec<_>>(),
        "cells": cells,
        "best": cells[result.best],
        "baseline_frequency_best": {
            "sigma": b.sigma,
            "rho": ratio(b.rho),
            "predicted": b.predicted,
            "metrics": b.metrics,
        },
        "monotonicity_violations": result.monotonicity_violations(),
    });
    write_report(&ctx.out(SWEEP_JSON), &report, ctx.timestamp)?;
    let best = result.best_cell();
    println!(
        "sweep: best sigma={} rho={} F1={:.3} (P={:.3} R={:.3}, |P_user|={})",
        best.sigma,
        ratio(best.rho),
        best.metrics.f1,
        best.metrics.precision,
        best.metrics.recall,
        best.pattern_count
    );
    Ok(result)
}

fn mode_name(mode: analysis::AblationMode) -> &'static str {
    match mode {
        analysis::AblationMode::Subtractive => "subtractive",
        analysis::AblationMode::Additive => "additive",
    }
}

pub fn ablation_csv(mode: analysis::AblationMode) -> String {
    format!("ablation_{}.csv", mode_name(mode))
}

pub fn ablation(ctx: &Context) -> CliResult<Vec<AblationTrace>> {
    let prepared = prepare(ctx)?;
    let labels = ctx.labels()?;
    let c = &ctx.config;
    let setup = AblationSetup {
        background: &prepared.background,
        target: &prepared.target,
        labels: &labels,
        preprocess: &c.preprocess,
        // the filter has already been applied by `prepare`
        common_users: false,
        sigmas: &c.ablation_sigmas,
        rhos: &c.ablation_rhos,
        fixed: &c.mining,
    };
    let mut traces = Vec::new();
    let mut json = serde_json::Map::new();
    for &mode in &c.ablation_modes {
        let trace = ablate(&setup, mode)?;
        let rows: Vec<Vec<String>> = trace
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                vec![
                    (i + 1).to_string(),
                    s.attribute.clone(),
                    s.attributes.join(";"),
                    s.best_sigma.to_string(),
                    ratio(s.best_rho),
                    s.best_f1.to_string(),
                    s.pattern_count.to_string(),
                ]
            })
            .collect();
        write_csv(
            &ctx.out(&ablation_csv(mode)),
            &["step", "attribute", "attributes", "best_sigma", "best_rho", "best_f1", "pattern_count"],
            &rows,
        )?;
        let steps: Vec<serde_json::Value> = trace
            .steps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "attribute": s.attribute,
                    "attributes": s.attributes,
                    "best_sigma": s.best_sigma,
                    "best_rho": ratio(s.best_rho),
                    "best_f1": s.best_f1,
                    "pattern_count": s.pattern_count,
                })
            })
            .collect();
        json.insert(mode_name(mode).into(), serde_json::Value::Array(steps));
        println!(
            "ablate {}: {}",
            mode_name(mode),
            trace.steps.iter().map(|s| s.attribute.as_str()).collect::<Vec<_>>().join(" -> ")
        );
        traces.push(trace);
    }
    write_report(&ctx.out(ABLATION_JSON), &json, ctx.timestamp)?;
    Ok(traces)
}

pub fn purity(ctx: &Context) -> CliResult<Vec<analysis::PurityRecord>> {
    let d = ctx.datasets()?;
    let patterns = read_patterns(&ctx.prerequisite(PATTERNS_FILE, "mine")?, &d.dictionary)?;
    let coordinated = ctx.labels()?.coordinated();
    let table = purity_table(&patterns, &d.target, &coordinated, &d.dictionary);
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                describe(&d.dictionary.decode_all(&r.behavioural_pattern)),
                ratio(r.purity),
                r.purity_f64().to_string(),
                r.posts_in_target.to_string(),
                r.coordinated_posts.to_string(),
                r.user_count.to_string(),
                r.class.as_str().to_string(),
            ]
        })
        .collect();
    write_csv(
        &ctx.out(PURITY_CSV),
        &["behavioural_pattern", "purity", "purity_value", "posts_in_target", "coordinated_posts", "user_count", "class"],
        &rows,
    )?;
    println!("purity: {} behavioural patterns", table.len());
    Ok(table)
}

/// Writes `posts.csv`, `labels.csv`, `manifest.json` and a ready-to-run
/// `run.toml` under `<out>/synth`.
pub fn synth(ctx: &Context) -> CliResult<PathBuf> {
    let corpus = synth::generate(&ctx.config.synth)?;
    let dir = ctx.out(SYNTH_DIR);
    fs::create_dir_all(&dir).map_err(coordmine_core::Error::from)?;
    let posts = corpus.all_posts();
    ingest::write_posts_csv(create(&dir.join("posts.csv"))?, &posts, ";")?;
    corpus.labels.write_csv(create(&dir.join("labels.csv"))?)?;
    write_report(&dir.join("manifest.json"), &corpus.manifest, ctx.timestamp)?;
    let p = corpus.manifest.partition;
    let run = format!(
        "[input]\nposts = \"posts.csv\"\n\n[partition]\nt0 = {}\nt1 = {}\nt2 = {}\nt3 = {}\n\n\
         [preprocess]\nslots_per_day = {}\n\n[eval]\nlabels = \"labels.csv\"\n\n[output]\ndir = \"run\"\n",
        p.t0, p.t1, p.t2, p.t3, ctx.config.synth.slots_per_day
    );
    fs::write(dir.join("run.toml"), run).map_err(coordmine_core::Error::from)?;
    println!(
        "synth: {} posts from {} users ({} coordinated) in {}",
        posts.len(),
        corpus.labels.len(),
        corpus.labels.coordinated().len(),
        dir.display()
    );
    Ok(dir)
}

/// `ingest`, `mine`, `detect`, then `eval`, `purity` and `sweep` when labels
/// are configured.
pub fn run_all(ctx: &Context) -> CliResult<()> {
    ingest(ctx)?;
    mine(ctx)?;
    detect(ctx)?;
    if ctx.config.labels.is_some() {
        eval(ctx)?;
        purity(ctx)?;
        sweep(ctx)?;
    }
    Ok(())
}
