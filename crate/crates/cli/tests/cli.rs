use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn coordmine(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coordmine"))
        .arg("--config")
        .arg(fixture("example.toml"))
        .arg("--out")
        .arg(out)
        .arg("--no-timestamp")
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = coordmine(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn pairs(v: &Value) -> Vec<(String, String)> {
    serde_json::from_value(v["items"].clone()).unwrap()
}

fn p(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

#[test]
fn ingest_writes_two_windows_of_five() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest"]);
    for name in ["background.dataset.jsonl", "target.dataset.jsonl"] {
        let l = lines(&dir.path().join(name));
        assert_eq!(l[0]["format"], "coordmine-dataset");
        assert_eq!(l[0]["transactions"], 5);
        assert_eq!(l.len(), 6);
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["parse"]["skipped"], 0);
    assert_eq!(report["common_users"], Value::Null);
    assert!(report.get("generated_at").is_none());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ok(d.path(), &["run-all"]);
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 10, "{names:?}");
    for n in names {
        let (x, y) = (fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap());
        assert_eq!(x, y, "{n:?} differs");
    }
}

#[test]
fn mine_emits_the_worked_example_pattern() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest"]);
    ok(dir.path(), &["mine"]);
    let pats = lines(&dir.path().join("patterns.jsonl"));
    let p0 = pats
        .iter()
        .find(|v| pairs(v) == vec![p("userid", "u1"), p("is_retweet", "true"), p("retweet_userid", "u2")])
        .expect("p0 mined");
    assert_eq!((p0["sc_b"].as_u64(), p0["sc_t"].as_u64()), (Some(1), Some(3)));
    assert_eq!(p0["supp_b"], "1/5");
    assert_eq!(p0["supp_t"], "3/5");
    assert_eq!(p0["growth"], "3");
    assert_eq!(p0["delta"], "2/5");
    let growth: Vec<f64> = pats.iter().map(|v| v["growth_value"].as_f64().unwrap_or(f64::INFINITY)).collect();
    assert!(growth.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn huge_sigma_gives_an_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest"]);
    ok(dir.path(), &["mine", "--sigma", "1000000"]);
    assert!(fs::read_to_string(dir.path().join("patterns.jsonl")).unwrap().is_empty());
    let out = ok(dir.path(), &["detect"]);
    assert!(out.contains("|U_suspicious| = 0"), "{out}");
    assert!(fs::read_to_string(dir.path().join("detection.jsonl")).unwrap().is_empty());
}

#[test]
fn detect_finds_u1_and_summary_matches_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest"]);
    ok(dir.path(), &["mine"]);
    let out = ok(dir.path(), &["detect"]);
    let users = lines(&dir.path().join("detection.jsonl"));
    assert_eq!(users.len(), 1);
    assert_eq!(users[0]["user"], "u1");
    assert_eq!(users[0]["max_growth"], "3");
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("detection_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["patterns"].as_u64().unwrap() as usize, lines(&dir.path().join("patterns.jsonl")).len());
    assert_eq!(summary["suspicious_users"], 1);
    assert!(out.contains("|U_suspicious| = 1"), "{out}");
}

#[test]
fn eval_scores_perfect_detection() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["ingest", "mine", "detect", "eval"] {
        ok(dir.path(), &[cmd]);
    }
    let csv = fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    let contrast = csv.lines().find(|l| l.starts_with("contrast,")).unwrap();
    assert!(contrast.ends_with(",1,1,1"), "{contrast}");
}

#[test]
fn sweep_writes_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest"]);
    let out = ok(dir.path(), &["sweep"]);
    assert!(out.starts_with("sweep: best"));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn ablation_traces_have_one_step_per_removable_attribute() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ablate"]);
    for mode in ["subtractive", "additive"] {
        let csv = fs::read_to_string(dir.path().join(format!("ablation_{mode}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2, "{mode}");
    }
}

#[test]
fn purity_table_is_written() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["ingest", "mine", "purity"] {
        ok(dir.path(), &[cmd]);
    }
    let csv = fs::read_to_string(dir.path().join("purity.csv")).unwrap();
    assert!(csv.contains("\"is_retweet: true, retweet_userid: u2\",1,1,3,3,1,PURE_COORDINATED"), "{csv}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[input]\nposts = \"nope.csv\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_coordmine"))
        .args(["--config", bad.to_str().unwrap(), "ingest"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));

    let o = coordmine(dir.path(), &["mine"]);
    assert_eq!(o.status.code(), Some(3), "missing prerequisite");

    let o = coordmine(dir.path(), &["mine", "--rho", "0.5"]);
    assert_eq!(o.status.code(), Some(2), "invalid rho");

    let posts = dir.path().join("posts.csv");
    fs::write(&posts, "post_id,user_id,timestamp\n1,a,2015-02-01\n").unwrap();
    let cfg = dir.path().join("empty_target.toml");
    fs::write(
        &cfg,
        "[input]\nposts = \"posts.csv\"\n[partition]\nt0 = \"2015-01-01\"\nt1 = \"2015-05-31\"\nt2 = \"2016-07-01\"\nt3 = \"2016-11-30\"\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_coordmine"))
        .args(["--config", cfg.to_str().unwrap(), "ingest"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "empty target window");
}

#[test]
fn env_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest"]);
    let o = Command::new(env!("CARGO_BIN_EXE_coordmine"))
        .args(["--config", fixture("example.toml").to_str().unwrap(), "--no-timestamp", "mine"])
        .env("COORDMINE_OUT", dir.path())
        .env("COORDMINE_SIGMA", "1000000")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(fs::read_to_string(dir.path().join("patterns.jsonl")).unwrap().is_empty());
}

#[test]
fn synth_writes_a_runnable_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.toml");
    fs::write(&cfg, "[synth]\nseed = 3\nn_normal = 6\nn_coordinated = 4\nposts_per_user_background = 4\nposts_per_user_target = 4\n").unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_coordmine"))
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .arg("--no-timestamp")
            .args(args)
            .output()
            .unwrap()
    };
    assert!(run(&["synth"]).status.success());
    let synth = dir.path().join("synth");
    for f in ["posts.csv", "labels.csv", "manifest.json", "run.toml"] {
        assert!(synth.join(f).is_file(), "{f}");
    }
    let labels = fs::read_to_string(synth.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 1 + 10);
    let o = Command::new(env!("CARGO_BIN_EXE_coordmine"))
        .args(["--config", synth.join("run.toml").to_str().unwrap(), "--no-timestamp", "--sigma", "2", "run-all"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(synth.join("run/sweep.csv").is_file());
}
