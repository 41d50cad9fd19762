mod common;

use std::fs;

use common::{corpus, fixture, forkdiff, run_dir, snapshot, stderr, stdout};

#[test]
fn bad_threshold_is_a_validation_error() {
    let dir = corpus();
    let cfg = dir.path().join("run.toml");
    let text = fs::read_to_string(&cfg).unwrap();
    fs::write(&cfg, format!("{text}\n[diff]\nthreshold = 1.5\n")).unwrap();
    let o = forkdiff(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("threshold"), "{}", stderr(&o));
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn unknown_flag_and_unknown_stage_exit_1() {
    assert_eq!(forkdiff(&["diff", "--bogus"]).status.code(), Some(1));
    let dir = corpus();
    let cfg = dir.path().join("run.toml");
    let o = forkdiff(&["run", "--config", cfg.to_str().unwrap(), "--stages", "crawl,nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("crawl"), "valid stages are listed: {}", stderr(&o));
}

#[test]
fn missing_input_file_exits_1() {
    let dir = corpus();
    fs::remove_file(dir.path().join("titles.txt")).unwrap();
    let o = forkdiff(&["run", "--config", dir.path().join("run.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("titles"), "{}", stderr(&o));
}

#[test]
fn report_without_upstream_artifacts_is_a_dependency_error() {
    let dir = corpus();
    let cfg = dir.path().join("run.toml");
    let o = forkdiff(&["run", "--config", cfg.to_str().unwrap(), "--stages", "report"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("crawl"), "names the producing stage: {}", stderr(&o));
}

#[test]
fn unreachable_fixture_is_a_transport_or_data_error() {
    let dir = corpus();
    let cfg = dir.path().join("run.toml");
    let text = fs::read_to_string(&cfg).unwrap().replace("fixture://fork.json", "fixture://nowhere.json");
    fs::write(&cfg, text).unwrap();
    let o = forkdiff(&["run", "--config", cfg.to_str().unwrap(), "--stages", "crawl"]);
    assert_ne!(o.status.code(), Some(0));
    assert_ne!(o.status.code(), Some(1));
}

#[test]
fn rerun_skips_and_deleted_artifacts_come_back_identical() {
    let dir = corpus();
    let cfg = dir.path().join("run.toml");
    let cfg = cfg.to_str().unwrap();
    let first = forkdiff(&["run", "--config", cfg]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let run = run_dir(dir.path());
    let before = snapshot(&run.join("report"));
    let diffs_before = fs::read(run.join("diffs.jsonl")).unwrap();

    let again = forkdiff(&["run", "--config", cfg]);
    assert_eq!(again.status.code(), Some(0));
    let out = stdout(&again);
    assert_eq!(out.matches("up to date, skipped").count(), 6, "{out}");

    fs::remove_file(run.join("diffs.jsonl")).unwrap();
    let plan = forkdiff(&["run", "--config", cfg, "--dry-run"]);
    let plan_out = stdout(&plan);
    assert!(plan_out.contains("crawl: up to date"), "{plan_out}");
    assert!(plan_out.contains("diff: run"), "{plan_out}");
    assert!(!run.join("diffs.jsonl").exists(), "dry run writes nothing");

    let third = forkdiff(&["run", "--config", cfg]);
    assert_eq!(third.status.code(), Some(0));
    let out = stdout(&third);
    assert!(out.contains("crawl: up to date, skipped"), "{out}");
    assert!(out.contains("diff: done"), "{out}");
    assert_eq!(fs::read(run.join("diffs.jsonl")).unwrap(), diffs_before);
    assert_eq!(snapshot(&run.join("report")), before);
}

#[test]
fn stage_subcommand_with_config_runs_one_stage() {
    let dir = corpus();
    let cfg = dir.path().join("run.toml");
    let o = forkdiff(&["crawl", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let run = run_dir(dir.path());
    assert!(run.join("pages.jsonl").exists());
    assert!(!run.join("diffs.jsonl").exists());
}

#[test]
fn standalone_subcommands_chain() {
    let dir = corpus();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let out = dir.path().join("out");
    let o = forkdiff(&[
        "crawl",
        "--upstream-api",
        &format!("fixture://{}", p("upstream.json")),
        "--fork-api",
        &format!("fixture://{}", p("fork.json")),
        "--titles",
        &p("titles.txt"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "duplicated: 3\nchanged: 7\nmissing: 2\n");

    let pages = out.join("pages.jsonl");
    let diffs = out.join("diffs.jsonl");
    let o = forkdiff(&["diff", "--pages", pages.to_str().unwrap(), "--out", diffs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&diffs).unwrap().lines().count(), 7);

    let o = forkdiff(&[
        "stats",
        "--pages",
        pages.to_str().unwrap(),
        "--revlog",
        &p("revlog_upstream.jsonl"),
        "--views",
        &p("views.jsonl"),
        "--resamples",
        "200",
        "--sample-size",
        "20",
        "--from",
        "2023-01",
        "--to",
        "2023-09",
        "--out",
        out.join("stats.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = forkdiff(&[
        "analyze",
        "--pages",
        pages.to_str().unwrap(),
        "--diffs",
        diffs.to_str().unwrap(),
        "--revlog-upstream",
        &p("revlog_upstream.jsonl"),
        "--revlog-fork",
        &p("revlog_fork.jsonl"),
        "--geo",
        &p("geo.tsv"),
        "--gazetteer",
        &p("gazetteer.tsv"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["temporal.csv", "geo.csv", "categories.csv", "references.csv", "entities.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let o = forkdiff(&[
        "taxonomy",
        "--diffs",
        diffs.to_str().unwrap(),
        "--backend",
        "mock",
        "--k-min",
        "2",
        "--k-max",
        "3",
        "--out",
        out.join("taxonomy.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn http_backend_without_key_is_a_validation_error() {
    let diffs = fixture("table5/pages.jsonl");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let o = forkdiff(&["diff", "--pages", diffs.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_forkdiff"))
        .args(["taxonomy", "--diffs", out.to_str().unwrap(), "--backend", "http", "--out"])
        .arg(dir.path().join("t.json"))
        .env_remove("FORKDIFF_LLM_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("FORKDIFF_LLM_KEY"), "{}", stderr(&o));
}
