mod common;

use std::collections::BTreeMap;
use std::fs;

use forkdiff::config::PipelineConfig;
use forkdiff::io::read_jsonl;
use forkdiff::pipeline::{Pipeline, Stage, ANALYSIS, DIFFS, PAGES};
use forkdiff::report::Summary;
use forkdiff::stages::Analysis;
use forkdiff_core::diff::ContentDiff;
use forkdiff_core::lineage::{PageRecord, PageStatus};

fn run_all() -> (tempfile::TempDir, Pipeline) {
    let dir = common::corpus();
    let text = fs::read_to_string(dir.path().join("run.toml")).unwrap();
    let config = PipelineConfig::from_toml(&text, dir.path()).unwrap();
    let pipeline = Pipeline::new(config);
    pipeline.run(&Stage::ALL).unwrap();
    (dir, pipeline)
}

fn by_title<T, F: Fn(&T) -> String>(items: Vec<T>, key: F) -> BTreeMap<String, T> {
    items.into_iter().map(|i| (key(&i), i)).collect()
}

#[test]
fn fixture_corpus_ground_truth() {
    let (_dir, p) = run_all();

    let pages: Vec<PageRecord> = read_jsonl(&p.artifact(PAGES)).unwrap();
    let status: BTreeMap<&str, PageStatus> = pages.iter().map(|r| (r.title.as_str(), r.status)).collect();
    let expected = [
        ("Zburevsky Kut", PageStatus::Changed),
        ("Medal \"For the Return of Crimea\"", PageStatus::Changed),
        ("Vladimir Samokish", PageStatus::Changed),
        ("Trimetozine", PageStatus::Changed),
        ("Kendra (name)", PageStatus::Changed),
        ("Svoya igra", PageStatus::Changed),
        ("Horlivka", PageStatus::Changed),
        ("Moscow", PageStatus::Duplicated),
        ("Saint Petersburg", PageStatus::Duplicated),
        ("Volga", PageStatus::Duplicated),
        ("Kyiv", PageStatus::Missing),
        ("Bucha", PageStatus::Missing),
    ];
    assert_eq!(status, expected.into_iter().collect());
    let horlivka = pages.iter().find(|r| r.title == "Horlivka").unwrap();
    assert_eq!(horlivka.fork_last_rev.as_ref().unwrap().rev_id, 900007);
    assert_eq!(horlivka.upstream_parent_rev.as_ref().unwrap().rev_id, 702);

    let diffs = by_title(read_jsonl::<ContentDiff>(&p.artifact(DIFFS)).unwrap(), |d| d.title.clone());
    let h = &diffs["Horlivka"];
    assert_eq!(h.deleted, ["Horlivka is a city in Donetsk Oblast, Ukraine."]);
    assert_eq!(h.inserted, ["Horlivka is a city in the Donetsk People's Republic, Russia."]);
    assert_eq!(h.references_added.keys().collect::<Vec<_>>(), ["government.ru", "ria.ru"]);
    assert_eq!(h.references_removed.keys().collect::<Vec<_>>(), ["bbc.com", "europa.eu"]);

    let report = p.report_dir();
    assert_eq!(
        fs::read_to_string(report.join("references.csv")).unwrap(),
        "direction,rank,domain,pages,pct\n\
         added,1,government.ru,1,14.285714\n\
         added,2,ria.ru,1,14.285714\n\
         removed,1,bbc.com,1,14.285714\n\
         removed,2,europa.eu,1,14.285714\n"
    );
    assert_eq!(
        fs::read_to_string(report.join("categories.csv")).unwrap(),
        "direction,rank,category,pages,pct\n\
         added,1,Cities in Donetsk People's Republic,1,14.285714\n\
         removed,1,Articles with edit notes about caution when editing,1,14.285714\n\
         removed,2,Cities in Donetsk Oblast,1,14.285714\n\
         removed,3,Persons under the sanctions related to the conflict in Ukraine,1,14.285714\n"
    );
    let geo = fs::read_to_string(report.join("geo.csv")).unwrap();
    assert!(geo.contains("UA,missing,2,4,0.500000\n"), "{geo}");
    assert!(geo.contains("RU,duplicated,3,5,0.600000\n"), "{geo}");

    let analysis: Analysis = forkdiff::io::read_json(&p.artifact(ANALYSIS)).unwrap();
    // 5 pages with sentence changes; Ukraine is deleted on 3 of them
    assert_eq!(analysis.entities.text_changed_pages, 5);
    let ukraine = analysis.entities.deleted.iter().find(|e| e.lemma == "Ukraine").unwrap();
    assert_eq!(ukraine.count, 3);
    let dpr = analysis.entities.added.iter().find(|e| e.lemma == "Donetsk People's Republic").unwrap();
    assert_eq!(dpr.count, 1);

    let summary: Summary = forkdiff::io::read_json(&report.join("summary.json")).unwrap();
    assert_eq!(summary.pages, 12);
    assert_eq!(summary.fractions[&PageStatus::Changed], 7.0 / 12.0);
    assert_eq!(summary.blocked, 1);
    assert_eq!(summary.needs_review, 0);
    assert!((summary.views_share[&PageStatus::Changed] - 0.804563).abs() < 1e-6);
    assert!((summary.views_share[&PageStatus::Duplicated] - 0.142526).abs() < 1e-6);
    // ImportBot's 10 night edits are filtered out; 48 of 60 remaining in office hours
    assert_eq!(summary.office_hours_share["fork"], Some(0.8));
    assert!((summary.office_hours_share["upstream"].unwrap() - 39.0 / 134.0).abs() < 1e-12);
    let tax = summary.taxonomy.unwrap();
    assert_eq!(tax.edits, 7);
}
