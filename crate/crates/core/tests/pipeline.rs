mod common;

use std::fs;

use wayfinder_core::analysis::{write_corpus, CorpusEntry};
use wayfinder_core::pipeline::{analyze, rank, read_ledger, score, Model, RunConfig, LEDGER_FILE};
use wayfinder_core::scoring::QualityLabel;

fn setup(entries: &[CorpusEntry]) -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(fs::File::create(&corpus).unwrap(), entries).unwrap();
    let config = RunConfig {
        maps: Some(common::fixtures().join("maps")),
        corpus: Some(corpus),
        out: Some(dir.path().join("out")),
        attempts: 3,
        parallelism: 2,
        ..RunConfig::default()
    };
    (dir, config)
}

fn three_on_corridor() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry::new("a", "corridor5", "go right two then down two then left two"),
        CorpusEntry::new("b", "corridor5", "go left"),
        CorpusEntry::new("c", "corridor5", "it is somewhere"),
    ]
}

#[test]
fn score_writes_matching_csv_and_jsonl() {
    let (_dir, config) = setup(&three_on_corridor());
    let out = score(&config).unwrap();
    assert_eq!(out.rows.len(), 9);
    assert_eq!((out.evaluated, out.reused), (9, 0));
    let dir = config.out.as_ref().unwrap();
    let csv = fs::read_to_string(dir.join("scores.csv")).unwrap();
    let jsonl = fs::read_to_string(dir.join("scores.jsonl")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert_eq!(jsonl.lines().count(), 9);
    assert!(csv.starts_with("map_id,explanation_id,model,raw_score,normalized_score,bin"));
    assert!(dir.join("run-config.toml").exists());
    let echoed = RunConfig::from_toml(&fs::read_to_string(dir.join("run-config.toml")).unwrap()).unwrap();
    assert_eq!(echoed, config);
    assert!(fs::read_dir(dir.join("trajectories")).unwrap().count() >= 3);
}

#[test]
fn rerun_resumes_from_ledger() {
    let (_dir, config) = setup(&three_on_corridor());
    let first = score(&config).unwrap();
    let csv = fs::read(config.out.as_ref().unwrap().join("scores.csv")).unwrap();
    let second = score(&config).unwrap();
    assert_eq!((second.evaluated, second.reused), (0, 9));
    assert_eq!(first.rows, second.rows);
    assert_eq!(fs::read(config.out.as_ref().unwrap().join("scores.csv")).unwrap(), csv);
}

#[test]
fn torn_ledger_is_recovered() {
    let (_dir, config) = setup(&three_on_corridor());
    let first = score(&config).unwrap();
    let ledger = config.out.as_ref().unwrap().join(LEDGER_FILE);
    let text = fs::read_to_string(&ledger).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let last = lines.pop().unwrap();
    let torn = format!("{}\n{}", lines.join("\n"), &last[..last.len() / 2]);
    fs::write(&ledger, torn).unwrap();
    let again = score(&config).unwrap();
    assert_eq!(again.evaluated, 1);
    assert_eq!(again.rows, first.rows);
}

#[test]
fn changed_settings_are_not_reused() {
    let (_dir, mut config) = setup(&three_on_corridor());
    score(&config).unwrap();
    config.episode.max_replans = 1;
    let again = score(&config).unwrap();
    assert_eq!((again.evaluated, again.reused), (9, 0));
    let ledger = read_ledger(&config.out.as_ref().unwrap().join(LEDGER_FILE)).unwrap();
    assert_eq!(ledger.len(), 18);
}

#[test]
fn rank_emits_one_triple_per_map_and_model() {
    let (_dir, config) = setup(&three_on_corridor());
    let out = rank(&config).unwrap();
    assert_eq!(out.bins.len(), 9);
    for model in Model::ALL {
        let labels: Vec<QualityLabel> =
            out.bins.iter().filter(|b| b.model == model).map(|b| b.label).collect();
        assert_eq!(labels, [QualityLabel::Bad, QualityLabel::Medium, QualityLabel::Good]);
    }
    let utility: Vec<_> = out.bins.iter().filter(|b| b.model == Model::Utility).collect();
    assert_eq!(utility[2].selected_explanation_id, "a");
    let total: f64 = out.speaker.iter().filter(|s| s.model == Model::Utility).map(|s| s.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let dir = config.out.as_ref().unwrap();
    assert_eq!(fs::read_to_string(dir.join("bins.csv")).unwrap().lines().count(), 10);
    assert_eq!(fs::read_to_string(dir.join("speaker.csv")).unwrap().lines().count(), 10);
}

#[test]
fn analyze_reports_failures() {
    let mut entries = three_on_corridor();
    entries.push(CorpusEntry::new("d", "trap", "go up"));
    let (_dir, config) = setup(&entries);
    let csv = analyze(&config).unwrap();
    assert!(csv.starts_with('#'));
    assert!(csv.contains("failure,OverlyCompressed,mean_success,0.000000"));
    assert!(config.out.as_ref().unwrap().join("analysis.csv").exists());
}

#[test]
fn unknown_map_reference_is_rejected() {
    let (_dir, config) = setup(&[CorpusEntry::new("a", "nowhere", "go up")]);
    assert!(score(&config).is_err());
}
