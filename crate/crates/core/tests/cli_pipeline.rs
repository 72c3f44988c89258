use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use xaidroid::apigraph::{ApiCallGraph, Label};
use xaidroid::checkpoint::Checkpoint;
use xaidroid::cli::run;
use xaidroid::evalmetrics::{AppTruth, Evaluation};
use xaidroid::localize::{LocalizationReport, Thresholds, Verdict};
use xaidroid::pipeline::analyze_corpus;
use xaidroid::synthcorpus::{gen_corpus, CorpusSpec, Split};

fn ok(args: &[&str]) {
    let mut argv = vec!["xaidroid"];
    argv.extend_from_slice(args);
    assert_eq!(run(argv.clone()), 0, "{argv:?}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir`, relative path to contents.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Corpus, both checkpoints and test-split reports under `root`.
fn full_run(root: &Path, workers: &str) {
    let c = root.join("corpus");
    ok(&["gen-corpus", "--out", s(&c), "--n-apps", "24", "--min-apps", "2", "--seed", "3", "--workers", workers]);
    ok(&["train", "--model", "gat", "--corpus", s(&c), "--epochs", "3", "--seed", "3", "--out", s(&root.join("gat.json"))]);
    ok(&[
        "train", "--model", "gam", "--corpus", s(&c), "--epochs", "1", "--step-size", "8", "--agents", "2", "--seed", "3",
        "--out", s(&root.join("gam.json")),
    ]);
    ok(&[
        "localize", "--gam", s(&root.join("gam.json")), "--gat", s(&root.join("gat.json")), "--corpus", s(&c),
        "--workers", workers, "--out", s(&root.join("reports")), "--text",
    ]);
    ok(&["detect", "--gam", s(&root.join("gam.json")), "--gat", s(&root.join("gat.json")), "--corpus", s(&c), "--out", s(&root.join("detect.json"))]);
}

#[test]
fn same_command_lines_give_byte_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_run(a.path(), "1");
    full_run(b.path(), "3");
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{} differs", k.display());
    }
}

#[test]
fn composed_subcommands_match_the_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    full_run(dir.path(), "0");
    let spec = CorpusSpec { n_apps: 24, min_apps: 2, seed: 3, ..CorpusSpec::default() };
    let corpus = gen_corpus(&spec).unwrap();

    // Graphs written by gen-corpus, and re-extracted by extract, equal the in-memory ones.
    let c = dir.path().join("corpus");
    let g2 = dir.path().join("regraphs");
    ok(&["build-vocab", "--corpus", s(&c), "--min-apps", "2", "--out", s(&dir.path().join("vocab.json"))]);
    assert_eq!(fs::read(dir.path().join("vocab.json")).unwrap(), fs::read(c.join("vocab.json")).unwrap());
    ok(&["extract", "--corpus", s(&c), "--vocab", s(&dir.path().join("vocab.json")), "--out", s(&g2)]);
    for g in &corpus.graphs {
        let disk = ApiCallGraph::from_json(&fs::read_to_string(g2.join(format!("{}.json", g.app_id))).unwrap()).unwrap();
        assert_eq!(&disk, g);
    }

    // Reports equal analyze_corpus on the stored checkpoints, up to provenance.
    let gam = Checkpoint::from_json(&fs::read_to_string(dir.path().join("gam.json")).unwrap()).unwrap().gam(Some(&corpus.vocab)).unwrap();
    let gat = Checkpoint::from_json(&fs::read_to_string(dir.path().join("gat.json")).unwrap()).unwrap().gat(Some(&corpus.vocab)).unwrap();
    let test: Vec<ApiCallGraph> = corpus.split_graphs(Split::Test).into_iter().cloned().collect();
    let expected = analyze_corpus(&gam, &gat, &test, Thresholds::default(), 1).unwrap();
    for r in expected {
        let mut disk = LocalizationReport::from_json(&fs::read_to_string(dir.path().join("reports").join(format!("{}.json", r.app_id))).unwrap()).unwrap();
        assert_eq!(disk.provenance.take().unwrap()["command"], "localize");
        assert_eq!(disk, r);
    }
}

#[test]
fn perfect_reports_score_one_at_every_level() {
    let dir = tempfile::tempdir().unwrap();
    full_run(dir.path(), "0");
    let truth_dir = dir.path().join("corpus/truth");
    let perfect = dir.path().join("perfect");
    fs::create_dir_all(&perfect).unwrap();
    for e in fs::read_dir(dir.path().join("reports")).unwrap() {
        let p = e.unwrap().path();
        if p.extension().unwrap() != "json" {
            continue;
        }
        let mut r = LocalizationReport::from_json(&fs::read_to_string(&p).unwrap()).unwrap();
        let t = AppTruth::from_json(&fs::read_to_string(truth_dir.join(format!("{}.json", r.app_id))).unwrap()).unwrap();
        r.detection.ensemble = Verdict::from_flag(t.label == Label::Malicious);
        for m in &mut r.methods {
            m.ensemble = Verdict::from_flag(t.malicious_methods.contains(&m.signature()));
        }
        for c in &mut r.classes {
            c.ensemble = Verdict::from_flag(t.malicious_classes.contains(&c.class_name));
        }
        fs::write(perfect.join(p.file_name().unwrap()), r.to_json().unwrap()).unwrap();
    }
    for level in ["app", "class", "method"] {
        let out = dir.path().join(format!("eval-{level}.json"));
        ok(&["evaluate", "--reports", s(&perfect), "--truth", s(&truth_dir), "--level", level, "--out", s(&out)]);
        let e: Evaluation = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        let m = &e.average;
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1, m.fpr, m.fnr), (1.0, 1.0, 1.0, 1.0, 0.0, 0.0), "{level}");
        assert_eq!(e.format, "xaidroid-eval-v1");
        assert_eq!(e.provenance.unwrap()["command"], "evaluate");
    }
}

#[test]
fn exit_status_separates_usage_from_data_errors() {
    let bin = env!("CARGO_BIN_EXE_xaidroid");
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();

    let out = status(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(status(&["localize", "--gam", "missing.json", "--gat", "missing.json", "--out", s(dir.path()), "g.json"]).status.code(), Some(1));
    assert_eq!(status(&["localize", "--method-threshold", "0", "--gam", "a", "--gat", "b", "--out", "o", "g.json"]).status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"format\": \"xaidroid-truth-v1\"").unwrap();
    let reports = dir.path().join("r");
    fs::create_dir_all(&reports).unwrap();
    fs::write(reports.join("x.json"), "not json").unwrap();
    let out = status(&["evaluate", "--reports", s(&reports), "--truth", s(dir.path()), "--level", "app"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(status(&["--version"]).status.code(), Some(0));
}

#[test]
fn sweep_output_is_commented_csv() {
    let dir = tempfile::tempdir().unwrap();
    full_run(dir.path(), "0");
    let out = dir.path().join("sweep.csv");
    ok(&["sweep", "--reports", s(&dir.path().join("reports")), "--truth", s(&dir.path().join("corpus/truth")), "--level", "class", "--out", s(&out)]);
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# format: xaidroid-sweep-v1");
    assert!(lines[1].starts_with("# provenance: {"));
    assert_eq!(lines[2], "threshold,recall,f1,flagged");
    assert_eq!(lines.len(), 3 + 5);
}
