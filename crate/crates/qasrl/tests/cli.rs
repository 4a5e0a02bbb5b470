//! Exit codes, error prefixes and the file outputs of each subcommand.

mod common;

use std::fs;
use std::path::Path;

use common::*;
use serde_json::Value;

fn golden() -> String {
    example_dir().join("expected.jsonl").display().to_string()
}

fn json_of(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("{e}: {s}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run_cli(&[], tmp.path());
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error[usage]:"), "{}", r.stderr);
    assert_eq!(run_cli(&["evaluate", "a.jsonl"], tmp.path()).code, 1);
    assert_eq!(run_cli(&["bootstrap", "a", "b"], tmp.path()).code, 1, "seed is required");
    assert_eq!(run_cli(&["evaluate", &golden(), &golden(), "--tau", "1.5"], tmp.path()).code, 1);
    assert_eq!(run_cli(&["project", "x.conllu", "-o", "o.jsonl"], tmp.path()).code, 1);
    assert_eq!(run_cli(&["--help"], tmp.path()).code, 0);
}

#[test]
fn data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run_cli(&["stats", "missing.jsonl"], tmp.path());
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error[data]: missing.jsonl:"), "{}", r.stderr);

    let bad = tmp.path().join("bad.jsonl");
    let mut text = fs::read_to_string(golden()).unwrap();
    text = text.replace("\"end\":11,", "\"end\":40,");
    fs::write(&bad, text).unwrap();
    let r = run_cli(&["evaluate", p(&bad), &golden()], tmp.path());
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 1: record fr-abst#4: field qas[1].answers[0]"), "{}", r.stderr);
}

#[test]
fn evaluate_identity_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.jsonl");
    let r = run_cli(
        &["evaluate", &golden(), &golden(), "--tau", "0.5", "--theta", "0.78", "--report", p(&report)],
        tmp.path(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json_of(&r.stdout);
    for m in ["unlabeled", "exact", "semantic"] {
        for k in ["precision", "recall", "f1"] {
            assert_eq!(v["summary"][m][k], 1.0, "{m} {k}");
        }
    }
    assert_eq!(fs::read_to_string(&report).unwrap().lines().count(), 1);

    let b = run_cli(&["bootstrap", p(&report), p(&report), "--seed", "1", "--iterations", "200"], tmp.path());
    assert_eq!(b.code, 0, "{}", b.stderr);
    let v = json_of(&b.stdout);
    assert_eq!(v["observed_delta"], 0.0);
    assert!(v["p_value_one_sided"].as_f64().unwrap() >= 0.5);

    let s = run_cli(&["sensitivity", &format!("a={}", p(&report)), &format!("b={}", p(&report))], tmp.path());
    assert_eq!(s.code, 0, "{}", s.stderr);
    let lines: Vec<&str> = s.stdout.lines().collect();
    assert_eq!(lines.len(), 22);
    assert_eq!(lines[0], "theta\ta_p\ta_r\ta_f1\tb_p\tb_r\tb_f1\tgap(a,b)");
    assert!(lines[1].starts_with("0.70\t") && lines[21].starts_with("0.90\t"));
    assert!(lines[1..].iter().all(|l| l.ends_with("\t0.000000")));
}

#[test]
fn embedder_fixture_miss_is_a_provider_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("emb")).unwrap();
    let pred = tmp.path().join("pred.jsonl");
    fs::write(&pred, fs::read_to_string(golden()).unwrap().replace("Qui s'est", "Qui donc s'est")).unwrap();
    let r = run_cli(&["evaluate", p(&pred), &golden(), "--embed-fixtures", "emb"], tmp.path());
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.starts_with("error[provider]: fixture miss on /embed"), "{}", r.stderr);

    // the built-in embedder needs no service
    let r = run_cli(&["evaluate", p(&pred), &golden()], tmp.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(json_of(&r.stdout)["summary"]["exact"]["counts"]["tp"], 2);
}

#[test]
fn calibrate_writes_curve_files() {
    let tmp = tempfile::tempdir().unwrap();
    let samples = tmp.path().join("samples.jsonl");
    let mut lines = String::new();
    for (score, label) in [(0.9, true), (0.8, true), (0.75, false), (0.6, false), (0.85, true), (0.5, false)] {
        lines.push_str(&format!("{{\"score\":{score},\"human_label\":{label}}}\n"));
    }
    fs::write(&samples, lines).unwrap();
    let out = tmp.path().join("cal");
    let r = run_cli(&["calibrate", p(&samples), "--kind", "semantic", "--out-dir", p(&out)], tmp.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let curve = fs::read_to_string(out.join("curve.tsv")).unwrap();
    assert_eq!(curve.lines().count(), 47);
    let summary = json_of(&fs::read_to_string(out.join("summary.json")).unwrap());
    assert_eq!(summary["selected"]["threshold"], 0.76);
    assert_eq!(summary["selected_point"]["precision"], 1.0);
    let iou = run_cli(&["calibrate", p(&samples), "--kind", "iou"], tmp.path());
    assert_eq!(json_of(&iou.stdout)["sweep"]["step"], 0.05);
}

#[test]
fn dataset_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let conllu = example_dir().join("fr.conllu");
    let ingested = tmp.path().join("ingested.jsonl");
    let r = run_cli(&["ingest", p(&conllu), "--language", "fr", "-o", p(&ingested)], tmp.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    // 2 verbs and 3 nouns; AUX only on request
    assert_eq!(fs::read_to_string(&ingested).unwrap().lines().count(), 5);
    run_cli(&["ingest", p(&conllu), "--language", "fr", "-o", p(&ingested), "--include-aux"], tmp.path());
    assert_eq!(fs::read_to_string(&ingested).unwrap().lines().count(), 6);

    let r = run_cli(&["stats", p(&ingested), &golden()], tmp.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows: Vec<&str> = r.stdout.lines().collect();
    assert!(rows[1].ends_with("\t1\t6\t0"), "{}", rows[1]);
    assert!(rows[2].ends_with("\t1\t1\t3"), "{}", rows[2]);
    assert_eq!(rows[3], "total\t1\t7\t3");

    let out = tmp.path().join("split");
    let r = run_cli(&["split", p(&ingested), "--seed", "7", "--ratios", "1,0,0", "--out-dir", p(&out)], tmp.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(fs::read_to_string(out.join("train.jsonl")).unwrap(), fs::read_to_string(&ingested).unwrap());
    assert_eq!(fs::read_to_string(out.join("test.jsonl")).unwrap(), "");
    assert_eq!(run_cli(&["split", p(&ingested), "--seed", "7", "--ratios", "1,1,0", "--out-dir", p(&out)], tmp.path()).code, 1);

    let train = tmp.path().join("train.jsonl");
    assert_eq!(run_cli(&["emit-train", &golden(), "-o", p(&train)], tmp.path()).code, 0);
    let ex = json_of(fs::read_to_string(&train).unwrap().lines().next().unwrap());
    assert!(ex["input"].as_str().unwrap().contains("**abstenue**"));

    let icl = tmp.path().join("icl.jsonl");
    let r = run_cli(&["emit-icl", &golden(), "-o", p(&icl)], tmp.path());
    assert_eq!(r.code, 2, "no built-in French template");
    let r = run_cli(&["emit-icl", &golden(), "-o", p(&icl), "--template-language", "en"], tmp.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let prompt = json_of(fs::read_to_string(&icl).unwrap().trim());
    assert!(prompt["prompt"].as_str().unwrap().contains("**abstenue**"));
}
