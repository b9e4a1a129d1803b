mod common;

use common::*;
use serde_json::{json, Value};

#[test]
fn predict_recovers_the_generating_command() {
    let fx = fixture();
    for (file, command) in segments(&fx.held) {
        let out = ok(&["predict", "--model", p(&fx.model), "--recording", p(&file), "--offset", "1"]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["prediction"]["command"], command.as_str(), "{}", file.display());
        let conf = v["prediction"]["confidence"].as_f64().unwrap();
        assert!((1.0 / 3.0..=1.0).contains(&conf));
        assert_eq!(v["provenance"]["inputs"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn train_writes_provenance_and_cv_report() {
    let fx = fixture();
    let side = read_json(&fx.root.join("model.json.provenance.json"));
    let input = &side["inputs"][0];
    assert!(input["path"].as_str().unwrap().ends_with("dataset.json"));
    assert_eq!(input["sha256"].as_str().unwrap().len(), 64);
    let model = read_json(&fx.model);
    assert_eq!(model["machines"].as_array().unwrap().len(), 3);
    assert!(model["cv"]["overall"].as_f64().unwrap() >= 0.9);
}

#[test]
fn preprocess_emits_seventy_features_per_window() {
    let fx = fixture();
    let out = fx.root.join("held-windows.json");
    ok(&["preprocess", "--dataset", p(&fx.held), "--out", p(&out)]);
    let v = read_json(&out);
    let windows = v["windows"].as_array().unwrap();
    // 6 segments of 4 s: windows at 0, 1.5 s
    assert_eq!(windows.len(), 12);
    assert!(windows.iter().all(|w| w["features"].as_array().unwrap().len() == 70));
    assert_eq!(v["pipeline_fingerprint"].as_str().unwrap().len(), 64);
}

fn simulate(out: &std::path::Path, extra: &[&str]) -> Value {
    let fx = fixture();
    let mut args = vec!["simulate", "--model", p(&fx.model), "--dataset", p(&fx.held), "--out", p(out)];
    args.extend_from_slice(extra);
    ok(&args);
    read_json(&out.join("simulate.json"))
}

#[test]
fn prefer_predicted_simulation_completes_eight_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let summary = simulate(&out, &["--rounds", "8", "--rating-policy", "prefer-predicted"]);
    assert_eq!(summary["rounds"], 8);
    assert_eq!(summary["finalized"], true);
    assert_eq!(summary["min_rounds_met"], true);

    let report = read_json(&out.join("report.json"));
    let rounds = report["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), 8);
    for r in rounds {
        // the predicted candidate sits first and gets the top rating
        assert_eq!(r["selected"], 0);
        assert_eq!(r["selected_rating"], 7);
    }
    assert_eq!(report["final_mark"]["round"], 8);
    assert_eq!(report["status"], "finalized");

    let text = std::fs::read_to_string(out.join("session.jsonl")).unwrap();
    for (i, line) in text.lines().enumerate() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["v"], 1);
        assert_eq!(v["seq"], i);
    }
    let replayed = ok(&["report", "--log", p(&out.join("session.jsonl"))]);
    assert_eq!(replayed.as_bytes(), std::fs::read(out.join("report.json")).unwrap());
}

#[test]
fn random_policy_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run_with = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        simulate(&out, &["--rounds", "4", "--rating-policy", "random", "--seed", seed]);
        std::fs::read_to_string(out.join("report.json")).unwrap()
    };
    let a = run_with("a", "3");
    let b = run_with("b", "3");
    let c = run_with("c", "4");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let v: Value = serde_json::from_str(&a).unwrap();
    for r in v["rounds"].as_array().unwrap() {
        assert!(r["ratings"].as_array().unwrap().iter().all(|x| (1..=7).contains(&x.as_i64().unwrap())));
    }
}

#[test]
fn scripted_policy_follows_the_script() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    let body = json!({ "v": 1, "rounds": [
        { "ratings": [1, 2, 3, 4, 5] },
        { "ratings": [2, 6, 1, 1, 1], "final_mark": 3 },
    ]});
    std::fs::write(&script, body.to_string()).unwrap();
    let out = dir.path().join("sim");
    let summary = simulate(&out, &["--rounds", "8", "--rating-policy", "script", "--script", p(&script)]);
    assert_eq!(summary["rounds"], 2);
    assert_eq!(summary["finalized"], true);
    assert_eq!(summary["min_rounds_met"], false);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["rounds"][0]["selected"], 4);
    assert_eq!(report["rounds"][1]["ratings"], json!([2, 6, 1, 1, 1]));
    assert_eq!(report["final_mark"]["candidate"], 3);
}

#[test]
fn exhausted_script_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(&script, json!({ "v": 1, "rounds": [{ "ratings": [4, 4, 4, 4, 4] }] }).to_string()).unwrap();
    let fx = fixture();
    let res = run(&[
        "--json", "simulate", "--model", p(&fx.model), "--dataset", p(&fx.held), "--out", p(&dir.path().join("s")),
        "--rounds", "3", "--rating-policy", "script", "--script", p(&script),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let err: Value = json_error(&res);
    assert_eq!(err["error"]["kind"], "schema");
}

#[test]
fn cluster_eval_finds_five_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("p1");
    let b = dir.path().join("p2");
    ok(&["synth", "--kind", "five-clusters", "--out", p(&a), "--per-class", "20", "--duration", "4", "--seed", "5", "--participant", "p1"]);
    ok(&["synth", "--kind", "five-clusters", "--out", p(&b), "--per-class", "20", "--duration", "4", "--seed", "6", "--participant", "p2"]);
    let report_path = dir.path().join("clusters.json");
    let table = ok(&["cluster-eval", "--dataset", p(&a), "--dataset", p(&b), "--out", p(&report_path), "--seed", "1"]);
    assert!(table.contains("best k: 5"), "{table}");
    let v = read_json(&report_path);
    assert_eq!(v["report"]["best_k"], 5);
    assert_eq!(v["report"]["participants"].as_array().unwrap().len(), 2);
    let at5 = v["report"]["average"].as_array().unwrap().iter().find(|r| r["k"] == 5).unwrap().clone();
    for (_, scores) in at5["features"].as_object().unwrap() {
        assert!((scores["weighted_purity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn errors_have_stable_kinds_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");

    let res = run(&["--json", "train", "--dataset", p(&missing), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(res.status.code(), Some(1));
    let err: Value = json_error(&res);
    assert_eq!(err["error"]["kind"], "input");
    assert!(err["error"]["message"].as_str().unwrap().contains("nope"));

    let res = run(&["--json", "train", "--bogus"]);
    assert_eq!(res.status.code(), Some(2));
    let err: Value = json_error(&res);
    assert_eq!(err["error"]["kind"], "usage");

    let res = run(&["train", "--dataset", "x", "--out", "y", "--gamma", "zero"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("usage error"));

    // a model only works with the pipeline it was trained under
    let fx = fixture();
    let pipeline = dir.path().join("pipeline.toml");
    std::fs::write(&pipeline, "[filter]\nlow_cut = 1.0\nhigh_cut = 40.0\norder = 8\n").unwrap();
    let (file, _) = &segments(&fx.held)[0];
    let res = run(&["--json", "predict", "--model", p(&fx.model), "--recording", p(file), "--pipeline", p(&pipeline)]);
    assert_eq!(res.status.code(), Some(1));
    let err: Value = json_error(&res);
    assert_eq!(err["error"]["kind"], "model");

    std::fs::write(&pipeline, "window_s = 2.0\nwindow_z = 1\n").unwrap();
    let res = run(&["--json", "predict", "--model", p(&fx.model), "--recording", p(file), "--pipeline", p(&pipeline)]);
    let err: Value = json_error(&res);
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("line 2"));

    let res = run(&["--json", "predict", "--model", p(&fx.model), "--recording", p(file), "--offset", "3"]);
    let err: Value = json_error(&res);
    assert_eq!(err["error"]["kind"], "input");
}
