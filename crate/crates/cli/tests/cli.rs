use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn hintclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hintclust"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_small(dir: &Path, seed: &str) {
    let out = hintclust(&[
        "synth", "--k", "3", "--n1", "60", "--n2", "30", "--seed", seed, "--out", s(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synth_writes_three_deterministic_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth_small(&a, "1");
    synth_small(&b, "1");
    for f in ["tweets.jsonl", "news.jsonl", "truth.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let truth = fs::read_to_string(a.join("truth.csv")).unwrap();
    assert!(truth.starts_with("collection,id,cluster\n"));
}

#[test]
fn synth_rejects_out_of_range_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hintclust(&["synth", "--anchor-rate", "1.2", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cluster_writes_outputs_and_echoes_default_theta() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    synth_small(&data, "4");
    let out = hintclust(&[
        "--threads", "2",
        "cluster",
        "--t1", s(&data.join("tweets.jsonl")),
        "--t2", s(&data.join("news.jsonl")),
        "--k1", "3", "--k2", "3", "--seed", "7",
        "--out", s(&run),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["result.json", "trace.csv", "confidence1.csv", "confidence2.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let result = read_json(&run.join("result.json"));
    assert_eq!(result["config"]["theta"], json!(1.0));
    assert_eq!(result["config"]["seed"], json!(7));
    assert_eq!(result["labels1"].as_array().unwrap().len(), 60);
    assert_eq!(result["labels2"].as_array().unwrap().len(), 30);
    assert_eq!(result["anchors"].as_array().unwrap().len(), 30);
    let trace = fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.starts_with("round,half,iter,objective,grad_norm,tau\n"));

    let eval = hintclust(&[
        "eval", "--result", s(&run.join("result.json")), "--truth", s(&data.join("truth.csv")),
    ]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let report: Value = serde_json::from_slice(&eval.stdout).unwrap();
    let nmi2 = report["nmi2"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&nmi2));
    assert_eq!(report["f1_variant"], json!("pairwise"));
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.jsonl");
    let out = hintclust(&[
        "cluster", "--t1", s(&missing), "--t2", s(&missing), "--out", s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_small(&data, "2");
    let conf = tmp.path().join("run.conf");
    fs::write(
        &conf,
        format!(
            "t1 = {}\nt2 = {}\nk1 = 3\nk2 = 3\ntheta = 2.5\nmax_inner = 50\n",
            s(&data.join("tweets.jsonl")),
            s(&data.join("news.jsonl"))
        ),
    )
    .unwrap();
    let run = tmp.path().join("run");
    let out = hintclust(&["cluster", "--config", s(&conf), "--theta", "0.5", "--out", s(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result = read_json(&run.join("result.json"));
    assert_eq!(result["config"]["theta"], json!(0.5));
    assert_eq!(result["config"]["params"]["max_inner"], json!(50));

    fs::write(&conf, "thetta = 1\n").unwrap();
    let bad = hintclust(&["cluster", "--config", s(&conf), "--out", s(&run)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("thetta"));
}

fn write_result(path: &Path, labels1: &[(String, usize)], labels2: &[(String, usize)]) {
    let assign = |ls: &[(String, usize)]| {
        ls.iter().map(|(id, c)| json!({"id": id, "cluster": c})).collect::<Vec<_>>()
    };
    let doc = json!({
        "config": {},
        "labels1": assign(labels1),
        "labels2": assign(labels2),
        "anchors": [],
        "links": [],
        "metrics": {
            "anchor_count": 0, "d": null, "nd": null, "d_hard": null, "nd_hard": null,
            "objective_initial": 0.0, "objective_final": 0.0, "rounds": 1,
            "converged": true, "inner_iterations": 0
        },
        "cond_entropy": null
    });
    fs::write(path, serde_json::to_string(&doc).unwrap()).unwrap();
}

fn write_truth(path: &Path, tweets: &[(String, usize)], news: &[(String, usize)]) {
    let mut text = String::from("collection,id,cluster\n");
    for (id, c) in tweets {
        text += &format!("tweet,{id},{c}\n");
    }
    for (id, c) in news {
        text += &format!("news,{id},{c}\n");
    }
    fs::write(path, text).unwrap();
}

fn labelled(prefix: &str, n: usize, f: impl Fn(usize) -> usize) -> Vec<(String, usize)> {
    (0..n).map(|i| (format!("{prefix}{i}"), f(i))).collect()
}

#[test]
fn eval_perfect_independent_and_mismatched() {
    let tmp = tempfile::tempdir().unwrap();
    let (result, truth) = (tmp.path().join("result.json"), tmp.path().join("truth.csv"));
    let t1 = labelled("t", 400, |i| i % 4);
    let t2 = labelled("n", 100, |i| i % 2);
    write_truth(&truth, &t1, &t2);

    // Relabelled copy of the truth.
    write_result(&result, &labelled("t", 400, |i| (i + 1) % 4), &labelled("n", 100, |i| 1 - i % 2));
    let out = hintclust(&["eval", "--result", s(&result), "--truth", s(&truth)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["nmi1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((report["nmi2"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    write_result(&result, &labelled("t", 400, |i| (i / 4) % 4), &labelled("n", 100, |i| (i / 2) % 2));
    let out = hintclust(&["eval", "--result", s(&result), "--truth", s(&truth)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["nmi1"].as_f64().unwrap() < 0.01);

    let mut renamed = t1.clone();
    renamed[5].0 = "t_unknown".into();
    write_result(&result, &renamed, &t2);
    let out = hintclust(&["eval", "--result", s(&result), "--truth", s(&truth)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t5"));
}

#[test]
fn sweep_prints_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_small(&data, "3");
    let out = hintclust(&[
        "eval",
        "--truth", s(&data.join("truth.csv")),
        "--t1", s(&data.join("tweets.jsonl")),
        "--t2", s(&data.join("news.jsonl")),
        "--k1", "3", "--k2", "3",
        "--sweep", "theta=0:0.5:1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("theta,nmi1,nmi2"));
    assert!(lines[1].starts_with("0,"));
    assert!(lines[3].starts_with("1,"));
}

#[test]
fn inspect_dumps_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let dump = tmp.path().join("dump");
    synth_small(&data, "5");
    let out = hintclust(&[
        "inspect",
        "--t1", s(&data.join("tweets.jsonl")),
        "--t2", s(&data.join("news.jsonl")),
        "--out", s(&dump),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["n1"], json!(60));
    assert_eq!(summary["meta_paths1"].as_array().unwrap().len(), 6);
    assert_eq!(summary["meta_paths2"].as_array().unwrap().len(), 4);
    for f in ["sim1.csv", "sim2.csv", "transition.csv", "counts_t1_word.csv"] {
        assert!(dump.join(f).is_file(), "{f} missing");
    }
    assert!(fs::read_to_string(dump.join("sim1.csv")).unwrap().starts_with("row,col,value\n"));
}
