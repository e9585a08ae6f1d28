use std::path::Path;
use std::process::{Command, Output};

fn riskforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskforge"))
        .args(args)
        .env("RISKFORGE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, n: &str, seed: &str) {
    ok(&riskforge(&["synth", "--out", p(dir), "--n-patients", n, "--seed", seed]));
}

#[test]
fn run_all_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "400", "12");
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        ok(&riskforge(&[
            "run-all", "--data-dir", p(&data), "--seed", "7", "--run-dir", p(&dir), "--epochs", "10",
        ]));
        dir
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["table2.csv", "table3.csv", "km_curve.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn run_all_requires_seed_and_default_dir_is_named_by_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "150", "1");
    let out = riskforge(&["run-all", "--data-dir", p(&data)]);
    assert_eq!(out.status.code(), Some(2));
    let root = tmp.path().join("runs");
    let stdout = ok(&riskforge(&[
        "run-all", "--data-dir", p(&data), "--seed", "1", "--out-root", p(&root), "--experiments", "EX-1",
        "--models", "LR,NN", "--epochs", "3",
    ]));
    assert!(stdout.contains("run directory"));
    let dirs: Vec<_> = std::fs::read_dir(&root).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(dirs.len(), 1);
    let name = dirs[0].to_string_lossy().into_owned();
    let (stamp, hash) = name.split_once('-').unwrap();
    assert_eq!(stamp.len(), 16);
    assert_eq!(hash.len(), 12);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join(&name).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["job_seeds"].as_object().unwrap().len(), 2);

    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, "{\"seed\": 9, \"experiments\": [\"EX-1\"], \"models\": [\"lr\"]}").unwrap();
    let dir = tmp.path().join("from_config");
    ok(&riskforge(&["--config", p(&cfg), "run-all", "--data-dir", p(&data), "--run-dir", p(&dir)]));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "120", "2");
    let bad = riskforge(&["run-all", "--data-dir", p(&data), "--seed", "1", "--experiments", "EX-7", "--run-dir", p(&tmp.path().join("r"))]);
    assert_eq!(bad.status.code(), Some(2));
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, "{\"seed\": 1, \"unknown_field\": 3}").unwrap();
    assert_eq!(riskforge(&["--config", p(&cfg), "cohort", "--data-dir", p(&data), "--out", p(tmp.path())]).status.code(), Some(2));
    let missing = riskforge(&["cohort", "--data-dir", p(&tmp.path().join("nowhere")), "--out", p(tmp.path())]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn stage_commands_and_scoring() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "300", "4");
    let f = tmp.path().join("f");
    ok(&riskforge(&["etl", "--data-dir", p(&data), "--out", p(&f)]));
    assert!(f.join("load_report.json").exists());
    ok(&riskforge(&["cohort", "--data-dir", p(&data), "--out", p(&f)]));
    assert!(f.join("cohort.csv").exists() && f.join("funnel.csv").exists());
    ok(&riskforge(&["features", "--data-dir", p(&data), "--out", p(&f), "--experiment", "EX-1", "--seed", "3"]));
    ok(&riskforge(&["features", "--data-dir", p(&data), "--out", p(&f), "--experiment", "EX-2", "--seed", "3"]));
    ok(&riskforge(&["score-pce", "--data-dir", p(&data), "--out", p(&f.join("pce.csv"))]));

    let x1 = f.join("features_EX-1.csv");
    let labels = f.join("labels.csv");
    let model = tmp.path().join("lr.json");
    ok(&riskforge(&[
        "train", "--features", p(&x1), "--labels", p(&labels), "--split", p(&f.join("split.csv")), "--model", "LR",
        "--out", p(&model),
    ]));
    let nnk = tmp.path().join("nnk.json");
    ok(&riskforge(&[
        "train", "--features", p(&x1), "--labels", p(&labels), "--knowledge", p(&f.join("pce_scores.csv")), "--model",
        "NN-K", "--epochs", "3", "--out", p(&nnk),
    ]));
    let ev = tmp.path().join("ev");
    let stdout = ok(&riskforge(&[
        "evaluate", "--model", p(&model), "--features", p(&x1), "--labels", p(&labels), "--split",
        p(&f.join("split.csv")), "--part", "test", "--out", p(&ev),
    ]));
    assert!(stdout.contains("AUC"));
    assert!(ev.join("metrics.json").exists() && ev.join("roc.csv").exists());

    // predictions keep ids and order
    let pred = tmp.path().join("pred.csv");
    ok(&riskforge(&["score", "--model", p(&model), "--input", p(&x1), "--out", p(&pred)]));
    let text = std::fs::read_to_string(&pred).unwrap();
    let feats = std::fs::read_to_string(&x1).unwrap();
    assert_eq!(text.lines().count(), feats.lines().count());
    assert_eq!(text.lines().next(), Some("instance_id,probability"));
    for (a, b) in text.lines().skip(1).zip(feats.lines().skip(1)) {
        assert_eq!(a.split(',').next(), b.split(',').next());
    }

    // schema mismatch: EX-2 columns fed to an EX-1 model
    let out = riskforge(&["score", "--model", p(&model), "--input", p(&f.join("features_EX-2.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("c1"), "{err}");

    // a knowledge-input model without knowledge
    let out = riskforge(&["score", "--model", p(&nnk), "--input", p(&x1)]);
    assert_eq!(out.status.code(), Some(3));

    // empty input: header-only output
    let header = feats.lines().next().unwrap();
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, format!("{header}\n")).unwrap();
    let out = ok(&riskforge(&["score", "--model", p(&model), "--input", p(&empty)]));
    assert_eq!(out, "instance_id,probability\n");
}
