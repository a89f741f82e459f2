use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fedfps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedfps")).args(args).env("FEDFPS_THREADS", "2").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fedfps(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, seed: u64) -> PathBuf {
    let cfg = serde_json::json!({
        "seed": seed,
        "generator": { "n_players": 40, "n_games": 8 },
        "train": { "epochs": 5, "eval_every": 0 },
        "rounds": { "rounds": 4, "clients_per_round": 10 }
    });
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

/// Runs gen, prep and federated training; returns (data dir, prep dir, run dir).
fn pipeline(root: &Path, seed: u64) -> (PathBuf, PathBuf, PathBuf) {
    let cfg = write_config(root, seed);
    let (data, prepped, run) = (root.join("data"), root.join("prep"), root.join("run"));
    ok(&["gen", "--config", s(&cfg), "--out", s(&data)]);
    ok(&[
        "prep",
        "--sessions",
        s(&data.join("sessions.jsonl")),
        "--players",
        s(&data.join("players.csv")),
        "--games",
        s(&data.join("games.csv")),
        "--out",
        s(&prepped),
        "--config",
        s(&cfg),
    ]);
    ok(&["train", "--mode", "federated", "--config", s(&cfg), "--pairs", s(&prepped.join("pairs.jsonl")), "--out", s(&run)]);
    (data, prepped, run)
}

#[test]
fn end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, prepped, run) = pipeline(tmp.path(), 7);
    for f in ["checkpoint/manifest.json", "checkpoint/params.bin", "train_log.jsonl", "val_report.json", "config.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let ckpt = run.join("checkpoint");
    let pairs = prepped.join("pairs.jsonl");

    let eval: Value = serde_json::from_str(&ok(&["eval", "--checkpoint", s(&ckpt), "--pairs", s(&pairs)])).unwrap();
    let saved: Value = serde_json::from_str(&fs::read_to_string(run.join("val_report.json")).unwrap()).unwrap();
    assert_eq!(eval["n"], saved["n"]);
    assert!((eval["WD"].as_f64().unwrap() - saved["WD"].as_f64().unwrap()).abs() < 1e-6);

    let forced = |p: &str| -> Value {
        serde_json::from_str(&ok(&["eval", "--checkpoint", s(&ckpt), "--pairs", s(&pairs), "--split", "all", "--force-path", p]))
            .unwrap()
    };
    let (wo, wb) = (forced("wo"), forced("wb"));
    assert_eq!(wo["n"], wb["n"]);
    assert_ne!(wo["CE"], wb["CE"]);

    let csv = ok(&["ablate", "--checkpoint", s(&ckpt), "--pairs", s(&pairs)]);
    assert!(csv.starts_with("path,WD,CE,MAE,KL,top1_acc,top2_acc,adjacent_acc,top1_macro_F1,n"));
    assert_eq!(csv.lines().count(), 5);

    let ins = tmp.path().join("insights");
    ok(&[
        "insights",
        "--pairs",
        s(&pairs),
        "--players",
        s(&data.join("players.csv")),
        "--countries",
        s(&data.join("countries.csv")),
        "--games",
        s(&data.join("games.csv")),
        "--out",
        s(&ins),
    ]);
    let anova = fs::read_to_string(ins.join("anova.csv")).unwrap();
    assert!(anova.starts_with("feature,DFB,DFW,F,p,eta2"));
    for f in ["tukey.csv", "ols_hardware.csv", "macro_fit.csv"] {
        assert!(ins.join(f).exists());
    }

    let first: Value = serde_json::from_str(fs::read_to_string(&pairs).unwrap().lines().next().unwrap()).unwrap();
    let (player, game) = (first["player_guid"].as_str().unwrap(), first["game_id"].as_str().unwrap());
    let pred: Value = serde_json::from_str(&ok(&[
        "predict",
        "--checkpoint",
        s(&ckpt),
        "--player",
        player,
        "--game",
        game,
        "--players",
        s(&data.join("players.csv")),
        "--games",
        s(&data.join("games.csv")),
    ]))
    .unwrap();
    let probs: Vec<f64> = pred["probs"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(probs.len(), 5);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn training_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (_, _, ra) = pipeline(a.path(), 3);
    let (_, _, rb) = pipeline(b.path(), 3);
    for f in ["checkpoint/params.bin", "checkpoint/manifest.json", "val_report.json"] {
        assert_eq!(fs::read(ra.join(f)).unwrap(), fs::read(rb.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fedfps(&["eval", "--checkpoint", s(&tmp.path().join("nope")), "--pairs", s(&tmp.path().join("nope.jsonl"))]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().unwrap();
    let v: Value = serde_json::from_str(line).unwrap();
    assert!(v["error"].is_string() && v["message"].is_string(), "{line}");
}

#[test]
fn failed_command_leaves_no_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--config", s(&write_config(tmp.path(), 1)), "--out", s(&data)]);
    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"num_classes": 5, "train": {"epochs": 0}}"#).unwrap();
    let run = tmp.path().join("run");
    let out = fedfps(&["train", "--config", s(&bad_cfg), "--pairs", s(&tmp.path().join("missing.jsonl")), "--out", s(&run)]);
    assert!(!out.status.success());
    assert!(!run.exists());

    let ins = tmp.path().join("ins");
    let out = fedfps(&[
        "insights",
        "--pairs",
        s(&data.join("sessions.jsonl")),
        "--players",
        s(&data.join("players.csv")),
        "--countries",
        s(&data.join("countries.csv")),
        "--out",
        s(&ins),
    ]);
    assert!(!out.status.success());
    assert!(!ins.exists());
}

#[test]
fn gradcheck_passes_by_default() {
    let v: Value = serde_json::from_str(&ok(&["gradcheck"])).unwrap();
    assert_eq!(v["passed"], true);
}
