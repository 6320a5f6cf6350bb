use std::path::{Path, PathBuf};
use std::process::Command;

use maxinv_cli::config::ExperimentConfig;
use maxinv_cli::pipeline::{cmd_pipeline, cmd_synth, RunLog};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_maxinv"));
    c.env("RUST_LOG", "warn");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

#[test]
fn noisy_pipeline_is_bitwise_reproducible() {
    let mut cfg = ExperimentConfig::preset("table1").unwrap();
    cfg.noise.eta = 0.02;
    cfg.noise.seed = 11;
    let a = cmd_pipeline(&cfg).unwrap();
    let b = cmd_pipeline(&cfg).unwrap();
    assert_eq!(a.runs[0].files(), b.runs[0].files());
}

#[test]
fn seed_matters_only_with_noise() {
    let mut cfg = ExperimentConfig::preset("table5").unwrap();
    let synth = |cfg: &ExperimentConfig| cmd_synth(cfg, None, &mut RunLog::default()).unwrap().to_text();
    let body = |t: String| t.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    cfg.noise.seed = 1;
    let clean1 = synth(&cfg);
    cfg.noise.seed = 2;
    let clean2 = synth(&cfg);
    assert_eq!(body(clean1.clone()), body(clean2));
    cfg.noise.eta = 0.02;
    let noisy2 = synth(&cfg);
    cfg.noise.seed = 1;
    let noisy1 = synth(&cfg);
    assert_ne!(body(noisy1.clone()), body(noisy2));
    assert_ne!(body(noisy1), body(clean1));
}

#[test]
fn split_commands_reproduce_the_pipeline() {
    let dir = scratch("split");
    let (all, split) = (dir.join("all"), dir.join("split"));
    let ok = |c: &mut Command| assert!(c.output().unwrap().status.success());
    ok(bin().args(["pipeline", "--preset", "table1", "--out"]).arg(&all));
    ok(bin().args(["synth", "--preset", "table1", "--out"]).arg(&split));
    ok(bin()
        .args(["complete", "--preset", "table1", "--dataset"])
        .arg(split.join("dataset.txt"))
        .arg("--out")
        .arg(&split));
    ok(bin()
        .args(["invert", "--preset", "table1", "--traces"])
        .arg(split.join("completed.txt"))
        .arg("--out")
        .arg(&split));
    for f in ["dataset.txt", "completed.txt", "peaks.txt", "result.txt", "field.txt"] {
        assert_eq!(read(&all, f), read(&split, f), "{f}");
    }
    let log = read(&all, "run.log");
    assert!(log.contains("0 additional factorization(s)"), "{log}");
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = scratch("errors");
    let no_truth = dir.join("no_truth.json");
    std::fs::write(&no_truth, r#"{"truth": null, "waves": {"count": 8}}"#).unwrap();
    let out = bin().arg("synth").arg("--config").arg(&no_truth).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truth"));

    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\n  \"waves\": [1,\n}").unwrap();
    let out = bin().arg("pipeline").arg("--config").arg(&bad).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let out = bin().args(["pipeline", "--preset", "table9", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
