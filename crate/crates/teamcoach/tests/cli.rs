use std::path::Path;
use std::process::{Command, Output};

fn teamcoach(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teamcoach"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

#[test]
fn pipeline_runs_then_skips_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let first = teamcoach(dir.path(), &["pipeline", "--domain", "tiny"]);
    assert_eq!(first.status.code(), Some(0), "{}", text(&first));
    assert_eq!(text(&first).matches("done in").count(), 6);
    assert!(text(&first).contains("objective audit"));
    for f in [
        "manifest.json",
        "config.toml",
        "report/strategies.csv",
        "benchmark/episodes.csv",
        "infer/accuracy.csv",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }

    let second = teamcoach(dir.path(), &["pipeline", "--domain", "tiny"]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(text(&second).matches("skipped").count(), 6, "{}", text(&second));

    // A new seed changes every stage's inputs.
    let third = teamcoach(dir.path(), &["pipeline", "--domain", "tiny", "--seed", "3"]);
    assert_eq!(third.status.code(), Some(0));
    assert_eq!(text(&third).matches("done in").count(), 6);
}

#[test]
fn stages_refuse_missing_or_modified_upstream_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let early = teamcoach(dir.path(), &["train", "--domain", "tiny"]);
    assert_eq!(early.status.code(), Some(1));
    assert!(
        text(&early).contains("stage generate has not been run"),
        "{}",
        text(&early)
    );

    for stage in ["generate", "train"] {
        assert_eq!(
            teamcoach(dir.path(), &[stage, "--domain", "tiny"]).status.code(),
            Some(0)
        );
    }
    std::fs::write(dir.path().join("data/eval.json"), b"{}").unwrap();
    let stale = teamcoach(dir.path(), &["infer", "--domain", "tiny"]);
    assert_eq!(stale.status.code(), Some(1));
    assert!(text(&stale).contains("data/eval.json has sha256"), "{}", text(&stale));

    std::fs::remove_file(dir.path().join("data/eval.json")).unwrap();
    let missing = teamcoach(dir.path(), &["infer", "--domain", "tiny"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(text(&missing).contains("is missing"), "{}", text(&missing));

    // Rerunning the pipeline regenerates what was lost.
    assert_eq!(
        teamcoach(dir.path(), &["pipeline", "--domain", "tiny"]).status.code(),
        Some(0)
    );
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "domain = \"tiny\"\n[value]\nmax_sweeps = 1\ntol = 1e-12\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    for stage in ["generate", "train"] {
        assert_eq!(teamcoach(dir.path(), &[stage, "--config", cfg]).status.code(), Some(0));
    }
    let out = teamcoach(dir.path(), &["value", "--config", cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = teamcoach(dir.path(), &["generate", "--domain", "chess"]);
    assert_eq!(unknown.status.code(), Some(1));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[benchmark]\nepisodez = 3\n").unwrap();
    let out = teamcoach(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("episodez"), "{}", text(&out));

    std::fs::write(&cfg, "[benchmark]\nacceptance = 1.5\n").unwrap();
    let out = teamcoach(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));

    let help = teamcoach(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
}
