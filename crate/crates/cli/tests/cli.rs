use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 5
subsets = ["all", "uav"]

[synth]
n_identities = 16

[train]
epochs = 2
embed_dim = 16
"#;

fn bodyid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bodyid"))
        .args(["--config", "tiny.toml", "--out", "out"])
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

#[test]
fn full_pipeline_prints_summary() {
    let dir = setup();
    for stage in ["synth", "split", "train"] {
        let o = bodyid(dir.path(), &[stage]);
        assert!(
            o.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let o = bodyid(dir.path(), &["eval"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines[0],
        "subset,probes,auc,tar_far_1e-3,tar_far_1e-4,rank1,rank20"
    );
    assert!(lines[1].starts_with("all,"));
    assert!(lines[2].starts_with("uav,"));
    assert!(dir.path().join("out/eval/report_uav.json").is_file());

    let o = bodyid(
        dir.path(),
        &["eval", "--subset", "long_range", "--metric", "euclidean"],
    );
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("long_range,"));
}

#[test]
fn missing_inputs_exit_nonzero() {
    let dir = setup();
    let o = bodyid(dir.path(), &["eval"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = setup();
    std::fs::write(
        dir.path().join("tiny.toml"),
        "[train]\nlearning_rate = -1.0\n",
    )
    .unwrap();
    assert!(!bodyid(dir.path(), &["synth"]).status.success());
    std::fs::write(dir.path().join("tiny.toml"), "unknown_key = 1\n").unwrap();
    assert!(!bodyid(dir.path(), &["synth"]).status.success());
}

#[test]
fn unknown_subset_rejected() {
    let dir = setup();
    assert!(!bodyid(dir.path(), &["eval", "--subset", "underwater"])
        .status
        .success());
}
