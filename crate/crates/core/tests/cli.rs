//! End-to-end behavior of the `mobembed` binary: exit codes, stage
//! isolation and reproducibility on a small configuration.

use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[trace]
n_nodes = 12
n_groups = 40
sim_duration = 432000.0

[embed]
dim = 4
"#;

fn mobembed(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobembed"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_clean_config_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = mobembed(&["validate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn validate_reports_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
        [trace]
        k_mix = [{ period = 86400.0, fraction = 0.6 }, { period = 604800.0, fraction = 0.3 }]
        [walks]
        p = 0.0
        "#,
    );
    let o = mobembed(&["validate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("trace.k_mix"), "{err}");
    assert!(err.contains("p must be > 0"), "{err}");
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[walks]\nlength = 3\n");
    assert_eq!(mobembed(&["validate"], &cfg, dir.path()).status.code(), Some(1));
}

#[test]
fn missing_upstream_artifact_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = mobembed(&["walks"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("graphs"), "{}", stderr(&o));
}

#[test]
fn graphs_on_empty_trace_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    std::fs::create_dir_all(dir.path().join("trace")).unwrap();
    std::fs::write(dir.path().join("trace/trace.csv"), "node_id,t_start_s,t_end_s,x_m,y_m\n").unwrap();
    let o = mobembed(&["graphs"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!dir.path().join("graphs/manifest.json").exists());
}

#[test]
fn stages_chain_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for stage in ["generate", "graphs", "walks", "embed", "analyze"] {
        let o = mobembed(&[stage], &cfg, dir.path());
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    let walks = std::fs::read(dir.path().join("walks/manifest.json")).unwrap();
    let stats = std::fs::read(dir.path().join("analyze/node_stats.csv")).unwrap();
    // Rerunning a middle stage reproduces its outputs, and deleting
    // downstream artifacts does not affect it.
    std::fs::remove_dir_all(dir.path().join("embed")).unwrap();
    assert_eq!(mobembed(&["walks"], &cfg, dir.path()).status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("walks/manifest.json")).unwrap(), walks);
    assert_eq!(mobembed(&["embed"], &cfg, dir.path()).status.code(), Some(0));
    assert_eq!(mobembed(&["analyze"], &cfg, dir.path()).status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("analyze/node_stats.csv")).unwrap(), stats);
}

#[test]
fn same_seed_gives_identical_node_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_mobembed"))
            .args(["all", "--seed", "7", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stderr(&o).contains("top-5 avg norm"));
    }
    let read = |p: &Path| std::fs::read(p.join("analyze/node_stats.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("trace/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
}
