use std::path::Path;
use std::process::{Command, Output};

use lidmas::config::{load_config, RunConfig};
use lidmas::sweep::read_csv;

fn lidmas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lidmas"))
        .current_dir(dir)
        .env_remove("LIDMAS_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sweep_on_defaults_writes_sixty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = lidmas(dir.path(), &["sweep", "--trials", "300"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = read_csv(&dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(table.len(), 60);
    assert!(stdout(&o).contains("60 rows"));
    assert!(stdout(&o).contains("master seed 20240601"));
    let manifest = std::fs::read_to_string(dir.path().join("out/sweep.manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256: "));
    assert!(manifest.contains("master_seed: 20240601"));
}

#[test]
fn analysis_without_table_suggests_sweep() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["sensitivity", "boundary"] {
        let o = lidmas(dir.path(), &[cmd]);
        assert!(!o.status.success());
        assert!(stderr(&o).contains("lidmas sweep"), "{}", stderr(&o));
    }
    let o = lidmas(dir.path(), &["boundary", "--regenerate", "--trials", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("out/sweep.csv").exists());
}

#[test]
fn vacuous_targets_give_lowest_squeezing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"targets": {"p_star": 0, "f_star": 0}}"#).unwrap();
    let o = lidmas(dir.path(), &["boundary", "--config", "cfg.json", "--regenerate", "--trials", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/boundary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p_base,d,s_min_db,attainable"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    for r in rows {
        assert_eq!(r[2].parse::<f64>().unwrap(), 8.0);
        assert_eq!(r[3], "true");
    }
}

#[test]
fn sensitivity_writes_one_file_per_distance() {
    let dir = tempfile::tempdir().unwrap();
    assert!(lidmas(dir.path(), &["sweep", "--trials", "200"]).status.success());
    let o = lidmas(dir.path(), &["sensitivity"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for d in [1, 3, 5, 7] {
        let text = std::fs::read_to_string(dir.path().join(format!("out/sensitivity_d{d}.csv"))).unwrap();
        assert!(text.starts_with("s_db,p_base,dF_dloss,dF_dsqueeze,scheme\n"));
        assert_eq!(text.lines().count(), 16);
    }
}

#[test]
fn seed_sources_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str, extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lidmas"));
        cmd.current_dir(dir.path()).env_remove("LIDMAS_SEED");
        if let Some(s) = env {
            cmd.env("LIDMAS_SEED", s);
        }
        let o = cmd.args(["sweep", "--trials", "200", "--out-dir", out]).args(extra).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(dir.path().join(out).join("sweep.csv")).unwrap()
    };
    let env7 = run("a", &[], Some("7"));
    let flag7 = run("b", &["--seed", "7"], Some("9"));
    let default = run("c", &[], None);
    let threads = run("d", &["--seed", "7", "--threads", "3"], None);
    assert_eq!(env7, flag7);
    assert_eq!(env7, threads);
    assert_ne!(env7, default);
}

#[test]
fn bad_configs_fail_with_keyed_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (doc, needle) in [
        (r#"{"grid": {"n_trials": 0}}"#, "grid.n_trials"),
        (r#"{"noise": {"s_db_typo": 5}}"#, "noise.s_db_typo"),
        ("{", "not valid JSON"),
    ] {
        std::fs::write(dir.path().join("bad.json"), doc).unwrap();
        let o = lidmas(dir.path(), &["sweep", "--config", "bad.json"]);
        assert!(!o.status.success());
        assert!(stderr(&o).contains(needle), "{doc}: {}", stderr(&o));
    }
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let calibrated = load_config(&root.join("calibrated.json")).unwrap().config;
    let defaults = RunConfig::default();
    assert_eq!(calibrated.noise, defaults.noise);
    assert_eq!(calibrated.rus, defaults.rus);
    assert_eq!(calibrated.code, defaults.code);
    load_config(&root.join("starting_point.json")).unwrap();
}

#[test]
fn calibrate_on_defaults_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = lidmas(dir.path(), &["calibrate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("constants unchanged"));
    let written = load_config(&dir.path().join("out/calibrated.json")).unwrap().config;
    assert_eq!(written.noise, RunConfig::default().noise);
}
