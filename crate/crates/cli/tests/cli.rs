use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hzreach::oracle::{directions, LeafSet};
use hzreach::reach::reach_horizon;
use hzreach_cli::commands::{ModelsDoc, ReachDoc};
use hzreach_cli::config::ExperimentConfig;
use hzreach_cli::exit;
use hzreach_cli::output::{EQUIVALENCE, TIMING, TIMING_STATS};
use serde_json::{json, Value};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(config_path(name)).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn hzreach(cfg: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hzreach"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unvisited_mode_exits_with_identification_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = load("pwa_reach.json");
    v["system"]["regions"] = json!([
        {"L": [[1.0, 0.0]], "rho": [50.0]},
        {"L": [[-1.0, 0.0]], "rho": [-50.0]}
    ]);
    let cfg = write_config(dir.path(), &v);
    ok(&hzreach(&cfg, dir.path(), &["simulate"]));
    let o = hzreach(&cfg, dir.path(), &["identify"]);
    assert_eq!(o.status.code(), Some(exit::IDENTIFICATION));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mode 1"));
}

#[test]
fn inconsistent_initial_set_exits_with_infeasible_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = load("three_sensor_estimation.json");
    v["initial_set"] = json!({"center": [100.0, 100.0], "generators": [[1.0, 0.0], [0.0, 1.0]]});
    v["estimation"]["model_source"] = json!("known");
    v["estimation"]["method"] = json!("gi");
    let cfg = write_config(dir.path(), &v);
    ok(&hzreach(&cfg, dir.path(), &["simulate"]));
    let o = hzreach(&cfg, dir.path(), &["estimate", "--steps", "3"]);
    assert_eq!(o.status.code(), Some(exit::INFEASIBLE), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_config_exits_with_generic_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = hzreach(&dir.path().join("absent.json"), dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(exit::OTHER));
}

#[test]
fn single_method_run_leaves_no_equivalence_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("three_sensor_estimation.json");
    ok(&hzreach(&cfg, dir.path(), &["simulate", "--steps", "4"]));
    ok(&hzreach(&cfg, dir.path(), &["identify"]));
    ok(&hzreach(&cfg, dir.path(), &["estimate", "--steps", "4"]));
    let eq = std::fs::read_to_string(dir.path().join(EQUIVALENCE)).unwrap();
    assert_eq!(eq.lines().count(), 1 + 3 * 5);
    ok(&hzreach(&cfg, dir.path(), &["estimate", "--steps", "4", "--method", "rm"]));
    assert!(!dir.path().join(EQUIVALENCE).exists());
    let bounds = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(bounds.lines().skip(1).all(|l| l.contains(",RM,") && l.ends_with("true")));
}

#[test]
fn bench_writes_every_run_and_the_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("three_sensor_estimation.json");
    ok(&hzreach(&cfg, dir.path(), &["bench", "--repeats", "30"]));
    let timing = std::fs::read_to_string(dir.path().join(TIMING)).unwrap();
    let mut lines = timing.lines();
    assert_eq!(lines.next(), Some("method,run,seconds,seed"));
    assert_eq!(lines.count(), 90);
    let stats = std::fs::read_to_string(dir.path().join(TIMING_STATS)).unwrap();
    let rows: Vec<&str> = stats.lines().collect();
    assert_eq!(rows[0], "method,mean,median,variance,stddev,min,max");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("RM,") && rows[2].starts_with("GI,") && rows[3].starts_with("IN,"));

    let o = hzreach(&cfg, dir.path(), &["bench", "--repeats", "10"]);
    assert_eq!(o.status.code(), Some(exit::OTHER));
}

#[test]
fn reach_sets_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = config_path("pwa_reach.json");
    for c in ["simulate", "identify", "reach"] {
        ok(&hzreach(&path, dir.path(), &[c, "--steps", "3"]));
    }
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    cfg.horizon = 3;
    let spec = cfg.system_spec().unwrap();
    let models: ModelsDoc = serde_json::from_str(&std::fs::read_to_string(dir.path().join("models.json")).unwrap()).unwrap();
    let doc: ReachDoc = serde_json::from_str(&std::fs::read_to_string(dir.path().join("reach.json")).unwrap()).unwrap();
    let fams = reach_horizon(
        &cfg.initial_hybrid(),
        &models.models,
        &spec.regions,
        &cfg.input_hybrids(),
        &spec.noise_w,
        3,
    )
    .unwrap();
    let stored = doc.data.unwrap();
    assert_eq!(stored.len(), fams.len());
    for (f, s) in fams.iter().zip(&stored) {
        let (a, b) = (LeafSet::new(&f.union_set).unwrap(), LeafSet::new(&s.union).unwrap());
        for d in directions(2, 16) {
            let (x, y) = (a.support(&d).unwrap(), b.support(&d).unwrap());
            assert!((x - y).abs() <= 1e-12, "step {}: {x} vs {y}", f.step);
        }
    }
}
