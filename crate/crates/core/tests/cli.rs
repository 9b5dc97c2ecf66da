use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use tmdstat::sources::multimode_pair_dist;

fn tmdstat(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmdstat"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, value: &Value) {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn metrics_of_diagonal_joint() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "joint.json", &json!({"probs": [[0.5, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.0, 0.2]]}));
    let o = tmdstat(&["metrics", "--input", "joint.json", "--out", "m"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("m/metrics.json"));
    assert!((doc["correlation"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(doc["number_squeezing_db"], "-inf");
    assert!(dir.path().join("m/manifest.json").exists());
}

#[test]
fn fit_of_multimode_marginal() {
    let dir = TempDir::new().unwrap();
    let d = multimode_pair_dist(100, 1.0, 23).unwrap();
    write(dir.path(), "dist.json", &json!({"probs": d.probs()}));
    let o = tmdstat(&["fit", "--input", "dist.json", "--out", "f"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("f/fit.json"));
    let poisson = doc["poisson"]["residual_l2"].as_f64().unwrap();
    let thermal = doc["thermal"]["residual_l2"].as_f64().unwrap();
    assert!(poisson < thermal);
    assert!(doc["thermal"]["per_bin_deviation"][1].as_f64().unwrap().abs() > 0.06);
    assert_eq!(doc["preferred"], "poisson");
}

#[test]
fn replicate_a_recovers_efficiencies() {
    let dir = TempDir::new().unwrap();
    let o = tmdstat(&["replicate", "A", "--shots", "1000000", "--out", "a"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("a/summary.json"));
    assert_eq!(doc["setup"], "A");
    let eta = &doc["calibration"]["eta_k"];
    assert!((eta[0].as_f64().unwrap() - 0.117).abs() < 0.005);
    assert!((eta[1].as_f64().unwrap() - 0.137).abs() < 0.005);
    // The printed digest carries the same estimate.
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains(&format!("{:.4}", eta[0].as_f64().unwrap())), "{stdout}");
}

#[test]
fn shot_records_and_histogram_reconstruct_identically() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "format_version": 1,
        "setup": "D",
        "source": {"type": "thermal_pairs", "mean": 0.4},
        "signal": {"efficiency": 0.4, "n_max": 3},
        "idler": {"efficiency": 0.5, "bin_probs": [0.25, 0.25, 0.25, 0.25], "n_max": 3},
        "shots": 50000,
        "seed": 5
    });
    write(dir.path(), "config.json", &config);
    let o = tmdstat(&["simulate", "--config", "config.json", "--emit-shots", "--out", "sim"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for (input, out) in [("sim/shots.csv", "r1"), ("sim/clicks.json", "r2")] {
        let o = tmdstat(&["reconstruct", "--config", "config.json", "--input", input, "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (a, b) = (read_json(&dir.path().join("r1/reconstruction.json")), read_json(&dir.path().join("r2/reconstruction.json")));
    assert_eq!(a, b);
    // Metrics and fits read reconstruction documents directly.
    let o = tmdstat(&["metrics", "--input", "r1/reconstruction.json", "--out", "m"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = tmdstat(
        &["fit", "--input", "r1/reconstruction.json", "--pointer", "/joint/metrics/idler_marginal/probs", "--out", "f"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn calibrate_reports_rates_per_second() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "config.json",
        &json!({"setup": "A", "source": {"type": "fock_pairs", "n": 1},
                "signal": {"efficiency": 0.5, "bin_probs": [1.0]}, "idler": {"efficiency": 0.25, "bin_probs": [1.0]},
                "shots": 200000, "seed": 1}),
    );
    let o = tmdstat(&["calibrate", "--config", "config.json", "--out", "c"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("c/calibration.json"));
    let singles = doc["events"]["signal_singles"].as_f64().unwrap();
    let shots = doc["events"]["shots"].as_f64().unwrap();
    assert!((doc["singles_per_second"][0].as_f64().unwrap() - singles / shots * 1e6).abs() < 1e-6);
    assert!((doc["signal"]["eta_estimate"].as_f64().unwrap() - 0.5).abs() < 0.01);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();

    write(p, "unknown.json", &json!({"setup": "A", "source": {"type": "fock_pairs", "n": 1}, "shots": 10, "seed": 1, "colour": 1}));
    let o = tmdstat(&["simulate", "--config", "unknown.json", "--out", "x"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));

    write(p, "bins.json", &json!({"setup": "A", "source": {"type": "fock_pairs", "n": 1},
        "signal": {"bin_probs": [0.5, 0.4]}, "shots": 10, "seed": 1}));
    let o = tmdstat(&["simulate", "--config", "bins.json", "--out", "x"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("signal.bin_probs"), "{}", stderr(&o));

    let config = json!({"setup": "D", "source": {"type": "poisson_pairs", "mean": 0.2},
        "signal": {"efficiency": 0.5, "n_max": 3}, "idler": {"efficiency": 0.5, "n_max": 3}, "shots": 10, "seed": 1});
    write(p, "d.json", &config);
    std::fs::write(p.join("bad.csv"), "shot_id,signal_mask,idler_mask\n0,1,1\n1,x,0\n").unwrap();
    let o = tmdstat(&["reconstruct", "--config", "d.json", "--input", "bad.csv", "--out", "x"], p);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let mut blind = config.clone();
    blind["signal"]["efficiency"] = json!(0.0);
    write(p, "blind.json", &blind);
    std::fs::write(p.join("ok.csv"), "shot_id,signal_mask,idler_mask\n0,0,1\n1,0,0\n").unwrap();
    let o = tmdstat(&["reconstruct", "--config", "blind.json", "--input", "ok.csv", "--out", "x"], p);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
