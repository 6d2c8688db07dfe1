use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn threelp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_threelp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn relax_adult_reports_pseudo_passive_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = threelp(&["relax", "--tds", "0.3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&dir.path().join("relax.json"));
    let t = report["t_relax"].as_f64().unwrap();
    assert!((0.84..=0.88).contains(&t), "{t}");
    assert!(stdout(&o).contains("T_relax = 0.86"));
    let scan = std::fs::read_to_string(dir.path().join("relax_scan.csv")).unwrap();
    assert!(scan.starts_with("t_stride,sigma1,"));
    assert_eq!(scan.lines().count(), 242);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "relax");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn relax_kid_is_finite() {
    let dir = tempfile::tempdir().unwrap();
    let o = threelp(&["relax", "--preset", "kid"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(json(&dir.path().join("relax.json"))["t_relax"].as_f64().unwrap().is_finite());
}

#[test]
fn malformed_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("body.toml");
    std::fs::write(&cfg, "m1 = 45.7\nm2 = 12.15\nm3 = 12.15\nz1 = 0.89\nz2 = 0.32\nz3 = 0.36\nw = 0.2\nwidth = 1\n").unwrap();
    let o = threelp(&["relax", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("width"));
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("body.toml");
    std::fs::write(&cfg, "m1 = 45.7\nm2 = 12.15\nm3 = 12.15\nz1 = 0.89\nz2 = 0.32\nz3 = 0.36\nw = 0.2\nT_ds = 0.3\n").unwrap();
    let o = threelp(&["relax", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config"].as_str().unwrap(), cfg.to_str().unwrap());
    assert_eq!(manifest["parameters"]["t_ds"], 0.3);
}

#[test]
fn pseudo_passive_gait_at_relaxed_timing_is_torque_free() {
    let dir = tempfile::tempdir().unwrap();
    let o = threelp(&["gait", "--scenario", "pseudo-passive", "--speed", "1", "--relax"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("residuals.json"));
    assert!(r["torque_norm"].as_f64().unwrap() <= 1e-6);
    assert!(r["end_swing_speed"].as_f64().unwrap() <= 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,X2x,X2y,X1x,X1y,"));
    assert!(std::fs::read_to_string(dir.path().join("gait.toml")).unwrap().contains("q0"));
}

#[test]
fn stage_walk_has_no_lateral_bounce() {
    let dir = tempfile::tempdir().unwrap();
    let o = threelp(&["gait", "--scenario", "stage-walk"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("residuals.json"));
    assert!(r["max_lateral_com_velocity"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn cop_gait_uses_the_static_ramp() {
    let dir = tempfile::tempdir().unwrap();
    let o = threelp(&["gait", "--scenario", "cop"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("residuals.json"));
    let tau = r["cop_ramp_torque"].as_f64().unwrap();
    // a forward centre of pressure is a negative moment about y
    let ramp = r["torques"]["rMay"].as_f64().unwrap();
    assert!((ramp + tau).abs() <= 1e-9 * tau, "{ramp} vs {tau}");
}

#[test]
fn gait_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(threelp(&["gait", "--scenario", "hopping"], dir.path()).status.code(), Some(2));
    assert_eq!(threelp(&["gait", "--freq", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(threelp(&["gait", "--side", "0.5"], dir.path()).status.code(), Some(2));
    assert_eq!(threelp(&["gait", "--tds-policy", "human"], dir.path()).status.code(), Some(2));
}

fn peak_lines(dir: &Path) -> Vec<(f64, f64, bool)> {
    std::fs::read_to_string(dir.join("peak_line.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].parse().unwrap(), c[1].parse().unwrap(), c[3] == "true")
        })
        .collect()
}

#[test]
fn human_law_sweep_peaks_near_human_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let o = threelp(&["sweep", "--tds-policy", "human", "--speed", "0.8:0.1:2.0", "--freq", "0.8:0.05:3.0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let peaks = peak_lines(dir.path());
    assert_eq!(peaks.len(), 13);
    let at = peaks.iter().find(|p| (p.0 - 1.6).abs() < 1e-9).unwrap();
    assert!((1.53..=2.07).contains(&at.1), "{at:?}");
    // faster walking, higher cadence
    assert!(peaks.windows(2).all(|w| w[1].1 >= w[0].1));
    let csv = std::fs::read_to_string(dir.path().join("economy.csv")).unwrap();
    assert!(csv.starts_with("speed,frequency,tds_ratio,economy,feasible\n"));
    assert_eq!(csv.lines().count(), 1 + 13 * 45);
}

#[test]
fn fixed_ratios_give_distinct_peak_lines() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["sweep", "--speed", "1.0:0.5:2.0", "--freq", "1.0:0.1:3.0", "--tds-policy"];
    let o = threelp(&[&args[..], &["fixed:0.1"]].concat(), a.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = threelp(&[&args[..], &["fixed:0.3"]].concat(), b.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (p, q) = (peak_lines(a.path()), peak_lines(b.path()));
    assert!(p.iter().all(|x| !x.2));
    assert!(p.iter().zip(&q).any(|(x, y)| (x.1 - y.1).abs() > 1e-3));
}

#[test]
fn empty_frequency_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = threelp(&["sweep", "--freq", "2.0:0.1:1.0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_hundred_trials_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = threelp(&["validate", "--trials", "100", "--seed", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("validate_report.json"));
    for phase in ["double_support", "single_support", "stride"] {
        assert!(r["max_discrepancy"][phase]["value"].as_f64().unwrap() <= 1e-7, "{phase}: {r}");
    }
}

#[test]
fn validate_is_deterministic_and_checks_trials() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = threelp(&["validate", "--trials", "3", "--seed", "42"], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("validate_report.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    let hash = |d: &tempfile::TempDir| json(&d.path().join("manifest.json"))["parameter_hash"].clone();
    assert_eq!(hash(&a), hash(&b));
    assert_eq!(threelp(&["validate", "--trials", "0"], a.path()).status.code(), Some(2));
}
