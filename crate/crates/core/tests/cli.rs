mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{scenario_with, vehicle};
use hjstp::cli::{load_scenario, Common};
use serde_json::{json, Value};

fn hjstp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjstp")).args(args).arg("--quiet").output().expect("binary runs")
}

/// One vehicle and a scripted intruder passing 60 m from its lane, or an
/// equally fast pursuer with `pursue`.
fn write_scenario(dir: &Path, sta: f64, pursue: bool) -> String {
    let intruder = json!({ "v_min": 0.0, "v_max": 25.0, "w_max": 2.0, "d_r": 0.0, "iat": 4.0 });
    let sim = if pursue {
        json!({
            "dt": 0.1, "disturbance": "random", "t_sa": 26.0, "seed": 5,
            "intruder": { "strategy": "pursuit", "victim": "a" },
            "injection": { "separation_boundary": { "victim": "a", "bearing": 1.5708 } }
        })
    } else {
        json!({
            "dt": 0.1, "disturbance": "random", "t_sa": 26.0, "seed": 5,
            "intruder": { "strategy": "waypoints", "waypoints": [[200.0, 660.0]] },
            "injection": { "explicit": [560.0, 660.0, 3.14159] }
        })
    };
    let sc = scenario_with(vec![vehicle("a", 1, [150.0, 600.0, 0.0], [1050.0, 600.0], sta)], 2.0, intruder, sim);
    let path = dir.join("scenario.json");
    fs::write(&path, sc.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn pipeline_writes_artifacts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), 60.0, false);
    let out = dir.path().join("run");
    let o = out.to_str().unwrap();
    let r = hjstp(&["pipeline", "--scenario", &sc, "--out", o, "--seed", "9"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["plans/manifest.json", "avoid/avoid.json", "sim/vehicles.csv", "replans/manifest.json", "sim_replanned/events.csv", "verify.json", "scenario.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let m = manifest(&out);
    assert_eq!(m["seed"], 9);
    let hash = m["artifacts"]["sim/vehicles.csv"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);

    // Simulate again from the saved plans and avoid region.
    let again = dir.path().join("again");
    let a = again.to_str().unwrap();
    let plans = out.join("plans");
    let avoid = out.join("avoid");
    let r = hjstp(&[
        "simulate", "--scenario", out.join("scenario.json").to_str().unwrap(), "--out", a,
        "--plans", plans.to_str().unwrap(), "--avoid", avoid.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(manifest(&again)["artifacts"]["sim/vehicles.csv"].as_str().unwrap(), hash);

    // Replan from the saved log reproduces the pipeline's plans.
    let re = dir.path().join("re");
    let r = hjstp(&[
        "replan", "--scenario", out.join("scenario.json").to_str().unwrap(), "--out", re.to_str().unwrap(),
        "--plans", plans.to_str().unwrap(), "--avoid", avoid.to_str().unwrap(),
        "--log", out.join("sim/log.json").to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(fs::read(re.join("replans/a_nominal.csv")).unwrap(), fs::read(out.join("replans/a_nominal.csv")).unwrap());

    let ex = dir.path().join("ex");
    let r = hjstp(&["export", "--out", ex.to_str().unwrap(), "--plans", plans.to_str().unwrap(), "--avoid", avoid.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(ex.join("export/trajectories.csv").exists());
    assert!(ex.join("export/avoid/avoid_00000.csv").exists());
    assert!(ex.join("export/a/value_00000.csv").exists());
}

#[test]
fn unsafe_pipeline_exits_4() {
    // An equally fast pursuer beats the avoid region of this coarse
    // relative grid, and verification must say so.
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), 60.0, true);
    let out = dir.path().join("run");
    let r = hjstp(&["pipeline", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(4));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert!(v["intruder_violations"].as_u64().unwrap() > 0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn infeasible_sta_exits_2_naming_the_vehicle() {
    let dir = tempfile::tempdir().unwrap();
    // 850 m cannot be flown in 10 s.
    let sc = write_scenario(dir.path(), 10.0, false);
    let r = hjstp(&["plan", "--scenario", &sc, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("vehicle a"));
}

#[test]
fn schema_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    let sc = write_scenario(dir.path(), 60.0, false);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&sc).unwrap()).unwrap();
    v["vehicles"][0]["target"]["radius"] = json!(-5.0);
    fs::write(&p, v.to_string()).unwrap();
    let r = hjstp(&["plan", "--scenario", p.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("radius"));
    let r = hjstp(&["plan", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
    assert_eq!(hjstp(&["frobnicate"]).status.code(), Some(3));
}

#[test]
fn reach_solves_a_problem_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ball.json");
    let problem = json!({
        "grid": { "mins": [-300.0, -300.0], "maxs": [300.0, 300.0], "counts": [61, 61], "periodic": [false, false] },
        "dynamics": { "kind": "single_integrator", "ndim": 2, "speed": 25.0, "d_r": 0.0 },
        "role": "basic",
        "target": { "center": [0.0, 0.0], "radius": 100.0 },
        "horizon": 4.0,
        "save_every": 1.0
    });
    fs::write(&p, problem.to_string()).unwrap();
    let out = dir.path().join("o");
    let r = hjstp(&["reach", "--problem", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    // Backward snapshots go from the target at t = 4 down to t = 0.
    let (f, t) = hjstp::hjvf::read_file(&out.join("value_00004.hjvf")).unwrap();
    assert_eq!(t, 0.0);
    // Grown from radius 100 to about 200.
    assert!(f.interpolate(&[180.0, 0.0]).unwrap() < 0.0);
    assert!(f.interpolate(&[230.0, 0.0]).unwrap() > 0.0);
    assert!(manifest(&out)["artifacts"]["value_00000.hjvf"].is_string());
}

#[test]
fn grid_scale_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), 60.0, false);
    let common = |scale: f64| Common {
        scenario: Some(sc.clone().into()),
        out: dir.path().into(),
        seed: Some(3),
        grid_scale: Some(scale),
        nva: Some(4),
        snapshot_every: Some(2.0),
        quiet: true,
    };
    let s = load_scenario(&common(0.5)).unwrap();
    assert_eq!(s.grid.counts, vec![21, 21, 8]);
    assert_eq!((s.sim.seed, s.planner.n_va, s.planner.value_stride), (3, 4, 2.0));
    assert_eq!(load_scenario(&common(0.01)).unwrap().grid.counts, vec![3, 3, 3]);
    assert!(load_scenario(&common(-1.0)).is_err());
}
