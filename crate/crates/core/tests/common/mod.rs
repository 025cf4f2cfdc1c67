//! Small scenarios that plan in seconds.

#![allow(dead_code)]

use hjstp::scenario::Scenario;
use serde_json::{json, Value};

pub const R_C: f64 = 50.0;

pub fn vehicle(id: &str, priority: i64, x0: [f64; 3], goal: [f64; 2], sta: f64) -> Value {
    json!({ "id": id, "priority": priority, "x0": x0, "target": { "center": goal, "radius": 50.0 }, "sta": sta })
}

/// 1.2 km square with a 30 m grid, no wind and a weak short-lived intruder.
pub fn scenario(vehicles: Vec<Value>, d_r: f64) -> Scenario {
    let intruder = json!({ "v_min": 0.0, "v_max": 10.0, "w_max": 1.0, "d_r": 0.0, "iat": 2.0 });
    let sim = json!({ "dt": 0.1, "disturbance": "none", "intruder": { "strategy": "none" }, "t_sa": 0.0, "seed": 1 });
    scenario_with(vehicles, d_r, intruder, sim)
}

/// As `scenario`, with the intruder and simulation blocks supplied.
pub fn scenario_with(vehicles: Vec<Value>, d_r: f64, intruder: Value, sim: Value) -> Scenario {
    let doc = json!({
        "grid": {
            "mins": [0.0, 0.0, -std::f64::consts::PI],
            "maxs": [1200.0, 1200.0, std::f64::consts::PI],
            "counts": [41, 41, 16],
            "periodic": [false, false, true]
        },
        "dynamics": { "v_min": 0.0, "v_max": 25.0, "w_max": 2.0, "d_r": d_r },
        "intruder": intruder,
        "planner": {
            "n_va": 2, "r_c": R_C, "eps_track": 5.0, "cfl": 0.5, "control_dt": 0.1,
            "snapshot_stride": 0.5, "value_stride": 0.5,
            "relative_grid": { "half_width": 150.0, "counts": [31, 31, 15] }
        },
        "vehicles": vehicles,
        "sim": sim
    });
    Scenario::from_json(&doc.to_string()).expect("test scenario is valid")
}
