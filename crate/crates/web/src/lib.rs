//! Browser bindings: three small solves whose zero contours the demo page
//! draws. Each returns JSON `{extent, snapshots: [{t, lines}], ...}` with
//! lines as arrays of `[x, y]` points.

use std::f64::consts::PI;
use std::sync::Arc;

use hjstp::dynamics::{DubinsParams, DynSpec, HamRole};
use hjstp::error::Result;
use hjstp::export::{heading_slice, zero_contour};
use hjstp::field::ScalarField;
use hjstp::grid::make_grid;
use hjstp::scenario::RelativeGridSpec;
use hjstp::solver::{solve_brs, ReachProblem, SaveSpec};
use hjstp::stp::avoid::compute_avoid_region;
use hjstp::timefield::TimeField;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Nodes per position axis are clamped to this range to keep solves short.
const MIN_NODES: usize = 11;
const MAX_NODES: usize = 121;

fn nodes(n: usize) -> usize {
    n.clamp(MIN_NODES, MAX_NODES)
}

fn snapshots(tf: &TimeField, heading: Option<f64>) -> Result<Vec<Value>> {
    let mut out = Vec::with_capacity(tf.len());
    for (t, f) in tf.times().iter().zip(tf.fields()) {
        let lines = zero_contour(&heading_slice(f, heading)?)?;
        out.push(json!({ "t": t, "lines": lines }));
    }
    Ok(out)
}

/// Ball target grown by a single integrator of `speed` against a
/// disturbance of `d_r`, with `frames` snapshots over `horizon`.
pub fn reach_ball(radius: f64, speed: f64, d_r: f64, horizon: f64, n: usize, frames: usize) -> Result<Value> {
    let w = (radius + (speed + d_r) * horizon) * 1.3;
    let n = nodes(n);
    let g = Arc::new(make_grid(&[-w, -w], &[w, w], &[n, n], &[false, false])?);
    let target = ScalarField::from_fn(g, |x| x[0].hypot(x[1]) - radius);
    let spec = DynSpec::single_integrator(2, speed, d_r, HamRole::PLANNING);
    let save = SaveSpec::Interval(horizon / frames.max(1) as f64);
    let out = solve_brs(&ReachProblem::backward(target, spec, horizon).with_save(save))?;
    Ok(json!({
        "extent": [-w, w, -w, w],
        "exact_radius": radius + (speed - d_r).max(0.0) * horizon,
        "snapshots": snapshots(&out.values, None)?,
    }))
}

/// States from which a Dubins vehicle can reach a disc at the origin
/// within `horizon`, sliced at `heading`.
pub fn dubins_brs(radius: f64, horizon: f64, heading: f64, n: usize, frames: usize) -> Result<Value> {
    let p = DubinsParams::new(0.0, 25.0, 2.0, 0.0);
    let w = radius + p.v_max * horizon * 1.2;
    let n = nodes(n);
    let g = Arc::new(make_grid(&[-w, -w, -PI], &[w, w, PI], &[n, n, 31], &[false, false, true])?);
    let target = ScalarField::from_fn(g, |x| x[0].hypot(x[1]) - radius);
    let save = SaveSpec::Interval(horizon / frames.max(1) as f64);
    let out = solve_brs(&ReachProblem::backward(target, DynSpec::dubins(p, HamRole::BASIC), horizon).with_save(save))?;
    Ok(json!({ "extent": [-w, w, -w, w], "snapshots": snapshots(&out.values, Some(heading))? }))
}

/// Avoid region of the relative game for an intruder as fast as the
/// vehicle, at one relative heading.
pub fn avoid_region(t_bar: f64, r_c: f64, heading: f64, n: usize) -> Result<Value> {
    let p = DubinsParams::new(0.0, 25.0, 2.0, 6.0);
    let n = nodes(n);
    let rel = RelativeGridSpec { half_width: (r_c * 3.0).max(200.0), counts: [n, n, 21] };
    let a = compute_avoid_region(p, p, t_bar, r_c, rel, 0.5)?;
    let g = a.grid.clone();
    Ok(json!({
        "extent": [g.mins()[0], g.maxs()[0], g.mins()[1], g.maxs()[1]],
        "d_sen": a.d_sen,
        "snapshots": snapshots(&a.value, Some(heading))?,
    }))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = reachBall)]
pub fn reach_ball_js(radius: f64, speed: f64, d_r: f64, horizon: f64, n: usize, frames: usize) -> std::result::Result<String, JsValue> {
    to_js(reach_ball(radius, speed, d_r, horizon, n, frames))
}

#[wasm_bindgen(js_name = dubinsBrs)]
pub fn dubins_brs_js(radius: f64, horizon: f64, heading: f64, n: usize, frames: usize) -> std::result::Result<String, JsValue> {
    to_js(dubins_brs(radius, horizon, heading, n, frames))
}

#[wasm_bindgen(js_name = avoidRegion)]
pub fn avoid_region_js(t_bar: f64, r_c: f64, heading: f64, n: usize) -> std::result::Result<String, JsValue> {
    to_js(avoid_region(t_bar, r_c, heading, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn farthest(v: &Value) -> f64 {
        let last = v["snapshots"].as_array().unwrap().last().unwrap();
        let mut r: f64 = 0.0;
        for line in last["lines"].as_array().unwrap() {
            for p in line.as_array().unwrap() {
                r = r.max(p[0].as_f64().unwrap().hypot(p[1].as_f64().unwrap()));
            }
        }
        r
    }

    #[test]
    fn ball_grows_to_the_net_speed_radius() {
        let v = reach_ball(50.0, 20.0, 5.0, 4.0, 81, 4).unwrap();
        assert_eq!(v["snapshots"].as_array().unwrap().len(), 5);
        let cell = 2.0 * v["extent"][1].as_f64().unwrap() / 80.0;
        let r = farthest(&v);
        assert!((r - 110.0).abs() < 2.0 * cell, "radius {r}");
    }

    #[test]
    fn dubins_set_and_avoid_region_have_contours() {
        let v = dubins_brs(40.0, 2.0, 0.0, 41, 2).unwrap();
        assert!(farthest(&v) > 40.0);
        let a = avoid_region(2.0, 50.0, 0.0, 31).unwrap();
        assert!(a["d_sen"].as_f64().unwrap() >= 50.0);
        assert!(!a["snapshots"][0]["lines"].as_array().unwrap().is_empty());
    }

}
