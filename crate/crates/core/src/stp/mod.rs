//! Sequential trajectory planning that stays safe against one intruder.
//!
//! Vehicles plan in priority order. Each treats every higher-priority
//! vehicle as a moving obstacle made of its tube, the buffer regions around
//! it and the five induced-obstacle cases, plus the static-obstacle BRS.

pub mod avoid;
pub mod fastpath;
pub mod regions;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{controller_from_value, DynSpec, HamRole, Inputs, Synthesized};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::schedule::ObstacleSchedule;
use crate::scenario::{PlannerOptions, Scenario, TargetSpec};
use crate::sdf::dilate_ball;
use crate::solver::{solve_brs, ReachProblem, SaveSpec};
use crate::timefield::TimeField;

use avoid::{compute_avoid_region, relative_buffer, AvoidArtifacts, RegionRadii};
use fastpath::{disc_schedule, KitParams, ObstacleKit};
use regions::{disc_field, static_avoid_brs};

const TIME_EPS: f64 = 1e-9;

/// Time-stamped states and the controls applied from each state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 3]>,
    pub controls: Vec<[f64; 2]>,
}

fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let mut r = a.rem_euclid(t);
    if r >= std::f64::consts::PI {
        r -= t;
    }
    r
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.times.first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation between samples; `None` outside the span.
    pub fn state_at(&self, t: f64) -> Option<[f64; 3]> {
        if self.is_empty() || t < self.start_time() - TIME_EPS || t > self.end_time() + TIME_EPS {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return Some(self.states[0]);
        }
        if k >= self.times.len() {
            return self.states.last().copied();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let (a, b) = (self.states[k - 1], self.states[k]);
        let dth = wrap_angle(b[2] - a[2]);
        Some([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1]), wrap_angle(a[2] + w * dth)])
    }

    pub fn position_at(&self, t: f64) -> Option<[f64; 2]> {
        self.state_at(t).map(|s| [s[0], s[1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    /// Obstacles account for the intruder.
    IntruderAware,
    /// Capture-dilated nominal positions only, no disturbance.
    Basic,
}

/// One vehicle's plan: its value function, nominal trajectory and timing.
#[derive(Debug, Clone)]
pub struct VehiclePlan {
    pub id: String,
    pub kind: PlanKind,
    /// Role of the planning value function (`PLANNING` or `BASIC`).
    pub spec: DynSpec,
    /// Backward solve anchored at `sta`, down to `ldt`.
    pub value: TimeField,
    /// Rollout of `u^PP` with zero disturbance, from `ldt` to arrival.
    pub nominal: Trajectory,
    pub ldt: f64,
    pub sta: f64,
    pub arrival: f64,
    pub target: TargetSpec,
    /// Minimum interpolated total-obstacle value along the nominal.
    pub min_clearance: f64,
    pub replanned: bool,
}

impl VehiclePlan {
    /// Goal-satisfaction control `u^PP(t, x)`.
    pub fn control(&self, t: f64, x: &[f64]) -> Result<Synthesized> {
        controller_from_value(&self.value, &self.spec, t, x)
    }

    pub fn value_at(&self, t: f64, x: &[f64]) -> f64 {
        self.value.value_at(t, x)
    }
}

#[derive(Debug, Clone, Default)]
pub struct PlanSet {
    /// Priority order.
    pub plans: Vec<VehiclePlan>,
}

impl PlanSet {
    pub fn get(&self, id: &str) -> Option<&VehiclePlan> {
        self.plans.iter().find(|p| p.id == id)
    }

    pub fn index(&self, id: &str) -> Option<usize> {
        self.plans.iter().position(|p| p.id == id)
    }

    /// Smallest distance between any two nominal trajectories while both fly.
    pub fn min_pairwise_distance(&self, dt: f64) -> f64 {
        let mut best = f64::INFINITY;
        for (a, pa) in self.plans.iter().enumerate() {
            for pb in &self.plans[a + 1..] {
                let t0 = pa.nominal.start_time().max(pb.nominal.start_time());
                let t1 = pa.nominal.end_time().min(pb.nominal.end_time());
                let mut t = t0;
                while t <= t1 + TIME_EPS {
                    if let (Some(p), Some(q)) = (pa.nominal.position_at(t), pb.nominal.position_at(t)) {
                        best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
                    }
                    t += dt;
                }
            }
        }
        best
    }
}

/// One planning problem: reach `target` by `sta`, departing no earlier
/// than `t_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub id: String,
    pub x0: [f64; 3],
    pub target: TargetSpec,
    pub sta: f64,
    pub t_start: f64,
    /// Depart at `t_start` instead of searching for the latest departure.
    pub depart_now: bool,
}

/// Times from `t0` to `t1` on multiples of `stride`, both ends included.
pub fn lattice(t0: f64, t1: f64, stride: f64) -> Vec<f64> {
    let mut times = vec![t0];
    let mut k = (t0 / stride + TIME_EPS).floor() as i64 + 1;
    loop {
        let t = k as f64 * stride;
        if t >= t1 - 1e-6 {
            break;
        }
        if t > t0 + 1e-6 {
            times.push(t);
        }
        k += 1;
    }
    if t1 > t0 + 1e-6 {
        times.push(t1);
    }
    times
}

fn infeasible(id: &str, reason: impl Into<String>) -> Error {
    Error::Infeasible { vehicle: id.to_string(), reason: reason.into() }
}

/// Planning BRS from `sta` back to the departure, then the nominal rollout.
pub fn plan_vehicle(
    grid: &Arc<Grid>,
    opts: &PlannerOptions,
    spec: DynSpec,
    kind: PlanKind,
    req: &PlanRequest,
    obstacles: &ObstacleSchedule,
) -> Result<VehiclePlan> {
    let target = disc_field(grid, req.target.center, req.target.radius)?;
    let horizon = req.sta - req.t_start;
    if horizon < 0.0 {
        return Err(infeasible(&req.id, format!("sta {} precedes the start {}", req.sta, req.t_start)));
    }
    if !grid.contains(&req.x0) {
        return Err(infeasible(&req.id, "initial state outside the planning grid"));
    }
    let mut p = ReachProblem::backward(target, spec, horizon)
        .with_anchor(req.sta)
        .with_obstacles(obstacles.clone())
        .with_cfl(opts.cfl)
        .with_save(SaveSpec::Interval(opts.value_stride));
    if !req.depart_now {
        p = p.with_probe(req.x0.to_vec());
    }
    let out = solve_brs(&p)?;
    let ldt = if req.depart_now {
        let v = out.values.value_at(req.t_start, &req.x0);
        if v > 0.0 {
            return Err(infeasible(&req.id, format!("initial state outside the BRS at {} (value {v:.2})", req.t_start)));
        }
        req.t_start
    } else {
        out.probe_time
            .ok_or_else(|| infeasible(&req.id, format!("initial state never enters the BRS back to t = {}", req.t_start)))?
    };
    let mut plan = VehiclePlan {
        id: req.id.clone(),
        kind,
        spec,
        value: out.values,
        nominal: Trajectory::default(),
        ldt,
        sta: req.sta,
        arrival: ldt,
        target: req.target,
        min_clearance: f64::INFINITY,
        replanned: false,
    };
    let (nominal, arrival) = rollout_nominal(&plan, req.x0, ldt, opts.control_dt)?;
    plan.min_clearance = clearance(&nominal, obstacles);
    let h = grid.spacing()[0].min(grid.spacing()[1]);
    if plan.min_clearance <= -h {
        log::warn!("{}: nominal trajectory enters its obstacles (clearance {:.1})", req.id, plan.min_clearance);
    }
    plan.nominal = nominal;
    plan.arrival = arrival;
    Ok(plan)
}

/// Forward Euler with `u^PP` and zero disturbance until the target is reached.
fn rollout_nominal(plan: &VehiclePlan, x0: [f64; 3], t0: f64, dt: f64) -> Result<(Trajectory, f64)> {
    let mut tr = Trajectory::default();
    let mut x = x0;
    let mut t = t0;
    let limit = plan.sta + 1.0;
    let dynamics = plan.spec;
    loop {
        if plan.target.contains([x[0], x[1]]) {
            tr.times.push(t);
            tr.states.push(x);
            tr.controls.push([0.0, 0.0]);
            break;
        }
        if t > limit {
            return Err(infeasible(&plan.id, format!("nominal rollout misses the target by sta {}", plan.sta)));
        }
        let syn = plan.control(t, &x).map_err(|e| infeasible(&plan.id, format!("nominal rollout left the grid: {e}")))?;
        let u = syn.sample.u;
        tr.times.push(t);
        tr.states.push(x);
        tr.controls.push(u);
        let f = dynamics.flow(&x, &Inputs { u: [u[0], u[1], 0.0], ..Default::default() })?;
        x = [x[0] + dt * f[0], x[1] + dt * f[1], wrap_angle(x[2] + dt * f[2])];
        t += dt;
    }
    if t > plan.sta + TIME_EPS {
        log::warn!("{}: nominal arrival {t:.2} after sta {}", plan.id, plan.sta);
    }
    Ok((tr, t))
}

/// Minimum interpolated obstacle value along a trajectory.
pub fn clearance(tr: &Trajectory, obstacles: &ObstacleSchedule) -> f64 {
    tr.times
        .iter()
        .zip(&tr.states)
        .map(|(&t, x)| obstacles.sample(t).interpolate_clamped(x))
        .fold(f64::INFINITY, f64::min)
}

/// Scenario-wide artifacts shared by every vehicle's planning step.
#[derive(Debug, Clone)]
pub struct PlanContext {
    pub scenario: Scenario,
    pub grid: Arc<Grid>,
    pub avoid: AvoidArtifacts,
    pub buffer: ScalarField,
    pub radii: RegionRadii,
    pub kit: ObstacleKit,
    /// The static obstacles themselves.
    pub statics: Option<Arc<ScalarField>>,
}

impl PlanContext {
    /// Avoid region, relative buffer, static BRS and obstacle templates.
    pub fn new(scenario: &Scenario) -> Result<PlanContext> {
        let opts = &scenario.planner;
        let avoid = compute_avoid_region(
            scenario.intruder.params(),
            scenario.dynamics,
            scenario.t_bar(),
            opts.r_c,
            opts.relative_grid,
            opts.cfl,
        )?;
        log::info!("avoid region: d_sen {:.1} m", avoid.d_sen);
        Self::with_avoid(scenario, avoid)
    }

    /// Same as `new` with a precomputed avoid region.
    pub fn with_avoid(scenario: &Scenario, avoid: AvoidArtifacts) -> Result<PlanContext> {
        let opts = &scenario.planner;
        let grid = scenario.planning_grid()?;
        let rel = avoid_grid_spec(&avoid, opts);
        let buffer =
            relative_buffer(scenario.dynamics, scenario.intruder.params(), scenario.t_brd(), opts.r_c, rel, opts.cfl)?;
        let radii = RegionRadii::from_artifacts(&avoid, &buffer, scenario.t_brd())?;
        log::info!("region radii: {radii:?}");
        let statics = scenario.static_field(&grid)?;
        let hardened = static_avoid_brs(statics.as_ref(), scenario.dynamics, scenario.t_bar(), opts.r_c, opts.cfl)?;
        let hardened = match hardened {
            Some(f) if opts.eps_track > 0.0 => Some(dilate_ball(&f, opts.eps_track, &crate::reachops::POS_DIMS)?),
            other => other,
        };
        let params = KitParams {
            vehicle: scenario.dynamics,
            t_bar: scenario.t_bar(),
            t_brd: scenario.t_brd(),
            r_c: opts.r_c,
            eps_base: opts.eps_track,
            eps_own: opts.eps_track,
            stride: opts.snapshot_stride,
            refine: opts.template_refine,
            cfl: opts.cfl,
        };
        let kit = ObstacleKit::new(grid.clone(), params, radii, hardened)?;
        Ok(PlanContext { scenario: scenario.clone(), grid, avoid, buffer, radii, kit, statics: statics.map(Arc::new) })
    }

    pub fn planning_spec(&self) -> DynSpec {
        DynSpec::dubins(self.scenario.dynamics, HamRole::PLANNING)
    }

    pub fn basic_spec(&self) -> DynSpec {
        DynSpec::dubins(self.scenario.dynamics.without_disturbance(), HamRole::BASIC)
    }

    pub fn lattice(&self, t0: f64, t1: f64) -> Vec<f64> {
        lattice(t0, t1, self.scenario.planner.snapshot_stride)
    }

    /// Union of the static BRS and everything induced by `others`.
    pub fn total_obstacles(&self, others: &[&VehiclePlan], times: &[f64]) -> Result<ObstacleSchedule> {
        let tracks: Vec<&Trajectory> = others.iter().map(|p| &p.nominal).collect();
        self.kit.schedule(&tracks, times)
    }

    /// Static set and capture-dilated nominal positions of `others`.
    pub fn basic_obstacles(&self, others: &[&VehiclePlan], times: &[f64]) -> Result<ObstacleSchedule> {
        let tracks: Vec<&Trajectory> = others.iter().map(|p| &p.nominal).collect();
        disc_schedule(&self.grid, self.statics.as_ref(), &tracks, times, self.scenario.planner.r_c)
    }

    fn plan_in_order(&self, kind: PlanKind) -> Result<PlanSet> {
        let mut set = PlanSet::default();
        for v in &self.scenario.vehicles {
            let times = self.lattice(0.0, v.sta);
            let higher: Vec<&VehiclePlan> = set.plans.iter().collect();
            let (obstacles, spec) = match kind {
                PlanKind::IntruderAware => (self.total_obstacles(&higher, &times)?, self.planning_spec()),
                PlanKind::Basic => (self.basic_obstacles(&higher, &times)?, self.basic_spec()),
            };
            let req = PlanRequest {
                id: v.id.clone(),
                x0: v.x0,
                target: v.target,
                sta: v.sta,
                t_start: 0.0,
                depart_now: false,
            };
            let plan = plan_vehicle(&self.grid, &self.scenario.planner, spec, kind, &req, &obstacles)?;
            log::info!(
                "{}: ldt {:.2}, arrival {:.2}, clearance {:.1}",
                plan.id,
                plan.ldt,
                plan.arrival,
                plan.min_clearance
            );
            set.plans.push(plan);
        }
        let d = set.min_pairwise_distance(self.scenario.planner.control_dt);
        if d < self.scenario.planner.r_c {
            log::warn!("nominal trajectories come within {d:.1} m");
        }
        Ok(set)
    }

    /// Planning phase with intruder-aware obstacles.
    pub fn plan_all(&self) -> Result<PlanSet> {
        self.plan_in_order(PlanKind::IntruderAware)
    }

    /// Planning without intruder or disturbance.
    pub fn basic_stp(&self) -> Result<PlanSet> {
        self.plan_in_order(PlanKind::Basic)
    }
}

fn avoid_grid_spec(avoid: &AvoidArtifacts, opts: &PlannerOptions) -> crate::scenario::RelativeGridSpec {
    let g = &avoid.grid;
    crate::scenario::RelativeGridSpec {
        half_width: g.maxs()[0],
        counts: [g.counts()[0], g.counts()[1], opts.relative_grid.counts[2]],
    }
}

/// Planning phase for a scenario: context and plans.
pub fn plan_all(scenario: &Scenario) -> Result<(PlanContext, PlanSet)> {
    let ctx = PlanContext::new(scenario)?;
    let set = ctx.plan_all()?;
    Ok((ctx, set))
}

/// Intruder-free planning for a scenario.
pub fn basic_stp(scenario: &Scenario) -> Result<(PlanContext, PlanSet)> {
    let ctx = PlanContext::new(scenario)?;
    let set = ctx.basic_stp()?;
    Ok((ctx, set))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_includes_ends() {
        assert_eq!(lattice(0.0, 1.0, 0.5), vec![0.0, 0.5, 1.0]);
        assert_eq!(lattice(0.2, 1.1, 0.5), vec![0.2, 0.5, 1.0, 1.1]);
        assert_eq!(lattice(3.0, 3.0, 0.5), vec![3.0]);
    }

    #[test]
    fn trajectory_interpolates_and_wraps() {
        let tr = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![[0.0, 0.0, 3.0], [10.0, 0.0, -3.0]],
            controls: vec![[10.0, 0.0]; 2],
        };
        let s = tr.state_at(0.5).unwrap();
        assert!((s[0] - 5.0).abs() < 1e-12);
        assert!(s[2].abs() > 3.0);
        assert!(tr.state_at(1.5).is_none());
        assert!(tr.state_at(-0.1).is_none());
    }
}
