//! Closed-loop simulation of planned vehicles with disturbances and one
//! intruder: avoidance switching, avoid-start bookkeeping, RVS extraction
//! and replanning once the intruder has left.

pub mod replan;

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DubinsParams, Mode};
use crate::error::{Error, Result};
use crate::scenario::{DisturbancePolicy, Injection, IntruderStrategy, Scenario, SimConfig, VictimPolicy};
use crate::stp::avoid::AvoidArtifacts;
use crate::stp::{PlanSet, VehiclePlan};

pub use replan::{replan, ReplanOptions};

const TIME_EPS: f64 = 1e-9;
/// Distance at which a scripted intruder moves on to its next waypoint.
const WAYPOINT_REACH: f64 = 20.0;
/// Extra time simulated past the last scheduled arrival.
const HORIZON_SLACK: f64 = 30.0;
/// Injection puts the intruder this far outside the avoid-region boundary.
const INJECTION_MARGIN: f64 = 0.5;
const BISECTION_STEPS: usize = 60;

/// One airborne vehicle at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub t: f64,
    pub vehicle: usize,
    pub state: [f64; 3],
    pub u: [f64; 2],
    pub d: [f64; 2],
    pub mode: Mode,
    /// `V^A(0, x_rel)` while the intruder is present.
    pub v_avoid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntruderRecord {
    pub t: f64,
    pub state: [f64; 3],
    pub u: [f64; 2],
    pub d: [f64; 2],
    /// Vehicle index currently pursued.
    pub target: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Departure,
    Injection,
    AvoidStart,
    VictimAdvance,
    Removal,
    PlanSwitch,
    Arrival,
    VehicleViolation,
    IntruderViolation,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Departure => "departure",
            EventKind::Injection => "injection",
            EventKind::AvoidStart => "avoid_start",
            EventKind::VictimAdvance => "victim_advance",
            EventKind::Removal => "removal",
            EventKind::PlanSwitch => "plan_switch",
            EventKind::Arrival => "arrival",
            EventKind::VehicleViolation => "vehicle_violation",
            EventKind::IntruderViolation => "intruder_violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t: f64,
    pub kind: EventKind,
    pub vehicle: Option<usize>,
    pub other: Option<usize>,
    /// Distance for violations, `V^A` for avoid starts.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    /// Vehicle ids in priority order; records refer to these indices.
    pub ids: Vec<String>,
    pub dt: f64,
    pub r_c: f64,
    pub records: Vec<VehicleRecord>,
    pub intruder: Vec<IntruderRecord>,
    pub events: Vec<SimEvent>,
    /// First step with `V^A(0, x_rel) <= 0`.
    pub avoid_start: Vec<Option<f64>>,
    pub arrivals: Vec<Option<f64>>,
    /// Intruder appearance and removal times.
    pub intruder_window: Option<(f64, f64)>,
    /// States when the intruder is removed, for vehicles then airborne.
    pub removal_states: Vec<Option<[f64; 3]>>,
    #[serde(with = "inf_as_null")]
    pub min_vehicle_distance: f64,
    #[serde(with = "inf_as_null")]
    pub min_intruder_distance: f64,
}

/// JSON has no infinity; "never close" distances are stored as null.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl SimLog {
    /// Vehicles forced into avoidance: `{i : t^a_i < inf}`.
    pub fn rvs(&self) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.avoid_start[i].is_some()).collect()
    }

    pub fn rvs_ids(&self) -> Vec<String> {
        self.rvs().into_iter().map(|i| self.ids[i].clone()).collect()
    }

    pub fn violations(&self) -> Vec<&SimEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::VehicleViolation | EventKind::IntruderViolation))
            .collect()
    }

    pub fn vehicle_index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|v| v == id)
    }

    /// Trajectory CSV: `t, vehicle_id, x, y, theta, u_v, u_w, d_x, d_y, mode, v_avoid`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,vehicle_id,x,y,theta,u_v,u_w,d_x,d_y,mode,v_avoid\n");
        for r in &self.records {
            let mode = match r.mode {
                Mode::Nominal => "nominal",
                Mode::Avoid => "avoid",
                Mode::Replanned => "replanned",
            };
            let va = r.v_avoid.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t, self.ids[r.vehicle], r.state[0], r.state[1], r.state[2], r.u[0], r.u[1], r.d[0], r.d[1], mode, va
            );
        }
        s
    }

    pub fn intruder_csv(&self) -> String {
        let mut s = String::from("t,x,y,theta,u_v,u_w,d_x,d_y,target\n");
        for r in &self.intruder {
            let target = r.target.map(|i| self.ids[i].clone()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.t, r.state[0], r.state[1], r.state[2], r.u[0], r.u[1], r.d[0], r.d[1], target
            );
        }
        s
    }

    /// Events sidecar: `t, event, vehicle_id, other_id, value`.
    pub fn events_csv(&self) -> String {
        let name = |i: Option<usize>| i.map(|i| self.ids[i].clone()).unwrap_or_default();
        let mut s = String::from("t,event,vehicle_id,other_id,value\n");
        for e in &self.events {
            let v = e.value.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{}", e.t, e.kind.as_str(), name(e.vehicle), name(e.other), v);
        }
        s
    }
}

/// `|RVS|`, failing with `SeparationBreach` when it exceeds `n_va`.
pub fn extract_rvs(log: &SimLog, n_va: usize) -> Result<Vec<String>> {
    let rvs = log.rvs_ids();
    if rvs.len() > n_va {
        return Err(Error::SeparationBreach(format!(
            "{} vehicles forced into avoidance ({}), at most {n_va} allowed",
            rvs.len(),
            rvs.join(", ")
        )));
    }
    Ok(rvs)
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

fn rotate(v: [f64; 2], th: f64) -> [f64; 2] {
    let (s, c) = th.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// State of `other` in the frame of `own`: `R(-theta) (p - p_own)`.
pub fn relative_state(own: &[f64; 3], other: &[f64; 3]) -> [f64; 3] {
    let p = rotate([other[0] - own[0], other[1] - own[1]], -own[2]);
    [p[0], p[1], wrap(other[2] - own[2])]
}

fn step(x: &[f64; 3], u: [f64; 2], d: [f64; 2], dt: f64) -> [f64; 3] {
    [x[0] + dt * (u[0] * x[2].cos() + d[0]), x[1] + dt * (u[0] * x[2].sin() + d[1]), wrap(x[2] + dt * u[1])]
}

/// Full speed with the bounded turn that best closes the heading error.
fn steer_toward(x: &[f64; 3], goal: [f64; 2], p: &DubinsParams, dt: f64) -> [f64; 2] {
    let want = (goal[1] - x[1]).atan2(goal[0] - x[0]);
    let err = wrap(want - x[2]);
    [p.v_max, (err / dt).clamp(-p.w_max, p.w_max)]
}

fn uniform_disc(rng: &mut ChaCha8Rng, r: f64) -> [f64; 2] {
    let a: f64 = rng.gen_range(0.0..TAU);
    let s: f64 = rng.gen::<f64>().sqrt() * r;
    [s * a.cos(), s * a.sin()]
}

fn clamp_disc(d: [f64; 2], r: f64) -> [f64; 2] {
    let n = d[0].hypot(d[1]);
    if n > r && n > 0.0 {
        [d[0] * r / n, d[1] * r / n]
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Parked,
    Flying,
    Landed,
}

struct Intruder {
    x: [f64; 3],
    /// Position in the chain or waypoint list.
    cursor: usize,
}

/// Bookkeeping of which pairs are currently inside each other's danger zone.
struct Contacts {
    inside: Vec<bool>,
}

/// Places the intruder just outside `victim`'s avoid region at `bearing`,
/// heading at the victim.
pub fn separation_boundary_state(avoid: &AvoidArtifacts, victim: &[f64; 3], bearing: f64) -> Result<[f64; 3]> {
    let dir = [bearing.cos(), bearing.sin()];
    let th_rel = wrap(bearing + PI);
    let rel = |r: f64| [r * dir[0], r * dir[1], th_rel];
    let mut lo = 0.0;
    let half = avoid.grid.maxs()[0].min(avoid.grid.maxs()[1]);
    let mut hi = half * 0.98;
    if avoid.full_value(&rel(lo)) > 0.0 {
        return Err(Error::InjectionFailed("origin lies outside the avoid region".into()));
    }
    if avoid.full_value(&rel(hi)) <= 0.0 {
        return Err(Error::InjectionFailed(format!("avoid region extends past {hi:.0} m at bearing {bearing:.3}")));
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if avoid.full_value(&rel(mid)) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut r = hi + INJECTION_MARGIN;
    while avoid.full_value(&rel(r)) <= 0.0 {
        r += INJECTION_MARGIN;
    }
    let off = rotate([r * dir[0], r * dir[1]], victim[2]);
    Ok([victim[0] + off[0], victim[1] + off[1], wrap(victim[2] + th_rel)])
}

/// Runs the closed loop. With `replans`, vehicles that have a replanned
/// plan switch to it when the intruder is removed.
pub fn simulate_with(
    scenario: &Scenario,
    avoid: &AvoidArtifacts,
    plans: &PlanSet,
    replans: Option<&PlanSet>,
    cfg: &SimConfig,
) -> Result<SimLog> {
    if !(cfg.dt > 0.0) {
        return Err(Error::Schedule(format!("control period {} must be positive", cfg.dt)));
    }
    let ids: Vec<String> = scenario.vehicles.iter().map(|v| v.id.clone()).collect();
    let mut active: Vec<&VehiclePlan> = Vec::with_capacity(ids.len());
    for id in &ids {
        active.push(plans.get(id).ok_or_else(|| Error::MissingPlan(id.clone()))?);
    }
    let index = |id: &str| ids.iter().position(|v| v == id).ok_or_else(|| Error::MissingPlan(id.to_string()));
    let n = ids.len();
    let veh = scenario.dynamics;
    let ip = scenario.intruder.params();
    let t_bar = scenario.t_bar();
    let r_c = scenario.planner.r_c;
    let dt = cfg.dt;

    let chain: Vec<usize> = match &cfg.intruder {
        IntruderStrategy::Pursuit { victim } => vec![index(victim)?],
        IntruderStrategy::Chain { victims } => victims.iter().map(|v| index(v)).collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let window = cfg.has_intruder().then(|| (cfg.t_sa, cfg.t_sa + t_bar));
    let mut horizon = active.iter().map(|p| p.sta.max(p.arrival)).fold(0.0, f64::max);
    if let Some(r) = replans {
        horizon = r.plans.iter().map(|p| p.sta.max(p.arrival)).fold(horizon, f64::max);
    }
    if let Some((_, t_e)) = window {
        horizon = horizon.max(t_e);
    }
    let horizon = cfg.horizon.unwrap_or(horizon + HORIZON_SLACK);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bearing_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    bearing_rng.set_stream(1);

    let mut state: Vec<[f64; 3]> = active.iter().map(|p| p.nominal.states[0]).collect();
    let mut status = vec![Status::Parked; n];
    let mut mode = vec![Mode::Nominal; n];
    let mut log = SimLog {
        ids: ids.clone(),
        dt,
        r_c,
        records: Vec::new(),
        intruder: Vec::new(),
        events: Vec::new(),
        avoid_start: vec![None; n],
        arrivals: vec![None; n],
        intruder_window: window,
        removal_states: vec![None; n],
        min_vehicle_distance: f64::INFINITY,
        min_intruder_distance: f64::INFINITY,
    };
    let mut intruder: Option<Intruder> = None;
    let mut removed = false;
    let mut switched = false;
    let mut vv = Contacts { inside: vec![false; n * n] };
    let mut vi = Contacts { inside: vec![false; n] };
    let event = |log: &mut SimLog, t, kind, vehicle, other, value| {
        log.events.push(SimEvent { t, kind, vehicle, other, value });
    };

    let steps = (horizon / dt + TIME_EPS).floor() as usize;
    for k in 0..=steps {
        let t = k as f64 * dt;

        if let Some((t_sa, t_e)) = window {
            if intruder.is_none() && !removed && t >= t_sa - TIME_EPS {
                let x = match cfg.injection.as_ref() {
                    Some(Injection::Explicit(x)) => *x,
                    Some(Injection::SeparationBoundary { victim, bearing }) => {
                        let j = index(victim)?;
                        let b = bearing.unwrap_or_else(|| bearing_rng.gen_range(0.0..TAU));
                        separation_boundary_state(avoid, &state[j], b)?
                    }
                    None => return Err(Error::InjectionFailed("intruder configured without an injection rule".into())),
                };
                intruder = Some(Intruder { x, cursor: 0 });
                event(&mut log, t, EventKind::Injection, None, None, None);
            }
            if intruder.is_some() && t >= t_e - TIME_EPS {
                intruder = None;
                removed = true;
                for i in 0..n {
                    if status[i] == Status::Flying {
                        log.removal_states[i] = Some(state[i]);
                    }
                }
                event(&mut log, t, EventKind::Removal, None, None, None);
            }
            if let Some(r) = replans {
                if removed && !switched {
                    switched = true;
                    for i in 0..n {
                        if let Some(p) = r.get(&ids[i]).filter(|p| p.replanned) {
                            active[i] = p;
                            mode[i] = Mode::Replanned;
                            event(&mut log, t, EventKind::PlanSwitch, Some(i), None, None);
                        }
                    }
                }
            }
        }

        for i in 0..n {
            if status[i] == Status::Parked && t >= active[i].ldt - TIME_EPS {
                status[i] = Status::Flying;
                event(&mut log, t, EventKind::Departure, Some(i), None, None);
            }
        }

        // Avoid-region values and switching.
        let mut v_avoid = vec![None; n];
        if let Some(intr) = &intruder {
            for i in 0..n {
                if status[i] != Status::Flying {
                    continue;
                }
                let v = avoid.full_value(&relative_state(&state[i], &intr.x));
                v_avoid[i] = Some(v);
                if v <= 0.0 && log.avoid_start[i].is_none() {
                    log.avoid_start[i] = Some(t);
                    event(&mut log, t, EventKind::AvoidStart, Some(i), None, Some(v));
                    if cfg.avoid_enabled && mode[i] == Mode::Nominal {
                        mode[i] = Mode::Avoid;
                    }
                }
            }
        }

        // Separation bookkeeping.
        for a in 0..n {
            if status[a] != Status::Flying {
                continue;
            }
            for b in a + 1..n {
                if status[b] != Status::Flying {
                    continue;
                }
                let d = (state[a][0] - state[b][0]).hypot(state[a][1] - state[b][1]);
                log.min_vehicle_distance = log.min_vehicle_distance.min(d);
                let slot = &mut vv.inside[a * n + b];
                if d < r_c && !*slot {
                    event(&mut log, t, EventKind::VehicleViolation, Some(a), Some(b), Some(d));
                }
                *slot = d < r_c;
            }
            if let Some(intr) = &intruder {
                let d = (state[a][0] - intr.x[0]).hypot(state[a][1] - intr.x[1]);
                log.min_intruder_distance = log.min_intruder_distance.min(d);
                if d < r_c && !vi.inside[a] {
                    event(&mut log, t, EventKind::IntruderViolation, Some(a), None, Some(d));
                }
                vi.inside[a] = d < r_c;
            }
        }

        // Vehicle inputs. Random draws happen for every vehicle at every
        // step so runs that differ only after some time share their past.
        let mut inputs = vec![([0.0; 2], [0.0; 2]); n];
        for i in 0..n {
            let draw = uniform_disc(&mut rng, veh.d_r);
            if status[i] != Status::Flying {
                continue;
            }
            let avoiding = mode[i] == Mode::Avoid && intruder.is_some();
            let synth = if avoiding {
                let intr = intruder.as_ref().expect("checked above");
                let rel = relative_state(&state[i], &intr.x);
                if avoid.grid.contains(&rel) {
                    avoid.control(t - cfg.t_sa, &rel).ok().map(|s| {
                        // Relative disturbance is frame-rotated and shared.
                        let share = veh.d_r / (veh.d_r + ip.d_r).max(f64::MIN_POSITIVE);
                        let dw = rotate([-s.sample.d[0] * share, -s.sample.d[1] * share], state[i][2]);
                        (s.sample.u, dw)
                    })
                } else {
                    None
                }
            } else {
                None
            };
            let colluding = cfg.victims == VictimPolicy::Collude
                && mode[i] == Mode::Nominal
                && intruder.as_ref().is_some_and(|intr| chain.get(intr.cursor) == Some(&i));
            let (u, d_worst) = match synth {
                Some(s) => s,
                None if colluding => {
                    let x = intruder.as_ref().expect("checked above").x;
                    (steer_toward(&state[i], [x[0], x[1]], &veh, dt), [0.0; 2])
                }
                None => match active[i].control(t, &state[i]) {
                    Ok(s) => (s.sample.u, s.sample.d),
                    Err(_) => (steer_toward(&state[i], active[i].target.center, &veh, dt), [0.0; 2]),
                },
            };
            let d = match cfg.disturbance {
                DisturbancePolicy::None => [0.0; 2],
                DisturbancePolicy::Random => draw,
                DisturbancePolicy::WorstCase => clamp_disc(d_worst, veh.d_r),
            };
            inputs[i] = (u, d);
        }

        // Intruder input.
        let intr_draw = uniform_disc(&mut rng, ip.d_r);
        let mut intr_rec = None;
        if let Some(intr) = intruder.as_mut() {
            let tau = t - cfg.t_sa;
            let (u, d, target) = match &cfg.intruder {
                IntruderStrategy::Waypoints { waypoints } => {
                    while intr.cursor + 1 < waypoints.len() {
                        let w = waypoints[intr.cursor];
                        if (w[0] - intr.x[0]).hypot(w[1] - intr.x[1]) > WAYPOINT_REACH {
                            break;
                        }
                        intr.cursor += 1;
                    }
                    let u = match waypoints.get(intr.cursor) {
                        Some(w) => steer_toward(&intr.x, *w, &ip, dt),
                        None => [ip.v_max, 0.0],
                    };
                    (u, intr_draw, None)
                }
                IntruderStrategy::Pursuit { .. } | IntruderStrategy::Chain { .. } => {
                    while intr.cursor + 1 < chain.len() {
                        let j = chain[intr.cursor];
                        let done = status[j] == Status::Landed
                            || log.avoid_start[j].is_some()
                            || v_avoid[j].is_some_and(|v| v <= 0.0);
                        if !done {
                            break;
                        }
                        intr.cursor += 1;
                        event(&mut log, t, EventKind::VictimAdvance, Some(chain[intr.cursor]), Some(j), None);
                    }
                    let j = chain[intr.cursor];
                    let rel = relative_state(&state[j], &intr.x);
                    let synth = if status[j] == Status::Flying && avoid.grid.contains(&rel) {
                        avoid.control(tau, &rel).ok()
                    } else {
                        None
                    };
                    match synth {
                        Some(s) => {
                            let share = ip.d_r / (veh.d_r + ip.d_r).max(f64::MIN_POSITIVE);
                            let dw = rotate([s.sample.d[0] * share, s.sample.d[1] * share], state[j][2]);
                            let d = match cfg.disturbance {
                                DisturbancePolicy::None => [0.0; 2],
                                DisturbancePolicy::Random => intr_draw,
                                DisturbancePolicy::WorstCase => clamp_disc(dw, ip.d_r),
                            };
                            (s.opponent, d, Some(j))
                        }
                        None => {
                            let goal = [state[j][0], state[j][1]];
                            (steer_toward(&intr.x, goal, &ip, dt), intr_draw, Some(j))
                        }
                    }
                }
                IntruderStrategy::None => ([0.0; 2], [0.0; 2], None),
            };
            let d = if cfg.disturbance == DisturbancePolicy::None { [0.0; 2] } else { d };
            intr_rec = Some(IntruderRecord { t, state: intr.x, u, d, target });
        }

        for i in 0..n {
            if status[i] == Status::Flying {
                let (u, d) = inputs[i];
                log.records.push(VehicleRecord { t, vehicle: i, state: state[i], u, d, mode: mode[i], v_avoid: v_avoid[i] });
            }
        }
        if let Some(r) = intr_rec {
            if let Some(intr) = intruder.as_mut() {
                intr.x = step(&intr.x, r.u, r.d, dt);
            }
            log.intruder.push(r);
        }

        for i in 0..n {
            if status[i] != Status::Flying {
                continue;
            }
            let (u, d) = inputs[i];
            state[i] = step(&state[i], u, d, dt);
            let holding = mode[i] == Mode::Avoid && intruder.is_some();
            if !holding && active[i].target.contains([state[i][0], state[i][1]]) {
                status[i] = Status::Landed;
                log.arrivals[i] = Some(t + dt);
                event(&mut log, t + dt, EventKind::Arrival, Some(i), None, None);
            }
        }

        let pending_intruder = window.is_some_and(|_| !removed);
        if !pending_intruder && status.iter().all(|s| *s == Status::Landed) && cfg.horizon.is_none() {
            break;
        }
    }
    Ok(log)
}

/// Closed loop with the given plans throughout.
pub fn simulate(scenario: &Scenario, avoid: &AvoidArtifacts, plans: &PlanSet, cfg: &SimConfig) -> Result<SimLog> {
    simulate_with(scenario, avoid, plans, None, cfg)
}
