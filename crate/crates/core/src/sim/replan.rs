//! Replanning phase: once the intruder is gone, every vehicle that had to
//! avoid it gets a new arrival time and a new plan, in priority order.

use crate::dynamics::{DynSpec, HamRole};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::schedule::ObstacleSchedule;
use crate::scenario::TargetSpec;
use crate::sim::SimLog;
use crate::solver::{solve_frs, ReachProblem, SaveSpec};
use crate::stp::regions::disc_field;
use crate::stp::{lattice, plan_vehicle, PlanContext, PlanKind, PlanRequest, PlanSet, VehiclePlan};

/// Length of each forward solve while searching for the new arrival time.
const FRS_CHUNK: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanOptions {
    /// Plan against capture discs only, without intruder-induced obstacles.
    pub basic: bool,
    /// Retry a vehicle with capture discs only when the intruder-aware
    /// problem is infeasible from its post-avoidance state.
    pub fallback_basic: bool,
    /// Later arrival times tried when the first one is numerically out of reach.
    pub sta_retries: usize,
    /// Longest search for a new arrival time after the intruder leaves.
    pub max_horizon: f64,
}

impl ReplanOptions {
    pub fn from_context(ctx: &PlanContext) -> ReplanOptions {
        let g = ctx.grid.as_ref();
        let diag = (g.maxs()[0] - g.mins()[0]).hypot(g.maxs()[1] - g.mins()[1]);
        let p = ctx.scenario.dynamics;
        let net = (p.v_max - p.d_r).max(0.25 * p.v_max);
        ReplanOptions {
            basic: ctx.scenario.planner.replan_basic,
            fallback_basic: true,
            sta_retries: ctx.scenario.planner.sta_retries,
            max_horizon: 2.0 * diag / net + ctx.scenario.t_bar(),
        }
    }
}

fn replan_err(id: &str, reason: impl Into<String>) -> Error {
    Error::ReplanInfeasible { vehicle: id.to_string(), reason: reason.into() }
}

/// Ball of two cells around a known position, with any heading. A set only
/// a few cells across is erased by the scheme's dissipation before it can
/// grow, and a heading constraint makes it narrower still. The arrival
/// time it yields is optimistic by at most a turn plus the ball radius, and
/// planning then validates it.
fn initial_set(ctx: &PlanContext, x0: [f64; 3]) -> ScalarField {
    let g = ctx.grid.clone();
    let r = 2.0 * g.spacing()[0].max(g.spacing()[1]);
    ScalarField::from_fn(g, |x| (x[0] - x0[0]).hypot(x[1] - x0[1]) - r)
}

/// First snapshot time at which the clipped FRS from `x0` meets the target.
pub fn earliest_arrival(
    ctx: &PlanContext,
    id: &str,
    x0: [f64; 3],
    t0: f64,
    target: &TargetSpec,
    obstacles: &ObstacleSchedule,
    max_horizon: f64,
) -> Result<f64> {
    let goal = disc_field(&ctx.grid, target.center, target.radius)?;
    let meets = |f: &ScalarField| f.values().iter().zip(goal.values()).any(|(a, b)| *a <= 0.0 && *b <= 0.0);
    let spec = DynSpec::dubins(ctx.scenario.dynamics, HamRole::REPLAN_FRS);
    let stride = ctx.scenario.planner.snapshot_stride;
    let mut f = initial_set(ctx, x0);
    if f.is_empty_set() {
        return Err(replan_err(id, "state at intruder removal lies off the planning lattice"));
    }
    if obstacles.sample(t0).interpolate_clamped(&x0) <= 0.0 {
        return Err(replan_err(id, format!("state {x0:?} lies inside another vehicle's obstacle at {t0:.2}")));
    }
    let mut t = t0;
    while t < t0 + max_horizon {
        if meets(&f) {
            return Ok(t);
        }
        let span = FRS_CHUNK.min(t0 + max_horizon - t);
        let p = ReachProblem::forward(f.clone(), spec, span)
            .with_anchor(t)
            .with_obstacles(obstacles.clone())
            .with_cfl(ctx.scenario.planner.cfl)
            .with_save(SaveSpec::Interval(stride));
        let out = solve_frs(&p)?;
        for (&s, field) in out.values.times().iter().zip(out.values.fields()).skip(1) {
            if meets(field) {
                return Ok(s);
            }
        }
        f = out.values.last().clone();
        log::debug!("{id}: FRS min {:.2} at {:.1}", f.values().iter().cloned().fold(f64::INFINITY, f64::min), t + span);
        if f.is_empty_set() {
            return Err(replan_err(id, "forward reachable set vanished among the obstacles"));
        }
        t += span;
    }
    Err(replan_err(id, format!("target not reachable within {max_horizon:.0} s of the intruder leaving")))
}

/// Replans every vehicle in the RVS of `log`. Unchanged plans are kept.
pub fn replan(ctx: &PlanContext, plans: &PlanSet, log: &SimLog) -> Result<PlanSet> {
    replan_with(ctx, plans, log, ReplanOptions::from_context(ctx))
}

pub fn replan_with(ctx: &PlanContext, plans: &PlanSet, log: &SimLog, opts: ReplanOptions) -> Result<PlanSet> {
    let rvs = log.rvs();
    if rvs.is_empty() {
        return Ok(plans.clone());
    }
    let (_, t_e) = log
        .intruder_window
        .ok_or_else(|| Error::MissingPrerequisite("avoidance recorded without an intruder window".into()))?;
    let mut out = plans.clone();
    let mut done: Vec<usize> = Vec::new();
    for &i in &rvs {
        let id = log.ids[i].clone();
        let old = plans.get(&id).ok_or_else(|| Error::MissingPlan(id.clone()))?;
        let x0 = log.removal_states[i].ok_or_else(|| replan_err(&id, "not airborne when the intruder left"))?;
        if !ctx.grid.contains(&x0) {
            return Err(replan_err(&id, format!("state {x0:?} outside the planning grid")));
        }
        let others: Vec<&VehiclePlan> = log
            .ids
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i && (!rvs.contains(j) || done.contains(j)))
            .filter_map(|(_, v)| out.get(v))
            .collect();
        let times = lattice(t_e, t_e + opts.max_horizon, ctx.scenario.planner.snapshot_stride);
        let mut plan = if opts.basic {
            replan_one(ctx, &id, x0, t_e, old, &others, &times, true, opts)
        } else {
            match replan_one(ctx, &id, x0, t_e, old, &others, &times, false, opts) {
                Err(Error::ReplanInfeasible { reason, .. }) if opts.fallback_basic => {
                    log::warn!("{id}: intruder-aware replanning infeasible ({reason}); using capture obstacles only");
                    replan_one(ctx, &id, x0, t_e, old, &others, &times, true, opts)
                }
                r => r,
            }
        }?;
        plan.replanned = true;
        log::info!("{id}: replanned, new sta {:.2}, arrival {:.2}", plan.sta, plan.arrival);
        let k = out.index(&id).expect("plan exists");
        out.plans[k] = plan;
        done.push(i);
    }
    Ok(out)
}

/// New arrival time and plan for one vehicle against `others`.
#[allow(clippy::too_many_arguments)]
fn replan_one(
    ctx: &PlanContext,
    id: &str,
    x0: [f64; 3],
    t_e: f64,
    old: &VehiclePlan,
    others: &[&VehiclePlan],
    times: &[f64],
    basic: bool,
    opts: ReplanOptions,
) -> Result<VehiclePlan> {
    let (obstacles, spec, kind) = if basic {
        (ctx.basic_obstacles(others, times)?, ctx.basic_spec(), PlanKind::Basic)
    } else {
        (ctx.total_obstacles(others, times)?, ctx.planning_spec(), PlanKind::IntruderAware)
    };
    let stride = ctx.scenario.planner.snapshot_stride;
    let first = earliest_arrival(ctx, id, x0, t_e, &old.target, &obstacles, opts.max_horizon)?;
    let mut last_err = None;
    for attempt in 0..=opts.sta_retries {
        let sta = first + attempt as f64 * stride;
        let req = PlanRequest { id: id.to_string(), x0, target: old.target, sta, t_start: t_e, depart_now: true };
        match plan_vehicle(&ctx.grid, &ctx.scenario.planner, spec, kind, &req, &obstacles) {
            Ok(p) => return Ok(p),
            Err(Error::Infeasible { reason, .. }) => last_err = Some(reason),
            Err(e) => return Err(e),
        }
    }
    Err(replan_err(id, format!("no plan within {} retries: {}", opts.sta_retries, last_err.unwrap_or_default())))
}
