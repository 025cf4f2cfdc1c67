//! Region algebra on the planning grid: base tubes, separation and buffer
//! regions, the static-obstacle BRS, and the five induced-obstacle cases
//! computed directly by the solver.
//!
//! The direct case constructions are the reference the fast evaluator in
//! `fastpath` is checked against; they cost one solve per snapshot.

use std::sync::Arc;

use crate::dynamics::{DubinsParams, DynSpec, HamRole};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::reachops::{augment_capture, rolling_frs, windowed_brs_union, POS_DIMS};
use crate::schedule::ObstacleSchedule;
use crate::sdf::{dilate_ball, offset, outer_radius};
use crate::solver::{solve_brs, ReachProblem, SaveSpec, SolveMode};
use crate::stp::Trajectory;

/// Heading-free disc `|p - c| - r` on a grid whose first two dimensions
/// are positions. `r = 0` gives a point.
pub fn disc_field(grid: &Arc<Grid>, c: [f64; 2], r: f64) -> Result<ScalarField> {
    if !(r >= 0.0) {
        return Err(Error::NegativeRadius(r));
    }
    Ok(ScalarField::from_fn(grid.clone(), |x| (x[0] - c[0]).hypot(x[1] - c[1]) - r))
}

/// Tube of radius `eps` around the nominal position at each time, for every
/// heading. Times outside the trajectory's span are empty.
pub fn base_obstacle_rtt(traj: &Trajectory, eps: f64, grid: &Arc<Grid>, times: &[f64]) -> Result<ObstacleSchedule> {
    let empty = Arc::new(ScalarField::empty_set(grid.clone()));
    let mut fields = Vec::with_capacity(times.len());
    let mut last: Option<([f64; 2], Arc<ScalarField>)> = None;
    for &t in times {
        match traj.position_at(t) {
            None => fields.push(empty.clone()),
            Some(p) => {
                if let Some((q, f)) = &last {
                    if *q == p {
                        fields.push(f.clone());
                        continue;
                    }
                }
                let f = Arc::new(disc_field(grid, p, eps)?);
                last = Some((p, f.clone()));
                fields.push(f);
            }
        }
    }
    ObstacleSchedule::new(grid.clone(), times.to_vec(), fields)
}

/// Offsets every snapshot by `radius`. Base tubes are exact position
/// distances, so an offset is an exact dilation of them.
fn dilate_schedule(s: &ObstacleSchedule, radius: f64) -> Result<ObstacleSchedule> {
    s.map(|f| if f.is_empty_set() { Ok(f.clone()) } else { offset(f, radius) })
}

/// Radius of a relative-state set after collapsing relative heading and
/// closing under rotations of the vehicle frame.
pub fn relative_radius(rel: &ScalarField) -> Result<f64> {
    if rel.grid().ndim() < 2 {
        return Err(Error::BadDims("relative set needs two position dimensions".into()));
    }
    outer_radius(rel, &POS_DIMS)
}

/// `S_j(t) = base_j(t) + A^A_j(0, t_bar)`; the relative set enters as the
/// disc that covers it for every heading of vehicle j.
pub fn separation_region(base: &ObstacleSchedule, avoid_full: &ScalarField) -> Result<ObstacleSchedule> {
    dilate_schedule(base, relative_radius(avoid_full)?)
}

/// `S_j + A^B_i(0, t_brd) + A^A_i(0, t_rd)`.
pub fn buffer_region(
    sep: &ObstacleSchedule,
    rel_buffer: &ScalarField,
    avoid_trd: &ScalarField,
) -> Result<ObstacleSchedule> {
    dilate_schedule(sep, relative_radius(rel_buffer)? + relative_radius(avoid_trd)?)
}

/// Mirror case: `base_j + A^A_j(0, t_rd) + A^B_j(0, t_brd) + A^A_i(0, t_bar)`.
pub fn buffer_region_mirror(
    base: &ObstacleSchedule,
    avoid_trd: &ScalarField,
    rel_buffer: &ScalarField,
    avoid_full: &ScalarField,
) -> Result<ObstacleSchedule> {
    let r = relative_radius(avoid_trd)? + relative_radius(rel_buffer)? + relative_radius(avoid_full)?;
    dilate_schedule(base, r)
}

/// States that can be driven into a capture-dilated static obstacle within
/// `t_bar` by some input and disturbance. Static sets make this stationary,
/// so a single snapshot holds for all times.
pub fn static_avoid_brs(
    statics: Option<&ScalarField>,
    params: DubinsParams,
    t_bar: f64,
    r_c: f64,
    cfl: f64,
) -> Result<Option<ScalarField>> {
    let Some(s) = statics else { return Ok(None) };
    if s.is_empty_set() {
        return Ok(None);
    }
    let k = dilate_ball(s, r_c, &POS_DIMS)?;
    if t_bar <= 0.0 {
        return Ok(Some(k));
    }
    let spec = DynSpec::dubins(params, HamRole::OBSTACLE_BRS);
    let p = ReachProblem::backward(k, spec, t_bar).with_cfl(cfl).with_save(SaveSpec::Endpoints);
    Ok(Some(solve_brs(&p)?.values.last().clone()))
}

/// Position occupancy of a state set, free in heading.
pub fn heading_free(f: &ScalarField) -> Result<ScalarField> {
    if f.is_empty_set() {
        return Ok(f.clone());
    }
    f.project_min(&POS_DIMS)?.extend_to(f.grid().clone(), &POS_DIMS)
}

/// Inputs of the direct case constructions. The base schedule should be
/// uniformly spaced; its times are the output lattice.
#[derive(Debug, Clone)]
pub struct CaseInputs<'a> {
    pub base: &'a ObstacleSchedule,
    /// Higher-priority vehicle, max-max role.
    pub frs_spec: DynSpec,
    /// Planning vehicle, min-min role.
    pub brs_spec: DynSpec,
    pub t_bar: f64,
    pub t_brd: f64,
    pub r_c: f64,
    pub cfl: f64,
}

impl CaseInputs<'_> {
    fn stride(&self) -> Result<f64> {
        let t = self.base.times();
        if t.len() < 2 {
            return Err(Error::Schedule("case obstacles need at least two snapshots".into()));
        }
        Ok(t[1] - t[0])
    }

    fn projected_frs(&self, duration: f64) -> Result<ObstacleSchedule> {
        let frs = rolling_frs(self.base, duration, &self.frs_spec)?;
        augment_capture(&frs.map(heading_free)?, self.r_c)
    }
}

/// Case 1: capture-dilated base.
pub fn case1(inp: &CaseInputs) -> Result<ObstacleSchedule> {
    augment_capture(inp.base, inp.r_c)
}

/// Case 2: capture-dilated positions of the rolling FRS over `[t - t_bar, t]`.
pub fn case2(inp: &CaseInputs) -> Result<ObstacleSchedule> {
    inp.projected_frs(inp.t_bar)
}

/// Case 3: states that can hit the capture-dilated base during `[t, t + t_bar]`.
pub fn case3(inp: &CaseInputs) -> Result<ObstacleSchedule> {
    let target = augment_capture(inp.base, inp.r_c)?;
    windowed_brs_union(&target, inp.t_bar, &inp.brs_spec, inp.base.times())
}

/// Case 4: one reach-exists BRS over `[t, t + t_bar - t_brd]` of the
/// moving target `F(s - t_bar, s)`.
pub fn case4(inp: &CaseInputs) -> Result<ObstacleSchedule> {
    let target = inp.projected_frs(inp.t_bar)?;
    windowed_brs_union(&target, (inp.t_bar - inp.t_brd).max(0.0), &inp.brs_spec, inp.base.times())
}

/// Case 5: union over arrival offsets `h` in `[t_bar - 2 t_brd, t_bar]` of
/// the exact-time BRS of `F(t + h - t_bar + t_brd, t + h)`.
pub fn case5(inp: &CaseInputs) -> Result<ObstacleSchedule> {
    let dt = inp.stride()?;
    let target = inp.projected_frs(inp.t_bar - inp.t_brd)?;
    let lo = (inp.t_bar - 2.0 * inp.t_brd).max(0.0);
    let k_lo = (lo / dt + 1e-9).floor() as usize;
    let k_hi = (inp.t_bar / dt - 1e-9).ceil() as usize;
    let mut out = Vec::with_capacity(inp.base.len());
    for &t in inp.base.times() {
        let mut acc: Option<ScalarField> = None;
        for k in k_lo..=k_hi {
            let h = (k as f64 * dt).min(inp.t_bar);
            let goal = target.sample(t + h);
            if goal.is_empty_set() {
                continue;
            }
            let f = if h <= 0.0 {
                goal.clone()
            } else {
                let p = ReachProblem::backward(goal.clone(), inp.brs_spec.clone(), h)
                    .with_mode(SolveMode::ExactTime)
                    .with_cfl(inp.cfl)
                    .with_save(SaveSpec::Endpoints);
                solve_brs(&p)?.values.last().clone()
            };
            acc = Some(match acc {
                None => f,
                Some(a) => a.union(&f)?,
            });
        }
        out.push(Arc::new(acc.unwrap_or_else(|| ScalarField::empty_set(inp.base.grid().clone()))));
    }
    ObstacleSchedule::new(inp.base.grid().clone(), inp.base.times().to_vec(), out)
}

/// Dispatch by case number.
pub fn induced_obstacles(inp: &CaseInputs, case: u8) -> Result<ObstacleSchedule> {
    match case {
        1 => case1(inp),
        2 => case2(inp),
        3 => case3(inp),
        4 => case4(inp),
        5 => case5(inp),
        _ => Err(Error::Schedule(format!("no obstacle case {case}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::sdf_ball;
    use std::f64::consts::PI;

    fn grid() -> Arc<Grid> {
        Arc::new(crate::grid::make_grid(&[0.0, 0.0, -PI], &[1000.0, 1000.0, PI], &[41, 41, 12], &[false, false, true]).unwrap())
    }

    fn straight(t0: f64, t1: f64, p0: [f64; 2], v: [f64; 2]) -> Trajectory {
        let n = ((t1 - t0) / 0.5).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * 0.5).collect();
        let th = v[1].atan2(v[0]);
        let states = times.iter().map(|t| [p0[0] + v[0] * (t - t0), p0[1] + v[1] * (t - t0), th]).collect();
        let controls = vec![[v[0].hypot(v[1]), 0.0]; times.len()];
        Trajectory { times, states, controls }
    }

    #[test]
    fn base_tube_tracks_nominal() {
        let g = grid();
        let tr = straight(1.0, 3.0, [200.0, 500.0], [100.0, 0.0]);
        let times = [0.0, 1.0, 2.0, 3.0, 4.0];
        let b = base_obstacle_rtt(&tr, 30.0, &g, &times).unwrap();
        assert!(b.sample(0.0).is_empty_set());
        assert!(b.sample(4.0).is_empty_set());
        assert!(b.sample(2.0).interpolate(&[300.0, 500.0, 1.0]).unwrap() < -29.0);
        assert!(b.sample(2.0).interpolate(&[200.0, 500.0, 1.0]).unwrap() > 60.0);
        let still = straight(0.0, 4.0, [500.0, 500.0], [0.0, 0.0]);
        let c = base_obstacle_rtt(&still, 25.0, &g, &times).unwrap();
        assert!(c.fields().windows(2).all(|w| Arc::ptr_eq(&w[0], &w[1])));
        let point = base_obstacle_rtt(&still, 0.0, &g, &times).unwrap();
        assert_eq!(point.sample(1.0).count_subzero(), 12);
    }

    #[test]
    fn separation_of_point_by_ball_is_ball() {
        let g = grid();
        let rel = Arc::new(crate::grid::make_grid(&[-300.0, -300.0, -PI], &[300.0, 300.0, PI], &[31, 31, 9], &[false, false, true]).unwrap());
        let avoid = sdf_ball(rel, &[0.0, 0.0], 100.0, &[0, 1]).unwrap();
        let tr = straight(0.0, 2.0, [500.0, 500.0], [0.0, 0.0]);
        let base = base_obstacle_rtt(&tr, 0.0, &g, &[0.0, 1.0, 2.0]).unwrap();
        let s = separation_region(&base, &avoid).unwrap();
        let ball = disc_field(&g, [500.0, 500.0], 100.0).unwrap();
        let h = g.spacing()[0];
        for (a, b) in s.sample(1.0).values().iter().zip(ball.values()) {
            if b.abs() < 2.0 * h {
                assert!((a - b).abs() < 0.5 * h, "{a} vs {b}");
            }
            assert_eq!(*a <= 0.0, *b <= 0.0);
        }
        for (sv, bv) in s.sample(1.0).values().iter().zip(base.sample(1.0).values()) {
            if *bv <= 0.0 {
                assert!(*sv <= 0.0);
            }
        }
    }

    #[test]
    fn origin_summands_leave_separation_unchanged() {
        let g = grid();
        let rel = Arc::new(crate::grid::make_grid(&[-100.0, -100.0], &[100.0, 100.0], &[21, 21], &[false, false]).unwrap());
        let origin = ScalarField::from_fn(rel, |x| if x[0] == 0.0 && x[1] == 0.0 { -1.0 } else { 1.0 });
        let tr = straight(0.0, 1.0, [500.0, 500.0], [0.0, 0.0]);
        let base = base_obstacle_rtt(&tr, 80.0, &g, &[0.0, 1.0]).unwrap();
        let sep = separation_region(&base, &origin).unwrap();
        let b = buffer_region(&sep, &origin, &origin).unwrap();
        for (x, y) in b.sample(0.5).values().iter().zip(sep.sample(0.5).values()) {
            assert_eq!(x <= &0.0, y <= &0.0);
        }
    }

    #[test]
    fn static_brs_of_stopping_vehicle_is_dilated_set() {
        let g = grid();
        let statics = sdf_ball(g.clone(), &[500.0, 500.0], 60.0, &[0, 1]).unwrap();
        let p = DubinsParams::new(0.0, 25.0, 2.0, 0.0);
        let k = static_avoid_brs(Some(&statics), p, 0.0, 50.0, 0.5).unwrap().unwrap();
        let b = static_avoid_brs(Some(&statics), p, 4.0, 50.0, 0.5).unwrap().unwrap();
        let h = g.spacing()[0];
        // Existential inputs: the set only grows, by at most v_max per second.
        for (kv, bv) in k.values().iter().zip(b.values()) {
            if *kv <= 0.0 {
                assert!(*bv <= 0.0);
            }
        }
        let slow = DubinsParams::new(5.0, 25.0, 2.0, 0.0);
        let b2 = static_avoid_brs(Some(&statics), slow, 2.0, 50.0, 0.5).unwrap().unwrap();
        let b4 = static_avoid_brs(Some(&statics), slow, 4.0, 50.0, 0.5).unwrap().unwrap();
        assert!(b4.count_subzero() > b2.count_subzero());
        assert!(static_avoid_brs(None, p, 4.0, 50.0, 0.5).unwrap().is_none());
        let ring = |f: &ScalarField, x: f64| f.interpolate(&[500.0 + x, 500.0, PI]).unwrap();
        // Facing the obstacle from 210 m out at full speed for 4 s.
        assert!(ring(&b, 110.0 + 100.0 - 2.0 * h) <= 0.0);
        assert!(ring(&b, 110.0 + 100.0 + 2.0 * h) > 0.0);
    }
}
