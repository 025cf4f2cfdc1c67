//! Relative-state artifacts: the avoid region, the relative buffer and the
//! radii the planner uses when it sums them onto absolute positions.

use std::sync::Arc;

use crate::dynamics::{controller_from_value, DubinsParams, DynSpec, HamRole, Synthesized};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::reachops::{sensing_distance, POS_DIMS};
use crate::scenario::RelativeGridSpec;
use crate::sdf::{outer_radius, sdf_ball};
use crate::solver::{solve_brs, ReachProblem, SaveSpec};
use crate::timefield::TimeField;

/// Growth factor of the relative box when a set touches its edge.
pub const EXPANSION_FACTOR: f64 = 1.5;
pub const MAX_EXPANSIONS: usize = 2;
const AVOID_SAVE_INTERVAL: f64 = 0.25;

/// Avoid region `A^A(tau, t_bar)` with `tau` in `[0, t_bar]`: relative
/// states from which the intruder can force a danger-zone entry before it
/// leaves at `t_bar`.
#[derive(Debug, Clone)]
pub struct AvoidArtifacts {
    pub grid: Arc<Grid>,
    /// Backward solve anchored at `t_bar`; `value.value_at(tau, x)` is
    /// `V^A(tau, x)`, so `tau = 0` is the full-lifetime region.
    pub value: TimeField,
    /// Role `AVOID` on the relative model.
    pub spec: DynSpec,
    pub t_bar: f64,
    pub r_c: f64,
    pub d_sen: f64,
    pub expansions: usize,
}

impl AvoidArtifacts {
    /// `V^A(0, x_rel)`, clamped to the grid.
    pub fn full_value(&self, x_rel: &[f64]) -> f64 {
        self.value_at(0.0, x_rel)
    }

    /// Values outside the relative box are reported as outside the region.
    pub fn value_at(&self, tau: f64, x_rel: &[f64]) -> f64 {
        if !self.grid.contains(x_rel) {
            return f64::INFINITY;
        }
        self.value.value_at(tau.clamp(0.0, self.t_bar), x_rel)
    }

    /// Snapshot with `remaining` seconds of intruder lifetime left.
    pub fn region_with_remaining(&self, remaining: f64) -> &ScalarField {
        let tau = (self.t_bar - remaining).clamp(0.0, self.t_bar);
        &self.value.fields()[self.value.nearest(tau)]
    }

    /// Radius of the disc covering the region for every vehicle heading.
    pub fn radius_with_remaining(&self, remaining: f64) -> Result<f64> {
        outer_radius(self.region_with_remaining(remaining), &POS_DIMS)
    }

    /// Optimal avoidance input at elapsed intruder time `tau`. The vehicle
    /// maximizes; `opponent` holds the intruder's optimal pursuit input.
    pub fn control(&self, tau: f64, x_rel: &[f64]) -> Result<Synthesized> {
        controller_from_value(&self.value, &self.spec, tau.clamp(0.0, self.t_bar), x_rel)
    }
}

fn touches_position_edge(field: &ScalarField) -> bool {
    let g = field.grid();
    let mut idx = [0usize; 4];
    field.values().iter().enumerate().any(|(flat, &v)| {
        if v > 0.0 {
            return false;
        }
        g.multi_index(flat, &mut idx);
        POS_DIMS.iter().any(|&k| idx[k] == 0 || idx[k] + 1 == g.counts()[k])
    })
}

fn expanded(spec: RelativeGridSpec) -> RelativeGridSpec {
    let cells = (spec.counts[0] - 1) as f64 * EXPANSION_FACTOR;
    let n = 2 * ((cells / 2.0).round() as usize) + 1;
    RelativeGridSpec { half_width: spec.half_width * EXPANSION_FACTOR, counts: [n, n, spec.counts[2]] }
}

fn danger_ball(grid: &Arc<Grid>, r_c: f64) -> Result<ScalarField> {
    sdf_ball(grid.clone(), &[0.0, 0.0], r_c, &POS_DIMS)
}

/// Solves on `rel`, growing the box until the set stays off the edges.
fn solve_relative(
    rel: RelativeGridSpec,
    spec: &DynSpec,
    horizon: f64,
    r_c: f64,
    cfl: f64,
    save: SaveSpec,
) -> Result<(Arc<Grid>, TimeField, usize)> {
    let mut rel = rel;
    for expansions in 0..=MAX_EXPANSIONS {
        let grid = Arc::new(rel.build()?);
        let p = ReachProblem::backward(danger_ball(&grid, r_c)?, spec.clone(), horizon)
            .with_cfl(cfl)
            .with_save(save.clone());
        let out = solve_brs(&p)?;
        if !touches_position_edge(out.values.last()) {
            return Ok((grid, out.values, expansions));
        }
        log::info!("relative set touches the box edge at half width {}; expanding", rel.half_width);
        rel = expanded(rel);
    }
    Err(Error::DomainTooSmall)
}

pub fn compute_avoid_region(
    intruder: DubinsParams,
    vehicle: DubinsParams,
    t_bar: f64,
    r_c: f64,
    rel: RelativeGridSpec,
    cfl: f64,
) -> Result<AvoidArtifacts> {
    if !(t_bar > 0.0) {
        return Err(Error::Schedule(format!("intruder lifetime {t_bar} must be positive")));
    }
    let spec = DynSpec::relative(vehicle, intruder, HamRole::AVOID);
    let save = SaveSpec::Interval(AVOID_SAVE_INTERVAL.min(t_bar));
    let (grid, value, expansions) = solve_relative(rel, &spec, t_bar, r_c, cfl, save)?;
    if value.last().is_empty_set() {
        return Err(Error::EmptyAvoidRegion);
    }
    let d_sen = sensing_distance(value.last())?;
    Ok(AvoidArtifacts { grid, value, spec, t_bar, r_c, d_sen, expansions })
}

/// `A^B(0, t_brd)`: relative states from which vehicle and intruder,
/// cooperating with every input, can meet within `t_brd`.
pub fn relative_buffer(
    vehicle: DubinsParams,
    intruder: DubinsParams,
    t_brd: f64,
    r_c: f64,
    rel: RelativeGridSpec,
    cfl: f64,
) -> Result<ScalarField> {
    let spec = DynSpec::relative(vehicle, intruder, HamRole::BUFFER);
    let (_, tf, _) = solve_relative(rel, &spec, t_brd, r_c, cfl, SaveSpec::Endpoints)?;
    Ok(tf.last().clone())
}

/// Disc radii the planner sums onto base positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionRadii {
    /// Avoid region over the full lifetime.
    pub avoid_full: f64,
    /// Avoid region with `t_bar - t_brd` remaining.
    pub avoid_trd: f64,
    pub buffer: f64,
}

impl RegionRadii {
    pub fn from_artifacts(avoid: &AvoidArtifacts, buffer: &ScalarField, t_brd: f64) -> Result<RegionRadii> {
        Ok(RegionRadii {
            avoid_full: avoid.radius_with_remaining(avoid.t_bar)?,
            avoid_trd: avoid.radius_with_remaining(avoid.t_bar - t_brd)?,
            buffer: outer_radius(buffer, &POS_DIMS)?,
        })
    }

    /// Separation region radius around a base tube of radius `eps`.
    pub fn separation(&self, eps: f64) -> f64 {
        eps + self.avoid_full
    }

    /// `S_j + A^B_i + A^A_i(t_rd)` around vehicle j's tube.
    pub fn buffer_ij(&self, eps_j: f64) -> f64 {
        eps_j + self.avoid_full + self.buffer + self.avoid_trd
    }

    /// `base_j + A^A_j(t_rd) + A^B_j + A^A_i(t_bar)`.
    pub fn buffer_ji(&self, eps_j: f64) -> f64 {
        eps_j + self.avoid_trd + self.buffer + self.avoid_full
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const V: DubinsParams = DubinsParams::new(0.0, 25.0, 2.0, 6.0);

    fn small() -> RelativeGridSpec {
        RelativeGridSpec { half_width: 300.0, counts: [31, 31, 21] }
    }

    #[test]
    fn still_intruder_leaves_danger_ball() {
        let still = DubinsParams::new(0.0, 0.0, 2.0, 0.0);
        let calm = V.without_disturbance();
        let a = compute_avoid_region(still, calm, 4.0, 100.0, small(), 0.5).unwrap();
        let ball = danger_ball(&a.grid, 100.0).unwrap();
        let h = a.grid.spacing()[0];
        for f in a.value.fields() {
            for (v, b) in f.values().iter().zip(ball.values()) {
                if *b <= 0.0 {
                    assert!(*v <= 0.0);
                }
                if *v <= 0.0 {
                    assert!(*b <= 2.0 * h);
                }
            }
        }
        assert!(a.d_sen >= 100.0 - h && a.d_sen <= 100.0 + h, "{}", a.d_sen);
    }

    #[test]
    fn avoid_regions_nested_in_remaining_time() {
        let a = compute_avoid_region(V, V, 3.0, 100.0, small(), 0.5).unwrap();
        let fields = a.value.fields();
        // Stored backward: later entries have more remaining time.
        for w in fields.windows(2) {
            for (early, late) in w[0].values().iter().zip(w[1].values()) {
                if *early <= 0.0 {
                    assert!(*late <= 0.0);
                }
            }
        }
        assert!(a.d_sen >= 100.0);
    }

    #[test]
    fn buffer_obeys_closing_speed_bound() {
        let t_brd = 2.0;
        let b = relative_buffer(V, V, t_brd, 100.0, small(), 0.5).unwrap();
        let h = b.grid().spacing()[0];
        let bound = 100.0 + (2.0 * 25.0 + 2.0 * 6.0) * t_brd;
        let r = outer_radius(&b, &POS_DIMS).unwrap();
        assert!(r <= bound + h, "{r} > {bound}");
        assert!(r > 100.0 + h);
        let short = relative_buffer(V, V, 1.0, 100.0, small(), 0.5).unwrap();
        for (s, l) in short.values().iter().zip(b.values()) {
            if *s <= 0.0 {
                assert!(*l <= 0.0);
            }
        }
    }

    #[test]
    fn expansion_keeps_origin_node() {
        let e = expanded(RelativeGridSpec { half_width: 500.0, counts: [61, 61, 31] });
        assert_eq!(e.counts[0] % 2, 1);
        assert!((e.half_width - 750.0).abs() < 1e-12);
        // Even the danger ball does not fit after two expansions.
        let too_small = RelativeGridSpec { half_width: 40.0, counts: [9, 9, 9] };
        assert!(matches!(
            compute_avoid_region(V, V, 1.0, 100.0, too_small, 0.5),
            Err(Error::DomainTooSmall)
        ));
    }
}
