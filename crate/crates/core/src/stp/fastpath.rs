//! Fast evaluation of induced obstacles on the planning lattice.
//!
//! Every higher-priority vehicle's base obstacle is a heading-free disc, and
//! the dynamics are translation invariant in position. Each case obstacle is
//! therefore a union of translated copies of a few shapes:
//!
//! * the projected FRS of a disc of radius `eps` after `h` seconds is
//!   the disc of radius `eps + (v_max + d_r) h` (all headings start in the
//!   set, so the speed bound is attained in every direction);
//! * the exact-time min-min BRS of a disc of radius `R` after `tau` seconds
//!   is the template `T_tau` (BRS of a disc of radius `R0 <= R`) dilated by
//!   `R - R0` in each heading slice.
//!
//! Templates are solved once on a local grid that shares the planning
//! heading lattice and refines the position spacing by an integer factor.
//! Lookups then use the same bilinear weights at every planning node.

use std::sync::Arc;

use crate::dynamics::{DubinsParams, DynSpec, HamRole};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::reachops::POS_DIMS;
use crate::schedule::ObstacleSchedule;
use crate::sdf::{outer_radius, reinit_sdf_dims, DEFAULT_REINIT_ITERATIONS};
use crate::solver::{solve_brs, ReachProblem, SaveSpec, SolveMode};
use crate::stp::avoid::RegionRadii;
use crate::stp::regions::disc_field;
use crate::stp::Trajectory;

/// Cells of margin kept around every piece so the field is distance-like
/// near its zero level.
const MARGIN_CELLS: f64 = 3.0;
const LATTICE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KitParams {
    pub vehicle: DubinsParams,
    pub t_bar: f64,
    pub t_brd: f64,
    pub r_c: f64,
    /// Tube radius of higher-priority vehicles.
    pub eps_base: f64,
    /// Tube radius of the planning vehicle, added to every obstacle.
    pub eps_own: f64,
    pub stride: f64,
    /// Template spacing is the planning spacing divided by this.
    pub refine: usize,
    pub cfl: f64,
}

/// One translated shape of an obstacle snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Disc { c: [f64; 2], r: f64 },
    /// Template `k` centred at `c`, dilated by `dr`.
    Template { k: usize, c: [f64; 2], dr: f64 },
}

#[derive(Debug, Clone)]
pub struct ObstacleKit {
    pub params: KitParams,
    pub radii: RegionRadii,
    grid: Arc<Grid>,
    tgrid: Arc<Grid>,
    r0: f64,
    templates: Vec<ScalarField>,
    support: Vec<f64>,
    statics: Option<Arc<ScalarField>>,
}

fn check_lattice(planning: &Grid, tgrid: &Grid) -> Result<()> {
    let same = planning.counts()[2] == tgrid.counts()[2]
        && (planning.mins()[2] - tgrid.mins()[2]).abs() < 1e-12
        && (planning.maxs()[2] - tgrid.maxs()[2]).abs() < 1e-12;
    if !same {
        return Err(Error::GridMismatch("template heading lattice differs from the planning grid".into()));
    }
    Ok(())
}

impl ObstacleKit {
    /// Solves the templates. `statics` is the static-obstacle BRS on the
    /// planning grid, already dilated by the planning vehicle's tube.
    pub fn new(
        grid: Arc<Grid>,
        params: KitParams,
        radii: RegionRadii,
        statics: Option<ScalarField>,
    ) -> Result<ObstacleKit> {
        if grid.ndim() != 3 {
            return Err(Error::DimMismatch("planning grid must be (x, y, heading)".into()));
        }
        if !(params.stride > 0.0) || params.refine == 0 {
            return Err(Error::Schedule("stride must be positive and refine at least 1".into()));
        }
        let h = grid.spacing()[0].max(grid.spacing()[1]);
        let ht = [grid.spacing()[0] / params.refine as f64, grid.spacing()[1] / params.refine as f64];
        let k_max = (params.t_bar / params.stride - LATTICE_EPS).ceil().max(0.0) as usize;
        let horizon = k_max as f64 * params.stride;
        let speed = params.vehicle.v_max + params.vehicle.d_r;
        let r0 = params.eps_base + params.r_c + params.eps_own;
        let r_max = params.eps_base + speed * horizon + params.r_c + params.eps_own;
        let half = r_max + speed * horizon + (MARGIN_CELLS + 1.0) * h;
        let m = [(half / ht[0]).ceil() as usize, (half / ht[1]).ceil() as usize];
        let tgrid = Arc::new(Grid::new(
            &[-(m[0] as f64) * ht[0], -(m[1] as f64) * ht[1], grid.mins()[2]],
            &[m[0] as f64 * ht[0], m[1] as f64 * ht[1], grid.maxs()[2]],
            &[2 * m[0] + 1, 2 * m[1] + 1, grid.counts()[2]],
            &[false, false, true],
        )?);
        check_lattice(&grid, &tgrid)?;

        let disc = disc_field(&tgrid, [0.0, 0.0], r0)?;
        let mut templates = Vec::with_capacity(k_max + 1);
        if k_max == 0 {
            templates.push(disc);
        } else {
            let spec = DynSpec::dubins(params.vehicle, HamRole::OBSTACLE_BRS);
            let p = ReachProblem::backward(disc, spec, horizon)
                .with_mode(SolveMode::ExactTime)
                .with_cfl(params.cfl)
                .with_save(SaveSpec::Interval(params.stride));
            let out = solve_brs(&p)?;
            for k in 0..=k_max {
                let want = horizon - k as f64 * params.stride;
                let i = out.values.nearest(want);
                let got = out.values.times()[i];
                if (got - want).abs() > 1e-6 {
                    return Err(Error::Schedule(format!("template snapshot at {got}, wanted {want}")));
                }
                let (f, _) = reinit_sdf_dims(&out.values.fields()[i], DEFAULT_REINIT_ITERATIONS, &POS_DIMS)?;
                templates.push(f);
            }
        }
        let support = templates.iter().map(|t| outer_radius(t, &POS_DIMS)).collect::<Result<Vec<_>>>()?;
        Ok(ObstacleKit { params, radii, grid, tgrid, r0, templates, support, statics: statics.map(Arc::new) })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn template_grid(&self) -> &Arc<Grid> {
        &self.tgrid
    }

    pub fn template(&self, k: usize) -> &ScalarField {
        &self.templates[k]
    }

    pub fn template_count(&self) -> usize {
        self.templates.len()
    }

    pub fn statics(&self) -> Option<&Arc<ScalarField>> {
        self.statics.as_ref()
    }

    /// Projected FRS radius of a base tube after `h` seconds.
    pub fn frs_radius(&self, h: f64) -> f64 {
        let v = &self.params.vehicle;
        self.params.eps_base + (v.v_max + v.d_r) * h.max(0.0)
    }

    fn tau(&self, k: usize) -> f64 {
        k as f64 * self.params.stride
    }

    fn last_k(&self, horizon: f64) -> usize {
        let k = (horizon / self.params.stride + LATTICE_EPS).floor().max(0.0) as usize;
        k.min(self.templates.len() - 1)
    }

    fn template_piece(&self, k: usize, c: [f64; 2], radius: f64) -> Piece {
        Piece::Template { k, c, dr: (radius - self.r0).max(0.0) }
    }

    /// Earliest time in `[s - window, s]` at which the vehicle flies, as the
    /// elapsed horizon and the position then. Later sources give discs
    /// nested inside this one. `None` when it never flew in the window.
    fn source(track: &Trajectory, s: f64, window: f64) -> Option<(f64, [f64; 2])> {
        let (dep, arr) = (track.start_time(), track.end_time());
        let a = (s - window).max(dep);
        if a > s.min(arr) + LATTICE_EPS {
            return None;
        }
        let a = a.min(arr);
        Some((s - a, track.position_at(a)?))
    }

    /// Pieces of one induced-obstacle case (1 to 5) at time `t`.
    pub fn case_pieces(&self, track: &Trajectory, t: f64, case: u8, out: &mut Vec<Piece>) {
        let p = &self.params;
        let cap = p.r_c + p.eps_own;
        match case {
            1 => {
                if let Some(c) = track.position_at(t) {
                    out.push(Piece::Disc { c, r: p.eps_base + cap });
                }
            }
            2 => {
                if let Some((h, c)) = Self::source(track, t, p.t_bar) {
                    out.push(Piece::Disc { c, r: self.frs_radius(h) + cap });
                }
            }
            3 => {
                for k in 0..=self.last_k(p.t_bar) {
                    if let Some(c) = track.position_at(t + self.tau(k)) {
                        out.push(self.template_piece(k, c, p.eps_base + cap));
                    }
                }
            }
            4 => {
                for k in 0..=self.last_k(p.t_bar - p.t_brd) {
                    let s = t + self.tau(k);
                    if let Some((h, c)) = Self::source(track, s, p.t_bar) {
                        out.push(self.template_piece(k, c, self.frs_radius(h) + cap));
                    }
                }
            }
            5 => {
                let lo = (p.t_bar - 2.0 * p.t_brd).max(0.0);
                let k_lo = (lo / p.stride + LATTICE_EPS).floor() as usize;
                for k in k_lo..=self.last_k(p.t_bar + LATTICE_EPS).max(k_lo) {
                    let s = t + self.tau(k);
                    if let Some((h, c)) = Self::source(track, s, p.t_bar - p.t_brd) {
                        out.push(self.template_piece(k, c, self.frs_radius(h) + cap));
                    }
                }
            }
            _ => {}
        }
    }

    /// Both buffer directions around the tube at time `t`.
    pub fn buffer_pieces(&self, track: &Trajectory, t: f64, out: &mut Vec<Piece>) {
        if let Some(c) = track.position_at(t) {
            let eps = self.params.eps_base;
            let r = self.radii.buffer_ij(eps).max(self.radii.buffer_ji(eps));
            out.push(Piece::Disc { c, r: r + self.params.eps_own });
        }
    }

    /// Everything vehicle `i` must avoid because of one higher-priority
    /// vehicle at time `t`.
    pub fn pair_pieces(&self, track: &Trajectory, t: f64, out: &mut Vec<Piece>) {
        for case in 1..=5 {
            self.case_pieces(track, t, case, out);
        }
        self.buffer_pieces(track, t, out);
    }

    /// Minimum over `pieces`, plus the static BRS when `with_static`.
    pub fn evaluate(&self, pieces: &[Piece], with_static: bool) -> ScalarField {
        let g = &*self.grid;
        let (nx, ny, nt) = (g.counts()[0], g.counts()[1], g.counts()[2]);
        let mut out = match (&self.statics, with_static) {
            (Some(s), true) => (**s).values().to_vec(),
            _ => vec![f64::INFINITY; g.len()],
        };
        let mut any_disc = false;
        let (hx, hy) = (g.spacing()[0], g.spacing()[1]);
        let margin = MARGIN_CELLS * hx.max(hy);
        let tg = &*self.tgrid;
        let (tnx, tny) = (tg.counts()[0], tg.counts()[1]);
        let refine = self.params.refine;
        for piece in pieces {
            match *piece {
                Piece::Disc { .. } => any_disc = true,
                Piece::Template { k, c, dr } => {
                    let t = self.templates[k].values();
                    let reach = self.support[k] + dr + margin;
                    let (x0, x1) = range(c[0], reach, g.mins()[0], hx, nx);
                    let (y0, y1) = range(c[1], reach, g.mins()[1], hy, ny);
                    let ox = (g.mins()[0] - c[0] - tg.mins()[0]) / tg.spacing()[0];
                    let oy = (g.mins()[1] - c[1] - tg.mins()[1]) / tg.spacing()[1];
                    let (flx, fly) = (ox.floor(), oy.floor());
                    let (fx, fy) = (ox - flx, oy - fly);
                    let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
                    let (flx, fly) = (flx as isize, fly as isize);
                    for ix in x0..x1 {
                        let jx = (ix * refine) as isize + flx;
                        if jx < 0 || jx + 1 >= tnx as isize {
                            continue;
                        }
                        let jx = jx as usize;
                        for iy in y0..y1 {
                            let jy = (iy * refine) as isize + fly;
                            if jy < 0 || jy + 1 >= tny as isize {
                                continue;
                            }
                            let jy = jy as usize;
                            let b00 = (jx * tny + jy) * nt;
                            let b10 = ((jx + 1) * tny + jy) * nt;
                            let b01 = (jx * tny + jy + 1) * nt;
                            let b11 = ((jx + 1) * tny + jy + 1) * nt;
                            let o = (ix * ny + iy) * nt;
                            for th in 0..nt {
                                let v = w[0] * t[b00 + th] + w[1] * t[b10 + th] + w[2] * t[b01 + th]
                                    + w[3] * t[b11 + th]
                                    - dr;
                                if v < out[o + th] {
                                    out[o + th] = v;
                                }
                            }
                        }
                    }
                }
            }
        }
        if any_disc {
            min_discs(g, &mut out, pieces);
        }
        ScalarField::new(self.grid.clone(), out).expect("evaluated field matches the planning grid")
    }

    /// Total obstacle of a vehicle planning after `tracks` on `times`.
    pub fn schedule(&self, tracks: &[&Trajectory], times: &[f64]) -> Result<ObstacleSchedule> {
        let base = Arc::new(match &self.statics {
            Some(s) => (**s).clone(),
            None => ScalarField::empty_set(self.grid.clone()),
        });
        let mut fields = Vec::with_capacity(times.len());
        let mut pieces = Vec::new();
        for &t in times {
            pieces.clear();
            for tr in tracks {
                self.pair_pieces(tr, t, &mut pieces);
            }
            if pieces.is_empty() {
                fields.push(base.clone());
            } else {
                fields.push(Arc::new(self.evaluate(&pieces, true)));
            }
        }
        ObstacleSchedule::new(self.grid.clone(), times.to_vec(), fields)
    }
}

/// Index range `[lo, hi)` of nodes within `r` of `c` along one axis.
fn range(c: f64, r: f64, min: f64, h: f64, n: usize) -> (usize, usize) {
    let lo = ((c - r - min) / h).floor().max(0.0) as usize;
    let hi = (((c + r - min) / h).ceil() as isize).min(n as isize - 1);
    if hi < 0 || lo > hi as usize {
        (0, 0)
    } else {
        (lo, hi as usize + 1)
    }
}

/// Folds the disc pieces into `out`: one position plane, then broadcast
/// over heading.
fn min_discs(g: &Grid, out: &mut [f64], pieces: &[Piece]) {
    let (nx, ny, nt) = (g.counts()[0], g.counts()[1], g.counts()[2]);
    let (hx, hy) = (g.spacing()[0], g.spacing()[1]);
    let margin = MARGIN_CELLS * hx.max(hy);
    let mut plane = vec![f64::INFINITY; nx * ny];
    for piece in pieces {
        if let Piece::Disc { c, r } = *piece {
            let (x0, x1) = range(c[0], r + margin, g.mins()[0], hx, nx);
            let (y0, y1) = range(c[1], r + margin, g.mins()[1], hy, ny);
            for ix in x0..x1 {
                let dx = g.coord(0, ix) - c[0];
                for iy in y0..y1 {
                    let d = dx.hypot(g.coord(1, iy) - c[1]) - r;
                    let slot = &mut plane[ix * ny + iy];
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
        }
    }
    for (cell, &d) in plane.iter().enumerate() {
        if d.is_finite() {
            for v in &mut out[cell * nt..(cell + 1) * nt] {
                if d < *v {
                    *v = d;
                }
            }
        }
    }
}

/// Discs of radius `r` around every track's position, over `statics`:
/// the obstacles of the intruder-free planner.
pub fn disc_schedule(
    grid: &Arc<Grid>,
    statics: Option<&Arc<ScalarField>>,
    tracks: &[&Trajectory],
    times: &[f64],
    r: f64,
) -> Result<ObstacleSchedule> {
    let base = match statics {
        Some(s) => s.clone(),
        None => Arc::new(ScalarField::empty_set(grid.clone())),
    };
    let mut fields = Vec::with_capacity(times.len());
    let mut pieces = Vec::new();
    for &t in times {
        pieces.clear();
        for tr in tracks {
            if let Some(c) = tr.position_at(t) {
                pieces.push(Piece::Disc { c, r });
            }
        }
        if pieces.is_empty() {
            fields.push(base.clone());
        } else {
            let mut out = base.values().to_vec();
            min_discs(grid, &mut out, &pieces);
            fields.push(Arc::new(ScalarField::new(grid.clone(), out)?));
        }
    }
    ObstacleSchedule::new(grid.clone(), times.to_vec(), fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stp::regions::{base_obstacle_rtt, induced_obstacles, CaseInputs};
    use std::f64::consts::PI;

    const STRIDE: f64 = 0.5;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::new(&[0.0, 0.0, -PI], &[1000.0, 1000.0, PI], &[41, 41, 12], &[false, false, true]).unwrap())
    }

    fn params() -> KitParams {
        KitParams {
            vehicle: DubinsParams::new(5.0, 25.0, 1.0, 2.0),
            t_bar: 3.0,
            t_brd: 1.0,
            r_c: 50.0,
            eps_base: 30.0,
            eps_own: 0.0,
            stride: STRIDE,
            refine: 2,
            cfl: 0.5,
        }
    }

    fn track(t0: f64, t1: f64) -> Trajectory {
        let n = ((t1 - t0) / STRIDE).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * STRIDE).collect();
        let v = [20.0, 8.0];
        let states = times.iter().map(|t| [400.0 + v[0] * t, 450.0 + v[1] * t, v[1].atan2(v[0])]).collect();
        let controls = vec![[v[0].hypot(v[1]), 0.0]; times.len()];
        Trajectory { times, states, controls }
    }

    fn kit(p: KitParams) -> ObstacleKit {
        let radii = RegionRadii { avoid_full: 0.0, avoid_trd: 0.0, buffer: 0.0 };
        ObstacleKit::new(grid(), p, radii, None).unwrap()
    }

    /// Smallest dilation of each set that covers the other, read off the
    /// distance-like values at nodes where exactly one set holds.
    fn disagreement(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| if x <= 0.0 && y > 0.0 { y } else if y <= 0.0 && x > 0.0 { x } else { 0.0 })
            .fold(0.0, f64::max)
    }

    #[test]
    fn fast_cases_match_direct_constructions() {
        let p = params();
        let k = kit(p);
        let tr = track(-5.0, 10.0);
        let lattice: Vec<f64> = (0..=20).map(|i| -3.5 + i as f64 * STRIDE).collect();
        let g = grid();
        let base = base_obstacle_rtt(&tr, p.eps_base, &g, &lattice).unwrap();
        let inp = CaseInputs {
            base: &base,
            frs_spec: DynSpec::dubins(p.vehicle, HamRole::OBSTACLE_FRS),
            brs_spec: DynSpec::dubins(p.vehicle, HamRole::OBSTACLE_BRS),
            t_bar: p.t_bar,
            t_brd: p.t_brd,
            r_c: p.r_c,
            cfl: p.cfl,
        };
        let h = g.spacing()[0];
        for case in 1..=5u8 {
            let direct = induced_obstacles(&inp, case).unwrap();
            let mut worst = 0.0f64;
            for &t in &[0.0, 1.0, 2.5] {
                let mut pieces = Vec::new();
                k.case_pieces(&tr, t, case, &mut pieces);
                let fast = k.evaluate(&pieces, false);
                let d = direct.sample(t);
                worst = worst.max(disagreement(&fast, d));
                // The analytic FRS radius only ever grows the set.
                if case != 1 && case != 3 {
                    for (f, r) in fast.values().iter().zip(d.values()) {
                        if *r <= 0.0 {
                            assert!(*f <= 0.0);
                        }
                    }
                }
            }
            // Cases with an FRS summand inherit the numerical FRS lag of
            // about two cells; the others should agree to the cell.
            let tol = if case == 1 || case == 3 { h } else { 2.5 * h };
            assert!(worst <= tol, "case {case}: disagreement {worst:.1} exceeds {tol}");
        }
    }

    #[test]
    fn pieces_vanish_when_grounded() {
        let p = params();
        let k = kit(p);
        let tr = track(10.0, 20.0);
        let mut pieces = Vec::new();
        k.pair_pieces(&tr, 0.0, &mut pieces);
        assert!(pieces.is_empty());
        k.case_pieces(&tr, 8.0, 3, &mut pieces);
        assert!(!pieces.is_empty(), "case 3 sees a departure within t_bar");
        pieces.clear();
        k.case_pieces(&tr, 22.0, 2, &mut pieces);
        assert_eq!(pieces.len(), 1, "case 2 remembers a recent arrival");
        pieces.clear();
        k.case_pieces(&tr, 24.0, 2, &mut pieces);
        assert!(pieces.is_empty());
    }

    #[test]
    fn disc_schedule_is_exact_distance() {
        let g = grid();
        let tr = track(0.0, 5.0);
        let s = disc_schedule(&g, None, &[&tr], &[0.0, 1.0], 100.0).unwrap();
        let c = tr.position_at(1.0).unwrap();
        let f = s.sample(1.0);
        let x = [c[0] + 150.0, c[1], 0.3];
        assert!((f.interpolate(&x).unwrap() - 50.0).abs() < 1.0);
    }
}
