//! Level-set solver for reachability: first-order upwind differences, local
//! Lax-Friedrichs numerical Hamiltonian and TVD-RK2 time stepping.
//!
//! Backward solves evolve `V(t, .)` from `t_f` toward `t_f - horizon` and
//! compute backward reachable sets; forward solves evolve `V(t, .)` from
//! `t_0` toward `t_0 + horizon` and compute forward reachable sets. Both
//! are written in solver time `tau >= 0` as `V_tau = L(V)`.

use std::sync::Arc;

use crate::dynamics::DynSpec;
use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField};
use crate::grid::{Grid, MAX_DIMS};
use crate::schedule::ObstacleSchedule;
use crate::timefield::{Direction, TimeField};

pub const DEFAULT_CFL: f64 = 0.5;
/// Target values are clamped to this magnitude before solving.
pub const VALUE_CAP: f64 = 1e7;
const MAX_AUTO_SNAPSHOTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Reach the target at some time in the window (`V <- min(V, l)`).
    ReachExists,
    /// Be in the target exactly at the end of the window.
    ExactTime,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SaveSpec {
    /// Every step when there are at most 200 steps, otherwise 200 evenly
    /// spaced snapshots. Endpoints are always kept.
    Auto,
    /// Snapshots every `interval` seconds of solver time plus the end.
    Interval(f64),
    /// Only the initial and final fields.
    Endpoints,
}

#[derive(Debug, Clone)]
pub struct ReachProblem {
    pub target: ScalarField,
    /// Time-varying target `l(t)`; overrides `target` when present.
    pub target_schedule: Option<ObstacleSchedule>,
    pub obstacles: Option<ObstacleSchedule>,
    pub dynspec: DynSpec,
    pub horizon: f64,
    pub direction: Direction,
    pub mode: SolveMode,
    pub cfl: f64,
    pub save: SaveSpec,
    /// `t_f` for backward solves, `t_0` for forward solves.
    pub t_anchor: f64,
    /// Stop as soon as `V(t, probe) <= 0`.
    pub stop_at_probe: Option<Vec<f64>>,
    /// Use the global dissipation coefficients at every node.
    pub global_lf: bool,
}

impl ReachProblem {
    pub fn backward(target: ScalarField, dynspec: DynSpec, horizon: f64) -> ReachProblem {
        ReachProblem {
            target,
            target_schedule: None,
            obstacles: None,
            dynspec,
            horizon,
            direction: Direction::Backward,
            mode: SolveMode::ReachExists,
            cfl: DEFAULT_CFL,
            save: SaveSpec::Auto,
            t_anchor: horizon,
            stop_at_probe: None,
            global_lf: false,
        }
    }

    pub fn forward(initial: ScalarField, dynspec: DynSpec, horizon: f64) -> ReachProblem {
        ReachProblem { direction: Direction::Forward, t_anchor: 0.0, ..ReachProblem::backward(initial, dynspec, horizon) }
    }

    pub fn with_obstacles(mut self, g: ObstacleSchedule) -> Self {
        self.obstacles = Some(g);
        self
    }
    /// Replaces the target by a schedule sampled with the hold rule.
    pub fn with_target_schedule(mut self, l: ObstacleSchedule) -> Self {
        self.target_schedule = Some(l);
        self
    }
    pub fn with_mode(mut self, mode: SolveMode) -> Self {
        self.mode = mode;
        self
    }
    pub fn with_save(mut self, save: SaveSpec) -> Self {
        self.save = save;
        self
    }
    pub fn with_anchor(mut self, t: f64) -> Self {
        self.t_anchor = t;
        self
    }
    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }
    pub fn with_probe(mut self, x: Vec<f64>) -> Self {
        self.stop_at_probe = Some(x);
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.target.grid()
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Schedule(format!("horizon {} must be finite and >= 0", self.horizon)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Schedule(format!("cfl factor {} outside (0, 1]", self.cfl)));
        }
        if let Some(g) = &self.obstacles {
            same_grid(self.grid(), g.grid())?;
        }
        if let Some(g) = &self.target_schedule {
            same_grid(self.grid(), g.grid())?;
        }
        if self.grid().ndim() != self.dynspec.state_dim() {
            return Err(Error::DimMismatch("grid and dynamics dimension differ".into()));
        }
        if let SaveSpec::Interval(dt) = self.save {
            if !(dt > 0.0) {
                return Err(Error::Schedule("save interval must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub values: TimeField,
    /// Largest stable step used.
    pub dt_max: f64,
    pub steps: usize,
    /// Dissipation coefficients per dimension (global bound).
    pub alpha: Vec<f64>,
    /// Time at which the probe entered the set, if requested and reached.
    pub probe_time: Option<f64>,
}

/// Mutable scheme state of one solve.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub field: ScalarField,
    pub time: f64,
    pub dt_history: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// One-sided differences `(D-, D+)` along `dim`. Periodic dimensions wrap;
/// bounded edges use linear extrapolation, so both sides agree there.
pub fn upwind_derivs(field: &ScalarField, dim: usize) -> Result<(ScalarField, ScalarField)> {
    let g = field.grid().clone();
    if dim >= g.ndim() {
        return Err(Error::BadDims(format!("dimension {dim} >= {}", g.ndim())));
    }
    let v = field.values();
    let n = g.len();
    let mut dm = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut idx = [0usize; MAX_DIMS];
    for flat in 0..n {
        g.multi_index(flat, &mut idx);
        let (a, b) = one_sided(&g, v, flat, idx[dim], dim);
        dm[flat] = a;
        dp[flat] = b;
    }
    Ok((ScalarField::from_parts(g.clone(), dm), ScalarField::from_parts(g, dp)))
}

#[inline]
fn one_sided(g: &Grid, v: &[f64], flat: usize, i: usize, k: usize) -> (f64, f64) {
    let n = g.counts()[k];
    let s = g.strides()[k];
    let h = g.spacing()[k];
    let c = v[flat];
    if g.periodic()[k] {
        let lo = if i == 0 { flat + (n - 1) * s } else { flat - s };
        let hi = if i == n - 1 { flat - (n - 1) * s } else { flat + s };
        ((c - v[lo]) / h, (v[hi] - c) / h)
    } else if i == 0 {
        let d = (v[flat + s] - c) / h;
        (d, d)
    } else if i == n - 1 {
        let d = (c - v[flat - s]) / h;
        (d, d)
    } else {
        ((c - v[flat - s]) / h, (v[flat + s] - c) / h)
    }
}

/// Per-node geometry cached for the inner loop.
struct Kernel<'a> {
    grid: &'a Grid,
    spec: &'a DynSpec,
    sign: f64,
    coords: Vec<Vec<f64>>,
    trig: Option<(usize, Vec<f64>, Vec<f64>)>,
    global_alpha: Option<Vec<f64>>,
}

impl<'a> Kernel<'a> {
    fn new(grid: &'a Grid, spec: &'a DynSpec, direction: Direction, global_alpha: Option<Vec<f64>>) -> Kernel<'a> {
        let coords = (0..grid.ndim()).map(|k| (0..grid.counts()[k]).map(|i| grid.coord(k, i)).collect()).collect();
        let trig = spec.heading_dim().map(|h| {
            let c = (0..grid.counts()[h]).map(|i| grid.coord(h, i).cos()).collect();
            let s = (0..grid.counts()[h]).map(|i| grid.coord(h, i).sin()).collect();
            (h, c, s)
        });
        let sign = match direction {
            Direction::Backward => 1.0,
            Direction::Forward => -1.0,
        };
        Kernel { grid, spec, sign, coords, trig, global_alpha }
    }

    /// `L(V)` at every node; returns the largest `|L|`.
    fn rhs(&self, v: &[f64], out: &mut [f64]) -> f64 {
        let g = self.grid;
        let d = g.ndim();
        let mut idx = [0usize; MAX_DIMS];
        let mut x = [0.0; MAX_DIMS];
        let mut p = [0.0; MAX_DIMS];
        let mut alpha = [0.0; MAX_DIMS];
        let mut worst: f64 = 0.0;
        for k in 0..d {
            x[k] = self.coords[k][0];
        }
        for flat in 0..v.len() {
            let (c, s) = match &self.trig {
                Some((h, cs, sn)) => (cs[idx[*h]], sn[idx[*h]]),
                None => (1.0, 0.0),
            };
            let mut diss = 0.0;
            match &self.global_alpha {
                Some(a) => alpha[..d].copy_from_slice(a),
                None => self.spec.alpha_local_cs(&x[..d], c, s, &mut alpha[..d]),
            }
            for k in 0..d {
                let (dm, dp) = one_sided(g, v, flat, idx[k], k);
                p[k] = 0.5 * (dm + dp);
                diss += alpha[k] * 0.5 * (dp - dm);
            }
            let h = self.spec.hamiltonian_cs(&x[..d], c, s, &p[..d]);
            let l = self.sign * h + diss;
            out[flat] = l;
            worst = worst.max(l.abs());
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < g.counts()[k] {
                    x[k] = self.coords[k][idx[k]];
                    break;
                }
                idx[k] = 0;
                x[k] = self.coords[k][0];
            }
        }
        worst
    }
}

/// Largest stable step `cfl / sum_k(alpha_k / dx_k)`, or `None` for zero
/// dynamics.
pub fn stable_dt(alpha: &[f64], grid: &Grid, cfl: f64) -> Option<f64> {
    let rate: f64 = alpha.iter().zip(grid.spacing()).map(|(a, h)| a / h).sum();
    (rate > 0.0).then(|| cfl / rate)
}

/// One explicit Euler substep `V + dt * L(V)` of the level-set equation.
pub fn lf_step(state: &SchemeState, spec: &DynSpec, direction: Direction, dt: f64) -> Result<ScalarField> {
    let g = state.field.grid();
    let bound = stable_dt(&state.alpha, g, 1.0).unwrap_or(f64::INFINITY);
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound });
    }
    let kernel = Kernel::new(g, spec, direction, None);
    let v = state.field.values();
    let mut l = vec![0.0; v.len()];
    kernel.rhs(v, &mut l);
    let out: Vec<f64> = v.iter().zip(&l).map(|(a, b)| a + dt * b).collect();
    if let Some(node) = out.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { node });
    }
    Ok(ScalarField::from_parts(g.clone(), out))
}

fn stop_offsets(horizon: f64, dt_max: Option<f64>, save: &SaveSpec) -> Vec<f64> {
    if horizon == 0.0 {
        return vec![0.0];
    }
    let steps = dt_max.map_or(1, |dt| (horizon / dt).ceil().max(1.0) as usize);
    let mut offs: Vec<f64> = match save {
        SaveSpec::Endpoints => vec![0.0, horizon],
        SaveSpec::Auto => {
            let m = steps.min(MAX_AUTO_SNAPSHOTS);
            (0..=m).map(|i| horizon * i as f64 / m as f64).collect()
        }
        SaveSpec::Interval(iv) => {
            let mut v = vec![0.0];
            let mut k = 1;
            while (k as f64) * iv < horizon - 1e-9 {
                v.push(k as f64 * iv);
                k += 1;
            }
            v.push(horizon);
            v
        }
    };
    offs.dedup();
    offs
}

/// Runs a backward or forward solve.
pub fn solve(problem: &ReachProblem) -> Result<SolveOutput> {
    problem.validate()?;
    let grid = problem.grid().clone();
    let spec = &problem.dynspec;
    let alpha = spec.dissipation_bounds(&grid)?;
    let dt_max = stable_dt(&alpha, &grid, problem.cfl);
    let sgn = match problem.direction {
        Direction::Backward => -1.0,
        Direction::Forward => 1.0,
    };
    let time_of = |tau: f64| problem.t_anchor + sgn * tau;

    let capped = |f: &ScalarField| -> Vec<f64> { f.values().iter().map(|v| v.clamp(-VALUE_CAP, VALUE_CAP)).collect() };
    let moving = problem.target_schedule.as_ref();
    let mut l_index = moving.map(|s| s.index_at(time_of(0.0)));
    let mut l: Vec<f64> = match moving {
        Some(s) => capped(s.sample(time_of(0.0))),
        None => capped(&problem.target),
    };
    let clip = |v: &mut [f64], t: f64| {
        if let Some(obs) = &problem.obstacles {
            let g = obs.sample(t).values();
            for (a, &b) in v.iter_mut().zip(g) {
                let nb = -b;
                if nb > *a {
                    *a = nb;
                }
            }
        }
    };
    let mut v = l.clone();
    clip(&mut v, time_of(0.0));

    let probe = problem.stop_at_probe.as_ref();
    let probe_hit = |v: &[f64]| -> bool {
        match probe {
            Some(x) => {
                // Cheap local interpolation without copying the field.
                let f = LocalView { grid: &grid, values: v };
                f.value(x) <= 0.0
            }
            None => false,
        }
    };

    let offsets = stop_offsets(problem.horizon, dt_max, &problem.save);
    let mut times = vec![time_of(0.0)];
    let mut fields = vec![ScalarField::from_parts(grid.clone(), v.clone())];
    let mut probe_time = None;
    let mut steps = 0;

    if probe_hit(&v) {
        probe_time = Some(time_of(0.0));
    }

    if probe_time.is_none() {
        if let Some(dt_max) = dt_max {
            let kernel = Kernel::new(&grid, spec, problem.direction, problem.global_lf.then(|| alpha.clone()));
            let n = v.len();
            let mut l1 = vec![0.0; n];
            let mut v1 = vec![0.0; n];
            let mut tau = 0.0;
            'outer: for w in offsets.windows(2) {
                let span = w[1] - w[0];
                let sub = (span / dt_max).ceil().max(1.0) as usize;
                let dt = span / sub as f64;
                for _ in 0..sub {
                    kernel.rhs(&v, &mut l1);
                    for i in 0..n {
                        v1[i] = v[i] + dt * l1[i];
                    }
                    kernel.rhs(&v1, &mut l1);
                    for i in 0..n {
                        v[i] = 0.5 * (v[i] + v1[i] + dt * l1[i]);
                    }
                    tau += dt;
                    steps += 1;
                    if let Some(s) = moving {
                        let k = s.index_at(time_of(tau));
                        if Some(k) != l_index {
                            l = capped(&s.fields()[k]);
                            l_index = Some(k);
                        }
                    }
                    if problem.mode == SolveMode::ReachExists {
                        for (a, &b) in v.iter_mut().zip(&l) {
                            if b < *a {
                                *a = b;
                            }
                        }
                    }
                    clip(&mut v, time_of(tau));
                    if let Some(node) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::NonFinite { node });
                    }
                    if probe_hit(&v) {
                        probe_time = Some(time_of(tau));
                        times.push(time_of(tau));
                        fields.push(ScalarField::from_parts(grid.clone(), v.clone()));
                        break 'outer;
                    }
                }
                tau = w[1];
                times.push(time_of(tau));
                fields.push(ScalarField::from_parts(grid.clone(), v.clone()));
            }
        } else {
            for &o in &offsets[1..] {
                times.push(time_of(o));
                fields.push(ScalarField::from_parts(grid.clone(), v.clone()));
            }
        }
    }
    dedup_tail(&mut times, &mut fields);
    let values = TimeField::new(grid, times, fields)?;
    Ok(SolveOutput { values, dt_max: dt_max.unwrap_or(f64::INFINITY), steps, alpha, probe_time })
}

fn dedup_tail(times: &mut Vec<f64>, fields: &mut Vec<ScalarField>) {
    let mut i = 1;
    while i < times.len() {
        if (times[i] - times[i - 1]).abs() < 1e-12 {
            times.remove(i);
            fields.remove(i - 1);
        } else {
            i += 1;
        }
    }
}

struct LocalView<'a> {
    grid: &'a Grid,
    values: &'a [f64],
}

impl LocalView<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let g = self.grid;
        let d = g.ndim();
        let mut lo = [0usize; MAX_DIMS];
        let mut hi = [0usize; MAX_DIMS];
        let mut fr = [0.0; MAX_DIMS];
        for k in 0..d {
            let n = g.counts()[k];
            let h = g.spacing()[k];
            if g.periodic()[k] {
                let s = (g.wrap(k, x[k]) - g.mins()[k]) / h;
                let i = (s.floor() as usize).min(n - 1);
                lo[k] = i;
                hi[k] = (i + 1) % n;
                fr[k] = (s - i as f64).clamp(0.0, 1.0);
            } else {
                let s = ((x[k] - g.mins()[k]) / h).clamp(0.0, (n - 1) as f64);
                let i = (s.floor() as usize).min(n - 2);
                lo[k] = i;
                hi[k] = i + 1;
                fr[k] = s - i as f64;
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    w *= fr[k];
                    flat += hi[k] * g.strides()[k];
                } else {
                    w *= 1.0 - fr[k];
                    flat += lo[k] * g.strides()[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }
}

/// Backward reachable set `V(t, .)` for `t` from `t_f` down to
/// `t_f - horizon`.
pub fn solve_brs(problem: &ReachProblem) -> Result<SolveOutput> {
    if problem.direction != Direction::Backward {
        return Err(Error::Schedule("solve_brs needs a backward problem".into()));
    }
    solve(problem)
}

/// Forward reachable set `V(t, .)` for `t` from `t_0` up to `t_0 + horizon`.
/// No min-with-target step is applied.
pub fn solve_frs(problem: &ReachProblem) -> Result<SolveOutput> {
    if problem.direction != Direction::Forward {
        return Err(Error::Schedule("solve_frs needs a forward problem".into()));
    }
    let p = ReachProblem { mode: SolveMode::ExactTime, ..problem.clone() };
    solve(&p)
}
