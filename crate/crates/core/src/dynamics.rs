//! Vehicle models, Hamiltonian roles and their analytic optimizers.
//!
//! Dubins vehicle: `x' = v cos(th) + d_x`, `y' = v sin(th) + d_y`,
//! `th' = w`, with `v in [v_min, v_max]`, `|w| <= w_max`, `|d| <= d_r`.
//!
//! Relative model (intruder `I` seen from vehicle `i`, in the vehicle's
//! heading frame):
//! `x' = v_I cos(th) - v_i + w_i y + d_x`, `y' = v_I sin(th) - w_i x + d_y`,
//! `th' = w_I - w_i`, where `d` is the rotated difference of the two
//! disturbances and so lies in a disc of radius `d_r,i + d_r,I`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::timefield::TimeField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DubinsParams {
    pub v_min: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub d_r: f64,
}

impl DubinsParams {
    pub const fn new(v_min: f64, v_max: f64, w_max: f64, d_r: f64) -> DubinsParams {
        DubinsParams { v_min, v_max, w_max, d_r }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.v_min >= 0.0
            && self.v_max >= self.v_min
            && self.w_max > 0.0
            && self.d_r >= 0.0
            && [self.v_min, self.v_max, self.w_max, self.d_r].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Schema { path: "dynamics".into(), msg: format!("invalid Dubins parameters {self:?}") })
        }
    }

    pub fn without_disturbance(&self) -> DubinsParams {
        DubinsParams { d_r: 0.0, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dir {
    Min,
    Max,
}

impl Dir {
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Dir::Min => a.min(b),
            Dir::Max => a.max(b),
        }
    }
    fn sign(self) -> f64 {
        match self {
            Dir::Min => -1.0,
            Dir::Max => 1.0,
        }
    }
}

/// Optimization pattern of one Hamiltonian. For the relative model the
/// disturbance direction is unused and `second_player_dir` governs the
/// intruder control and both disturbances together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HamRole {
    pub control_dir: Dir,
    pub disturbance_dir: Dir,
    pub second_player_dir: Option<Dir>,
}

impl HamRole {
    /// `min_u` reaching (used with a disturbance-free model).
    pub const BASIC: HamRole = HamRole::abs(Dir::Min, Dir::Min);
    /// Planning: `min_u max_d`.
    pub const PLANNING: HamRole = HamRole::abs(Dir::Min, Dir::Max);
    /// Static-obstacle and induced-obstacle BRSs: `min_u min_d`.
    pub const OBSTACLE_BRS: HamRole = HamRole::abs(Dir::Min, Dir::Min);
    /// Forward reachable set of another vehicle: `max_u max_d`.
    pub const OBSTACLE_FRS: HamRole = HamRole::abs(Dir::Max, Dir::Max);
    /// Replanning forward set: `max_u min_d`.
    pub const REPLAN_FRS: HamRole = HamRole::abs(Dir::Max, Dir::Min);
    /// Avoid region: vehicle maximizes, intruder and disturbances minimize.
    pub const AVOID: HamRole = HamRole::rel(Dir::Max, Dir::Min);
    /// Relative buffer: every input minimizes.
    pub const BUFFER: HamRole = HamRole::rel(Dir::Min, Dir::Min);

    pub const fn abs(control_dir: Dir, disturbance_dir: Dir) -> HamRole {
        HamRole { control_dir, disturbance_dir, second_player_dir: None }
    }
    pub const fn rel(control_dir: Dir, second: Dir) -> HamRole {
        HamRole { control_dir, disturbance_dir: second, second_player_dir: Some(second) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynKind {
    SingleIntegrator { ndim: usize, speed: f64, d_r: f64 },
    DubinsAbsolute { params: DubinsParams },
    DubinsRelative { vehicle: DubinsParams, intruder: DubinsParams },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynSpec {
    pub kind: DynKind,
    pub role: HamRole,
}

/// Inputs to `flow`. For the Dubins models `u = (v, w)`; for the relative
/// model `u` is the vehicle's input, `u_opp` the intruder's and `d` the
/// frame-rotated combined disturbance. For a single integrator `u` and `d`
/// are velocity vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Inputs {
    pub u: [f64; 3],
    pub u_opp: [f64; 2],
    pub d: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Nominal,
    Avoid,
    Replanned,
}

/// Control of the outer player, its disturbance and the mode tag.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSample {
    pub u: [f64; 2],
    pub d: [f64; 2],
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptInputs {
    pub inputs: Inputs,
    pub hamiltonian: f64,
}

fn bound_err(what: &str) -> Error {
    Error::InputOutOfBounds(what.to_string())
}

const TOL: f64 = 1e-9;

fn check_dubins(p: &DubinsParams, v: f64, w: f64, who: &str) -> Result<()> {
    if v < p.v_min - TOL || v > p.v_max + TOL || w.abs() > p.w_max + TOL {
        return Err(bound_err(&format!("{who} control ({v}, {w})")));
    }
    Ok(())
}

fn norm2(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Bang-bang choice of `v in [lo, hi]` optimizing `v * s`; ties pick `hi`.
fn opt_speed(dir: Dir, s: f64, lo: f64, hi: f64) -> f64 {
    if s == 0.0 {
        return hi;
    }
    match (dir, s > 0.0) {
        (Dir::Min, true) | (Dir::Max, false) => lo,
        _ => hi,
    }
}

/// `±w_max` optimizing `w * s`; ties pick 0.
fn opt_turn(dir: Dir, s: f64, w_max: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        dir.sign() * w_max * s.signum()
    }
}

/// Disc disturbance optimizing `d . lambda`; zero when `lambda = 0`.
fn opt_dist(dir: Dir, lx: f64, ly: f64, r: f64) -> [f64; 2] {
    let n = norm2(lx, ly);
    if n == 0.0 || r == 0.0 {
        [0.0, 0.0]
    } else {
        [dir.sign() * r * lx / n, dir.sign() * r * ly / n]
    }
}

/// Optimum of `a * v` over `v in [lo, hi]`.
fn lin_opt(dir: Dir, a: f64, lo: f64, hi: f64) -> f64 {
    dir.pick(a * lo, a * hi)
}

fn interval_abs_max(lo: f64, hi: f64) -> f64 {
    lo.abs().max(hi.abs())
}

impl DynSpec {
    pub fn new(kind: DynKind, role: HamRole) -> Result<DynSpec> {
        let spec = DynSpec { kind, role };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dubins(params: DubinsParams, role: HamRole) -> DynSpec {
        DynSpec { kind: DynKind::DubinsAbsolute { params }, role }
    }

    pub fn relative(vehicle: DubinsParams, intruder: DubinsParams, role: HamRole) -> DynSpec {
        DynSpec { kind: DynKind::DubinsRelative { vehicle, intruder }, role }
    }

    pub fn single_integrator(ndim: usize, speed: f64, d_r: f64, role: HamRole) -> DynSpec {
        DynSpec { kind: DynKind::SingleIntegrator { ndim, speed, d_r }, role }
    }

    pub fn with_role(&self, role: HamRole) -> DynSpec {
        DynSpec { kind: self.kind, role }
    }

    pub fn validate(&self) -> Result<()> {
        let rel = matches!(self.kind, DynKind::DubinsRelative { .. });
        if rel != self.role.second_player_dir.is_some() {
            return Err(Error::Schema {
                path: "dynspec.role".into(),
                msg: "second player direction must be set exactly for the relative model".into(),
            });
        }
        match self.kind {
            DynKind::SingleIntegrator { ndim, speed, d_r } => {
                if ndim == 0 || ndim > 3 || !(speed >= 0.0) || !(d_r >= 0.0) {
                    return Err(Error::Schema { path: "dynspec".into(), msg: "bad single integrator".into() });
                }
                Ok(())
            }
            DynKind::DubinsAbsolute { params } => params.validate(),
            DynKind::DubinsRelative { vehicle, intruder } => {
                vehicle.validate()?;
                intruder.validate()
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            DynKind::SingleIntegrator { ndim, .. } => ndim,
            _ => 3,
        }
    }

    /// Dimension holding the heading, if any.
    pub fn heading_dim(&self) -> Option<usize> {
        match self.kind {
            DynKind::SingleIntegrator { .. } => None,
            _ => Some(2),
        }
    }

    /// Exact right-hand side.
    pub fn flow(&self, x: &[f64], inp: &Inputs) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::DimMismatch(format!("state of length {} for model of dim {}", x.len(), self.state_dim())));
        }
        match self.kind {
            DynKind::SingleIntegrator { ndim, speed, d_r } => {
                let un: f64 = inp.u[..ndim].iter().map(|v| v * v).sum::<f64>().sqrt();
                let dn: f64 = inp.d[..ndim].iter().map(|v| v * v).sum::<f64>().sqrt();
                if un > speed + TOL || dn > d_r + TOL {
                    return Err(bound_err("single integrator input"));
                }
                Ok((0..ndim).map(|k| inp.u[k] + inp.d[k]).collect())
            }
            DynKind::DubinsAbsolute { params } => {
                let (v, w) = (inp.u[0], inp.u[1]);
                check_dubins(&params, v, w, "vehicle")?;
                if norm2(inp.d[0], inp.d[1]) > params.d_r + TOL {
                    return Err(bound_err("disturbance"));
                }
                Ok(vec![v * x[2].cos() + inp.d[0], v * x[2].sin() + inp.d[1], w])
            }
            DynKind::DubinsRelative { vehicle, intruder } => {
                let (vi, wi) = (inp.u[0], inp.u[1]);
                let (vo, wo) = (inp.u_opp[0], inp.u_opp[1]);
                check_dubins(&vehicle, vi, wi, "vehicle")?;
                check_dubins(&intruder, vo, wo, "intruder")?;
                if norm2(inp.d[0], inp.d[1]) > vehicle.d_r + intruder.d_r + TOL {
                    return Err(bound_err("disturbance"));
                }
                Ok(vec![
                    vo * x[2].cos() - vi + wi * x[1] + inp.d[0],
                    vo * x[2].sin() - wi * x[0] + inp.d[1],
                    wo - wi,
                ])
            }
        }
    }

    /// Analytic optimal inputs for the role and the resulting Hamiltonian
    /// `lambda . f(x, u*, d*)`.
    pub fn opt_inputs(&self, x: &[f64], p: &[f64]) -> OptInputs {
        let r = self.role;
        let mut inputs = Inputs::default();
        match self.kind {
            DynKind::SingleIntegrator { ndim, speed, d_r } => {
                let n = p[..ndim].iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    for k in 0..ndim {
                        inputs.u[k] = r.control_dir.sign() * speed * p[k] / n;
                        inputs.d[k] = r.disturbance_dir.sign() * d_r * p[k] / n;
                    }
                }
            }
            DynKind::DubinsAbsolute { params } => {
                let (c, s) = (x[2].cos(), x[2].sin());
                let sw = p[0] * c + p[1] * s;
                inputs.u[0] = opt_speed(r.control_dir, sw, params.v_min, params.v_max);
                inputs.u[1] = opt_turn(r.control_dir, p[2], params.w_max);
                let d = opt_dist(r.disturbance_dir, p[0], p[1], params.d_r);
                inputs.d[..2].copy_from_slice(&d);
            }
            DynKind::DubinsRelative { vehicle, intruder } => {
                let opp = r.second_player_dir.expect("validated relative role");
                let (c, s) = (x[2].cos(), x[2].sin());
                inputs.u[0] = opt_speed(r.control_dir, -p[0], vehicle.v_min, vehicle.v_max);
                inputs.u[1] = opt_turn(r.control_dir, p[0] * x[1] - p[1] * x[0] - p[2], vehicle.w_max);
                inputs.u_opp[0] = opt_speed(opp, p[0] * c + p[1] * s, intruder.v_min, intruder.v_max);
                inputs.u_opp[1] = opt_turn(opp, p[2], intruder.w_max);
                let d = opt_dist(opp, p[0], p[1], vehicle.d_r + intruder.d_r);
                inputs.d[..2].copy_from_slice(&d);
            }
        }
        let f = self.flow(x, &inputs).expect("optimal inputs are admissible");
        let hamiltonian = f.iter().zip(p).map(|(a, b)| a * b).sum();
        OptInputs { inputs, hamiltonian }
    }

    /// Closed-form Hamiltonian given `cos`/`sin` of the heading. Used in the
    /// solver's inner loop; equals `opt_inputs(..).hamiltonian`.
    #[inline]
    pub fn hamiltonian_cs(&self, x: &[f64], c: f64, s: f64, p: &[f64]) -> f64 {
        let r = self.role;
        match self.kind {
            DynKind::SingleIntegrator { ndim, speed, d_r } => {
                let n = p[..ndim].iter().map(|v| v * v).sum::<f64>().sqrt();
                r.control_dir.sign() * speed * n + r.disturbance_dir.sign() * d_r * n
            }
            DynKind::DubinsAbsolute { params } => {
                let sw = p[0] * c + p[1] * s;
                lin_opt(r.control_dir, sw, params.v_min, params.v_max)
                    + r.control_dir.sign() * params.w_max * p[2].abs()
                    + r.disturbance_dir.sign() * params.d_r * norm2(p[0], p[1])
            }
            DynKind::DubinsRelative { vehicle, intruder } => {
                let opp = r.second_player_dir.expect("validated relative role");
                let cw = p[0] * x[1] - p[1] * x[0] - p[2];
                lin_opt(r.control_dir, -p[0], vehicle.v_min, vehicle.v_max)
                    + r.control_dir.sign() * vehicle.w_max * cw.abs()
                    + lin_opt(opp, p[0] * c + p[1] * s, intruder.v_min, intruder.v_max)
                    + opp.sign() * intruder.w_max * p[2].abs()
                    + opp.sign() * (vehicle.d_r + intruder.d_r) * norm2(p[0], p[1])
            }
        }
    }

    /// Local bound on `|f_k|` over all admissible inputs at state `x`.
    #[inline]
    pub fn alpha_local_cs(&self, x: &[f64], c: f64, s: f64, out: &mut [f64]) {
        match self.kind {
            DynKind::SingleIntegrator { ndim, speed, d_r } => {
                for o in out.iter_mut().take(ndim) {
                    *o = speed + d_r;
                }
            }
            DynKind::DubinsAbsolute { params: q } => {
                let (lo, hi) = minmax(q.v_min * c, q.v_max * c);
                out[0] = interval_abs_max(lo, hi) + q.d_r;
                let (lo, hi) = minmax(q.v_min * s, q.v_max * s);
                out[1] = interval_abs_max(lo, hi) + q.d_r;
                out[2] = q.w_max;
            }
            DynKind::DubinsRelative { vehicle: a, intruder: b } => {
                let d = a.d_r + b.d_r;
                let (clo, chi) = minmax(b.v_min * c, b.v_max * c);
                let ry = a.w_max * x[1].abs();
                out[0] = interval_abs_max(clo - a.v_max - ry - d, chi - a.v_min + ry + d);
                let (slo, shi) = minmax(b.v_min * s, b.v_max * s);
                let rx = a.w_max * x[0].abs();
                out[1] = interval_abs_max(slo - rx - d, shi + rx + d);
                out[2] = a.w_max + b.w_max;
            }
        }
    }

    /// Global Lax-Friedrichs coefficients: `alpha_k >= sup |f_k|` over the
    /// grid box and all admissible inputs.
    pub fn dissipation_bounds(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.ndim() != self.state_dim() {
            return Err(Error::DimMismatch(format!("grid ndim {} vs model dim {}", grid.ndim(), self.state_dim())));
        }
        let ext = |k: usize| grid.mins()[k].abs().max(grid.maxs()[k].abs());
        let out = match self.kind {
            DynKind::SingleIntegrator { ndim, speed, d_r } => vec![speed + d_r; ndim],
            DynKind::DubinsAbsolute { params: q } => vec![q.v_max + q.d_r, q.v_max + q.d_r, q.w_max],
            DynKind::DubinsRelative { vehicle: a, intruder: b } => {
                let d = a.d_r + b.d_r;
                vec![b.v_max + a.v_max + a.w_max * ext(1) + d, b.v_max + a.w_max * ext(0) + d, a.w_max + b.w_max]
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::UnboundedSpeed);
        }
        Ok(out)
    }
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Result of synthesizing a feedback control from a value function.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub sample: ControlSample,
    /// Optimal intruder control for relative roles.
    pub opponent: [f64; 2],
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// `lambda = grad V(t, x)`, then the role's analytic optimizer. Time is
/// clamped to the time field's span and interpolated between snapshots.
pub fn controller_from_value(tf: &TimeField, spec: &DynSpec, t: f64, x: &[f64]) -> Result<Synthesized> {
    let g = tf.grid();
    if !g.contains(x) {
        return Err(Error::OutOfBounds { point: x.to_vec() });
    }
    let value = tf.value_at(t, x);
    let gradient = tf.gradient_at(t, x)?;
    let opt = spec.opt_inputs(x, &gradient);
    let sample = ControlSample {
        u: [opt.inputs.u[0], opt.inputs.u[1]],
        d: [opt.inputs.d[0], opt.inputs.d[1]],
        mode: Mode::Nominal,
    };
    Ok(Synthesized { sample, opponent: opt.inputs.u_opp, value, gradient })
}

/// Discretized brute-force Hamiltonian: `n` samples per input-box edge for
/// controls and `n_dir` directions times `n` radii for disc disturbances.
/// The Hamiltonians are additively separable across players, so each
/// player's block is optimized independently.
pub fn brute_force_hamiltonian(spec: &DynSpec, x: &[f64], p: &[f64], n: usize, n_dir: usize) -> f64 {
    let dot = |inp: &Inputs| -> f64 {
        let f = spec.flow(x, inp).expect("sampled inputs are admissible");
        f.iter().zip(p).map(|(a, b)| a * b).sum()
    };
    let lin = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let disc = |r: f64| -> Vec<[f64; 2]> {
        let mut v = vec![[0.0, 0.0]];
        for a in 0..n_dir {
            let th = 2.0 * std::f64::consts::PI * a as f64 / n_dir as f64;
            for k in 1..n {
                let rr = r * k as f64 / (n - 1) as f64;
                v.push([rr * th.cos(), rr * th.sin()]);
            }
        }
        v
    };
    let r = spec.role;
    let zero = Inputs::default();
    match spec.kind {
        DynKind::SingleIntegrator { ndim, speed, d_r } => {
            let balls = |rad: f64| -> Vec<[f64; 3]> {
                let mut v = Vec::new();
                let m = n;
                let idx: Vec<f64> = (0..m).map(|i| -rad + 2.0 * rad * i as f64 / (m - 1) as f64).collect();
                match ndim {
                    1 => idx.iter().for_each(|&a| v.push([a, 0.0, 0.0])),
                    2 => {
                        for a in disc(rad) {
                            v.push([a[0], a[1], 0.0]);
                        }
                    }
                    _ => {
                        for &a in &idx {
                            for &b in &idx {
                                for &c in &idx {
                                    if a * a + b * b + c * c <= rad * rad + 1e-12 {
                                        v.push([a, b, c]);
                                    }
                                }
                            }
                        }
                        let nrm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                        if nrm > 0.0 {
                            v.push([rad * p[0] / nrm, rad * p[1] / nrm, rad * p[2] / nrm]);
                            v.push([-rad * p[0] / nrm, -rad * p[1] / nrm, -rad * p[2] / nrm]);
                        }
                    }
                }
                v
            };
            let mut hu = if r.control_dir == Dir::Min { f64::INFINITY } else { f64::NEG_INFINITY };
            for u in balls(speed) {
                hu = r.control_dir.pick(hu, dot(&Inputs { u, ..zero }));
            }
            let mut hd = if r.disturbance_dir == Dir::Min { f64::INFINITY } else { f64::NEG_INFINITY };
            for d in balls(d_r) {
                let mut inp = Inputs { d, ..zero };
                inp.u = [0.0; 3];
                hd = r.disturbance_dir.pick(hd, dot(&inp));
            }
            hu + hd
        }
        DynKind::DubinsAbsolute { params: q } => {
            let base = Inputs { u: [q.v_min, 0.0, 0.0], ..zero };
            let h0 = dot(&base);
            let mut hu = if r.control_dir == Dir::Min { f64::INFINITY } else { f64::NEG_INFINITY };
            for i in 0..n {
                for j in 0..n {
                    let inp = Inputs { u: [lin(i, q.v_min, q.v_max), lin(j, -q.w_max, q.w_max), 0.0], ..zero };
                    hu = r.control_dir.pick(hu, dot(&inp));
                }
            }
            let mut hd = if r.disturbance_dir == Dir::Min { f64::INFINITY } else { f64::NEG_INFINITY };
            for d in disc(q.d_r) {
                let inp = Inputs { d: [d[0], d[1], 0.0], ..base };
                hd = r.disturbance_dir.pick(hd, dot(&inp) - h0);
            }
            hu + hd
        }
        DynKind::DubinsRelative { vehicle: a, intruder: b } => {
            let opp = r.second_player_dir.expect("relative role");
            let base = Inputs { u: [a.v_min, 0.0, 0.0], u_opp: [b.v_min, 0.0], ..zero };
            let h0 = dot(&base);
            let init = |dir: Dir| if dir == Dir::Min { f64::INFINITY } else { f64::NEG_INFINITY };
            let (mut hu, mut ho, mut hd) = (init(r.control_dir), init(opp), init(opp));
            for i in 0..n {
                for j in 0..n {
                    let iu = Inputs { u: [lin(i, a.v_min, a.v_max), lin(j, -a.w_max, a.w_max), 0.0], ..base };
                    hu = r.control_dir.pick(hu, dot(&iu) - h0);
                    let io = Inputs { u_opp: [lin(i, b.v_min, b.v_max), lin(j, -b.w_max, b.w_max)], ..base };
                    ho = opp.pick(ho, dot(&io) - h0);
                }
            }
            for d in disc(a.d_r + b.d_r) {
                let inp = Inputs { d: [d[0], d[1], 0.0], ..base };
                hd = opp.pick(hd, dot(&inp) - h0);
            }
            h0 + hu + ho + hd
        }
    }
}

/// Every role of the catalogue together with a model it applies to.
pub fn role_catalogue(vehicle: DubinsParams, intruder: DubinsParams) -> Vec<(&'static str, DynSpec)> {
    vec![
        ("basic", DynSpec::dubins(vehicle.without_disturbance(), HamRole::BASIC)),
        ("planning", DynSpec::dubins(vehicle, HamRole::PLANNING)),
        ("avoid", DynSpec::relative(vehicle, intruder, HamRole::AVOID)),
        ("buffer", DynSpec::relative(vehicle, intruder, HamRole::BUFFER)),
        ("obstacle_brs", DynSpec::dubins(vehicle, HamRole::OBSTACLE_BRS)),
        ("obstacle_frs", DynSpec::dubins(vehicle, HamRole::OBSTACLE_FRS)),
        ("replan_frs", DynSpec::dubins(vehicle, HamRole::REPLAN_FRS)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const VEH: DubinsParams = DubinsParams::new(0.0, 25.0, 2.0, 6.0);

    #[test]
    fn flow_examples() {
        let a = DynSpec::dubins(VEH, HamRole::PLANNING);
        let f = a.flow(&[0.0, 0.0, 0.0], &Inputs { u: [25.0, 0.0, 0.0], ..Default::default() }).unwrap();
        assert_eq!(f, vec![25.0, 0.0, 0.0]);
        let d = Inputs { u: [10.0, 1.0, 0.0], d: [3.6, -4.8, 0.0], ..Default::default() };
        let g = a.flow(&[5.0, 1.0, 0.7], &d).unwrap();
        let h = a.flow(&[5.0, 1.0, 0.7], &Inputs { d: [0.0; 3], ..d }).unwrap();
        assert!((g[0] - h[0] - 3.6).abs() < 1e-12 && (g[1] - h[1] + 4.8).abs() < 1e-12);
        let bad = Inputs { u: [30.0, 0.0, 0.0], ..Default::default() };
        assert!(a.flow(&[0.0, 0.0, 0.0], &bad).is_err());

        let r = DynSpec::relative(VEH, VEH, HamRole::AVOID);
        let inp = Inputs { u: [25.0, 2.0, 0.0], u_opp: [25.0, 0.0], ..Default::default() };
        let fr = r.flow(&[0.0, 100.0, 0.0], &inp).unwrap();
        assert_eq!(fr, vec![200.0, 0.0, -2.0]);
    }

    #[test]
    fn optimizer_examples() {
        let spec = DynSpec::dubins(VEH, HamRole::OBSTACLE_BRS);
        let o = spec.opt_inputs(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(o.inputs.u[0], 0.0);
        assert_eq!(o.inputs.u[1], 0.0);
        assert_eq!(o.inputs.d[0], -6.0);
        assert!((o.hamiltonian + 6.0).abs() < 1e-12);
        let z = spec.opt_inputs(&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]);
        assert_eq!(z.inputs.u[0], 25.0);
        assert_eq!(z.inputs.d, [0.0; 3]);
    }

    #[test]
    fn closed_form_matches_optimizer_and_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (name, spec) in role_catalogue(VEH, VEH) {
            for _ in 0..100 {
                let x = [rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0), rng.gen_range(-PI..PI)];
                let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let o = spec.opt_inputs(&x, &p);
                let cf = spec.hamiltonian_cs(&x, x[2].cos(), x[2].sin(), &p);
                assert!((o.hamiltonian - cf).abs() < 1e-9, "{name}");
                let bf = brute_force_hamiltonian(&spec, &x, &p, 72, 720);
                assert!((o.hamiltonian - bf).abs() < 1e-2, "{name}: {} vs {bf}", o.hamiltonian);
            }
        }
    }

    #[test]
    fn single_integrator_hamiltonian() {
        let s = DynSpec::single_integrator(2, 25.0, 0.0, HamRole::BASIC);
        let o = s.opt_inputs(&[1.0, 2.0], &[3.0, 4.0]);
        assert!((o.hamiltonian + 125.0).abs() < 1e-12);
        assert!((o.inputs.u[0] + 15.0).abs() < 1e-12);
        let bf = brute_force_hamiltonian(&s, &[1.0, 2.0], &[3.0, 4.0], 72, 720);
        assert!((bf - o.hamiltonian).abs() < 1e-2 * 5.0);
    }

    #[test]
    fn bang_bang_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (_, spec) in role_catalogue(VEH, VEH) {
            for _ in 0..200 {
                let x = [rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0), rng.gen_range(-PI..PI)];
                let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let o = spec.opt_inputs(&x, &p).inputs;
                assert!(o.u[0] == 0.0 || o.u[0] == 25.0);
                assert!([-2.0, 0.0, 2.0].contains(&o.u[1]));
                let dn = norm2(o.d[0], o.d[1]);
                assert!(dn == 0.0 || (dn - 6.0).abs() < 1e-9 || (dn - 12.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn local_alpha_bounds_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let specs = [DynSpec::dubins(VEH, HamRole::PLANNING), DynSpec::relative(VEH, VEH, HamRole::AVOID)];
        for spec in specs {
            for _ in 0..500 {
                let x = [rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0), rng.gen_range(-PI..PI)];
                let mut a = [0.0; 3];
                spec.alpha_local_cs(&x, x[2].cos(), x[2].sin(), &mut a);
                let th: f64 = rng.gen_range(-PI..PI);
                let dr = rng.gen_range(0.0..1.0) * 12.0;
                let dd = if matches!(spec.kind, DynKind::DubinsAbsolute { .. }) { dr / 2.0 } else { dr };
                let inp = Inputs {
                    u: [rng.gen_range(0.0..25.0), rng.gen_range(-2.0..2.0), 0.0],
                    u_opp: [rng.gen_range(0.0..25.0), rng.gen_range(-2.0..2.0)],
                    d: [dd * th.cos(), dd * th.sin(), 0.0],
                };
                let f = spec.flow(&x, &inp).unwrap();
                for k in 0..3 {
                    assert!(f[k].abs() <= a[k] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn dissipation_examples() {
        let g = crate::grid::make_grid(&[-400.0, -300.0, -PI], &[400.0, 300.0, PI], &[5, 5, 5], &[false, false, true])
            .unwrap();
        let a = DynSpec::dubins(VEH, HamRole::PLANNING).dissipation_bounds(&g).unwrap();
        assert_eq!(a, vec![31.0, 31.0, 2.0]);
        let r = DynSpec::relative(VEH, VEH, HamRole::AVOID).dissipation_bounds(&g).unwrap();
        assert!(r[0] >= 25.0 + 25.0 + 2.0 * 300.0 + 12.0);
        let z = DynSpec::single_integrator(2, f64::INFINITY, 0.0, HamRole::BASIC);
        let g2 = crate::grid::make_grid(&[0.0, 0.0], &[1.0, 1.0], &[3, 3], &[false, false]).unwrap();
        assert!(matches!(z.dissipation_bounds(&g2), Err(Error::UnboundedSpeed)));
    }

    #[test]
    fn relative_flow_consistent_with_absolute_pair() {
        let abs = DynSpec::dubins(VEH, HamRole::PLANNING);
        let rel = DynSpec::relative(VEH, VEH, HamRole::AVOID);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dt = 1e-3;
        for _ in 0..50 {
            let xi = [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), rng.gen_range(-PI..PI)];
            let xo = [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), rng.gen_range(-PI..PI)];
            let ui = Inputs { u: [20.0, 1.5, 0.0], d: [3.0, -2.0, 0.0], ..Default::default() };
            let uo = Inputs { u: [15.0, -0.7, 0.0], d: [-1.0, 4.0, 0.0], ..Default::default() };
            let to_rel = |a: &[f64], b: &[f64]| {
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let (c, s) = (a[2].cos(), a[2].sin());
                [c * dx + s * dy, -s * dx + c * dy, b[2] - a[2]]
            };
            let step = |x: &[f64; 3], u: &Inputs, h: f64| {
                let f = abs.flow(x, u).unwrap();
                [x[0] + h * f[0], x[1] + h * f[1], x[2] + h * f[2]]
            };
            let r0 = to_rel(&xi, &xo);
            let r1 = to_rel(&step(&xi, &ui, dt), &step(&xo, &uo, dt));
            let rm = to_rel(&step(&xi, &ui, -dt), &step(&xo, &uo, -dt));
            let (c, s) = (xi[2].cos(), xi[2].sin());
            let (ddx, ddy) = (uo.d[0] - ui.d[0], uo.d[1] - ui.d[1]);
            let inp = Inputs { u: [20.0, 1.5, 0.0], u_opp: [15.0, -0.7], d: [c * ddx + s * ddy, -s * ddx + c * ddy, 0.0] };
            let fr = rel.flow(&r0, &inp).unwrap();
            for k in 0..3 {
                let fd = (r1[k] - rm[k]) / (2.0 * dt);
                assert!((fd - fr[k]).abs() < 1e-3, "{k}: {fd} vs {}", fr[k]);
            }
        }
    }
}
