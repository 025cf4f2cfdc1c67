//! Scenario documents: the JSON schema, defaults and validation.
//!
//! `ScenarioFile` mirrors the on-disk keys exactly and rejects unknown ones.
//! `Scenario` is the validated form with every default filled in; it
//! serializes back to a complete `ScenarioFile`.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::DubinsParams;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::sdf::{sdf_ball, sdf_rect};
use std::sync::Arc;

pub const DEFAULT_CFL: f64 = 0.5;
pub const DEFAULT_CONTROL_DT: f64 = 0.1;
pub const DEFAULT_EPS_TRACK: f64 = 5.0;
pub const DEFAULT_N_VA: usize = 3;
pub const DEFAULT_STA_RETRIES: usize = 20;
pub const DEFAULT_TEMPLATE_REFINE: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub counts: Vec<usize>,
    pub periodic: Vec<bool>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(&self.mins, &self.maxs, &self.counts, &self.periodic)
    }

    /// Counts multiplied by `scale`, at least 3 per dimension.
    pub fn scaled(&self, scale: f64) -> GridSpec {
        let counts = self.counts.iter().map(|&n| ((n as f64 * scale).round() as usize).max(3)).collect();
        GridSpec { counts, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntruderSpec {
    pub v_min: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub d_r: f64,
    /// Intruder lifetime `t_bar` in seconds.
    pub iat: f64,
}

impl IntruderSpec {
    pub fn params(&self) -> DubinsParams {
        DubinsParams::new(self.v_min, self.v_max, self.w_max, self.d_r)
    }
}

/// Relative-state grid for avoid and buffer regions: a square of
/// `half_width` around the vehicle, full heading circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeGridSpec {
    pub half_width: f64,
    pub counts: [usize; 3],
}

impl Default for RelativeGridSpec {
    fn default() -> Self {
        RelativeGridSpec { half_width: 500.0, counts: [61, 61, 31] }
    }
}

impl RelativeGridSpec {
    pub fn build(&self) -> Result<Grid> {
        let w = self.half_width;
        Grid::new(&[-w, -w, -PI], &[w, w, PI], &self.counts, &[false, false, true])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_va: Option<usize>,
    pub r_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_track: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<f64>,
    /// Save interval of the planning value function; defaults to the stride.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_stride: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_grid: Option<RelativeGridSpec>,
    /// Replan with the intruder-free basic planner instead of the full one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replan_basic: Option<bool>,
    /// Later arrival times tried, one stride apart, when a replanned
    /// departure would fall before the replanning start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sta_retries: Option<usize>,
    /// Position refinement of the local obstacle-template grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_refine: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

impl TargetSpec {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: String,
    /// Smaller numbers plan first.
    pub priority: i64,
    pub x0: [f64; 3],
    pub target: TargetSpec,
    pub sta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StaticObstacle {
    Circle(Circle),
    Rect(Rect),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbancePolicy {
    None,
    #[default]
    Random,
    WorstCase,
}

/// What the intruder's current victim does before it starts avoiding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VictimPolicy {
    /// Keeps flying its plan.
    #[default]
    Nominal,
    /// Steers at the intruder, the worst case the buffer region is built for.
    Collude,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntruderStrategy {
    #[default]
    None,
    Waypoints { waypoints: Vec<[f64; 2]> },
    Pursuit { victim: String },
    Chain { victims: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Injection {
    /// Absolute intruder state at injection.
    Explicit([f64; 3]),
    /// Just outside the victim's avoid region, heading at the victim.
    /// `bearing` is the direction from the victim in its own frame; when
    /// absent it is drawn from the run seed.
    SeparationBoundary {
        victim: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bearing: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub disturbance: DisturbancePolicy,
    #[serde(default)]
    pub intruder: IntruderStrategy,
    #[serde(default)]
    pub t_sa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection: Option<Injection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avoid_enabled: Option<bool>,
    #[serde(default)]
    pub victims: VictimPolicy,
}

impl Default for SimFile {
    fn default() -> Self {
        SimFile {
            dt: None,
            disturbance: DisturbancePolicy::default(),
            intruder: IntruderStrategy::None,
            t_sa: 0.0,
            injection: None,
            horizon: None,
            seed: 0,
            avoid_enabled: None,
            victims: VictimPolicy::Nominal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub grid: GridSpec,
    pub dynamics: DubinsParams,
    pub intruder: IntruderSpec,
    pub planner: PlannerFile,
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub static_obstacles: Vec<StaticObstacle>,
    #[serde(default)]
    pub sim: SimFile,
}

/// Planner options with defaults applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOptions {
    pub n_va: usize,
    pub r_c: f64,
    pub eps_track: f64,
    pub cfl: f64,
    pub control_dt: f64,
    pub snapshot_stride: f64,
    pub value_stride: f64,
    pub relative_grid: RelativeGridSpec,
    pub replan_basic: bool,
    pub sta_retries: usize,
    pub template_refine: usize,
}

/// Simulation configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub disturbance: DisturbancePolicy,
    pub intruder: IntruderStrategy,
    pub t_sa: f64,
    pub injection: Option<Injection>,
    /// Run length; `None` runs until every vehicle has landed.
    pub horizon: Option<f64>,
    pub seed: u64,
    pub avoid_enabled: bool,
    pub victims: VictimPolicy,
}

impl SimConfig {
    pub fn without_intruder(dt: f64, seed: u64) -> SimConfig {
        SimConfig {
            dt,
            disturbance: DisturbancePolicy::None,
            intruder: IntruderStrategy::None,
            t_sa: 0.0,
            injection: None,
            horizon: None,
            seed,
            avoid_enabled: true,
            victims: VictimPolicy::Nominal,
        }
    }

    pub fn has_intruder(&self) -> bool {
        self.intruder != IntruderStrategy::None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: GridSpec,
    pub dynamics: DubinsParams,
    pub intruder: IntruderSpec,
    pub planner: PlannerOptions,
    /// Sorted by ascending priority number (highest priority first).
    pub vehicles: Vec<VehicleSpec>,
    pub static_obstacles: Vec<StaticObstacle>,
    pub sim: SimConfig,
    /// Non-fatal notes produced while applying defaults.
    pub warnings: Vec<String>,
}

fn schema(path: &str, msg: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), msg: msg.into() }
}

fn units(path: &str, msg: impl Into<String>) -> Error {
    Error::Units { path: path.to_string(), msg: msg.into() }
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(schema(path, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(path: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(schema(path, format!("must be finite and >= 0, got {v}")))
    }
}

/// Angles beyond one full turn are taken as a sign of degrees.
fn radians(path: &str, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(schema(path, "must be finite"));
    }
    if v.abs() > TAU + 1e-9 {
        return Err(units(path, format!("{v} exceeds one turn; angles are in radians")));
    }
    Ok(v)
}

fn check_params(path: &str, p: &DubinsParams) -> Result<()> {
    nonnegative(&format!("{path}.v_min"), p.v_min)?;
    nonnegative(&format!("{path}.v_max"), p.v_max)?;
    nonnegative(&format!("{path}.d_r"), p.d_r)?;
    positive(&format!("{path}.w_max"), p.w_max)?;
    if p.v_max < p.v_min {
        return Err(schema(&format!("{path}.v_max"), "must be >= v_min"));
    }
    if p.w_max > TAU {
        return Err(units(&format!("{path}.w_max"), format!("{} rad/s is implausible; degrees are rejected", p.w_max)));
    }
    Ok(())
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<ScenarioFile> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(if path.is_empty() { "." } else { &path }, e.inner().to_string())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn resolve(self) -> Result<Scenario> {
        let mut warnings = Vec::new();
        let g = &self.grid;
        if g.mins.len() != 3 || g.maxs.len() != 3 || g.counts.len() != 3 || g.periodic.len() != 3 {
            return Err(schema("grid", "planning grid must have 3 dimensions (x, y, heading)"));
        }
        self.grid.build().map_err(|e| schema("grid", e.to_string()))?;
        if !g.periodic[2] || g.periodic[0] || g.periodic[1] {
            return Err(schema("grid.periodic", "expected [false, false, true]"));
        }
        if ((g.maxs[2] - g.mins[2]) - TAU).abs() > 1e-6 {
            return Err(units("grid.maxs[2]", "heading dimension must span 2*pi radians"));
        }
        check_params("dynamics", &self.dynamics)?;
        check_params("intruder", &self.intruder.params())?;
        positive("intruder.iat", self.intruder.iat)?;

        let p = &self.planner;
        let n_va = match p.n_va {
            Some(0) => return Err(schema("planner.n_va", "must be >= 1")),
            Some(n) => n,
            None => {
                let w = format!("planner.n_va missing; using {DEFAULT_N_VA}");
                log::warn!("{w}");
                warnings.push(w);
                DEFAULT_N_VA
            }
        };
        let r_c = positive("planner.r_c", p.r_c)?;
        let eps_track = nonnegative("planner.eps_track", p.eps_track.unwrap_or(DEFAULT_EPS_TRACK))?;
        let cfl = positive("planner.cfl", p.cfl.unwrap_or(DEFAULT_CFL))?;
        if cfl > 1.0 {
            return Err(schema("planner.cfl", "must be in (0, 1]"));
        }
        let control_dt = positive("planner.control_dt", p.control_dt.unwrap_or(DEFAULT_CONTROL_DT))?;
        let snapshot_stride = positive("planner.snapshot_stride", p.snapshot_stride.unwrap_or(control_dt))?;
        let value_stride = positive("planner.value_stride", p.value_stride.unwrap_or(snapshot_stride))?;
        let relative_grid = p.relative_grid.unwrap_or_default();
        positive("planner.relative_grid.half_width", relative_grid.half_width)?;
        if relative_grid.counts.iter().any(|&n| n < 3) {
            return Err(schema("planner.relative_grid.counts", "need at least 3 nodes per dimension"));
        }
        let planner = PlannerOptions {
            n_va,
            r_c,
            eps_track,
            cfl,
            control_dt,
            snapshot_stride,
            value_stride,
            relative_grid,
            replan_basic: p.replan_basic.unwrap_or(false),
            sta_retries: p.sta_retries.unwrap_or(DEFAULT_STA_RETRIES),
            template_refine: match p.template_refine {
                Some(0) => return Err(schema("planner.template_refine", "must be >= 1")),
                Some(r) => r,
                None => DEFAULT_TEMPLATE_REFINE,
            },
        };

        if self.vehicles.is_empty() {
            return Err(schema("vehicles", "need at least one vehicle"));
        }
        let mut ids = HashSet::new();
        let mut prios = HashSet::new();
        for (k, v) in self.vehicles.iter().enumerate() {
            let at = |f: &str| format!("vehicles[{k}].{f}");
            if v.id.is_empty() || !ids.insert(v.id.clone()) {
                return Err(schema(&at("id"), format!("ids must be unique and nonempty: {:?}", v.id)));
            }
            if !prios.insert(v.priority) {
                return Err(schema(&at("priority"), "priorities must be strictly ordered"));
            }
            radians(&at("x0[2]"), v.x0[2])?;
            positive(&at("target.radius"), v.target.radius)?;
            nonnegative(&at("sta"), v.sta)?;
        }
        let mut vehicles = self.vehicles.clone();
        vehicles.sort_by_key(|v| v.priority);

        for (k, o) in self.static_obstacles.iter().enumerate() {
            match o {
                StaticObstacle::Circle(c) => {
                    positive(&format!("static_obstacles[{k}].circle.radius"), c.radius)?;
                }
                StaticObstacle::Rect(r) => {
                    if !(r.max[0] > r.min[0] && r.max[1] > r.min[1]) {
                        return Err(schema(&format!("static_obstacles[{k}].rect"), "max must exceed min"));
                    }
                }
            }
        }

        let s = &self.sim;
        let dt = positive("sim.dt", s.dt.unwrap_or(control_dt))?;
        nonnegative("sim.t_sa", s.t_sa)?;
        if let Some(h) = s.horizon {
            positive("sim.horizon", h)?;
        }
        let known = |id: &String| vehicles.iter().any(|v| &v.id == id);
        match &s.intruder {
            IntruderStrategy::Pursuit { victim } if !known(victim) => {
                return Err(schema("sim.intruder.victim", format!("unknown vehicle {victim:?}")));
            }
            IntruderStrategy::Chain { victims } => {
                if victims.is_empty() {
                    return Err(schema("sim.intruder.victims", "need at least one victim"));
                }
                if let Some(v) = victims.iter().find(|v| !known(v)) {
                    return Err(schema("sim.intruder.victims", format!("unknown vehicle {v:?}")));
                }
            }
            IntruderStrategy::Waypoints { waypoints } if waypoints.is_empty() => {
                return Err(schema("sim.intruder.waypoints", "need at least one waypoint"));
            }
            _ => {}
        }
        match &s.injection {
            Some(Injection::Explicit(x)) => {
                radians("sim.injection.explicit[2]", x[2])?;
            }
            Some(Injection::SeparationBoundary { victim, bearing }) => {
                if !known(victim) {
                    return Err(schema("sim.injection.victim", format!("unknown vehicle {victim:?}")));
                }
                if let Some(b) = bearing {
                    radians("sim.injection.bearing", *b)?;
                }
            }
            None if s.intruder != IntruderStrategy::None => {
                return Err(schema("sim.injection", "an intruder needs an injection rule"));
            }
            None => {}
        }
        let sim = SimConfig {
            dt,
            disturbance: s.disturbance,
            intruder: s.intruder.clone(),
            t_sa: s.t_sa,
            injection: s.injection.clone(),
            horizon: s.horizon,
            seed: s.seed,
            avoid_enabled: s.avoid_enabled.unwrap_or(true),
            victims: s.victims,
        };

        Ok(Scenario {
            grid: self.grid,
            dynamics: self.dynamics,
            intruder: self.intruder,
            planner,
            vehicles,
            static_obstacles: self.static_obstacles,
            sim,
            warnings,
        })
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        ScenarioFile::from_json(text)?.resolve()
    }

    pub fn t_bar(&self) -> f64 {
        self.intruder.iat
    }

    pub fn t_brd(&self) -> f64 {
        self.intruder.iat / self.planner.n_va as f64
    }

    pub fn planning_grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(self.grid.build()?))
    }

    pub fn vehicle(&self, id: &str) -> Option<&VehicleSpec> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn vehicle_index(&self, id: &str) -> Option<usize> {
        self.vehicles.iter().position(|v| v.id == id)
    }

    /// Complete file form, every default written out.
    pub fn to_file(&self) -> ScenarioFile {
        let p = &self.planner;
        let s = &self.sim;
        ScenarioFile {
            grid: self.grid.clone(),
            dynamics: self.dynamics,
            intruder: self.intruder,
            planner: PlannerFile {
                n_va: Some(p.n_va),
                r_c: p.r_c,
                eps_track: Some(p.eps_track),
                cfl: Some(p.cfl),
                control_dt: Some(p.control_dt),
                snapshot_stride: Some(p.snapshot_stride),
                value_stride: Some(p.value_stride),
                relative_grid: Some(p.relative_grid),
                replan_basic: Some(p.replan_basic),
                sta_retries: Some(p.sta_retries),
                template_refine: Some(p.template_refine),
            },
            vehicles: self.vehicles.clone(),
            static_obstacles: self.static_obstacles.clone(),
            sim: SimFile {
                dt: Some(s.dt),
                disturbance: s.disturbance,
                intruder: s.intruder.clone(),
                t_sa: s.t_sa,
                injection: s.injection.clone(),
                horizon: s.horizon,
                seed: s.seed,
                avoid_enabled: Some(s.avoid_enabled),
                victims: s.victims,
            },
        }
    }

    pub fn to_json(&self) -> String {
        self.to_file().to_json()
    }

    /// Union of the static obstacles as a heading-free field on `grid`, or
    /// `None` when there are none.
    pub fn static_field(&self, grid: &Arc<Grid>) -> Result<Option<ScalarField>> {
        let mut acc: Option<ScalarField> = None;
        for o in &self.static_obstacles {
            let f = match o {
                StaticObstacle::Circle(c) => sdf_ball(grid.clone(), &c.center, c.radius, &[0, 1])?,
                StaticObstacle::Rect(r) => sdf_rect(grid.clone(), &r.min, &r.max, &[0, 1])?,
            };
            acc = Some(match acc {
                None => f,
                Some(a) => a.union(&f)?,
            });
        }
        Ok(acc)
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"{
      "grid": {"mins": [0, 0, -3.141592653589793], "maxs": [2000, 2000, 3.141592653589793],
               "counts": [51, 51, 25], "periodic": [false, false, true]},
      "dynamics": {"v_min": 0, "v_max": 25, "w_max": 2, "d_r": 6},
      "intruder": {"v_min": 0, "v_max": 25, "w_max": 2, "d_r": 6, "iat": 10},
      "planner": {"n_va": 3, "r_c": 100},
      "vehicles": [
        {"id": "b", "priority": 2, "x0": [100, 1800, 0], "target": {"center": [1900, 1800], "radius": 100}, "sta": 90},
        {"id": "a", "priority": 1, "x0": [100, 200, 0], "target": {"center": [1900, 200], "radius": 100}, "sta": 80}
      ],
      "static_obstacles": [{"circle": {"center": [1000, 1000], "radius": 50}}],
      "sim": {"intruder": {"strategy": "chain", "victims": ["a", "b"]},
              "injection": {"separation_boundary": {"victim": "a"}}, "seed": 3}
    }"#;

    #[test]
    fn defaults_and_order() {
        let s = Scenario::from_json(SAMPLE).unwrap();
        assert!((s.t_brd() - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.planner.cfl, 0.5);
        assert_eq!(s.planner.control_dt, 0.1);
        assert_eq!(s.planner.eps_track, 5.0);
        assert_eq!(s.vehicles[0].id, "a");
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn missing_nva_defaults_with_warning() {
        let text = SAMPLE.replace(r#""n_va": 3, "#, "");
        let s = Scenario::from_json(&text).unwrap();
        assert_eq!(s.planner.n_va, 3);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn roundtrip_is_identity() {
        let s = Scenario::from_json(SAMPLE).unwrap();
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_bad_documents() {
        let neg = SAMPLE.replace(r#""radius": 50"#, r#""radius": -50"#);
        assert!(matches!(Scenario::from_json(&neg), Err(Error::Schema { .. })));
        let unknown = SAMPLE.replace(r#""r_c": 100"#, r#""r_c": 100, "speed": 3"#);
        match Scenario::from_json(&unknown) {
            Err(Error::Schema { path, .. }) => assert!(path.starts_with("planner"), "{path}"),
            other => panic!("{other:?}"),
        }
        let deg = SAMPLE.replace(r#""x0": [100, 200, 0]"#, r#""x0": [100, 200, 90]"#);
        assert!(matches!(Scenario::from_json(&deg), Err(Error::Units { .. })));
        let degrate = SAMPLE.replace(r#""w_max": 2, "d_r": 6}"#, r#""w_max": 115, "d_r": 6}"#);
        assert!(matches!(Scenario::from_json(&degrate), Err(Error::Units { .. })));
        let dup = SAMPLE.replace(r#""priority": 2"#, r#""priority": 1"#);
        assert!(matches!(Scenario::from_json(&dup), Err(Error::Schema { .. })));
    }
}
