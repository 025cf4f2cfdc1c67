//! On-disk layout of plans and relative-state artifacts.
//!
//! A plan directory holds `manifest.json`, one HJVF file per value-function
//! snapshot and a nominal-trajectory CSV per vehicle. The avoid directory
//! holds its own manifest and snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::DynSpec;
use crate::error::{Error, Result};
use crate::hjvf::{read_timefield, write_timefield};
use crate::scenario::TargetSpec;
use crate::stp::avoid::AvoidArtifacts;
use crate::stp::{PlanKind, PlanSet, Trajectory, VehiclePlan};

pub const PLAN_MANIFEST: &str = "manifest.json";
pub const AVOID_MANIFEST: &str = "avoid.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub id: String,
    pub kind: PlanKind,
    pub spec: DynSpec,
    pub ldt: f64,
    pub sta: f64,
    pub arrival: f64,
    pub target: TargetSpec,
    pub min_clearance: Option<f64>,
    pub replanned: bool,
    pub value_files: Vec<String>,
    pub trajectory: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanManifest {
    /// Priority order.
    pub vehicles: Vec<PlanEntry>,
    /// Scenario the plans were computed for.
    pub scenario: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AvoidManifest {
    spec: DynSpec,
    t_bar: f64,
    r_c: f64,
    d_sen: f64,
    expansions: usize,
    value_files: Vec<String>,
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    Error::Schema { path: path.display().to_string(), msg: e.to_string() }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| json_err(path, e))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| json_err(path, e))
}

/// `t, x, y, theta, u_v, u_w` per sample.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut s = String::from("t,x,y,theta,u_v,u_w\n");
    for ((t, x), u) in tr.times.iter().zip(&tr.states).zip(&tr.controls) {
        let _ = writeln!(s, "{t},{},{},{},{},{}", x[0], x[1], x[2], u[0], u[1]);
    }
    s
}

pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory> {
    let mut tr = Trajectory::default();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::CorruptFile(format!("trajectory line {}: {e}", n + 1)))?;
        if v.len() != 6 {
            return Err(Error::CorruptFile(format!("trajectory line {}: {} columns", n + 1, v.len())));
        }
        tr.times.push(v[0]);
        tr.states.push([v[1], v[2], v[3]]);
        tr.controls.push([v[4], v[5]]);
    }
    Ok(tr)
}

/// Writes `set` to `dir`, creating it if needed.
pub fn save_planset(dir: &Path, set: &PlanSet, scenario_json: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut vehicles = Vec::with_capacity(set.plans.len());
    for p in &set.plans {
        let value_files = write_timefield(dir, &format!("{}_value", p.id), &p.value)?;
        let trajectory = format!("{}_nominal.csv", p.id);
        fs::write(dir.join(&trajectory), trajectory_csv(&p.nominal))?;
        vehicles.push(PlanEntry {
            id: p.id.clone(),
            kind: p.kind,
            spec: p.spec,
            ldt: p.ldt,
            sta: p.sta,
            arrival: p.arrival,
            target: p.target,
            min_clearance: p.min_clearance.is_finite().then_some(p.min_clearance),
            replanned: p.replanned,
            value_files,
            trajectory,
        });
    }
    let scenario = serde_json::from_str(scenario_json).map_err(|e| json_err(dir, e))?;
    write_json(&dir.join(PLAN_MANIFEST), &PlanManifest { vehicles, scenario })
}

pub fn load_planset(dir: &Path) -> Result<(PlanSet, PlanManifest)> {
    let manifest: PlanManifest = read_json(&dir.join(PLAN_MANIFEST))?;
    let mut plans = Vec::with_capacity(manifest.vehicles.len());
    for e in &manifest.vehicles {
        let value = read_timefield(dir, &e.value_files)?;
        let nominal = parse_trajectory_csv(&fs::read_to_string(dir.join(&e.trajectory))?)?;
        plans.push(VehiclePlan {
            id: e.id.clone(),
            kind: e.kind,
            spec: e.spec,
            value,
            nominal,
            ldt: e.ldt,
            sta: e.sta,
            arrival: e.arrival,
            target: e.target,
            min_clearance: e.min_clearance.unwrap_or(f64::INFINITY),
            replanned: e.replanned,
        });
    }
    Ok((PlanSet { plans }, manifest))
}

pub fn save_avoid(dir: &Path, a: &AvoidArtifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    let value_files = write_timefield(dir, "avoid", &a.value)?;
    let m = AvoidManifest { spec: a.spec, t_bar: a.t_bar, r_c: a.r_c, d_sen: a.d_sen, expansions: a.expansions, value_files };
    write_json(&dir.join(AVOID_MANIFEST), &m)
}

pub fn load_avoid(dir: &Path) -> Result<AvoidArtifacts> {
    let m: AvoidManifest = read_json(&dir.join(AVOID_MANIFEST))?;
    let value = read_timefield(dir, &m.value_files)?;
    Ok(AvoidArtifacts {
        grid: value.grid().clone(),
        value,
        spec: m.spec,
        t_bar: m.t_bar,
        r_c: m.r_c,
        d_sen: m.d_sen,
        expansions: m.expansions,
    })
}

/// Hex SHA-256 of a file's bytes.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
