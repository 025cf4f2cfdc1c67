//! Command-line surface: plan, simulate, replan and export on disk.
//!
//! Every run writes `manifest.json` into `--out` with the effective
//! scenario, the seed and a SHA-256 of every artifact it produced. Exit
//! codes: 0 success, 1 other failure, 2 infeasible, 3 schema or units
//! error, 4 safety violation found by `pipeline`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynKind, DynSpec, HamRole};
use crate::error::{Error, Result};
use crate::export::export_slices;
use crate::hjvf::write_timefield;
use crate::persist::{file_hash, load_avoid, load_planset, save_avoid, save_planset, trajectory_csv};
use crate::scenario::{parse_scenario, GridSpec, Scenario};
use crate::sdf::sdf_ball;
use crate::sim::{replan, simulate_with, SimLog};
use crate::solver::{solve_brs, solve_frs, ReachProblem, SaveSpec, SolveMode};
use crate::stp::avoid::{compute_avoid_region, AvoidArtifacts};
use crate::stp::{PlanContext, PlanSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_UNSAFE: i32 = 4;

pub const RUN_MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "hjstp", version, about = "Reachability-based multi-vehicle planning with intruder avoidance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Multiplies every planning-grid count (at least 3 nodes remain).
    #[arg(long, global = true)]
    pub grid_scale: Option<f64>,
    /// Overrides `planner.n_va`.
    #[arg(long, global = true)]
    pub nva: Option<usize>,
    /// Seconds between stored value-function snapshots.
    #[arg(long, global = true)]
    pub snapshot_every: Option<f64>,
    /// Log only warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one BRS or FRS described by a problem file.
    Reach {
        /// Problem file (JSON).
        #[arg(long)]
        problem: PathBuf,
    },
    /// Planning phase: avoid region, obstacles and every vehicle's plan.
    Plan {
        /// Reuse an avoid region saved by an earlier run.
        #[arg(long)]
        avoid: Option<PathBuf>,
        /// Plan against capture discs only, without intruder obstacles.
        #[arg(long)]
        basic: bool,
    },
    /// Closed-loop simulation of saved plans.
    Simulate {
        /// Plan directory [default: OUT/plans].
        #[arg(long)]
        plans: Option<PathBuf>,
        /// Avoid-region directory [default: OUT/avoid].
        #[arg(long)]
        avoid: Option<PathBuf>,
        /// Replanned plans to switch to when the intruder leaves.
        #[arg(long)]
        replans: Option<PathBuf>,
    },
    /// Replanning phase from a simulation log.
    Replan {
        /// Plan directory [default: OUT/plans].
        #[arg(long)]
        plans: Option<PathBuf>,
        /// Avoid-region directory [default: OUT/avoid].
        #[arg(long)]
        avoid: Option<PathBuf>,
        /// `log.json` written by `simulate` [default: OUT/sim/log.json].
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Plan, simulate the attack, replan, simulate again and verify.
    Pipeline {
        /// Reuse an avoid region saved by an earlier run.
        #[arg(long)]
        avoid: Option<PathBuf>,
    },
    /// Zero-contour slices and trajectories as CSV.
    Export {
        /// Plan directory [default: OUT/plans].
        #[arg(long)]
        plans: Option<PathBuf>,
        /// Avoid-region directory [default: OUT/avoid].
        #[arg(long)]
        avoid: Option<PathBuf>,
        /// Heading of the slice in radians (relative heading for the avoid region).
        #[arg(long, default_value_t = 0.0)]
        heading: f64,
    },
}

/// Problem file of `reach`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachFile {
    pub grid: GridSpec,
    pub dynamics: DynKind,
    /// One of `basic`, `planning`, `avoid`, `buffer`, `obstacle_brs`,
    /// `obstacle_frs`, `replan_frs`.
    pub role: String,
    pub target: BallSpec,
    pub horizon: f64,
    #[serde(default)]
    pub forward: bool,
    /// Keep the set at exactly the horizon instead of within it.
    #[serde(default)]
    pub exact_time: bool,
    pub cfl: Option<f64>,
    pub save_every: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Dimensions the ball constrains [default: the first `center.len()`].
    pub dims: Option<Vec<usize>>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub scenario: Option<serde_json::Value>,
    /// Relative path to hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub vehicle_violations: usize,
    pub intruder_violations: usize,
    pub rvs: Vec<String>,
    /// Vehicles that did not land by their (possibly new) sta.
    pub late: Vec<String>,
    pub min_vehicle_distance: Option<f64>,
    pub min_intruder_distance: Option<f64>,
}

impl Verification {
    pub fn safe(&self) -> bool {
        self.vehicle_violations == 0 && self.intruder_violations == 0 && self.late.is_empty()
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } | Error::ReplanInfeasible { .. } | Error::InjectionFailed(_) => EXIT_INFEASIBLE,
        Error::Schema { .. } | Error::Units { .. } => EXIT_SCHEMA,
        Error::SeparationBreach(_) => EXIT_UNSAFE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    let level = if cli.common.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    fs::create_dir_all(&c.out)?;
    let (name, code, scenario) = match &cli.command {
        Command::Reach { problem } => {
            reach(problem, &c.out)?;
            ("reach", EXIT_OK, None)
        }
        Command::Plan { avoid, basic } => {
            let sc = load_scenario(c)?;
            let ctx = context(&sc, avoid.as_deref(), &c.out)?;
            let set = if *basic { ctx.basic_stp()? } else { ctx.plan_all()? };
            report_plans(&set);
            save_planset(&c.out.join("plans"), &set, &sc.to_json())?;
            ("plan", EXIT_OK, Some(sc))
        }
        Command::Simulate { plans, avoid, replans } => {
            let sc = load_scenario(c)?;
            let avoid = load_avoid(&dir_or(avoid, &c.out, "avoid"))?;
            let (set, _) = load_planset(&dir_or(plans, &c.out, "plans"))?;
            let re = replans.as_ref().map(|d| load_planset(d).map(|p| p.0)).transpose()?;
            let log = simulate_with(&sc, &avoid, &set, re.as_ref(), &sc.sim)?;
            write_log(&c.out.join("sim"), &log)?;
            report_log(&log);
            ("simulate", EXIT_OK, Some(sc))
        }
        Command::Replan { plans, avoid, log } => {
            let sc = load_scenario(c)?;
            let ctx = PlanContext::with_avoid(&sc, load_avoid(&dir_or(avoid, &c.out, "avoid"))?)?;
            let (set, _) = load_planset(&dir_or(plans, &c.out, "plans"))?;
            let path = log.clone().unwrap_or_else(|| c.out.join("sim").join("log.json"));
            let text = fs::read_to_string(&path)?;
            let log: SimLog = serde_json::from_str(&text)
                .map_err(|e| Error::Schema { path: path.display().to_string(), msg: e.to_string() })?;
            let out = replan(&ctx, &set, &log)?;
            report_plans(&out);
            save_planset(&c.out.join("replans"), &out, &sc.to_json())?;
            ("replan", EXIT_OK, Some(sc))
        }
        Command::Pipeline { avoid } => {
            let sc = load_scenario(c)?;
            let v = pipeline(&sc, avoid.as_deref(), &c.out)?;
            let code = if v.safe() { EXIT_OK } else { EXIT_UNSAFE };
            ("pipeline", code, Some(sc))
        }
        Command::Export { plans, avoid, heading } => {
            export(plans.as_deref(), avoid.as_deref(), *heading, &c.out)?;
            ("export", EXIT_OK, None)
        }
    };
    if let Some(sc) = &scenario {
        fs::write(c.out.join("scenario.json"), sc.to_json() + "\n")?;
    }
    write_manifest(&c.out, name, scenario.as_ref())?;
    Ok(code)
}

fn dir_or(given: &Option<PathBuf>, out: &Path, default: &str) -> PathBuf {
    given.clone().unwrap_or_else(|| out.join(default))
}

/// Reads the scenario and applies the command-line overrides.
pub fn load_scenario(c: &Common) -> Result<Scenario> {
    let path = c
        .scenario
        .as_ref()
        .ok_or_else(|| Error::Schema { path: "--scenario".into(), msg: "this command needs a scenario file".into() })?;
    let mut sc = parse_scenario(path)?;
    if let Some(s) = c.grid_scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Schema { path: "--grid-scale".into(), msg: format!("must be positive, got {s}") });
        }
        sc.grid = sc.grid.scaled(s);
    }
    if let Some(n) = c.nva {
        if n == 0 {
            return Err(Error::Schema { path: "--nva".into(), msg: "must be >= 1".into() });
        }
        sc.planner.n_va = n;
    }
    if let Some(s) = c.snapshot_every {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Schema { path: "--snapshot-every".into(), msg: format!("must be positive, got {s}") });
        }
        sc.planner.value_stride = s;
    }
    if let Some(seed) = c.seed {
        sc.sim.seed = seed;
    }
    // Round trip so overrides are validated like file contents.
    Scenario::from_json(&sc.to_json())
}

/// Avoid region from `cached` when given, else computed and saved to
/// `out/avoid`.
pub fn avoid_region(sc: &Scenario, cached: Option<&Path>, out: &Path) -> Result<AvoidArtifacts> {
    let p = &sc.planner;
    if let Some(dir) = cached {
        let a = load_avoid(dir)?;
        let want = DynSpec::relative(sc.dynamics, sc.intruder.params(), HamRole::AVOID);
        if a.spec != want || a.t_bar != sc.t_bar() || a.r_c != p.r_c {
            return Err(Error::MissingPrerequisite(format!(
                "avoid region in {} was computed for other dynamics, t_bar or r_c",
                dir.display()
            )));
        }
        if dir != out.join("avoid") {
            save_avoid(&out.join("avoid"), &a)?;
        }
        return Ok(a);
    }
    log::info!("computing the avoid region");
    let a = compute_avoid_region(sc.dynamics, sc.intruder.params(), sc.t_bar(), p.r_c, p.relative_grid, p.cfl)?;
    log::info!("d_sen = {:.1} m", a.d_sen);
    save_avoid(&out.join("avoid"), &a)?;
    Ok(a)
}

fn context(sc: &Scenario, cached: Option<&Path>, out: &Path) -> Result<PlanContext> {
    PlanContext::with_avoid(sc, avoid_region(sc, cached, out)?)
}

/// Plan, attack, replan, rerun, verify. Writes every stage under `out`.
pub fn pipeline(sc: &Scenario, cached: Option<&Path>, out: &Path) -> Result<Verification> {
    let ctx = context(sc, cached, out)?;
    let set = ctx.plan_all()?;
    report_plans(&set);
    save_planset(&out.join("plans"), &set, &sc.to_json())?;
    let first = simulate_with(sc, &ctx.avoid, &set, None, &sc.sim)?;
    write_log(&out.join("sim"), &first)?;
    report_log(&first);
    let re = replan(&ctx, &set, &first)?;
    save_planset(&out.join("replans"), &re, &sc.to_json())?;
    let second = simulate_with(sc, &ctx.avoid, &set, Some(&re), &sc.sim)?;
    write_log(&out.join("sim_replanned"), &second)?;
    let v = verify(&second, &re);
    fs::write(out.join("verify.json"), serde_json::to_string_pretty(&v).expect("serializes") + "\n")?;
    if v.safe() {
        log::info!("verified: no danger-zone entry, every vehicle landed by its sta");
    } else {
        log::error!("verification failed: {v:?}");
    }
    Ok(v)
}

/// Danger-zone entries and late arrivals of a finished run.
pub fn verify(log: &SimLog, plans: &PlanSet) -> Verification {
    use crate::sim::EventKind;
    let count = |k: EventKind| log.events.iter().filter(|e| e.kind == k).count();
    let late = log
        .ids
        .iter()
        .enumerate()
        .filter(|(i, id)| {
            let sta = plans.get(id).map_or(f64::NEG_INFINITY, |p| p.sta);
            log.arrivals[*i].map_or(true, |t| t > sta + 1e-9)
        })
        .map(|(_, id)| id.clone())
        .collect();
    Verification {
        vehicle_violations: count(EventKind::VehicleViolation),
        intruder_violations: count(EventKind::IntruderViolation),
        rvs: log.rvs_ids(),
        late,
        min_vehicle_distance: log.min_vehicle_distance.is_finite().then_some(log.min_vehicle_distance),
        min_intruder_distance: log.min_intruder_distance.is_finite().then_some(log.min_intruder_distance),
    }
}

pub fn write_log(dir: &Path, log: &SimLog) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("vehicles.csv"), log.to_csv())?;
    fs::write(dir.join("intruder.csv"), log.intruder_csv())?;
    fs::write(dir.join("events.csv"), log.events_csv())?;
    let json = serde_json::to_string(log).expect("log serializes");
    fs::write(dir.join("log.json"), json + "\n")?;
    Ok(())
}

fn report_plans(set: &PlanSet) {
    for p in &set.plans {
        log::info!("{}: ldt {:.2}, arrival {:.2}, sta {:.2}", p.id, p.ldt, p.arrival, p.sta);
    }
}

fn report_log(log: &SimLog) {
    log::info!(
        "RVS {:?}, {} violations, closest vehicle pair {:.1} m, closest intruder {:.1} m",
        log.rvs_ids(),
        log.violations().len(),
        log.min_vehicle_distance,
        log.min_intruder_distance
    );
}

fn role_by_name(name: &str) -> Result<HamRole> {
    Ok(match name {
        "basic" => HamRole::BASIC,
        "planning" => HamRole::PLANNING,
        "avoid" => HamRole::AVOID,
        "buffer" => HamRole::BUFFER,
        "obstacle_brs" => HamRole::OBSTACLE_BRS,
        "obstacle_frs" => HamRole::OBSTACLE_FRS,
        "replan_frs" => HamRole::REPLAN_FRS,
        other => return Err(Error::Schema { path: "role".into(), msg: format!("unknown role {other:?}") }),
    })
}

pub fn reach(problem: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(problem)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let rf: ReachFile = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Schema { path: e.path().to_string(), msg: e.inner().to_string() })?;
    let grid = Arc::new(rf.grid.build().map_err(|e| Error::Schema { path: "grid".into(), msg: e.to_string() })?);
    let spec = DynSpec::new(rf.dynamics, role_by_name(&rf.role)?)?;
    let dims = rf.target.dims.clone().unwrap_or_else(|| (0..rf.target.center.len()).collect());
    let target = sdf_ball(grid, &rf.target.center, rf.target.radius, &dims)?;
    let mut p = if rf.forward {
        ReachProblem::forward(target, spec, rf.horizon)
    } else {
        ReachProblem::backward(target, spec, rf.horizon)
    };
    if let Some(cfl) = rf.cfl {
        p = p.with_cfl(cfl);
    }
    if let Some(s) = rf.save_every {
        p = p.with_save(SaveSpec::Interval(s));
    }
    if rf.exact_time {
        p = p.with_mode(SolveMode::ExactTime);
    }
    let sol = if rf.forward { solve_frs(&p)? } else { solve_brs(&p)? };
    write_timefield(out, "value", &sol.values)?;
    log::info!("{} snapshots, {} steps", sol.values.len(), sol.steps);
    Ok(())
}

pub fn export(plans: Option<&Path>, avoid: Option<&Path>, heading: f64, out: &Path) -> Result<()> {
    if plans.is_none() && avoid.is_none() {
        return Err(Error::MissingPrerequisite("export needs --plans or --avoid".into()));
    }
    let dir = out.join("export");
    if let Some(d) = plans {
        let (set, _) = load_planset(d)?;
        let mut all = String::from("vehicle_id,t,x,y,theta,u_v,u_w\n");
        for p in &set.plans {
            export_slices(&p.value, Some(heading), &dir.join(&p.id), "value")?;
            for line in trajectory_csv(&p.nominal).lines().skip(1) {
                all.push_str(&format!("{},{line}\n", p.id));
            }
        }
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("trajectories.csv"), all)?;
    }
    if let Some(d) = avoid {
        let a = load_avoid(d)?;
        export_slices(&a.value, Some(heading), &dir.join("avoid"), "avoid")?;
    }
    Ok(())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p.strip_prefix(root).map_or(false, |r| r != Path::new(RUN_MANIFEST)) {
            out.push(p);
        }
    }
    Ok(())
}

fn write_manifest(out: &Path, command: &str, sc: Option<&Scenario>) -> Result<()> {
    let mut files = Vec::new();
    collect_files(out, out, &mut files)?;
    let mut artifacts = BTreeMap::new();
    for f in files {
        let rel = f.strip_prefix(out).expect("under out").to_string_lossy().replace('\\', "/");
        artifacts.insert(rel, file_hash(&f)?);
    }
    let m = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        seed: sc.map(|s| s.sim.seed),
        scenario: sc.map(|s| serde_json::from_str(&s.to_json()).expect("scenario json")),
        artifacts,
    };
    fs::write(out.join(RUN_MANIFEST), serde_json::to_string_pretty(&m).expect("serializes") + "\n")?;
    Ok(())
}
