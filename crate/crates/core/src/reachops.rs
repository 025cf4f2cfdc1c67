//! Obstacle-schedule algebra: capture-radius dilation, rolling forward
//! reachable families, windowed backward unions and the sensing distance.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::DynSpec;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::hjvf;
use crate::schedule::ObstacleSchedule;
use crate::sdf::{dilate_ball, max_norm_of_subzero};
use crate::solver::{solve_brs, solve_frs, ReachProblem, SaveSpec, SolveMode};

/// Position coordinates of every state space used here.
pub const POS_DIMS: [usize; 2] = [0, 1];

/// Dilates every snapshot by `r_c` in the position plane.
pub fn augment_capture(schedule: &ObstacleSchedule, r_c: f64) -> Result<ObstacleSchedule> {
    if !(r_c >= 0.0) {
        return Err(Error::NegativeRadius(r_c));
    }
    schedule.map(|f| if f.is_empty_set() { Ok(f.clone()) } else { dilate_ball(f, r_c, &POS_DIMS) })
}

/// For every time `t` of `base`, the forward reachable set after `duration`
/// seconds from `base(t - duration)`. Times closer than `duration` to the
/// first snapshot use the truncated horizon from the first snapshot.
///
/// `spec` should carry a max-max role so the set covers every possible
/// behaviour. One solve runs per distinct (snapshot, horizon) pair.
pub fn rolling_frs(base: &ObstacleSchedule, duration: f64, spec: &DynSpec) -> Result<ObstacleSchedule> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::Schedule(format!("duration {duration} must be finite and >= 0")));
    }
    if duration == 0.0 {
        return Ok(base.clone());
    }
    let first = base.times()[0];
    let mut cache: HashMap<(usize, u64), Arc<ScalarField>> = HashMap::new();
    let mut out = Vec::with_capacity(base.len());
    for &t in base.times() {
        let src = (t - duration).max(first);
        let k = base.index_at(src);
        let horizon = t - src;
        let key = (k, horizon.to_bits());
        if let Some(f) = cache.get(&key) {
            out.push(f.clone());
            continue;
        }
        let seed = &base.fields()[k];
        let f = if seed.is_empty_set() || horizon <= 0.0 {
            seed.clone()
        } else {
            let p = ReachProblem::forward((**seed).clone(), spec.clone(), horizon).with_save(SaveSpec::Endpoints);
            Arc::new(solve_frs(&p)?.values.last().clone())
        };
        cache.insert(key, f.clone());
        out.push(f);
    }
    ObstacleSchedule::new(base.grid().clone(), base.times().to_vec(), out)
}

/// For every time `t` in `times`, the set of states that can reach the
/// moving target `target(s)` for some `s` in `[t, t + window]`.
pub fn windowed_brs_union(
    target: &ObstacleSchedule,
    window: f64,
    spec: &DynSpec,
    times: &[f64],
) -> Result<ObstacleSchedule> {
    if !(window >= 0.0) {
        return Err(Error::Schedule(format!("window {window} must be >= 0")));
    }
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let p = ReachProblem::backward(target.sample(t + window).clone(), spec.clone(), window)
            .with_anchor(t + window)
            .with_target_schedule(target.clone())
            .with_mode(SolveMode::ReachExists)
            .with_save(SaveSpec::Endpoints);
        out.push(Arc::new(solve_brs(&p)?.values.last().clone()));
    }
    ObstacleSchedule::new(target.grid().clone(), times.to_vec(), out)
}

/// Minimum detection range: the largest position norm over the avoid region.
pub fn sensing_distance(avoid_region: &ScalarField) -> Result<f64> {
    max_norm_of_subzero(avoid_region, &POS_DIMS)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScheduleManifest {
    pub times: Vec<f64>,
    pub files: Vec<String>,
}

/// Writes one HJVF file per distinct snapshot plus `schedule.json`.
pub fn write_schedule(dir: &Path, schedule: &ObstacleSchedule) -> Result<ScheduleManifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(schedule.len());
    let mut written: Vec<(*const ScalarField, String)> = Vec::new();
    for (i, (f, &t)) in schedule.fields().iter().zip(schedule.times()).enumerate() {
        let ptr = Arc::as_ptr(f);
        if let Some((_, name)) = written.iter().find(|(p, _)| *p == ptr) {
            files.push(name.clone());
            continue;
        }
        let name = format!("snap_{i:05}.hjvf");
        hjvf::write_file(&dir.join(&name), f, t)?;
        written.push((ptr, name.clone()));
        files.push(name);
    }
    let m = ScheduleManifest { times: schedule.times().to_vec(), files };
    std::fs::write(dir.join("schedule.json"), serde_json::to_vec_pretty(&m).expect("manifest serializes"))?;
    Ok(m)
}

pub fn read_schedule(dir: &Path) -> Result<ObstacleSchedule> {
    let raw = std::fs::read(dir.join("schedule.json"))?;
    let m: ScheduleManifest =
        serde_json::from_slice(&raw).map_err(|e| Error::CorruptFile(format!("schedule manifest: {e}")))?;
    if m.times.len() != m.files.len() || m.files.is_empty() {
        return Err(Error::CorruptFile("schedule manifest lengths differ".into()));
    }
    let mut loaded: HashMap<String, Arc<ScalarField>> = HashMap::new();
    let mut fields = Vec::with_capacity(m.files.len());
    let mut grid = None;
    for name in &m.files {
        if let Some(f) = loaded.get(name) {
            fields.push(f.clone());
            continue;
        }
        let (mut f, _) = hjvf::read_file(&dir.join(name))?;
        match &grid {
            None => grid = Some(f.grid().clone()),
            Some(g) => f = ScalarField::new(g.clone(), f.into_values())?,
        }
        let f = Arc::new(f);
        loaded.insert(name.clone(), f.clone());
        fields.push(f);
    }
    ObstacleSchedule::new(grid.expect("at least one file"), m.times, fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DubinsParams, HamRole};
    use crate::grid::{make_grid, Grid};
    use crate::schedule::schedule_union;
    use crate::sdf::sdf_ball;

    fn g2(n: usize, half: f64) -> Arc<Grid> {
        Arc::new(make_grid(&[-half, -half], &[half, half], &[n, n], &[false, false]).unwrap())
    }

    fn radius_along_x(f: &ScalarField) -> f64 {
        // Zero crossing on the positive x axis by linear interpolation.
        let g = f.grid();
        let h = g.spacing()[0];
        let mut x = 0.0;
        while x + h <= g.maxs()[0] {
            let (a, b) = (f.interpolate(&[x, 0.0]).unwrap(), f.interpolate(&[x + h, 0.0]).unwrap());
            if a <= 0.0 && b > 0.0 {
                return x + h * a / (a - b);
            }
            x += h;
        }
        f64::NAN
    }

    #[test]
    fn capture_zero_is_identity_and_point_becomes_ball() {
        let g = g2(81, 400.0);
        let pt = Arc::new(sdf_ball(g.clone(), &[0.0, 0.0], 1.0, &[0, 1]).unwrap());
        let s = ObstacleSchedule::new(g.clone(), vec![0.0], vec![pt.clone()]).unwrap();
        assert_eq!(augment_capture(&s, 0.0).unwrap().sample(0.0), &*pt);
        let a = augment_capture(&s, 100.0).unwrap();
        let r = radius_along_x(a.sample(0.0));
        assert!((r - 101.0).abs() <= 10.0, "radius {r}");
        assert!(matches!(augment_capture(&s, -1.0), Err(Error::NegativeRadius(_))));
    }

    #[test]
    fn capture_is_monotone_and_commutes_with_union() {
        let g = g2(61, 300.0);
        let a = ObstacleSchedule::constant(sdf_ball(g.clone(), &[-100.0, 0.0], 30.0, &[0, 1]).unwrap());
        let b = ObstacleSchedule::constant(sdf_ball(g.clone(), &[120.0, 40.0], 20.0, &[0, 1]).unwrap());
        let small = augment_capture(&a, 20.0).unwrap();
        let big = augment_capture(&a, 40.0).unwrap();
        for (s, l) in small.sample(0.0).values().iter().zip(big.sample(0.0).values()) {
            assert!(!(*s <= 0.0) || *l <= 0.0);
        }
        let u1 = augment_capture(&schedule_union(&a, &b).unwrap(), 25.0).unwrap();
        let u2 = schedule_union(&augment_capture(&a, 25.0).unwrap(), &augment_capture(&b, 25.0).unwrap()).unwrap();
        let h = g.spacing()[0];
        let (f1, f2) = (u1.sample(0.0), u2.sample(0.0));
        for (i, (p, q)) in f1.values().iter().zip(f2.values()).enumerate() {
            if (*p <= 0.0) != (*q <= 0.0) {
                assert!(p.abs() <= h && q.abs() <= h, "node {i}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn rolling_frs_zero_duration_is_identity() {
        let g = g2(21, 100.0);
        let s = ObstacleSchedule::constant(sdf_ball(g, &[0.0, 0.0], 20.0, &[0, 1]).unwrap());
        let spec = DynSpec::single_integrator(2, 10.0, 0.0, HamRole::OBSTACLE_FRS);
        let r = rolling_frs(&s, 0.0, &spec).unwrap();
        assert_eq!(r.sample(0.0), s.sample(0.0));
    }

    #[test]
    fn rolling_frs_static_base_dilates_by_speed_times_duration() {
        let g = g2(121, 300.0);
        let h = g.spacing()[0];
        let base = Arc::new(sdf_ball(g.clone(), &[0.0, 0.0], 50.0, &[0, 1]).unwrap());
        let times: Vec<f64> = (0..=4).map(|k| k as f64).collect();
        let s = ObstacleSchedule::new(g.clone(), times, vec![base.clone(); 5]).unwrap();
        let spec = DynSpec::single_integrator(2, 25.0, 0.0, HamRole::OBSTACLE_FRS);
        let r = rolling_frs(&s, 4.0, &spec).unwrap();
        // The last output time sees the full horizon, earlier ones a truncated one.
        let full = radius_along_x(r.sample(4.0));
        assert!((full - 150.0).abs() <= 2.0 * h, "full {full}");
        let part = radius_along_x(r.sample(2.0));
        assert!((part - 100.0).abs() <= 2.0 * h, "part {part}");
        for &t in s.times() {
            for (a, b) in s.sample(t).values().iter().zip(r.sample(t).values()) {
                assert!(!(*a <= 0.0) || *b <= 0.0, "output must contain the base");
            }
        }
    }

    #[test]
    fn rolling_frs_is_nested_in_duration() {
        let g = Arc::new(make_grid(&[-300.0, -300.0, -std::f64::consts::PI], &[300.0, 300.0, std::f64::consts::PI], &[31, 31, 9], &[false, false, true]).unwrap());
        let base = Arc::new(sdf_ball(g.clone(), &[0.0, 0.0], 40.0, &[0, 1]).unwrap());
        let s = ObstacleSchedule::new(g.clone(), vec![0.0, 1.0, 2.0], vec![base.clone(); 3]).unwrap();
        let spec = DynSpec::dubins(DubinsParams::new(0.0, 25.0, 2.0, 6.0), HamRole::OBSTACLE_FRS);
        let a = rolling_frs(&s, 1.0, &spec).unwrap();
        let b = rolling_frs(&s, 2.0, &spec).unwrap();
        for (x, y) in a.sample(2.0).values().iter().zip(b.sample(2.0).values()) {
            assert!(!(*x <= 0.0) || *y <= 0.0);
        }
    }

    #[test]
    fn windowed_union_covers_moving_target() {
        // A target that jumps from left to right: the union must contain
        // both preimages.
        let g = g2(61, 300.0);
        let l = Arc::new(sdf_ball(g.clone(), &[-150.0, 0.0], 40.0, &[0, 1]).unwrap());
        let r = Arc::new(sdf_ball(g.clone(), &[150.0, 0.0], 40.0, &[0, 1]).unwrap());
        let t = ObstacleSchedule::new(g.clone(), vec![0.0, 1.0], vec![l, r]).unwrap();
        let spec = DynSpec::single_integrator(2, 20.0, 0.0, HamRole::OBSTACLE_BRS);
        let u = windowed_brs_union(&t, 2.0, &spec, &[0.0]).unwrap();
        let f = u.sample(0.0);
        assert!(f.interpolate(&[-150.0, 0.0]).unwrap() <= 0.0);
        assert!(f.interpolate(&[150.0, 0.0]).unwrap() <= 0.0);
        // Points that can reach the right ball within 1 s of its appearance.
        assert!(f.interpolate(&[150.0 - 40.0 - 15.0, 0.0]).unwrap() <= 0.0);
        assert!(f.interpolate(&[0.0, 200.0]).unwrap() > 0.0);
    }

    #[test]
    fn sensing_distance_of_ball_is_radius() {
        let g = g2(81, 200.0);
        let f = sdf_ball(g.clone(), &[0.0, 0.0], 100.0, &[0, 1]).unwrap();
        let d = sensing_distance(&f).unwrap();
        assert!((d - 100.0).abs() <= g.spacing()[0]);
        assert!(matches!(sensing_distance(&ScalarField::empty_set(g)), Err(Error::EmptySet)));
    }

    #[test]
    fn schedule_files_roundtrip() {
        let g = g2(11, 50.0);
        let a = Arc::new(sdf_ball(g.clone(), &[0.0, 0.0], 10.0, &[0, 1]).unwrap());
        let b = Arc::new(ScalarField::empty_set(g.clone()));
        let s = ObstacleSchedule::new(g, vec![0.0, 0.5, 1.0], vec![a.clone(), a, b]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = write_schedule(dir.path(), &s).unwrap();
        assert_eq!(m.files[0], m.files[1]);
        let r = read_schedule(dir.path()).unwrap();
        assert_eq!(r.times(), s.times());
        for t in [0.0, 0.5, 1.0] {
            assert_eq!(r.sample(t), s.sample(t));
        }
    }
}
