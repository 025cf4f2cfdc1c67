//! Time-indexed obstacle fields with a previous-snapshot hold rule.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField};
use crate::grid::Grid;

/// Obstacle fields at ascending times. `sample(t)` returns the latest
/// snapshot at or before `t`; before the first snapshot the first one holds.
#[derive(Debug, Clone)]
pub struct ObstacleSchedule {
    grid: Arc<Grid>,
    times: Vec<f64>,
    fields: Vec<Arc<ScalarField>>,
}

const TIME_EPS: f64 = 1e-9;

impl ObstacleSchedule {
    pub fn new(grid: Arc<Grid>, times: Vec<f64>, fields: Vec<Arc<ScalarField>>) -> Result<ObstacleSchedule> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(Error::Schedule("need one field per time and at least one snapshot".into()));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Schedule("schedule times must be strictly increasing".into()));
        }
        for f in &fields {
            same_grid(&grid, f.grid())?;
        }
        Ok(ObstacleSchedule { grid, times, fields })
    }

    /// A schedule with a single field valid at all times.
    pub fn constant(field: ScalarField) -> ObstacleSchedule {
        let grid = field.grid().clone();
        ObstacleSchedule { grid, times: vec![0.0], fields: vec![Arc::new(field)] }
    }

    /// The empty obstacle (`+inf` everywhere) on a time lattice.
    pub fn empty(grid: Arc<Grid>, times: Vec<f64>) -> Result<ObstacleSchedule> {
        let e = Arc::new(ScalarField::empty_set(grid.clone()));
        let fields = vec![e; times.len()];
        ObstacleSchedule::new(grid, times, fields)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn fields(&self) -> &[Arc<ScalarField>] {
        &self.fields
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn index_at(&self, t: f64) -> usize {
        match self.times.partition_point(|&s| s <= t + TIME_EPS) {
            0 => 0,
            k => k - 1,
        }
    }

    pub fn sample(&self, t: f64) -> &ScalarField {
        &self.fields[self.index_at(t)]
    }

    pub fn sample_arc(&self, t: f64) -> Arc<ScalarField> {
        self.fields[self.index_at(t)].clone()
    }

    /// True when every snapshot is the empty set.
    pub fn is_empty_set(&self) -> bool {
        self.fields.iter().all(|f| f.is_empty_set())
    }

    /// Span of snapshots whose set is nonempty.
    pub fn active_span(&self) -> Option<(f64, f64)> {
        let first = self.fields.iter().position(|f| !f.is_empty_set())?;
        let last = self.fields.iter().rposition(|f| !f.is_empty_set())?;
        Some((self.times[first], self.times[last]))
    }

    /// Applies `f` to each snapshot, sharing identical inputs.
    pub fn map(&self, f: impl Fn(&ScalarField) -> Result<ScalarField>) -> Result<ObstacleSchedule> {
        let mut out: Vec<Arc<ScalarField>> = Vec::with_capacity(self.len());
        for (i, s) in self.fields.iter().enumerate() {
            if i > 0 && Arc::ptr_eq(s, &self.fields[i - 1]) {
                let prev = out[i - 1].clone();
                out.push(prev);
            } else {
                out.push(Arc::new(f(s)?));
            }
        }
        ObstacleSchedule::new(self.grid.clone(), self.times.clone(), out)
    }

    /// Same schedule with every time shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> ObstacleSchedule {
        ObstacleSchedule {
            grid: self.grid.clone(),
            times: self.times.iter().map(|t| t + dt).collect(),
            fields: self.fields.clone(),
        }
    }

    /// Resamples onto `times` with the hold rule.
    pub fn resample(&self, times: &[f64]) -> Result<ObstacleSchedule> {
        let fields = times.iter().map(|&t| self.sample_arc(t)).collect();
        ObstacleSchedule::new(self.grid.clone(), times.to_vec(), fields)
    }
}

/// Pointwise union over the merged time lattice. Each input holds its
/// endpoint snapshots outside its own span.
pub fn schedule_union(a: &ObstacleSchedule, b: &ObstacleSchedule) -> Result<ObstacleSchedule> {
    same_grid(&a.grid, &b.grid)?;
    let mut times: Vec<f64> = a.times.iter().chain(&b.times).cloned().collect();
    times.sort_by(|x, y| x.partial_cmp(y).unwrap());
    times.dedup_by(|x, y| (*x - *y).abs() <= TIME_EPS);
    let mut fields = Vec::with_capacity(times.len());
    let mut prev: Option<(usize, usize, Arc<ScalarField>)> = None;
    for &t in &times {
        let (ia, ib) = (a.index_at(t), b.index_at(t));
        if let Some((pa, pb, f)) = &prev {
            if *pa == ia && *pb == ib {
                fields.push(f.clone());
                continue;
            }
        }
        let (fa, fb) = (&a.fields[ia], &b.fields[ib]);
        let f = if fb.is_empty_set() {
            fa.clone()
        } else if fa.is_empty_set() {
            fb.clone()
        } else {
            Arc::new(fa.union(fb)?)
        };
        prev = Some((ia, ib, f.clone()));
        fields.push(f);
    }
    ObstacleSchedule::new(a.grid.clone(), times, fields)
}

pub fn schedule_union_all(items: &[&ObstacleSchedule]) -> Result<ObstacleSchedule> {
    let (first, rest) = items.split_first().ok_or_else(|| Error::Schedule("union of nothing".into()))?;
    let mut acc = (*first).clone();
    for s in rest {
        acc = schedule_union(&acc, s)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::sdf::sdf_ball;

    fn grid() -> Arc<Grid> {
        Arc::new(make_grid(&[-100.0, -100.0], &[100.0, 100.0], &[21, 21], &[false, false]).unwrap())
    }

    #[test]
    fn hold_rule() {
        let g = grid();
        let f: Vec<_> = (0..3).map(|i| Arc::new(ScalarField::constant(g.clone(), i as f64))).collect();
        let s = ObstacleSchedule::new(g, vec![0.0, 1.0, 2.0], f).unwrap();
        assert_eq!(s.sample(0.5).values()[0], 0.0);
        assert_eq!(s.sample(1.0).values()[0], 1.0);
        assert_eq!(s.sample(7.0).values()[0], 2.0);
        assert_eq!(s.sample(-3.0).values()[0], 0.0);
    }

    #[test]
    fn union_with_empty_is_identity() {
        let g = grid();
        let b = Arc::new(sdf_ball(g.clone(), &[10.0, 0.0], 30.0, &[0, 1]).unwrap());
        let a = ObstacleSchedule::new(g.clone(), vec![0.0, 2.0], vec![b.clone(), b.clone()]).unwrap();
        let e = ObstacleSchedule::empty(g, vec![0.0, 1.0, 2.0]).unwrap();
        let u = schedule_union(&a, &e).unwrap();
        for t in [0.0, 0.5, 1.0, 1.5, 2.0] {
            assert_eq!(u.sample(t), a.sample(t));
        }
    }

    #[test]
    fn union_merges_lattices() {
        let g = grid();
        let b1 = Arc::new(sdf_ball(g.clone(), &[-50.0, 0.0], 20.0, &[0, 1]).unwrap());
        let b2 = Arc::new(sdf_ball(g.clone(), &[50.0, 0.0], 20.0, &[0, 1]).unwrap());
        let a = ObstacleSchedule::new(g.clone(), vec![0.0], vec![b1.clone()]).unwrap();
        let b = ObstacleSchedule::new(g.clone(), vec![1.0], vec![b2.clone()]).unwrap();
        let u = schedule_union(&a, &b).unwrap();
        assert_eq!(u.times(), &[0.0, 1.0]);
        assert_eq!(u.sample(1.0).count_subzero(), b1.count_subzero() + b2.count_subzero());
    }
}
