//! Sequences of field snapshots indexed by time.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Backward,
    Forward,
}

/// Snapshots `V(t, .)` at strictly monotone times. Backward solves store
/// times descending, forward solves ascending.
#[derive(Debug, Clone)]
pub struct TimeField {
    grid: Arc<Grid>,
    times: Vec<f64>,
    fields: Vec<ScalarField>,
}

impl TimeField {
    pub fn new(grid: Arc<Grid>, times: Vec<f64>, fields: Vec<ScalarField>) -> Result<TimeField> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::Schedule("time field needs one field per time, at least one".into()));
        }
        let up = times.windows(2).all(|w| w[1] > w[0]);
        let down = times.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::Schedule("snapshot times must be strictly monotone".into()));
        }
        for f in &fields {
            crate::field::same_grid(&grid, f.grid())?;
        }
        Ok(TimeField { grid, times, fields })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn first(&self) -> &ScalarField {
        &self.fields[0]
    }
    pub fn last(&self) -> &ScalarField {
        &self.fields[self.fields.len() - 1]
    }

    pub fn span(&self) -> (f64, f64) {
        let (a, b) = (self.times[0], self.times[self.times.len() - 1]);
        (a.min(b), a.max(b))
    }

    /// Index of the snapshot closest in time.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// Bracketing snapshots and interpolation weight on the second, with
    /// `t` clamped to the span.
    pub fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 {
            return (0, 0, 0.0);
        }
        let asc = self.times[1] > self.times[0];
        let key = |i: usize| if asc { self.times[i] } else { -self.times[i] };
        let tk = if asc { t } else { -t };
        if tk <= key(0) {
            return (0, 0, 0.0);
        }
        if tk >= key(n - 1) {
            return (n - 1, n - 1, 0.0);
        }
        let hi = (1..n).find(|&i| key(i) >= tk).unwrap();
        let lo = hi - 1;
        let w = (tk - key(lo)) / (key(hi) - key(lo));
        (lo, hi, w)
    }

    /// `V(t, x)` by linear interpolation in time between bracketing
    /// snapshots and multilinear interpolation in space (clamped).
    pub fn value_at(&self, t: f64, x: &[f64]) -> f64 {
        let (a, b, w) = self.bracket(t);
        let va = self.fields[a].interpolate_clamped(x);
        if w == 0.0 {
            return va;
        }
        let vb = self.fields[b].interpolate_clamped(x);
        (1.0 - w) * va + w * vb
    }

    pub fn gradient_at(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (a, b, w) = self.bracket(t);
        let ga = self.fields[a].gradient_at(x)?;
        if w == 0.0 {
            return Ok(ga);
        }
        let gb = self.fields[b].gradient_at(x)?;
        Ok(ga.iter().zip(&gb).map(|(p, q)| (1.0 - w) * p + w * q).collect())
    }

    /// Snapshot in force at `t` under the previous-snapshot hold rule.
    pub fn at_or_before(&self, t: f64) -> &ScalarField {
        let (a, b, w) = self.bracket(t);
        if w >= 1.0 - 1e-12 {
            &self.fields[b]
        } else {
            &self.fields[a]
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<ScalarField>) {
        (self.times, self.fields)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn tf(times: Vec<f64>) -> TimeField {
        let g = Arc::new(make_grid(&[0.0], &[10.0], &[11], &[false]).unwrap());
        let fields = times.iter().map(|&t| ScalarField::constant(g.clone(), t)).collect();
        TimeField::new(g, times, fields).unwrap()
    }

    #[test]
    fn interpolation_in_time_and_clamping() {
        let f = tf(vec![10.0, 8.0, 6.0]);
        assert_eq!(f.value_at(9.0, &[3.0]), 9.0);
        assert_eq!(f.value_at(20.0, &[3.0]), 10.0);
        assert_eq!(f.value_at(0.0, &[3.0]), 6.0);
        assert_eq!(f.span(), (6.0, 10.0));
        let g = tf(vec![0.0, 1.0, 2.0]);
        assert_eq!(g.value_at(1.25, &[0.0]), 1.25);
        assert_eq!(g.at_or_before(1.5).values()[0], 1.0);
        assert_eq!(g.nearest(1.6), 2);
    }

    #[test]
    fn rejects_non_monotone() {
        let g = Arc::new(make_grid(&[0.0], &[10.0], &[11], &[false]).unwrap());
        let f = ScalarField::constant(g.clone(), 0.0);
        assert!(TimeField::new(g, vec![0.0, 0.0], vec![f.clone(), f]).is_err());
    }
}
