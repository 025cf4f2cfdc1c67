//! Scalar fields on grids and the set algebra on their sub-zero sets.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{check_dims, Grid, MAX_DIMS};

/// A value per grid node. The represented set is `{x : value(x) <= 0}`.
///
/// Values may be `+inf` (for "no set here") but never NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::NonFinite { node });
        }
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> ScalarField {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, v: f64) -> ScalarField {
        let n = grid.len();
        ScalarField { grid, values: vec![v; n] }
    }

    /// The field that represents the empty set everywhere.
    pub fn empty_set(grid: Arc<Grid>) -> ScalarField {
        ScalarField::constant(grid, f64::INFINITY)
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let d = grid.ndim();
        let mut idx = [0usize; MAX_DIMS];
        let mut x = [0.0; MAX_DIMS];
        let mut values = Vec::with_capacity(grid.len());
        for flat in 0..grid.len() {
            grid.multi_index(flat, &mut idx);
            for k in 0..d {
                x[k] = grid.coord(k, idx[k]);
            }
            values.push(f(&x[..d]));
        }
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn count_subzero(&self) -> usize {
        self.values.iter().filter(|&&v| v <= 0.0).count()
    }
    pub fn is_empty_set(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn union(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, f64::min)
    }
    pub fn intersect(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, f64::max)
    }
    pub fn complement(&self) -> ScalarField {
        self.map(|v| -v)
    }
    pub fn union_in_place(&mut self, other: &ScalarField) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = a.min(b);
        }
        Ok(())
    }

    /// Per-dimension cell index and fraction for a point, or `None` when
    /// it lies outside a bounded dimension.
    fn locate(&self, x: &[f64], clamp: bool) -> Option<[(usize, usize, f64); MAX_DIMS]> {
        let g = &*self.grid;
        let mut loc = [(0usize, 0usize, 0.0f64); MAX_DIMS];
        for k in 0..g.ndim() {
            let n = g.counts()[k];
            let h = g.spacing()[k];
            if g.periodic()[k] {
                let xk = g.wrap(k, x[k]);
                let s = (xk - g.mins()[k]) / h;
                let i = (s.floor() as usize).min(n - 1);
                loc[k] = (i, (i + 1) % n, (s - i as f64).clamp(0.0, 1.0));
            } else {
                let mut s = (x[k] - g.mins()[k]) / h;
                let top = (n - 1) as f64;
                if !(-1e-9..=top + 1e-9).contains(&s) {
                    if !clamp {
                        return None;
                    }
                }
                s = s.clamp(0.0, top);
                let i = (s.floor() as usize).min(n - 2);
                loc[k] = (i, i + 1, s - i as f64);
            }
        }
        Some(loc)
    }

    fn blend(&self, loc: &[(usize, usize, f64); MAX_DIMS], node_value: impl Fn(usize) -> f64) -> f64 {
        let g = &*self.grid;
        let d = g.ndim();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..d {
                let (i0, i1, f) = loc[k];
                if corner >> k & 1 == 1 {
                    w *= f;
                    flat += i1 * g.strides()[k];
                } else {
                    w *= 1.0 - f;
                    flat += i0 * g.strides()[k];
                }
            }
            if w != 0.0 {
                acc += w * node_value(flat);
            }
        }
        acc
    }

    /// Multilinear interpolation. Periodic dimensions wrap; points outside
    /// a bounded dimension are an error.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let loc = self.locate(x, false).ok_or_else(|| Error::OutOfBounds { point: x.to_vec() })?;
        Ok(self.blend(&loc, |f| self.values[f]))
    }

    /// Multilinear interpolation with bounded dimensions clamped to the grid.
    pub fn interpolate_clamped(&self, x: &[f64]) -> f64 {
        let loc = self.locate(x, true).expect("clamped locate");
        self.blend(&loc, |f| self.values[f])
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.grid.ndim() {
            return Err(Error::DimMismatch(format!(
                "point has {} coordinates, grid has {}",
                x.len(),
                self.grid.ndim()
            )));
        }
        Ok(())
    }

    /// Central-difference derivative along `dim` at a node (one-sided at
    /// bounded edges).
    pub fn node_derivative(&self, flat: usize, idx: &[usize], dim: usize) -> f64 {
        let g = &*self.grid;
        let n = g.counts()[dim];
        let s = g.strides()[dim];
        let h = g.spacing()[dim];
        let i = idx[dim];
        let base = flat - i * s;
        let (lo, hi, span) = if g.periodic()[dim] {
            ((i + n - 1) % n, (i + 1) % n, 2.0 * h)
        } else if i == 0 {
            (0, 1, h)
        } else if i == n - 1 {
            (n - 2, n - 1, h)
        } else {
            (i - 1, i + 1, 2.0 * h)
        };
        let a = self.values[base + lo * s];
        let b = self.values[base + hi * s];
        let d = (b - a) / span;
        if d.is_finite() {
            d
        } else {
            0.0
        }
    }

    /// Gradient at an arbitrary point: node central differences blended
    /// multilinearly. Bounded dimensions are clamped.
    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let g = &*self.grid;
        let d = g.ndim();
        let loc = self.locate(x, true).expect("clamped locate");
        let mut out = vec![0.0; d];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.blend(&loc, |flat| {
                let mut idx = [0usize; MAX_DIMS];
                g.multi_index(flat, &mut idx);
                self.node_derivative(flat, &idx, k)
            });
        }
        Ok(out)
    }

    /// Minimum over the dimensions not listed in `keep`, on the sub-grid of
    /// the kept dimensions.
    pub fn project_min(&self, keep: &[usize]) -> Result<ScalarField> {
        let g = &*self.grid;
        check_dims(g.ndim(), keep)?;
        let sub = Arc::new(g.subgrid(keep)?);
        let mut values = vec![f64::INFINITY; sub.len()];
        let mut idx = [0usize; MAX_DIMS];
        for (flat, &v) in self.values.iter().enumerate() {
            g.multi_index(flat, &mut idx);
            let mut t = 0;
            for (a, &k) in keep.iter().enumerate() {
                t += idx[k] * sub.strides()[a];
            }
            if v < values[t] {
                values[t] = v;
            }
        }
        Ok(ScalarField { grid: sub, values })
    }

    /// Broadcasts this field onto `target`, where dimension `a` of `self`
    /// corresponds to dimension `dims[a]` of `target`. Other target
    /// dimensions are free.
    pub fn extend_to(&self, target: Arc<Grid>, dims: &[usize]) -> Result<ScalarField> {
        check_dims(target.ndim(), dims)?;
        if dims.len() != self.grid.ndim() {
            return Err(Error::BadDims("extension map length differs from source ndim".into()));
        }
        for (a, &k) in dims.iter().enumerate() {
            if target.counts()[k] != self.grid.counts()[a]
                || (target.mins()[k] - self.grid.mins()[a]).abs() > 1e-9 * target.spacing()[k]
                || (target.maxs()[k] - self.grid.maxs()[a]).abs() > 1e-9 * target.spacing()[k]
            {
                return Err(Error::GridMismatch(format!("dimension {k} does not match source {a}")));
            }
        }
        let mut idx = [0usize; MAX_DIMS];
        let mut values = Vec::with_capacity(target.len());
        for flat in 0..target.len() {
            target.multi_index(flat, &mut idx);
            let mut s = 0;
            for (a, &k) in dims.iter().enumerate() {
                s += idx[k] * self.grid.strides()[a];
            }
            values.push(self.values[s]);
        }
        Ok(ScalarField { grid: target, values })
    }

    /// Samples a 2-D slice over dimensions `(d0, d1)` with every other
    /// dimension fixed to the coordinate in `fixed` (interpolated).
    pub fn slice_2d(&self, d0: usize, d1: usize, fixed: &[f64]) -> Result<ScalarField> {
        let g = &*self.grid;
        check_dims(g.ndim(), &[d0, d1])?;
        let sub = Arc::new(g.subgrid(&[d0, d1])?);
        let mut x = fixed.to_vec();
        x.resize(g.ndim(), 0.0);
        let mut values = Vec::with_capacity(sub.len());
        for i in 0..sub.counts()[0] {
            for j in 0..sub.counts()[1] {
                x[d0] = sub.coord(0, i);
                x[d1] = sub.coord(1, j);
                values.push(self.interpolate_clamped(&x));
            }
        }
        Ok(ScalarField { grid: sub, values })
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch("fields live on different grids".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn grid2() -> Arc<Grid> {
        Arc::new(make_grid(&[-100.0, -100.0], &[100.0, 100.0], &[41, 41], &[false, false]).unwrap())
    }

    #[test]
    fn interpolation_exact_for_affine() {
        let g = grid2();
        let f = ScalarField::from_fn(g, |x| 3.0 * x[0] - 2.0 * x[1] + 1.0);
        for p in [[12.3, -45.6], [-99.9, 99.9], [0.0, 0.0], [100.0, -100.0]] {
            let v = f.interpolate(&p).unwrap();
            assert!((v - (3.0 * p[0] - 2.0 * p[1] + 1.0)).abs() < 1e-9);
        }
        assert!(matches!(f.interpolate(&[101.0, 0.0]), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn periodic_wrap_interpolation() {
        use std::f64::consts::PI;
        let g = Arc::new(make_grid(&[-PI], &[PI], &[64], &[true]).unwrap());
        let f = ScalarField::from_fn(g, |x| x[0].cos());
        let a = f.interpolate(&[PI - 0.01]).unwrap();
        let b = f.interpolate(&[-PI - 0.01]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - (PI - 0.01).cos()).abs() < 1e-2);
    }

    #[test]
    fn set_algebra() {
        let g = grid2();
        let a = ScalarField::from_fn(g.clone(), |x| x[0]);
        let b = ScalarField::from_fn(g.clone(), |x| x[1]);
        let u = a.union(&b).unwrap();
        let i = a.intersect(&b).unwrap();
        for k in 0..g.len() {
            assert_eq!(u.values()[k], a.values()[k].min(b.values()[k]));
            assert_eq!(i.values()[k], a.values()[k].max(b.values()[k]));
        }
        assert_eq!(a.complement().complement(), a);
        let other = Arc::new(make_grid(&[0.0, 0.0], &[1.0, 1.0], &[5, 5], &[false, false]).unwrap());
        let c = ScalarField::constant(other, 1.0);
        assert!(matches!(a.union(&c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn gradient_of_linear() {
        let g = grid2();
        let f = ScalarField::from_fn(g, |x| 2.0 * x[0] + 0.5 * x[1]);
        let gr = f.gradient_at(&[13.0, -71.0]).unwrap();
        assert!((gr[0] - 2.0).abs() < 1e-9 && (gr[1] - 0.5).abs() < 1e-9);
        let edge = f.gradient_at(&[100.0, 100.0]).unwrap();
        assert!((edge[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn projection_and_extension() {
        let g = Arc::new(make_grid(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &[3, 4, 5], &[false, false, true]).unwrap());
        let f = ScalarField::from_fn(g.clone(), |x| x[0] + x[1] + (x[2] - 0.4).abs());
        let p = f.project_min(&[0, 1]).unwrap();
        assert_eq!(p.grid().counts(), &[3, 4]);
        let want = f.values().chunks(5).map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min));
        for (a, b) in p.values().iter().zip(want) {
            assert_eq!(*a, b);
        }
        let e = p.extend_to(g.clone(), &[0, 1]).unwrap();
        for flat in 0..g.len() {
            assert_eq!(e.values()[flat], p.values()[flat / 5]);
        }
    }

    proptest! {
        #[test]
        fn union_commutes_and_contains(seed in 0u64..1000) {
            let g = grid2();
            let a = ScalarField::from_fn(g.clone(), |x| ((x[0] + seed as f64) * 0.07).sin() * 10.0);
            let b = ScalarField::from_fn(g.clone(), |x| ((x[1] - seed as f64) * 0.05).cos() * 10.0);
            let ab = a.union(&b).unwrap();
            prop_assert_eq!(&ab, &b.union(&a).unwrap());
            let aib = a.intersect(&b).unwrap();
            for k in 0..g.len() {
                if a.values()[k] <= 0.0 { prop_assert!(ab.values()[k] <= 0.0); }
                if aib.values()[k] <= 0.0 { prop_assert!(a.values()[k] <= 0.0 && b.values()[k] <= 0.0); }
            }
        }

        #[test]
        fn interpolation_matches_nodes(i in 0usize..41, j in 0usize..41) {
            let g = grid2();
            let f = ScalarField::from_fn(g.clone(), |x| (x[0] * 0.03).sin() + x[1] * x[1] * 1e-3);
            let x = [g.coord(0, i), g.coord(1, j)];
            let v = f.interpolate(&x).unwrap();
            prop_assert!((v - f.values()[i * 41 + j]).abs() < 1e-12);
        }
    }
}
