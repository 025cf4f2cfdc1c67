//! Axis-aligned Cartesian grids with optional periodic dimensions.
//!
//! Nodes are stored row-major: the last dimension varies fastest. Along a
//! periodic dimension the upper bound is excluded, so the spacing is
//! `(max - min) / count`; otherwise it is `(max - min) / (count - 1)`.

use crate::error::{Error, Result};

pub const MAX_DIMS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    counts: Vec<usize>,
    periodic: Vec<bool>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(mins: &[f64], maxs: &[f64], counts: &[usize], periodic: &[bool]) -> Result<Grid> {
        let d = mins.len();
        if d == 0 || d > MAX_DIMS {
            return Err(Error::InvalidGrid(format!("ndim must be in 1..={MAX_DIMS}, got {d}")));
        }
        if maxs.len() != d || counts.len() != d || periodic.len() != d {
            return Err(Error::InvalidGrid("mins, maxs, counts, periodic lengths differ".into()));
        }
        for k in 0..d {
            if !mins[k].is_finite() || !maxs[k].is_finite() {
                return Err(Error::InvalidGrid(format!("dimension {k}: non-finite bound")));
            }
            if maxs[k] <= mins[k] {
                return Err(Error::NonMonotoneBounds { dim: k });
            }
            if counts[k] < 3 {
                return Err(Error::TooFewNodes { dim: k, count: counts[k] });
            }
        }
        let spacing = (0..d)
            .map(|k| {
                let cells = if periodic[k] { counts[k] } else { counts[k] - 1 };
                (maxs[k] - mins[k]) / cells as f64
            })
            .collect();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Ok(Grid {
            mins: mins.to_vec(),
            maxs: maxs.to_vec(),
            counts: counts.to_vec(),
            periodic: periodic.to_vec(),
            spacing,
            strides,
        })
    }

    pub fn ndim(&self) -> usize {
        self.counts.len()
    }
    pub fn mins(&self) -> &[f64] {
        &self.mins
    }
    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, dim: usize, i: usize) -> f64 {
        self.mins[dim] + i as f64 * self.spacing[dim]
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for k in 0..self.ndim() {
            out[k] = flat / self.strides[k];
            flat %= self.strides[k];
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = [0usize; MAX_DIMS];
        self.multi_index(flat, &mut idx);
        (0..self.ndim()).map(|k| self.coord(k, idx[k])).collect()
    }

    /// Wraps a coordinate of a periodic dimension into `[min, max)`.
    pub fn wrap(&self, dim: usize, x: f64) -> f64 {
        if !self.periodic[dim] {
            return x;
        }
        let span = self.maxs[dim] - self.mins[dim];
        let mut r = (x - self.mins[dim]).rem_euclid(span);
        if r >= span {
            r = 0.0;
        }
        self.mins[dim] + r
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let tol = 1e-9;
        x.len() == self.ndim()
            && (0..self.ndim()).all(|k| {
                self.periodic[k]
                    || (x[k] >= self.mins[k] - tol * self.spacing[k]
                        && x[k] <= self.maxs[k] + tol * self.spacing[k])
            })
    }

    /// Index of the node nearest to `x` (clamped along bounded dimensions).
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let mut flat = 0;
        for k in 0..self.ndim() {
            let xk = self.wrap(k, x[k]);
            let mut i = ((xk - self.mins[k]) / self.spacing[k]).round() as i64;
            if self.periodic[k] {
                i = i.rem_euclid(self.counts[k] as i64);
            } else {
                i = i.clamp(0, self.counts[k] as i64 - 1);
            }
            flat += i as usize * self.strides[k];
        }
        flat
    }

    /// Sub-grid keeping only the listed dimensions, in the given order.
    pub fn subgrid(&self, dims: &[usize]) -> Result<Grid> {
        check_dims(self.ndim(), dims)?;
        let mins: Vec<f64> = dims.iter().map(|&k| self.mins[k]).collect();
        let maxs: Vec<f64> = dims.iter().map(|&k| self.maxs[k]).collect();
        let counts: Vec<usize> = dims.iter().map(|&k| self.counts[k]).collect();
        let periodic: Vec<bool> = dims.iter().map(|&k| self.periodic[k]).collect();
        Grid::new(&mins, &maxs, &counts, &periodic)
    }

    /// Same bounds with every count multiplied by `scale` (at least 3 nodes).
    pub fn scaled(&self, scale: f64) -> Result<Grid> {
        let counts: Vec<usize> = self
            .counts
            .iter()
            .map(|&n| ((n as f64 * scale).round() as usize).max(3))
            .collect();
        Grid::new(&self.mins, &self.maxs, &counts, &self.periodic)
    }
}

pub(crate) fn check_dims(ndim: usize, dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::BadDims("empty dimension list".into()));
    }
    for (a, &k) in dims.iter().enumerate() {
        if k >= ndim {
            return Err(Error::BadDims(format!("dimension {k} >= ndim {ndim}")));
        }
        if dims[..a].contains(&k) {
            return Err(Error::BadDims(format!("dimension {k} listed twice")));
        }
    }
    Ok(())
}

/// Builds a grid, validating bounds, counts and periodicity.
pub fn make_grid(mins: &[f64], maxs: &[f64], counts: &[usize], periodic: &[bool]) -> Result<Grid> {
    Grid::new(mins, maxs, counts, periodic)
}
