//! Signed-distance construction, reinitialization, dilation and Minkowski sums.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField};
use crate::grid::{check_dims, Grid, MAX_DIMS};

pub const DEFAULT_REINIT_ITERATIONS: usize = 8;

/// `||x_dims - center|| - radius`, free in the other dimensions.
pub fn sdf_ball(grid: Arc<Grid>, center: &[f64], radius: f64, dims: &[usize]) -> Result<ScalarField> {
    check_dims(grid.ndim(), dims)?;
    if center.len() != dims.len() {
        return Err(Error::BadDims(format!("center has {} coordinates for {} dims", center.len(), dims.len())));
    }
    if !(radius > 0.0) {
        return Err(Error::NegativeRadius(radius));
    }
    let dims = dims.to_vec();
    let center = center.to_vec();
    Ok(ScalarField::from_fn(grid, move |x| {
        dims.iter().zip(&center).map(|(&k, c)| (x[k] - c).powi(2)).sum::<f64>().sqrt() - radius
    }))
}

/// Exact signed distance to the axis-aligned box `[lo, hi]` in `dims`.
pub fn sdf_rect(grid: Arc<Grid>, lo: &[f64], hi: &[f64], dims: &[usize]) -> Result<ScalarField> {
    check_dims(grid.ndim(), dims)?;
    if lo.len() != dims.len() || hi.len() != dims.len() {
        return Err(Error::BadDims("box corner length differs from dims".into()));
    }
    if lo.iter().zip(hi).any(|(a, b)| b <= a) {
        return Err(Error::BadDims("box max must exceed min in every dimension".into()));
    }
    let dims = dims.to_vec();
    let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    Ok(ScalarField::from_fn(grid, move |x| {
        let mut outside = 0.0;
        let mut inside = f64::NEG_INFINITY;
        for (a, &k) in dims.iter().enumerate() {
            let q = (x[k] - c[a]).abs() - half[a];
            outside += q.max(0.0).powi(2);
            inside = inside.max(q);
        }
        outside.sqrt() + inside.min(0.0)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReinitReport {
    /// The field had no sign change, so values were returned unchanged.
    pub uniform_sign: bool,
    pub sweeps: usize,
}

/// Reinitializes to signed distance over all dimensions.
pub fn reinit_sdf(field: &ScalarField, iterations: usize) -> (ScalarField, ReinitReport) {
    let dims: Vec<usize> = (0..field.grid().ndim()).collect();
    reinit_sdf_dims(field, iterations, &dims).expect("all dims are valid")
}

/// Reinitializes to signed distance measured in the subspace `dims`; every
/// other dimension is treated slice by slice.
///
/// Interface nodes get their distance from linear crossing estimates along
/// each axis. Distances then propagate by Gauss-Seidel fast sweeping of the
/// Godunov upwind discretization of `|grad u| = 1`. The sign of every node
/// is kept, so the sub-zero set is preserved exactly.
pub fn reinit_sdf_dims(
    field: &ScalarField,
    iterations: usize,
    dims: &[usize],
) -> Result<(ScalarField, ReinitReport)> {
    let g = field.grid().clone();
    check_dims(g.ndim(), dims)?;
    let v = field.values();
    let any_in = v.iter().any(|&x| x <= 0.0);
    let any_out = v.iter().any(|&x| x > 0.0);
    if !(any_in && any_out) {
        return Ok((field.clone(), ReinitReport { uniform_sign: true, sweeps: 0 }));
    }
    let n = g.len();
    let inside: Vec<bool> = v.iter().map(|&x| x <= 0.0).collect();
    let mut u = vec![f64::INFINITY; n];
    let mut fixed = vec![false; n];
    let mut idx = [0usize; MAX_DIMS];

    for flat in 0..n {
        g.multi_index(flat, &mut idx);
        let mut inv_sq = 0.0;
        let mut zero = false;
        let mut band = false;
        for &k in dims {
            let mut best = f64::INFINITY;
            for nb in neighbors(&g, flat, &idx, k).into_iter().flatten() {
                if inside[nb] != inside[flat] {
                    let (a, b) = (v[flat], v[nb]);
                    let theta = if a.is_finite() && b.is_finite() && a != b {
                        (a / (a - b)).clamp(0.0, 1.0)
                    } else if a == 0.0 {
                        0.0
                    } else {
                        1.0
                    };
                    best = best.min(theta * g.spacing()[k]);
                }
            }
            if best.is_finite() {
                band = true;
                if best == 0.0 {
                    zero = true;
                } else {
                    inv_sq += 1.0 / (best * best);
                }
            }
        }
        if band {
            let axis = if zero { 0.0 } else { 1.0 / inv_sq.sqrt() };
            let mut grad_sq = 0.0;
            for &k in dims {
                let dk = field.node_derivative(flat, &idx, k);
                grad_sq += dk * dk;
            }
            let by_grad = if grad_sq > 0.0 && v[flat].is_finite() {
                v[flat].abs() / grad_sq.sqrt()
            } else {
                f64::INFINITY
            };
            u[flat] = axis.min(by_grad).min(min_axis(&g, &idx, flat, dims, v, &inside));
            fixed[flat] = true;
        }
    }

    let m = dims.len();
    let orderings = 1usize << m;
    let passes = 2 * m;
    let mut sweeps = 0;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for it in 0..iterations {
        let mut changed = false;
        for p in 0..passes {
            let o = (it * passes + p) % orderings;
            sweep_order(&g, dims, o, &mut order);
            for &flat in &order {
                if fixed[flat] {
                    continue;
                }
                g.multi_index(flat, &mut idx);
                let cand = godunov(&g, &u, flat, &idx, dims);
                if cand < u[flat] {
                    if u[flat] - cand > 1e-12 * (1.0 + cand) {
                        changed = true;
                    }
                    u[flat] = cand;
                }
            }
            sweeps += 1;
        }
        if !changed {
            break;
        }
    }

    let values = u
        .iter()
        .zip(&inside)
        .map(|(&d, &ins)| if ins { -d } else { d })
        .collect();
    Ok((ScalarField::from_parts(g, values), ReinitReport { uniform_sign: false, sweeps }))
}

/// Smallest single-axis crossing distance (an upper bound on the distance).
fn min_axis(g: &Grid, idx: &[usize], flat: usize, dims: &[usize], v: &[f64], inside: &[bool]) -> f64 {
    let mut best = f64::INFINITY;
    for &k in dims {
        for nb in neighbors(g, flat, idx, k).into_iter().flatten() {
            if inside[nb] != inside[flat] {
                let (a, b) = (v[flat], v[nb]);
                let theta = if a.is_finite() && b.is_finite() && a != b { (a / (a - b)).clamp(0.0, 1.0) } else { 1.0 };
                best = best.min(theta * g.spacing()[k]);
            }
        }
    }
    best
}

fn neighbors(g: &Grid, flat: usize, idx: &[usize], k: usize) -> [Option<usize>; 2] {
    let n = g.counts()[k];
    let s = g.strides()[k];
    let i = idx[k];
    let base = flat - i * s;
    if g.periodic()[k] {
        [Some(base + ((i + n - 1) % n) * s), Some(base + ((i + 1) % n) * s)]
    } else {
        [(i > 0).then(|| flat - s), (i + 1 < n).then(|| flat + s)]
    }
}

fn godunov(g: &Grid, u: &[f64], flat: usize, idx: &[usize], dims: &[usize]) -> f64 {
    let mut terms = [(0.0f64, 0.0f64); MAX_DIMS];
    let mut m = 0;
    for &k in dims {
        let a = neighbors(g, flat, idx, k)
            .into_iter()
            .flatten()
            .map(|nb| u[nb])
            .fold(f64::INFINITY, f64::min);
        if a.is_finite() {
            terms[m] = (a, g.spacing()[k]);
            m += 1;
        }
    }
    if m == 0 {
        return f64::INFINITY;
    }
    let terms = &mut terms[..m];
    terms.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut sol = terms[0].0 + terms[0].1;
    // Solve sum_k ((u - a_k) / h_k)^2 = 1 over growing active sets.
    for j in 1..m {
        if sol <= terms[j].0 {
            break;
        }
        let (mut qa, mut qb, mut qc) = (0.0, 0.0, -1.0);
        for &(a, h) in &terms[..=j] {
            let w = 1.0 / (h * h);
            qa += w;
            qb -= 2.0 * a * w;
            qc += a * a * w;
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            break;
        }
        sol = (-qb + disc.sqrt()) / (2.0 * qa);
    }
    sol
}

/// Node visiting order for one sweep: bit `a` of `ordering` reverses
/// `dims[a]`. Remaining dimensions run forward.
fn sweep_order(g: &Grid, dims: &[usize], ordering: usize, out: &mut Vec<usize>) {
    out.clear();
    let d = g.ndim();
    let mut reversed = [false; MAX_DIMS];
    for (a, &k) in dims.iter().enumerate() {
        reversed[k] = ordering >> a & 1 == 1;
    }
    let mut idx = [0usize; MAX_DIMS];
    let n = g.len();
    for _ in 0..n {
        let mut flat = 0;
        for k in 0..d {
            let i = if reversed[k] { g.counts()[k] - 1 - idx[k] } else { idx[k] };
            flat += i * g.strides()[k];
        }
        out.push(flat);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < g.counts()[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Minkowski sum with the ball of `radius` in the subspace `dims`:
/// reinitialize, then subtract the radius.
pub fn dilate_ball(field: &ScalarField, radius: f64, dims: &[usize]) -> Result<ScalarField> {
    if !(radius >= 0.0) {
        return Err(Error::NegativeRadius(radius));
    }
    if radius == 0.0 {
        return Ok(field.clone());
    }
    let (r, _) = reinit_sdf_dims(field, DEFAULT_REINIT_ITERATIONS, dims)?;
    Ok(r.map(|v| v - radius))
}

/// Dilation of a field already known to be a signed distance in the
/// relevant subspace (no reinitialization).
pub fn offset(field: &ScalarField, radius: f64) -> Result<ScalarField> {
    if !(radius >= 0.0) {
        return Err(Error::NegativeRadius(radius));
    }
    Ok(field.map(|v| v - radius))
}

/// Exact min-convolution: `value(x) = min { a(x - y) : b(y) <= 0 }` over
/// grid nodes. Needs a node at the origin in every dimension.
pub fn minkowski_sum(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    same_grid(a.grid(), b.grid())?;
    let g = a.grid().clone();
    let d = g.ndim();
    let mut origin = [0i64; MAX_DIMS];
    for k in 0..d {
        let s = -g.mins()[k] / g.spacing()[k];
        let r = s.round();
        if (s - r).abs() > 1e-6 || (!g.periodic()[k] && (r < 0.0 || r > (g.counts()[k] - 1) as f64)) {
            return Err(Error::NoOriginNode(k));
        }
        origin[k] = r as i64;
    }
    let mut idx = [0usize; MAX_DIMS];
    let mut offsets: Vec<[i64; MAX_DIMS]> = Vec::new();
    for (flat, &bv) in b.values().iter().enumerate() {
        if bv <= 0.0 {
            g.multi_index(flat, &mut idx);
            let mut o = [0i64; MAX_DIMS];
            for k in 0..d {
                o[k] = idx[k] as i64 - origin[k];
            }
            offsets.push(o);
        }
    }
    if offsets.is_empty() {
        return Err(Error::EmptySummand);
    }
    let av = a.values();
    let mut out = vec![f64::INFINITY; g.len()];
    for (flat, slot) in out.iter_mut().enumerate() {
        g.multi_index(flat, &mut idx);
        let mut best = f64::INFINITY;
        'off: for o in &offsets {
            let mut src = 0usize;
            for k in 0..d {
                let n = g.counts()[k] as i64;
                let mut i = idx[k] as i64 - o[k];
                if g.periodic()[k] {
                    i = i.rem_euclid(n);
                } else if i < 0 || i >= n {
                    continue 'off;
                }
                src += i as usize * g.strides()[k];
            }
            if av[src] < best {
                best = av[src];
            }
        }
        *slot = best;
    }
    Ok(ScalarField::from_parts(g, out))
}

/// Largest Euclidean norm of the `dims` coordinates over sub-zero nodes.
pub fn max_norm_of_subzero(field: &ScalarField, dims: &[usize]) -> Result<f64> {
    let g = field.grid();
    check_dims(g.ndim(), dims)?;
    let mut idx = [0usize; MAX_DIMS];
    let mut best: Option<f64> = None;
    for (flat, &v) in field.values().iter().enumerate() {
        if v <= 0.0 {
            g.multi_index(flat, &mut idx);
            let r = dims.iter().map(|&k| g.coord(k, idx[k]).powi(2)).sum::<f64>().sqrt();
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best.ok_or(Error::EmptySet)
}

/// Largest distance from the origin to the zero level set in the `dims`
/// plane. Starts from the outermost sub-zero nodes and marches outward
/// along the ray through each, interpolating the crossing. Where a ray
/// leaves the grid first, the node norm stands.
pub fn outer_radius(field: &ScalarField, dims: &[usize]) -> Result<f64> {
    check_dims(field.grid().ndim(), dims)?;
    let p = field.project_min(dims)?;
    let g = p.grid().clone();
    let all: Vec<usize> = (0..dims.len()).collect();
    let node_max = max_norm_of_subzero(&p, &all)?;
    let h = g.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let step = h / 8.0;
    let d = g.ndim();
    let mut idx = [0usize; MAX_DIMS];
    let mut x = [0.0; MAX_DIMS];
    let mut best = node_max;
    for (flat, &v0) in p.values().iter().enumerate() {
        if v0 > 0.0 {
            continue;
        }
        g.multi_index(flat, &mut idx);
        for k in 0..d {
            x[k] = g.coord(k, idx[k]);
        }
        let r0 = x[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
        if r0 == 0.0 || r0 < node_max - 2.0 * h {
            continue;
        }
        let mut dir = [0.0; MAX_DIMS];
        for k in 0..d {
            dir[k] = x[k] / r0;
        }
        let (mut s, mut vp) = (r0, v0);
        loop {
            let s2 = s + step;
            let pt: Vec<f64> = (0..d).map(|k| dir[k] * s2).collect();
            if !g.contains(&pt) {
                break;
            }
            let v = p.interpolate(&pt)?;
            if v > 0.0 {
                best = best.max(s + step * (-vp) / (v - vp));
                break;
            }
            s = s2;
            vp = v;
        }
    }
    Ok(best)
}
