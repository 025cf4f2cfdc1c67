//! Plot data: zero contours of heading slices, by marching squares.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::timefield::TimeField;

/// Cell edge, `(horizontal, i, j)`: a horizontal edge joins nodes `(i, j)`
/// and `(i + 1, j)`, a vertical one `(i, j)` and `(i, j + 1)`.
type EdgeKey = (bool, usize, usize);

/// Zero contour of a 2-D field as polylines. Closed loops repeat their
/// first point at the end. Sub-zero nodes count as inside.
pub fn zero_contour(field: &ScalarField) -> Result<Vec<Vec<[f64; 2]>>> {
    let g = field.grid();
    if g.ndim() != 2 {
        return Err(Error::DimMismatch(format!("contours need a 2-D field, got {} dimensions", g.ndim())));
    }
    let (nx, ny) = (g.counts()[0], g.counts()[1]);
    let v = field.values();
    let at = |i: usize, j: usize| v[i * ny + j];
    let inside = |i: usize, j: usize| at(i, j) <= 0.0;

    let point = |k: EdgeKey| -> [f64; 2] {
        let (horizontal, i, j) = k;
        let (i1, j1) = if horizontal { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (at(i, j), at(i1, j1));
        let s = if a.is_finite() && b.is_finite() && a != b { (a / (a - b)).clamp(0.0, 1.0) } else if a.is_finite() { 0.0 } else { 1.0 };
        let x0 = [g.coord(0, i), g.coord(1, j)];
        let x1 = [g.coord(0, i1), g.coord(1, j1)];
        [x0[0] + s * (x1[0] - x0[0]), x0[1] + s * (x1[1] - x0[1])]
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            // Corners counter-clockwise from (i, j).
            let mask = inside(i, j) as u8
                | (inside(i + 1, j) as u8) << 1
                | (inside(i + 1, j + 1) as u8) << 2
                | (inside(i, j + 1) as u8) << 3;
            let bottom = (true, i, j);
            let right = (false, i + 1, j);
            let top = (true, i, j + 1);
            let left = (false, i, j);
            let centre_inside = || {
                let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                c.iter().all(|x| x.is_finite()) && c.iter().sum::<f64>() <= 0.0
            };
            match mask {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if centre_inside() {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if centre_inside() {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!("four-bit mask"),
            }
        }
    }

    // Every crossed edge is shared by at most two segments.
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        by_edge.entry(*a).or_default().push(s);
        by_edge.entry(*b).or_default().push(s);
    }
    let other_end = |s: usize, k: EdgeKey| if segments[s].0 == k { segments[s].1 } else { segments[s].0 };
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    // Open chains start at edges with a single segment; loops anywhere.
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&s| by_edge[&segments[s].0].len() == 1 || by_edge[&segments[s].1].len() == 1)
        .collect();
    starts.extend(0..segments.len());
    for s0 in starts {
        if used[s0] {
            continue;
        }
        let (a, b) = segments[s0];
        let mut k = if by_edge[&b].len() == 1 { b } else { a };
        let mut keys = vec![k];
        let mut s = s0;
        loop {
            used[s] = true;
            k = other_end(s, k);
            keys.push(k);
            match by_edge[&k].iter().find(|&&n| !used[n]) {
                Some(&n) => s = n,
                None => break,
            }
        }
        lines.push(keys.into_iter().map(point).collect());
    }
    Ok(lines)
}

/// `t, contour, x, y` rows for one snapshot's polylines.
pub fn contour_csv(t: f64, lines: &[Vec<[f64; 2]>]) -> String {
    let mut s = String::from("t,contour,x,y\n");
    for (c, line) in lines.iter().enumerate() {
        for p in line {
            let _ = writeln!(s, "{t},{c},{},{}", p[0], p[1]);
        }
    }
    s
}

/// Heading slice of a planning or relative field. Fields with two
/// dimensions are returned unchanged.
pub fn heading_slice(field: &ScalarField, heading: Option<f64>) -> Result<ScalarField> {
    let g = field.grid();
    match g.ndim() {
        2 => Ok(field.clone()),
        3 => {
            let h = heading.ok_or_else(|| Error::InputOutOfBounds("a heading is needed for 3-D fields".into()))?;
            if h < g.mins()[2] || h > g.maxs()[2] {
                return Err(Error::OutOfBounds { point: vec![h] });
            }
            field.slice_2d(0, 1, &[0.0, 0.0, h])
        }
        d => Err(Error::DimMismatch(format!("cannot slice a {d}-D field"))),
    }
}

/// Writes `{stem}_{k:05}.csv` per snapshot and returns the paths.
pub fn export_slices(tf: &TimeField, heading: Option<f64>, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::with_capacity(tf.len());
    for (k, (t, f)) in tf.times().iter().zip(tf.fields()).enumerate() {
        let lines = zero_contour(&heading_slice(f, heading)?)?;
        let path = dir.join(format!("{stem}_{k:05}.csv"));
        fs::write(&path, contour_csv(*t, &lines))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::sync::Arc;

    fn ball(n: usize, r: f64) -> ScalarField {
        let g = Arc::new(make_grid(&[-100.0, -100.0], &[100.0, 100.0], &[n, n], &[false, false]).unwrap());
        ScalarField::from_fn(g, |x| x[0].hypot(x[1]) - r)
    }

    fn length(line: &[[f64; 2]]) -> f64 {
        line.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
    }

    #[test]
    fn ball_contour_is_one_closed_circle() {
        let f = ball(41, 60.0);
        let lines = zero_contour(&f).unwrap();
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        assert_eq!(l.first(), l.last());
        let want = std::f64::consts::TAU * 60.0;
        assert!((length(l) - want).abs() < 0.05 * want, "perimeter {}", length(l));
        let h = f.grid().spacing()[0];
        for p in l {
            assert!(f.interpolate(p).unwrap().abs() <= h);
        }
    }

    #[test]
    fn empty_and_full_sets_have_no_contour() {
        let g = ball(11, 0.0).grid().clone();
        assert!(zero_contour(&ScalarField::empty_set(g.clone())).unwrap().is_empty());
        assert!(zero_contour(&ScalarField::from_fn(g, |_| -1.0)).unwrap().is_empty());
        assert_eq!(contour_csv(0.0, &[]), "t,contour,x,y\n");
    }

    #[test]
    fn clipped_ball_gives_open_arc() {
        // Centre on the boundary: half a circle, left open at the edge.
        let g = ball(41, 0.0).grid().clone();
        let f = ScalarField::from_fn(g, |x| (x[0] - 100.0).hypot(x[1]) - 50.0);
        let lines = zero_contour(&f).unwrap();
        assert_eq!(lines.len(), 1);
        assert_ne!(lines[0].first(), lines[0].last());
        let want = std::f64::consts::PI * 50.0;
        assert!((length(&lines[0]) - want).abs() < 0.05 * want);
    }

    #[test]
    fn two_balls_two_loops() {
        let g = ball(41, 0.0).grid().clone();
        let f = ScalarField::from_fn(g, |x| ((x[0] + 50.0).hypot(x[1]) - 25.0).min((x[0] - 50.0).hypot(x[1]) - 25.0));
        assert_eq!(zero_contour(&f).unwrap().len(), 2);
    }

    #[test]
    fn heading_outside_bounds_rejected() {
        let g = Arc::new(
            make_grid(&[0.0, 0.0, -std::f64::consts::PI], &[1.0, 1.0, std::f64::consts::PI], &[5, 5, 8], &[false, false, true])
                .unwrap(),
        );
        let f = ScalarField::from_fn(g, |x| x[0] - 0.5);
        assert!(matches!(heading_slice(&f, Some(4.0)), Err(Error::OutOfBounds { .. })));
        let s = heading_slice(&f, Some(0.3)).unwrap();
        assert_eq!(zero_contour(&s).unwrap().len(), 1);
    }

    #[test]
    fn files_per_snapshot() {
        let f = ball(21, 40.0);
        let tf = TimeField::new(f.grid().clone(), vec![0.0, 1.0], vec![f.clone(), ScalarField::empty_set(f.grid().clone())]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = export_slices(&tf, None, dir.path(), "ball").unwrap();
        assert_eq!(paths.len(), 2);
        assert!(fs::read_to_string(&paths[0]).unwrap().lines().count() > 10);
        assert_eq!(fs::read_to_string(&paths[1]).unwrap(), "t,contour,x,y\n");
    }
}
