//! Binary snapshot format for a single field.
//!
//! Layout, all little-endian:
//! `"HJVF"`, `u32` version, `u32` ndim, `u32` counts[ndim], `f64` mins[ndim],
//! `f64` maxs[ndim], `u8` periodic[ndim], `f64` timestamp, then `f64`
//! values in row-major order.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::timefield::TimeField;

pub const MAGIC: &[u8; 4] = b"HJVF";
pub const VERSION: u32 = 1;

pub fn encode(field: &ScalarField, timestamp: f64) -> Vec<u8> {
    let g = field.grid();
    let d = g.ndim();
    let mut out = Vec::with_capacity(16 + d * 21 + 8 + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for &c in g.counts() {
        out.extend_from_slice(&(c as u32).to_le_bytes());
    }
    for &m in g.mins() {
        out.extend_from_slice(&m.to_le_bytes());
    }
    for &m in g.maxs() {
        out.extend_from_slice(&m.to_le_bytes());
    }
    for &p in g.periodic() {
        out.push(p as u8);
    }
    out.extend_from_slice(&timestamp.to_le_bytes());
    for &v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptFile(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a snapshot, returning the field and its timestamp.
pub fn decode(buf: &[u8]) -> Result<(ScalarField, f64)> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::CorruptFile("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let d = c.u32()? as usize;
    if d == 0 || d > crate::grid::MAX_DIMS {
        return Err(Error::CorruptFile(format!("ndim {d}")));
    }
    let counts: Vec<usize> = (0..d).map(|_| c.u32().map(|v| v as usize)).collect::<Result<_>>()?;
    let mins: Vec<f64> = (0..d).map(|_| c.f64()).collect::<Result<_>>()?;
    let maxs: Vec<f64> = (0..d).map(|_| c.f64()).collect::<Result<_>>()?;
    let periodic: Vec<bool> = c.take(d)?.iter().map(|&b| b != 0).collect();
    let timestamp = c.f64()?;
    let grid = Grid::new(&mins, &maxs, &counts, &periodic)
        .map_err(|e| Error::CorruptFile(format!("header: {e}")))?;
    let n = grid.len();
    let start = c.pos;
    c.take(8 * n)?;
    if c.pos != buf.len() {
        return Err(Error::CorruptFile(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    let raw = &buf[start..c.pos];
    let values = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    let field = ScalarField::new(Arc::new(grid), values).map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok((field, timestamp))
}

pub fn write_file(path: &Path, field: &ScalarField, timestamp: f64) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(field, timestamp))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<(ScalarField, f64)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}

/// Writes one file per snapshot as `{stem}_{k:05}.hjvf` in `dir` and
/// returns the file names in snapshot order.
pub fn write_timefield(dir: &Path, stem: &str, tf: &TimeField) -> Result<Vec<String>> {
    let mut names = Vec::with_capacity(tf.len());
    for (k, (t, f)) in tf.times().iter().zip(tf.fields()).enumerate() {
        let name = format!("{stem}_{k:05}.hjvf");
        write_file(&dir.join(&name), f, *t)?;
        names.push(name);
    }
    Ok(names)
}

/// Reads snapshots written by `write_timefield`; all must share one grid.
pub fn read_timefield(dir: &Path, names: &[String]) -> Result<TimeField> {
    let mut grid: Option<Arc<Grid>> = None;
    let mut times = Vec::with_capacity(names.len());
    let mut fields = Vec::with_capacity(names.len());
    for name in names {
        let (f, t) = read_file(&dir.join(name))?;
        let g = match &grid {
            Some(g) if **g == **f.grid() => g.clone(),
            Some(_) => return Err(Error::CorruptFile(format!("{name}: grid differs from the first snapshot"))),
            None => {
                grid = Some(f.grid().clone());
                f.grid().clone()
            }
        };
        fields.push(ScalarField::new(g, f.into_values())?);
        times.push(t);
    }
    let grid = grid.ok_or_else(|| Error::CorruptFile("time field without snapshots".into()))?;
    TimeField::new(grid, times, fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn sample() -> ScalarField {
        let g = Arc::new(make_grid(&[0.0, -5.0, -PI], &[10.0, 5.0, PI], &[4, 5, 6], &[false, false, true]).unwrap());
        ScalarField::from_fn(g, |x| x[0] * 1.5 - x[1] + x[2].sin())
    }

    #[test]
    fn roundtrip_bit_exact() {
        let f = sample();
        let bytes = encode(&f, 12.5);
        let (g, t) = decode(&bytes).unwrap();
        assert_eq!(t, 12.5);
        assert_eq!(g.grid(), f.grid());
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn infinity_survives() {
        let f = ScalarField::empty_set(sample().grid().clone());
        let (g, _) = decode(&encode(&f, 0.0)).unwrap();
        assert!(g.values().iter().all(|v| *v == f64::INFINITY));
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = encode(&sample(), 0.0);
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(Error::CorruptFile(_))));
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::CorruptFile(_))));
        let mut v = encode(&sample(), 0.0);
        v[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(decode(&v), Err(Error::UnsupportedVersion(7))));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.hjvf");
        write_file(&p, &sample(), 3.0).unwrap();
        let (f, t) = read_file(&p).unwrap();
        assert_eq!(t, 3.0);
        assert_eq!(f, sample());
    }
}
