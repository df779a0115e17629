//! Matrix export.
//!
//! Text: one `row,col,value` line per stored entry. Binary (little endian):
//! the magic `ULAMMTX1`, then `d: u32`, `n: u32`, `samples: u32`,
//! `mode: u8`, `seed: u64`, `nnz: u64`, followed by `n^d + 1` row pointers
//! (`u64`), `nnz` columns (`u32`), `nnz` values (`f64`) and `n^d` escaped
//! fractions (`f64`).

use std::io::{Read, Write};

use super::{AssemblyConfig, SamplingMode, UlamMatrix};
use crate::error::{Error, Result};
use crate::grid_bv::UniformGrid;

pub const MAGIC: &[u8; 8] = b"ULAMMTX1";

pub fn write_coo<W: Write>(a: &UlamMatrix, mut out: W) -> Result<()> {
    writeln!(out, "row,col,value")?;
    for i in 0..a.size() {
        for (j, v) in a.row(i) {
            writeln!(out, "{i},{j},{v:e}")?;
        }
    }
    Ok(())
}

pub fn write_binary<W: Write>(a: &UlamMatrix, mut out: W) -> Result<()> {
    let grid = a.grid();
    let cfg = a.config();
    out.write_all(MAGIC)?;
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    out.write_all(&(grid.n() as u32).to_le_bytes())?;
    out.write_all(&(cfg.samples_per_cell as u32).to_le_bytes())?;
    out.write_all(&[cfg.mode.tag()])?;
    out.write_all(&cfg.seed.to_le_bytes())?;
    out.write_all(&(a.nnz() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(a.row_ptr().len() * 8 + a.nnz() * 12 + a.size() * 8);
    for &p in a.row_ptr() {
        buf.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in a.cols() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for &v in a.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &e in a.escaped() {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| Error::Format("truncated matrix file".into()))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_binary<R: Read>(input: R) -> Result<UlamMatrix> {
    let mut r = Reader { inner: input };
    if &r.bytes::<8>()? != MAGIC {
        return Err(Error::Format("not an Ulam matrix file (bad magic)".into()));
    }
    let dim = r.u32()? as usize;
    let n = r.u32()? as usize;
    let grid = UniformGrid::new(dim, n)?;
    let samples_per_cell = r.u32()? as usize;
    let mode = SamplingMode::from_tag(r.bytes::<1>()?[0])?;
    let seed = r.u64()?;
    let nnz = r.u64()? as usize;
    let cells = grid.cell_count();
    // Guard against absurd headers before allocating.
    if nnz > cells.saturating_mul(samples_per_cell.max(1)) {
        return Err(Error::Format(format!("nnz {nnz} exceeds what the header allows")));
    }
    let row_ptr = (0..=cells)
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let cols = (0..nnz).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let values = (0..nnz).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let escaped = (0..cells).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let config = AssemblyConfig {
        samples_per_cell,
        seed,
        mode,
    };
    UlamMatrix::from_csr(grid, config, row_ptr, cols, values, escaped)
}
