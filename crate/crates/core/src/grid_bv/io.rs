//! Grid function files: `index,value` CSV and a little-endian binary dump
//! (`u32` dimension, `u32` resolution, then row-major `f64` values).

use std::io::{BufRead, Read, Write};

use super::{GridFunction, UniformGrid};
use crate::error::{Error, Result};

pub fn write_csv<W: Write>(g: &GridFunction, mut out: W) -> Result<()> {
    writeln!(out, "index,value")?;
    for (i, v) in g.values().iter().enumerate() {
        // `{:e}` prints the shortest representation that round-trips.
        writeln!(out, "{i},{v:e}")?;
    }
    Ok(())
}

/// Reads a CSV written by [`write_csv`]; the grid must be supplied because
/// the file does not record it.
pub fn read_csv<R: BufRead>(grid: UniformGrid, input: R) -> Result<GridFunction> {
    let mut values = vec![f64::NAN; grid.cell_count()];
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
            continue;
        }
        let bad = || Error::Format(format!("line {}: expected `index,value`", lineno + 1));
        let (i, v) = line.split_once(',').ok_or_else(bad)?;
        let i: usize = i.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        *values
            .get_mut(i)
            .ok_or_else(|| Error::Format(format!("cell index {i} out of range")))? = v;
    }
    GridFunction::new(grid, values)
}

pub fn write_binary<W: Write>(g: &GridFunction, mut out: W) -> Result<()> {
    let grid = g.grid();
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    out.write_all(&(grid.n() as u32).to_le_bytes())?;
    for v in g.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<GridFunction> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let dim = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let grid = UniformGrid::new(dim, n)?;
    let mut bytes = vec![0u8; grid.cell_count() * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated grid function payload".into()))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridFunction::new(grid, values)
}
