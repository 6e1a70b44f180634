//! `HJRA` binary field files.
//!
//! Layout, all little-endian: magic `HJRA`, `u32` version (1), `u32` ndim,
//! then per dimension `u64` count, `f64` min, `f64` max, then `f64` time,
//! then one `f64` per node in row-major order (last dimension fastest).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::{Grid, GridError, ScalarField, MAX_DIM};

pub const MAGIC: &[u8; 4] = b"HJRA";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("unsupported dimension {0}")]
    BadDimension(u32),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub fn write_field<W: Write>(field: &ScalarField, mut out: W) -> io::Result<()> {
    let grid = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(grid.ndim() as u32).to_le_bytes())?;
    for d in 0..grid.ndim() {
        out.write_all(&(grid.counts()[d] as u64).to_le_bytes())?;
        out.write_all(&grid.mins()[d].to_le_bytes())?;
        out.write_all(&grid.maxs()[d].to_le_bytes())?;
    }
    out.write_all(&field.time().to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_field<R: Read>(mut input: R) -> Result<ScalarField, FormatError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(FormatError::BadVersion(version));
    }
    let ndim = read_u32(&mut input)?;
    if ndim == 0 || ndim as usize > MAX_DIM {
        return Err(FormatError::BadDimension(ndim));
    }
    let mut counts = Vec::new();
    let mut mins = Vec::new();
    let mut maxs = Vec::new();
    for _ in 0..ndim {
        counts.push(read_u64(&mut input)? as usize);
        mins.push(read_f64(&mut input)?);
        maxs.push(read_f64(&mut input)?);
    }
    let grid = Arc::new(Grid::new(&mins, &maxs, &counts)?);
    let time = read_f64(&mut input)?;
    let mut bytes = vec![0u8; grid.len() * 8];
    input.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ScalarField::new(grid, values, time)?)
}

pub fn save_field(field: &ScalarField, path: impl AsRef<Path>) -> io::Result<()> {
    write_field(field, BufWriter::new(File::create(path)?))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<ScalarField, FormatError> {
    read_field(BufReader::new(File::open(path)?))
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
