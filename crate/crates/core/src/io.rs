//! Dense array files: `u64` LE rank, `u64` LE dimensions, then `f64` LE
//! samples in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::error::{LabError, Result};

const MAX_RANK: u64 = 8;

pub fn write_dense(path: &Path, a: &ArrayD<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(a.ndim() as u64).to_le_bytes())?;
    for &d in a.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in a.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dense(path: &Path) -> Result<ArrayD<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rank = u64::from_le_bytes(word);
    if rank == 0 || rank > MAX_RANK {
        return Err(LabError::Io(format!("{}: bad rank {rank}", path.display())));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        r.read_exact(&mut word)?;
        dims.push(u64::from_le_bytes(word) as usize);
    }
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| LabError::Io(format!("{}: dimensions overflow", path.display())))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(LabError::Io(format!(
            "{}: expected {} data bytes, found {}",
            path.display(),
            len * 8,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| LabError::Io(e.to_string()))
}
