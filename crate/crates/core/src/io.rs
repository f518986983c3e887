//! Little-endian binary formats: `DTF1` (dense), `TTF1` (tensor train) and
//! `TKF1` (Tucker).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{DenseTensor, Shape};
use crate::tt::{TtCore, TtTensor};
use crate::tucker::TuckerTensor;

const DTF: &[u8; 4] = b"DTF1";
const TTF: &[u8; 4] = b"TTF1";
const TKF: &[u8; 4] = b"TKF1";
/// Sanity bound on header counts so corrupt files fail fast.
const MAX_ORDER: u64 = 1 << 16;

fn put_u64(w: &mut impl Write, v: usize) -> Result<()> {
    w.write_all(&(v as u64).to_le_bytes())?;
    Ok(())
}

fn put_f64s(w: &mut impl Write, vs: &[f64]) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Format("count does not fit in usize".into()))
}

fn get_usizes(r: &mut impl Read, n: usize) -> Result<Vec<usize>> {
    (0..n).map(|_| get_u64(r)).collect()
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n.checked_mul(8).ok_or_else(|| Error::Format("payload too large".into()))?];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn get_order(r: &mut impl Read) -> Result<usize> {
    let d = get_u64(r)?;
    if d == 0 || d as u64 > MAX_ORDER {
        return Err(Error::Format(format!("implausible order {d}")));
    }
    Ok(d)
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&m)
        )));
    }
    Ok(())
}

fn no_trailing(r: &mut impl Read) -> Result<()> {
    let mut b = [0u8; 1];
    if r.read(&mut b)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(())
}

pub fn write_dense(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DTF)?;
    put_u64(&mut w, t.dims().len())?;
    for &n in t.dims() {
        put_u64(&mut w, n)?;
    }
    put_f64s(&mut w, t.values())?;
    w.flush()?;
    Ok(())
}

pub fn read_dense(path: &Path) -> Result<DenseTensor> {
    let mut r = BufReader::new(File::open(path)?);
    expect_magic(&mut r, DTF)?;
    let d = get_order(&mut r)?;
    let shape = Shape::new(get_usizes(&mut r, d)?)?;
    let values = get_f64s(&mut r, shape.numel())?;
    no_trailing(&mut r)?;
    DenseTensor::new(shape, values)
}

pub fn write_tt(path: &Path, t: &TtTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tt_to(&mut w, t)?;
    w.flush()?;
    Ok(())
}

/// Serializes a TT tensor into any writer (used for byte comparisons).
pub fn write_tt_to(w: &mut impl Write, t: &TtTensor) -> Result<()> {
    w.write_all(TTF)?;
    put_u64(w, t.order())?;
    for n in t.dims() {
        put_u64(w, n)?;
    }
    for s in t.core_sizes() {
        put_u64(w, s)?;
    }
    for c in t.cores() {
        put_f64s(w, c.data())?;
    }
    Ok(())
}

pub fn read_tt(path: &Path) -> Result<TtTensor> {
    let mut r = BufReader::new(File::open(path)?);
    expect_magic(&mut r, TTF)?;
    let d = get_order(&mut r)?;
    let dims = get_usizes(&mut r, d)?;
    let sizes = get_usizes(&mut r, d + 1)?;
    let cores = (0..d)
        .map(|k| {
            let len = sizes[k]
                .checked_mul(dims[k])
                .and_then(|v| v.checked_mul(sizes[k + 1]))
                .ok_or_else(|| Error::Format("core too large".into()))?;
            TtCore::new(sizes[k], dims[k], sizes[k + 1], get_f64s(&mut r, len)?)
        })
        .collect::<Result<_>>()?;
    no_trailing(&mut r)?;
    TtTensor::new(cores)
}

pub fn write_tucker(path: &Path, t: &TuckerTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TKF)?;
    let dims = t.dims();
    put_u64(&mut w, dims.len())?;
    for &n in &dims {
        put_u64(&mut w, n)?;
    }
    for &s in t.core_dims() {
        put_u64(&mut w, s)?;
    }
    put_f64s(&mut w, t.core().values())?;
    for f in t.factors() {
        put_f64s(&mut w, f.as_slice())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tucker(path: &Path) -> Result<TuckerTensor> {
    let mut r = BufReader::new(File::open(path)?);
    expect_magic(&mut r, TKF)?;
    let d = get_order(&mut r)?;
    let dims = get_usizes(&mut r, d)?;
    let core_shape = Shape::new(get_usizes(&mut r, d)?)?;
    let core = DenseTensor::new(core_shape.clone(), get_f64s(&mut r, core_shape.numel())?)?;
    let factors = dims
        .iter()
        .zip(core_shape.dims())
        .map(|(&n, &t)| Matrix::from_col_major(n, t, get_f64s(&mut r, n * t)?))
        .collect::<Result<_>>()?;
    no_trailing(&mut r)?;
    TuckerTensor::new(core, factors)
}

/// Header summary of any of the three formats.
#[derive(Clone, Debug, PartialEq)]
pub enum FileInfo {
    Dense { dims: Vec<usize> },
    Tt { dims: Vec<usize>, core_sizes: Vec<usize>, storage: usize },
    Tucker { dims: Vec<usize>, core_dims: Vec<usize> },
}

pub fn read_info(path: &Path) -> Result<FileInfo> {
    let mut r = BufReader::new(File::open(path)?);
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    let d = get_order(&mut r)?;
    let dims = get_usizes(&mut r, d)?;
    match &m {
        DTF => Ok(FileInfo::Dense { dims }),
        TTF => {
            let core_sizes = get_usizes(&mut r, d + 1)?;
            let storage = (0..d).map(|k| core_sizes[k] * dims[k] * core_sizes[k + 1]).sum();
            Ok(FileInfo::Tt { dims, core_sizes, storage })
        }
        TKF => Ok(FileInfo::Tucker { dims, core_dims: get_usizes(&mut r, d)? }),
        other => Err(Error::Format(format!("unknown magic {:?}", String::from_utf8_lossy(other)))),
    }
}
