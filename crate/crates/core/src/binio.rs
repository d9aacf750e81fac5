//! Flat little-endian array files.
//!
//! Layout: `b"MILA"`, one dtype byte (`1` = f64, `2` = u8), one rank byte,
//! `rank` little-endian u64 dimensions, then the row-major payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MILA";
const DTYPE_F64: u8 = 1;
const DTYPE_U8: u8 = 2;

/// Writes `bytes` to `path` through a sibling temporary file and a rename, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn header(dtype: u8, dims: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(6 + 8 * dims.len());
    out.extend_from_slice(MAGIC);
    out.push(dtype);
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out
}

pub fn encode_f64(dims: &[usize], data: &[f64]) -> Vec<u8> {
    debug_assert_eq!(dims.iter().product::<usize>(), data.len());
    let mut out = header(DTYPE_F64, dims);
    out.reserve(data.len() * 8);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_u8(dims: &[usize], data: &[u8]) -> Vec<u8> {
    debug_assert_eq!(dims.iter().product::<usize>(), data.len());
    let mut out = header(DTYPE_U8, dims);
    out.extend_from_slice(data);
    out
}

fn decode_header<'a>(path: &Path, bytes: &'a [u8], dtype: u8) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 6 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "missing MILA header"));
    }
    if bytes[4] != dtype {
        return Err(Error::format(path, format!("dtype {} != {dtype}", bytes[4])));
    }
    let rank = bytes[5] as usize;
    let body = 6 + 8 * rank;
    if bytes.len() < body {
        return Err(Error::format(path, "truncated dimensions"));
    }
    let dims: Vec<usize> = bytes[6..body]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")) as usize)
        .collect();
    Ok((dims, &bytes[body..]))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_f64(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let bytes = read(path)?;
    let (dims, payload) = decode_header(path, &bytes, DTYPE_F64)?;
    let n: usize = dims.iter().product();
    if payload.len() != n * 8 {
        return Err(Error::format(
            path,
            format!("expected {} payload bytes, found {}", n * 8, payload.len()),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((dims, data))
}

pub fn read_u8(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    let bytes = read(path)?;
    let (dims, payload) = decode_header(path, &bytes, DTYPE_U8)?;
    let n: usize = dims.iter().product();
    if payload.len() != n {
        return Err(Error::format(
            path,
            format!("expected {n} payload bytes, found {}", payload.len()),
        ));
    }
    Ok((dims, payload.to_vec()))
}
