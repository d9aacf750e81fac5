//! MNIST IDX ingestion.
//!
//! Big-endian headers: images `0x00000803, n, rows, cols`, labels
//! `0x00000801, n`. Pixels are scaled to `[0, 1]`. Digit 3 becomes
//! population 1, digit 9 population 2, every other digit population 0.

use std::fs;
use std::path::Path;

use super::pool::PopulationPool;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn ingest(path: &Path, message: String) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        message,
    }
}

fn be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| ingest(path, format!("truncated header at byte offset {offset}")))
}

/// Pixel rows (scaled to [0, 1]) and the `(rows, cols)` image shape.
pub fn read_idx_images(path: &Path) -> Result<(Vec<Vec<f64>>, (usize, usize))> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = be_u32(path, &bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(ingest(path, format!("bad magic {magic:#010x} at byte offset 0")));
    }
    let n = be_u32(path, &bytes, 4)? as usize;
    let rows = be_u32(path, &bytes, 8)? as usize;
    let cols = be_u32(path, &bytes, 12)? as usize;
    let size = rows * cols;
    let need = 16 + n * size;
    if bytes.len() < need {
        return Err(ingest(
            path,
            format!("truncated pixel data at byte offset {} (expected {need} bytes)", bytes.len()),
        ));
    }
    let images = bytes[16..need]
        .chunks_exact(size.max(1))
        .take(n)
        .map(|px| px.iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    Ok((images, (rows, cols)))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = be_u32(path, &bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(ingest(path, format!("bad magic {magic:#010x} at byte offset 0")));
    }
    let n = be_u32(path, &bytes, 4)? as usize;
    if bytes.len() < 8 + n {
        return Err(ingest(
            path,
            format!("truncated label data at byte offset {} (expected {} bytes)", bytes.len(), 8 + n),
        ));
    }
    Ok(bytes[8..8 + n].to_vec())
}

pub fn digit_population(digit: u8) -> u8 {
    match digit {
        3 => 1,
        9 => 2,
        _ => 0,
    }
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<PopulationPool> {
    let (images, (rows, cols)) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.len() != labels.len() {
        return Err(ingest(
            labels_path,
            format!("{} labels for {} images", labels.len(), images.len()),
        ));
    }
    PopulationPool::from_rows(
        rows * cols,
        labels
            .iter()
            .zip(images)
            .map(|(&d, img)| (digit_population(d), img))
            .collect(),
    )
}

/// Encodes images and labels as IDX byte streams.
pub fn encode_idx(images: &[Vec<u8>], rows: usize, cols: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + images.len() * rows * cols);
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    for i in images {
        img.extend_from_slice(i);
    }
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}
