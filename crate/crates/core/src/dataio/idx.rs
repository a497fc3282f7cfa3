//! MNIST IDX files: a big-endian `u32` magic, one big-endian `u32` per
//! dimension, then the raw `u8` payload.

use std::path::Path;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::models::IMAGE_SIDE;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw image file contents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Length(format!("header truncated at byte {offset}")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::Format(format!("magic 0x{magic:08x}, expected 0x{expected:08x}")));
    }
    Ok(())
}

fn payload(bytes: &[u8], header: usize, dims: &[u32]) -> Result<Vec<u8>> {
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| Error::Length(format!("dimensions {dims:?} overflow")))?;
    let body = &bytes[header..];
    if body.len() != len {
        return Err(Error::Length(format!(
            "payload has {} bytes, header {dims:?} declares {len}",
            body.len()
        )));
    }
    Ok(body.to_vec())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)?;
    let rows = read_u32(bytes, 8)?;
    let cols = read_u32(bytes, 12)?;
    let pixels = payload(bytes, 16, &[count, rows, cols])?;
    Ok(IdxImages {
        rows: rows as usize,
        cols: cols as usize,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)?;
    payload(bytes, 8, &[count])
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count() as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Combines parsed image and label files into a [`Dataset`].
pub fn dataset_from_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let images = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if (images.rows, images.cols) != (IMAGE_SIDE, IMAGE_SIDE) {
        return Err(Error::Format(format!(
            "images are {}x{}, expected {IMAGE_SIDE}x{IMAGE_SIDE}",
            images.rows, images.cols
        )));
    }
    if images.count() != labels.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.count(),
            labels.len()
        )));
    }
    if let Some((i, l)) = labels.iter().enumerate().find(|(_, l)| **l > 9) {
        return Err(Error::Consistency(format!("label {l} at index {i} is outside 0-9")));
    }
    let pixels = images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    Dataset::new(pixels, labels)
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    dataset_from_idx(&images, &labels)
}
