//! Dataset ingestion and artifact files: MNIST IDX, text checkpoints, PGM
//! image grids and CSV reports.

pub mod checkpoint;
pub mod csv;
pub mod idx;
pub mod pgm;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::IMAGE_PIXELS;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ModelKind, ParamBlock};
pub use idx::{load_mnist_idx, parse_idx_images, parse_idx_labels};
pub use pgm::{encode_image_grid, parse_image_grid, save_image_grid};

pub const TRAIN_IMAGES_FILE: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS_FILE: &str = "train-labels-idx1-ubyte";

/// Images as flat rows of 784 values in `[0, 1]`, with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pixels: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(pixels: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if pixels.len() != labels.len() * IMAGE_PIXELS {
            return Err(Error::Consistency(format!(
                "{} pixels do not form {} images",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|l| **l > 9) {
            return Err(Error::Consistency(format!("label {l} is outside 0-9")));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { pixels, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.pixels[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    pub fn images(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.pixels.chunks_exact(IMAGE_PIXELS)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The images at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(i) = indices.iter().find(|i| **i >= self.len()) {
            return Err(Error::Index(format!("image {i} out of range for {} images", self.len())));
        }
        let pixels = indices.iter().flat_map(|&i| self.image(i).iter().copied()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(Self { pixels, labels })
    }

    /// Order-preserving subset of one class.
    pub fn filter_class(&self, label: u8) -> Result<Self> {
        if label > 9 {
            return Err(Error::Domain(format!("class {label} is outside 0-9")));
        }
        let indices: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
        if indices.is_empty() {
            return Err(Error::Data(format!("no images of class {label}")));
        }
        self.subset(&indices)
    }
}

/// Loads the conventionally named training files from `dir`.
pub fn load_mnist_dir(dir: &Path) -> Result<Dataset> {
    load_mnist_idx(&dir.join(TRAIN_IMAGES_FILE), &dir.join(TRAIN_LABELS_FILE))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
/// On Unix the result is created `0644` (before umask) rather than the
/// temporary file's private mode.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
