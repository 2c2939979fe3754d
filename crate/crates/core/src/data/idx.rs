use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads a file, transparently inflating gzip content.
pub(crate) fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn check_header(path: &Path, bytes: &[u8], magic: u32, header: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: header,
            found: bytes.len(),
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    if bytes.len() < header {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: header,
            found: bytes.len(),
        });
    }
    Ok(())
}

fn check_len(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(())
}

/// Parses an IDX image file into `(count, rows, cols, pixels)`.
pub(crate) fn parse_images(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_header(path, bytes, IDX_IMAGES_MAGIC, 16)?;
    let n = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    check_len(path, bytes, 16 + n * rows * cols)?;
    Ok((n, rows, cols, bytes[16..].to_vec()))
}

pub(crate) fn parse_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    check_header(path, bytes, IDX_LABELS_MAGIC, 8)?;
    let n = be_u32(bytes, 4) as usize;
    check_len(path, bytes, 8 + n)?;
    Ok(bytes[8..].to_vec())
}

/// Loads an IDX image/label pair, scaling pixels to `[0, 1]`.
///
/// The class count is 10 unless a label is larger.
pub fn load_idx<T: Real>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    split: Split,
) -> Result<Dataset<T>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let (n, rows, cols, pixels) = parse_images(ip, &read_maybe_gz(ip)?)?;
    let labels = parse_labels(lp, &read_maybe_gz(lp)?)?;
    if labels.len() != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let scale = T::lit(1.0 / 255.0);
    let data = pixels.iter().map(|&p| T::lit(p as f64) * scale).collect();
    let images = Matrix::new(n, rows * cols, data)?;
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    let n_classes = labels.iter().max().map_or(10, |&m| (m + 1).max(10));
    Dataset::new(images, labels, n_classes, split, Some((rows, cols)))
}

/// Finds `stem` or `stem.gz` inside `dir`.
fn locate(dir: &Path, stems: &[&str]) -> Result<PathBuf> {
    for stem in stems {
        for name in [stem.to_string(), format!("{stem}.gz")] {
            let p = dir.join(name);
            if p.is_file() {
                return Ok(p);
            }
        }
    }
    Err(Error::MissingFile(dir.join(stems[0])))
}

/// Loads the MNIST-layout split from `dir` (also used for Fashion-MNIST,
/// which ships with identical file names).
pub fn load_mnist<T: Real>(dir: impl AsRef<Path>, split: Split) -> Result<Dataset<T>> {
    let dir = dir.as_ref();
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images = locate(
        dir,
        &[&format!("{prefix}-images-idx3-ubyte"), &format!("{prefix}-images.idx3-ubyte")],
    )?;
    let labels = locate(
        dir,
        &[&format!("{prefix}-labels-idx1-ubyte"), &format!("{prefix}-labels.idx1-ubyte")],
    )?;
    load_idx(images, labels, split)
}
