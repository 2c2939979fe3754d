//! Writers for small synthetic datasets in the on-disk formats the loaders
//! read. Used by the test suites and by `augdfa gen-fixtures`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::RngStream;

pub fn idx_images_bytes(pixels: &[u8], n: usize, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(pixels.len(), n * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [super::IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn idx_labels_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&super::IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// One CIFAR-10 binary record per `(label, 3072 pixels)` pair.
pub fn cifar_bytes(records: &[(u8, Vec<u8>)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * super::cifar::CIFAR_RECORD);
    for (label, px) in records {
        assert_eq!(px.len(), 3072);
        out.push(*label);
        out.extend_from_slice(px);
    }
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Class-template images: each class has a fixed random 0/1 stroke pattern,
/// and every sample is its template with pixel noise. Learnable but not
/// trivial, so smoke tests can run without the real datasets.
pub fn synthetic_digits(
    n: usize,
    rows: usize,
    cols: usize,
    n_classes: usize,
    rng: &mut RngStream,
) -> (Vec<u8>, Vec<u8>) {
    let mut template_rng = RngStream::new(0x5eed_d161);
    let templates: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| {
            (0..rows * cols)
                .map(|_| if template_rng.unit() < 0.3 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut pixels = Vec::with_capacity(n * rows * cols);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.below(n_classes);
        labels.push(c as u8);
        for &t in &templates[c] {
            let v = 0.7 * t + 0.3 * rng.unit();
            let v = if rng.unit() < 0.1 { 1.0 - v } else { v };
            pixels.push((v * 255.0).round() as u8);
        }
    }
    (pixels, labels)
}

/// Writes a synthetic MNIST-layout dataset (28x28, 10 classes) into `dir`.
pub fn write_synthetic_mnist(dir: &Path, n_train: usize, n_test: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rng = RngStream::new(seed);
    for (prefix, n, idx) in [("train", n_train, 0), ("t10k", n_test, 1)] {
        let (px, lb) = synthetic_digits(n, 28, 28, 10, &mut rng.derive(idx));
        write(
            &dir.join(format!("{prefix}-images-idx3-ubyte")),
            &idx_images_bytes(&px, n, 28, 28),
        )?;
        write(
            &dir.join(format!("{prefix}-labels-idx1-ubyte")),
            &idx_labels_bytes(&lb),
        )?;
    }
    Ok(())
}

/// Writes synthetic CIFAR-10 batch files (each with `per_file` records).
pub fn write_synthetic_cifar(dir: &Path, per_file: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rng = RngStream::new(seed);
    let names = (1..=5)
        .map(|i| format!("data_batch_{i}.bin"))
        .chain(std::iter::once("test_batch.bin".to_string()));
    for (k, name) in names.enumerate() {
        let mut r = rng.derive(k as u64);
        let (px, lb) = synthetic_digits(per_file, 32, 96, 10, &mut r);
        let recs: Vec<(u8, Vec<u8>)> = lb
            .iter()
            .zip(px.chunks_exact(3072))
            .map(|(&l, p)| (l, p.to_vec()))
            .collect();
        write(&dir.join(name), &cifar_bytes(&recs))?;
    }
    Ok(())
}
