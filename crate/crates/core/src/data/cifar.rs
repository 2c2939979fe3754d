use std::path::Path;

use super::idx::read_maybe_gz;
use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

pub(crate) const CIFAR_RECORD: usize = 1 + 3072;

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILES: [&str; 1] = ["test_batch.bin"];

/// Loads one CIFAR-10 split from the standard binary batch files in `dir`.
///
/// Pixels stay channel-major (1024 red, 1024 green, 1024 blue) and are
/// scaled to `[0, 1]`; see [`Dataset::grayscale`].
pub fn load_cifar10<T: Real>(dir: impl AsRef<Path>, split: Split) -> Result<Dataset<T>> {
    let dir = dir.as_ref();
    let files: &[&str] = match split {
        Split::Train => &TRAIN_FILES,
        Split::Test => &TEST_FILES,
    };
    let scale = T::lit(1.0 / 255.0);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for name in files {
        let path = dir.join(name);
        let bytes = read_maybe_gz(&path)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::RecordSize {
                path,
                len: bytes.len(),
                record: CIFAR_RECORD,
            });
        }
        for rec in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(rec[0] as usize);
            data.extend(rec[1..].iter().map(|&p| T::lit(p as f64) * scale));
        }
    }
    let n = labels.len();
    let images = Matrix::new(n, 3072, data)?;
    Dataset::new(images, labels, 10, split, None)
}
