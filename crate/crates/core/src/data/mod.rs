//! Dataset ingestion and batching.
//!
//! IDX (MNIST, Fashion-MNIST) and CIFAR-10 binary loaders, pixel
//! normalization, the column-scan image-to-sequence adapter used by the
//! reservoir pipeline, and deterministic shuffled minibatching.

mod cifar;
pub mod fixtures;
mod idx;

use std::path::PathBuf;

pub use cifar::load_cifar10;
pub use idx::{load_idx, load_mnist, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};
use crate::scalar::Real;

/// Environment variable naming the default dataset root.
pub const DATA_DIR_ENV: &str = "AUGDFA_DATA_DIR";

/// `$AUGDFA_DATA_DIR`, falling back to `./data`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Labelled images, one row per sample, pixels in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub images: Matrix<T>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub split: Split,
    /// `(rows, cols)` of one image, when known.
    pub image_shape: Option<(usize, usize)>,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        images: Matrix<T>,
        labels: Vec<usize>,
        n_classes: usize,
        split: Split,
        image_shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::CountMismatch {
                images: images.rows(),
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if let Some((r, c)) = image_shape {
            if r * c != images.cols() {
                return Err(Error::shape("Dataset::new", r * c, images.cols()));
            }
        }
        Ok(Self {
            images,
            labels,
            n_classes,
            split,
            image_shape,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.images.cols()
    }

    /// The first `n` samples (all of them if `n >= len`).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        self.select(&idx)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            images: self.images.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            split: self.split,
            image_shape: self.image_shape,
        }
    }

    /// Rows of the batch plus their one-hot targets.
    pub fn batch(&self, indices: &[usize]) -> (Matrix<T>, Matrix<T>) {
        let x = self.images.select_rows(indices);
        let labels: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        (x, one_hot(&labels, self.n_classes))
    }

    /// Rescales raw 8-bit intensities to `[0, 1]` and clamps. Applying it to
    /// already-normalized data is a no-op.
    pub fn normalize(&mut self) {
        let over = self.images.as_slice().iter().any(|&v| v > T::one());
        let s = if over { T::lit(1.0 / 255.0) } else { T::one() };
        self.images
            .map_inplace(|v| (v * s).max(T::zero()).min(T::one()));
    }

    /// Channel-average grayscale for images stored channel-major
    /// (`channels` planes of `rows x cols`).
    pub fn grayscale(&self, channels: usize) -> Result<Self> {
        let feats = self.features();
        if channels == 0 || !feats.is_multiple_of(channels) {
            return Err(Error::shape("grayscale", format!("multiple of {channels}"), feats));
        }
        let plane = feats / channels;
        let inv = T::one() / T::lit(channels as f64);
        let images = Matrix::from_fn(self.len(), plane, |i, p| {
            let row = self.images.row(i);
            (0..channels).map(|c| row[c * plane + p]).sum::<T>() * inv
        });
        let image_shape = match self.image_shape {
            Some((r, c)) if r * c == plane => Some((r, c)),
            _ => {
                let side = (plane as f64).sqrt() as usize;
                (side * side == plane).then_some((side, side))
            }
        };
        Dataset::new(images, self.labels.clone(), self.n_classes, self.split, image_shape)
    }

    /// Area-averaged downsampling of every image to `out_rows x out_cols`.
    pub fn resized(&self, out_rows: usize, out_cols: usize) -> Result<Self> {
        let (r, c) = self
            .image_shape
            .ok_or_else(|| Error::InvalidArgument("resize needs a known image shape".into()))?;
        if out_rows == 0 || out_cols == 0 {
            return Err(Error::InvalidArgument("resize target must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(self.len() * out_rows * out_cols);
        for row in self.images.row_iter() {
            data.extend(resize_area(row, r, c, out_rows, out_cols));
        }
        let images = Matrix::new(self.len(), out_rows * out_cols, data)?;
        Dataset::new(
            images,
            self.labels.clone(),
            self.n_classes,
            self.split,
            Some((out_rows, out_cols)),
        )
    }

    /// Rescales every row to squared norm `power`; all-zero rows stay zero.
    pub fn scaled_to_power(&self, power: f64) -> Self {
        let mut out = self.clone();
        let target = T::lit(power.sqrt());
        for i in 0..out.len() {
            let row = out.images.row_mut(i);
            let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm > T::zero() {
                let s = target / norm;
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
        out
    }

    /// Deterministic shuffled minibatches for one epoch.
    pub fn batches(&self, size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        batches(self.len(), size, &mut RngStream::new(seed))
    }
}

/// One-hot rows for integer labels.
pub fn one_hot<T: Real>(labels: &[usize], n_classes: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(labels.len(), n_classes);
    for (i, &l) in labels.iter().enumerate() {
        m[(i, l)] = T::one();
    }
    m
}

/// Splits a seeded permutation of `0..len` into chunks of `size`; the last
/// chunk may be short.
pub fn batches(len: usize, size: usize, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    if size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let perm = rng.permutation(len);
    Ok(perm.chunks(size).map(<[usize]>::to_vec).collect())
}

/// Area-weighted resampling of a row-major `rows x cols` image.
pub fn resize_area<T: Real>(
    img: &[T],
    rows: usize,
    cols: usize,
    out_rows: usize,
    out_cols: usize,
) -> Vec<T> {
    let sy = rows as f64 / out_rows as f64;
    let sx = cols as f64 / out_cols as f64;
    let weights = |n_out: usize, scale: f64, n_in: usize| -> Vec<Vec<(usize, f64)>> {
        (0..n_out)
            .map(|o| {
                let lo = o as f64 * scale;
                let hi = lo + scale;
                let first = lo.floor() as usize;
                let last = (hi.ceil() as usize).min(n_in);
                (first..last)
                    .filter_map(|i| {
                        let w = (hi.min(i as f64 + 1.0) - lo.max(i as f64)) / scale;
                        (w > 0.0).then_some((i, w))
                    })
                    .collect()
            })
            .collect()
    };
    let wy = weights(out_rows, sy, rows);
    let wx = weights(out_cols, sx, cols);
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for ys in &wy {
        for xs in &wx {
            let mut acc = 0.0;
            for &(y, a) in ys {
                for &(x, b) in xs {
                    acc += a * b * img[y * cols + x].to_f64_lossy();
                }
            }
            out.push(T::lit(acc));
        }
    }
    out
}

/// Column-scan view of images: image `i` becomes `steps` time steps, step
/// `n` carrying column `n` (`features` values, top to bottom).
#[derive(Clone, Debug)]
pub struct SequenceView<T> {
    pub steps: usize,
    pub features: usize,
    /// `[image][step][feature]`, contiguous.
    data: Vec<T>,
    len: usize,
}

/// Builds the column-scan view for images of `v` rows by `h` columns.
pub fn as_sequence<T: Real>(dataset: &Dataset<T>, (v, h): (usize, usize)) -> Result<SequenceView<T>> {
    if v * h != dataset.features() {
        return Err(Error::shape(
            "as_sequence",
            format!("{v}x{h} = {} features", v * h),
            dataset.features(),
        ));
    }
    let mut data = Vec::with_capacity(dataset.len() * v * h);
    for img in dataset.images.row_iter() {
        for n in 0..h {
            for r in 0..v {
                data.push(img[r * h + n]);
            }
        }
    }
    Ok(SequenceView {
        steps: h,
        features: v,
        data,
        len: dataset.len(),
    })
}

impl<T: Real> SequenceView<T> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The `steps x features` sequence of image `i`.
    pub fn sequence(&self, i: usize) -> Matrix<T> {
        let sz = self.steps * self.features;
        Matrix::new(self.steps, self.features, self.data[i * sz..(i + 1) * sz].to_vec())
            .expect("sequence slice has steps*features values")
    }

    /// Inverse of the scan: the row-major image of sample `i`.
    pub fn reassemble(&self, i: usize) -> Vec<T> {
        let seq = self.sequence(i);
        let (v, h) = (self.features, self.steps);
        let mut img = vec![T::zero(); v * h];
        for n in 0..h {
            for r in 0..v {
                img[r * h + n] = seq[(n, r)];
            }
        }
        img
    }

    /// Time-major inputs for a batch: element `n` is `batch x features`.
    pub fn batch_steps(&self, indices: &[usize]) -> Vec<Matrix<T>> {
        let sz = self.steps * self.features;
        (0..self.steps)
            .map(|n| {
                let mut m = Matrix::zeros(indices.len(), self.features);
                for (b, &i) in indices.iter().enumerate() {
                    let off = i * sz + n * self.features;
                    m.row_mut(b)
                        .copy_from_slice(&self.data[off..off + self.features]);
                }
                m
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny(n: usize, v: usize, h: usize, seed: u64) -> Dataset<f64> {
        let mut rng = RngStream::new(seed);
        let images = Matrix::from_fn(n, v * h, |_, _| rng.unit());
        let labels = (0..n).map(|i| i % 3).collect();
        Dataset::new(images, labels, 3, Split::Train, Some((v, h))).unwrap()
    }

    #[test]
    fn mnist_shaped_sequence() {
        let d = tiny(2, 28, 28, 1);
        let s = as_sequence(&d, (28, 28)).unwrap();
        assert_eq!((s.steps, s.features), (28, 28));
        assert_eq!(s.sequence(0).shape(), (28, 28));
        // step n is column n
        assert_eq!(s.sequence(1)[(5, 3)], d.images[(1, 3 * 28 + 5)]);
    }

    #[test]
    fn constant_image_gives_identical_steps() {
        let images = Matrix::filled(1, 12, 0.25);
        let d = Dataset::new(images, vec![0], 2, Split::Test, Some((3, 4))).unwrap();
        let s = as_sequence(&d, (3, 4)).unwrap();
        let seq = s.sequence(0);
        for n in 1..4 {
            assert_eq!(seq.row(n), seq.row(0));
        }
    }

    #[test]
    fn sequence_shape_mismatch() {
        let d = tiny(1, 4, 4, 2);
        assert!(matches!(as_sequence(&d, (3, 4)), Err(Error::Shape { .. })));
    }

    #[test]
    fn batch_steps_match_sequences() {
        let d = tiny(5, 3, 4, 3);
        let s = as_sequence(&d, (3, 4)).unwrap();
        let steps = s.batch_steps(&[4, 1]);
        assert_eq!(steps.len(), 4);
        for n in 0..4 {
            assert_eq!(steps[n].row(0), s.sequence(4).row(n));
            assert_eq!(steps[n].row(1), s.sequence(1).row(n));
        }
    }

    #[test]
    fn single_batch_is_a_permutation() {
        let b = batches(10, 10, &mut RngStream::new(1)).unwrap();
        assert_eq!(b.len(), 1);
        let mut all = b[0].clone();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(batches(10, 0, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn batches_are_seeded() {
        let a = batches(100, 7, &mut RngStream::new(5)).unwrap();
        let b = batches(100, 7, &mut RngStream::new(5)).unwrap();
        let c = batches(100, 7, &mut RngStream::new(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.last().unwrap().len(), 2);
    }

    #[test]
    fn normalize_is_idempotent() {
        let images = Matrix::from_fn(2, 4, |i, j| (i * 4 + j) as f64 * 30.0);
        let mut d = Dataset::new(images, vec![0, 1], 2, Split::Train, None).unwrap();
        d.normalize();
        let once = d.images.clone();
        assert!(once.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        d.normalize();
        assert_eq!(d.images, once);
    }

    #[test]
    fn resize_preserves_mean_and_constants() {
        let img: Vec<f64> = (0..28 * 28).map(|i| (i % 17) as f64 / 16.0).collect();
        let small = resize_area(&img, 28, 28, 8, 8);
        assert_eq!(small.len(), 64);
        let m_in = img.iter().sum::<f64>() / img.len() as f64;
        let m_out = small.iter().sum::<f64>() / 64.0;
        assert!((m_in - m_out).abs() < 1e-12);
        let flat = resize_area(&vec![0.5f64; 28 * 28], 28, 28, 8, 8);
        assert!(flat.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn grayscale_averages_planes() {
        let images = Matrix::from_rows(&[vec![0.0f64, 0.3, 0.6, 0.9, 0.3, 0.0]]).unwrap();
        let d = Dataset::new(images, vec![0], 10, Split::Test, None).unwrap();
        let g = d.grayscale(3).unwrap();
        assert_eq!(g.features(), 2);
        assert!((g.images[(0, 0)] - 0.3).abs() < 1e-12);
        assert!((g.images[(0, 1)] - 0.4).abs() < 1e-12);
        assert!(d.grayscale(4).is_err());
    }

    #[test]
    fn dataset_validates_labels() {
        let images = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(
            Dataset::new(images.clone(), vec![0], 2, Split::Train, None),
            Err(Error::CountMismatch { .. })
        ));
        assert!(Dataset::new(images, vec![0, 5], 2, Split::Train, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sequence_round_trip(v in 1usize..10, h in 1usize..10, seed in any::<u64>()) {
            let d = tiny(3, v, h, seed);
            let s = as_sequence(&d, (v, h)).unwrap();
            for i in 0..3 {
                prop_assert_eq!(s.reassemble(i), d.images.row(i).to_vec());
            }
        }

        #[test]
        fn batches_partition_indices(len in 0usize..300, size in 1usize..64, seed in any::<u64>()) {
            let b = batches(len, size, &mut RngStream::new(seed)).unwrap();
            let mut all: Vec<usize> = b.iter().flatten().copied().collect();
            prop_assert!(b.iter().all(|c| c.len() <= size && !c.is_empty()));
            all.sort_unstable();
            prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        }
    }
}
