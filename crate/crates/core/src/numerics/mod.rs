//! Dense real/complex matrices and seeded random generation.

mod cmatrix;
mod matrix;
mod rng;

pub use cmatrix::{uniform_cmatrix, CMatrix};
pub use matrix::{dot, gemm, norm, outer, product, uniform_matrix, Matrix, Op};
pub use rng::RngStream;
