//! Augmented direct feedback alignment (DFA) training for feedforward
//! networks, delay-line deep reservoir computers and unitary MZI meshes.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below fix the precision for callers that do not care.

pub mod activations;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod ffnet;
pub mod gsearch;
pub mod numerics;
pub mod reservoir;
pub mod scalar;
pub mod unitary;

pub use error::{Error, Result};
pub use numerics::{CMatrix, Matrix, RngStream};
pub use scalar::Real;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type CMatrix64 = CMatrix<f64>;
pub type CMatrix32 = CMatrix<f32>;
