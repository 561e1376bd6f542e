//! Core algorithms for using chest X-ray image search as a classifier.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It covers:
//!
//! - [`data`]: records, manifests, fold assignment and feature vectors
//! - [`imaging`]: bilinear resize, chest-side split/flip, the three feature
//!   configurations and the baseline patch-mean extractor
//! - [`nn`]: a small dense-network framework (forward, backward, dropout,
//!   Adam, MSE/BCE)
//! - [`encoder`]: the two-step autoencoder pipeline and a PCA baseline
//! - [`search`]: exact Euclidean k-NN and majority voting
//! - [`eval`]: ROC/AUC, Youden's index, confusion counts and cross-validation
//! - [`synth`]: deterministic synthetic images and feature vectors
//!
//! Enable the `std` feature for runtime SIMD detection in the matrix kernels.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod encoder;
mod error;
pub mod eval;
pub mod exec;
pub mod hash;
pub mod imaging;
pub mod linalg;
pub mod nn;
pub mod search;
pub mod synth;

pub use error::{Error, Result};
