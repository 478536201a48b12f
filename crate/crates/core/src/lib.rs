//! Hybrid physics / machine-learning methods on a shared kernel substrate.

pub mod dataset;
pub mod distmatch;
pub mod emulator;
pub mod error;
pub mod fkl;
pub mod fuss;
pub mod gp;
pub mod jgp;
pub mod kernel;
pub mod lfm;
pub mod linalg;
pub mod optim;
pub mod prior;
pub mod rng;
pub mod sindy;
pub mod stats;
pub mod synth;

pub use dataset::{Dataset, Provenance};
pub use error::{Error, Result};
pub use kernel::{gram, kernel_eval, KernelConfig};
pub use linalg::chol_solve;
pub use rng::RngStream;
