//! Hyperspectral image restoration by double low-rank Tucker modeling with
//! adaptive hyper-Laplacian spatial-spectral regularization.
//!
//! The observation is split as `y = x + s + b + n`: a low-rank clean image
//! `x`, sparse impulse noise `s`, a low-rank stripe tensor `b` and a small
//! Gaussian residual `n`. See [`solver::solve`].

pub mod cli;
pub mod error;
pub mod hyper_laplacian;
pub mod io;
pub mod metrics;
pub mod nelder_mead;
pub mod noise;
pub mod periodic;
pub mod priors;
pub mod solver;
pub mod synthetic;
pub mod tensor;
pub mod tucker;

pub use error::{Error, Result};
pub use hyper_laplacian::{estimate_p, HyperLaplacianFit};
pub use io::{read_cube, write_cube, RunConfig};
pub use metrics::{evaluate, MetricsReport};
pub use noise::{simulate_case, NoiseComponents, NoiseSpec, StripeKind};
pub use priors::TvWeights;
pub use solver::{solve, Diagnostics, ObservationDecomposition, SolverConfig};
pub use tensor::HsiCube;
pub use tucker::{hooi, TuckerFactors, TuckerRanks};
