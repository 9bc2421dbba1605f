//! Gridless direction-of-arrival estimation for sparse linear arrays.
//!
//! The crate covers the whole pipeline from simulated snapshots to direction
//! estimates: array modelling, direct augmentation of the co-array
//! covariance, root-MUSIC, a family of matrix-fitting losses with analytic
//! gradients (Frobenius, scale-invariant, affine-invariant and Grassmann
//! subspace losses), a Monte Carlo benchmark harness and a small trainable
//! network that exercises every loss end to end.
//!
//! Runnable walkthroughs live in `examples/`; the `gridless-doa` binary is a
//! thin command-line front end over [`cli::dispatch`].

pub mod array_model;
pub mod cli;
pub mod covariance_ops;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod linalg;
pub mod losses;
pub mod random_matrices;
pub mod rng;
pub mod toy_model;

pub use array_model::{ArrayGeometry, HermitianMatrix, SnapshotBatch, SourceScene};
pub use covariance_ops::{EigenDecomposition, SubspaceBasis};
pub use error::{DoaError, Result};
pub use estimators::{da_pipeline, model_pipeline, root_music, DoaEstimate};
pub use toy_model::ToyModel;
