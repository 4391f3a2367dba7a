//! Online quantum state tracking from sliding windows of noisy expectation
//! values, with an ADMM-based online proximal gradient estimator and a
//! Kalman-filter baseline.

pub mod admm;
pub mod error;
pub mod harness;
pub mod kalman;
pub mod linalg;
pub mod metrics;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::{DensityMatrix, Pauli, PauliString};
pub use metrics::{Algorithm, OrderFit, TrajectoryReport};
