//! Simulation and estimation toolkit for random-gate-sequence protocols that
//! measure nonlinear channel properties at desk scale (1-5 qubits).
//!
//! Two estimation pipelines are provided on top of a density-matrix
//! simulator of random Clifford sequences intertwined with a fixed channel:
//!
//! - **independent sequences**: second-order sequence correlators whose
//!   decay rate encodes the out-of-time-ordered correlator (OTOC) of the
//!   interleaved dynamics, estimated SPAM-robustly via a ratio of
//!   U-statistics;
//! - **identical sequences**: squared-expectation correlators whose decay
//!   rate is the unitarity of the interleaved channel, recovered by an
//!   offset-exponential fit.
//!
//! Every estimator is validated against closed-form theory produced by
//! exhaustive single-qubit group averages in [`oracles`].

pub mod channels;
pub mod circuit;
pub mod clifford;
pub mod correlators;
pub mod error;
pub mod fitting;
pub mod linalg;
pub mod oracles;
pub mod pauli;
pub mod rng;
pub mod testutil;

pub use error::{Error, Result};
