//! Automated discovery of quantum kernels for one-class anomaly detection.

pub mod criteria;
pub mod data;
pub mod error;
pub mod genome;
pub mod kernels;
pub mod ocsvm;
pub mod optimizers;
pub mod pipeline;
pub mod pauli;
pub mod roc;
pub mod statevector;

pub use error::{Error, Result};
