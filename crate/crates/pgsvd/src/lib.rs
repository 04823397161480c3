//! Secure linear precoding for multi-antenna wiretap channels with
//! finite-alphabet (discrete-constellation) inputs.
//!
//! The crate decomposes a Bob/Eve channel pair with a generalized singular
//! value decomposition, builds the classical GSVD precoder and the per-group
//! GSVD (PG-GSVD) precoder on top of it, and evaluates exact secrecy rates
//! for BPSK/QPSK/QAM inputs. The mutual-information kernels are
//! data-parallel (rayon) with a sequential fallback behind the `parallel`
//! feature; both paths produce bit-identical results.

pub mod constellation;
pub mod error;
mod exec;
pub mod gsvd;
pub mod harness;
pub mod linalg;
pub mod mi;
pub mod precoders;
pub mod secrecy;

pub use error::{Error, Result};
