//! Simulation kernel for the quadrature-sign parity (QSP) bosonic qubit
//! encoding: a logical qubit lives in one qumode, with photon-number parity
//! as logical `Z` and the sign of the `q` quadrature as logical `X`.

pub mod encoding;
pub mod error;
pub mod fock;
pub mod gates;
pub mod mbqc;
pub mod measurement;
pub mod noise;
pub mod par;
pub mod qubit;
pub mod rng;
pub mod states;

pub use error::{QspError, Result};
pub use par::Execution;
pub use rng::RandomStream;
