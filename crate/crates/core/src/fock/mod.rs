//! Truncated Fock-space kernel.
//!
//! Every mode shares one cutoff `D` (levels `0..D`). Multi-mode objects carry
//! an ordered mode signature; the first listed mode is the most significant
//! index of the flattened Kronecker layout.
//!
//! Quadratures follow `a = (q + i p) / sqrt(2)`, so the vacuum has
//! `<q^2> = 1/2`.

pub(crate) mod hermite;
mod operator;
mod quadrature;
mod sign;
mod state;
pub(crate) mod tensor;

pub use hermite::{hermite_psi, hermite_table, HermiteValue};
pub use operator::{
    make_annihilation, make_displacement, make_number, make_parity, make_position, Displacement,
    FockOperator, OperatorRepr,
};
pub use quadrature::{gauss_legendre, PanelRule};
pub use sign::{half_line_projector, make_sign_q, SignQuadrature};
pub use state::{DensityMatrix, StateVector, TrajectoryEnsemble, WeightedMean};
pub use tensor::{
    apply, conjugate, expectation, partial_trace, q_marginal, tensor, MarginalTable, QGrid,
};

use crate::error::{QspError, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Variance of `q` in the vacuum under the fixed quadrature convention.
pub const VACUUM_Q_VARIANCE: f64 = 0.5;

/// Truncated single-mode Fock space with levels `0..cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    cutoff: usize,
}

impl FockSpace {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(QspError::InvalidCutoff(cutoff));
        }
        Ok(Self { cutoff })
    }

    #[inline]
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Dimension of the `n_modes`-fold tensor power.
    pub fn dim(&self, n_modes: usize) -> usize {
        self.cutoff.pow(n_modes as u32)
    }

    /// Upper end of the half-line quadrature interval used for `sign(q)`.
    pub fn x_max(&self) -> f64 {
        (2.0 * self.cutoff as f64).sqrt() + 6.0
    }
}

/// Validates a mode signature: non-empty entries must be distinct.
pub(crate) fn check_modes(modes: &[usize]) -> Result<()> {
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(QspError::ModeCollision(*m));
        }
    }
    Ok(())
}

/// Splits a flat multi-mode index into per-mode Fock levels.
#[inline]
pub(crate) fn digits(mut index: usize, d: usize, n_modes: usize, out: &mut [usize]) {
    for k in (0..n_modes).rev() {
        out[k] = index % d;
        index /= d;
    }
}
