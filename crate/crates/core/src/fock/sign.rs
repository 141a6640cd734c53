use super::hermite::hermite_table;
use super::quadrature::PanelRule;
use super::{CMatrix, FockOperator, FockSpace};
use crate::error::{QspError, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

const GL_ORDER: usize = 20;
const CONVERGENCE_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 4;

/// `sign(q)` on the truncated space together with its quadrature diagnostics.
#[derive(Debug, Clone)]
pub struct SignQuadrature {
    /// Real symmetric matrix `S_mn = 2 int_0^inf psi_m psi_n dx` (odd `m+n`).
    pub matrix: DMatrix<f64>,
    /// Max entrywise change between the last two panel refinements.
    pub refinement_gap: f64,
    pub panels: usize,
}

impl SignQuadrature {
    pub fn operator(&self, space: FockSpace) -> FockOperator {
        let m: CMatrix = self.matrix.map(|v| Complex64::new(v, 0.0));
        FockOperator::dense(space, vec![0], m)
            .expect("shape is consistent")
            .assume_hermitian()
    }
}

fn half_line_integrals(levels: usize, x_max: f64, panels: usize) -> DMatrix<f64> {
    let rule = PanelRule::new(0.0, x_max, panels, GL_ORDER);
    let table = hermite_table(levels, &rule.nodes);
    let mut weighted = table.clone();
    for (i, w) in rule.weights.iter().enumerate() {
        weighted.row_mut(i).scale_mut(*w);
    }
    let mut s = table.transpose() * weighted;
    for m in 0..levels {
        for n in 0..levels {
            if (m + n) % 2 == 0 {
                s[(m, n)] = 0.0;
            } else {
                s[(m, n)] *= 2.0;
            }
        }
    }
    s
}

/// Builds the quadrature-sign operator by composite Gauss-Legendre quadrature
/// on `[0, sqrt(2D) + 6]`, doubling the panel count until two successive
/// results agree to `1e-10`.
pub fn make_sign_q(space: FockSpace) -> Result<SignQuadrature> {
    let d = space.cutoff();
    let x_max = space.x_max();
    let density = 2.0_f64.max((2.0 * d as f64).sqrt() / 4.0);
    let mut panels = (x_max * density).ceil() as usize;
    let mut prev = half_line_integrals(d, x_max, panels);
    let mut gap = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        panels *= 2;
        let next = half_line_integrals(d, x_max, panels);
        gap = (&next - &prev).amax();
        prev = next;
        if gap <= CONVERGENCE_TOL {
            // symmetrize away rounding asymmetry of the product
            let sym = (&prev + prev.transpose()) * 0.5;
            return Ok(SignQuadrature {
                matrix: sym,
                refinement_gap: gap,
                panels,
            });
        }
    }
    Err(QspError::QuadratureNonConvergence(gap))
}

/// Compressed half-line projector `(I + outcome * S)/2`, `outcome = +1 / -1`.
///
/// On the truncated space this equals the exact projector
/// `int_0^{+-inf} |x_q><x_q| dx` sandwiched by the Fock-space projector,
/// because the even-parity blocks of the half-line integral are `delta/2`.
pub fn half_line_projector(sign: &DMatrix<f64>, outcome: i8) -> DMatrix<f64> {
    let d = sign.nrows();
    let s = if outcome >= 0 { 0.5 } else { -0.5 };
    DMatrix::identity(d, d) * 0.5 + sign * s
}
