use nalgebra::DMatrix;

/// Rescaling threshold for the upward recurrence.
const RESCALE: f64 = 1e150;

/// Value of a normalized Hermite function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteValue {
    pub value: f64,
    /// Set when the true value is below the smallest positive `f64` and was
    /// flushed to zero.
    pub underflow: bool,
}

/// Fills `out[n] = psi_n(x)` for `n < out.len()` and returns whether any
/// entry underflowed.
///
/// The recurrence runs on a rescaled copy of the sequence with the Gaussian
/// factor kept in log form, so large `|x|` does not underflow `psi_0` before
/// the polynomial growth catches up.
pub(crate) fn hermite_row(x: f64, out: &mut [f64]) -> bool {
    let n_max = out.len();
    if n_max == 0 {
        return false;
    }
    // psi_0 = pi^{-1/4} exp(-x^2/2), carried as 1 * exp(log_scale)
    let mut log_scale = -0.25 * std::f64::consts::PI.ln() - 0.5 * x * x;
    let mut prev = 0.0_f64;
    let mut cur = 1.0_f64;
    let mut underflow = false;
    let mut emit = |n: usize, v: f64, log_scale: f64, out: &mut [f64]| {
        let factor = log_scale.exp();
        out[n] = if factor > 1e-290 {
            v * factor
        } else if v == 0.0 {
            0.0
        } else {
            let mag = v.abs().ln() + log_scale;
            if mag < -745.0 {
                underflow = true;
                0.0
            } else {
                v.signum() * mag.exp()
            }
        };
    };
    emit(0, cur, log_scale, out);
    for n in 0..n_max - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
        }
        emit(n + 1, cur, log_scale, out);
    }
    underflow
}

/// Normalized Hermite function `psi_n(x)`, the position wave function of the
/// Fock state `|n>` under `a = (q + i p)/sqrt(2)`.
pub fn hermite_psi(n: usize, x: f64) -> HermiteValue {
    let mut row = vec![0.0; n + 1];
    let flagged = hermite_row(x, &mut row);
    let value = row[n];
    HermiteValue {
        value,
        underflow: flagged && value == 0.0,
    }
}

/// Table `T[(i, n)] = psi_n(xs[i])` for `n < levels`.
pub fn hermite_table(levels: usize, xs: &[f64]) -> DMatrix<f64> {
    let mut table = DMatrix::zeros(xs.len(), levels);
    let mut row = vec![0.0; levels];
    for (i, &x) in xs.iter().enumerate() {
        hermite_row(x, &mut row);
        for (n, v) in row.iter().enumerate() {
            table[(i, n)] = *v;
        }
    }
    table
}
