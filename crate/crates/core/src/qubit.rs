//! Small dense helpers for logical (qubit-level) states and operators.

use crate::fock::{CMatrix, CVector};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `[I, X, Y, Z]`.
pub fn paulis() -> [CMatrix; 4] {
    [
        CMatrix::identity(2, 2),
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

pub fn hadamard() -> CMatrix {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CMatrix::from_row_slice(2, 2, &[h, h, h, -h])
}

/// `diag(1, e^{i theta})`.
pub fn rz(theta: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, Complex64::from_polar(1.0, theta)])
}

/// `|0>`, `|1>`, `|+>` and friends.
pub fn ket(bits: &[u8]) -> CVector {
    let mut v = CVector::zeros(1 << bits.len());
    let idx = bits
        .iter()
        .fold(0usize, |acc, b| (acc << 1) | (*b as usize & 1));
    v[idx] = ONE;
    v
}

pub fn plus() -> CVector {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CVector::from_vec(vec![h, h])
}

pub fn minus() -> CVector {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CVector::from_vec(vec![h, -h])
}

/// `(|0> + e^{i theta}|1>)/sqrt 2` for `sign = +1`, the orthogonal state for `-1`.
pub fn xy_eigenstate(theta: f64, sign: i8) -> CVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    CVector::from_vec(vec![
        Complex64::new(h, 0.0),
        Complex64::from_polar(s * h, theta),
    ])
}

pub fn kron_all(ms: &[CMatrix]) -> CMatrix {
    ms.iter()
        .fold(CMatrix::identity(1, 1), |acc, m| acc.kronecker(m))
}

pub fn kron_vec(vs: &[CVector]) -> CVector {
    vs.iter()
        .fold(CVector::from_element(1, ONE), |acc, v| acc.kronecker(v))
}

/// Embeds a single-qubit operator on qubit `k` of `n` (qubit 0 most significant).
pub fn on_qubit(op: &CMatrix, k: usize, n: usize) -> CMatrix {
    let ms: Vec<CMatrix> = (0..n)
        .map(|j| {
            if j == k {
                op.clone()
            } else {
                CMatrix::identity(2, 2)
            }
        })
        .collect();
    kron_all(&ms)
}

/// Controlled-Z between qubits `a` and `b` of `n`.
pub fn cz(a: usize, b: usize, n: usize) -> CMatrix {
    let dim = 1 << n;
    let mut m = CMatrix::identity(dim, dim);
    for i in 0..dim {
        let ba = (i >> (n - 1 - a)) & 1;
        let bb = (i >> (n - 1 - b)) & 1;
        if ba == 1 && bb == 1 {
            m[(i, i)] = -ONE;
        }
    }
    m
}

pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Trace distance `||a - b||_1 / 2` of Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a - b;
    let eig = nalgebra::linalg::SymmetricEigen::new(diff).eigenvalues;
    0.5 * eig.iter().map(|x| x.abs()).sum::<f64>()
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
