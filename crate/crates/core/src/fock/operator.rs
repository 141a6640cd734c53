use super::{check_modes, CMatrix, CVector, FockSpace};
use crate::error::{QspError, Result};
use num_complex::Complex64;

const HERMITIAN_TOL: f64 = 1e-12;
/// Unitarity defect allowed on the reliable block of levels.
const DISPLACEMENT_DEFECT_LIMIT: f64 = 1e-6;

/// Storage for an operator matrix. Diagonal operators (parity, rotations,
/// exponential-parity gates) never materialize the dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorRepr {
    Dense(CMatrix),
    Diagonal(CVector),
}

/// Operator on the truncated Fock space of one or more modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    space: FockSpace,
    modes: Vec<usize>,
    repr: OperatorRepr,
    hermitian: bool,
}

impl FockOperator {
    pub fn dense(space: FockSpace, modes: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        check_modes(&modes)?;
        let dim = space.dim(modes.len());
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(QspError::DimensionMismatch(format!(
                "operator on {} modes needs {dim}x{dim}, got {}x{}",
                modes.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            space,
            modes,
            repr: OperatorRepr::Dense(matrix),
            hermitian: false,
        })
    }

    pub fn diagonal(space: FockSpace, modes: Vec<usize>, diag: CVector) -> Result<Self> {
        check_modes(&modes)?;
        let dim = space.dim(modes.len());
        if diag.len() != dim {
            return Err(QspError::DimensionMismatch(format!(
                "diagonal on {} modes needs {dim} entries, got {}",
                modes.len(),
                diag.len()
            )));
        }
        Ok(Self {
            space,
            modes,
            repr: OperatorRepr::Diagonal(diag),
            hermitian: false,
        })
    }

    pub fn identity(space: FockSpace, modes: Vec<usize>) -> Result<Self> {
        let dim = space.dim(modes.len());
        Ok(Self::diagonal(
            space,
            modes,
            CVector::from_element(dim, Complex64::new(1.0, 0.0)),
        )?
        .assume_hermitian())
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn repr(&self) -> &OperatorRepr {
        &self.repr
    }

    pub fn dim(&self) -> usize {
        self.space.dim(self.modes.len())
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, OperatorRepr::Diagonal(_))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Same matrix acting on a different set of modes.
    pub fn on_modes(mut self, modes: Vec<usize>) -> Result<Self> {
        check_modes(&modes)?;
        if modes.len() != self.modes.len() {
            return Err(QspError::DimensionMismatch(format!(
                "cannot relabel {} modes onto {}",
                self.modes.len(),
                modes.len()
            )));
        }
        self.modes = modes;
        Ok(self)
    }

    pub fn on_mode(self, mode: usize) -> Result<Self> {
        self.on_modes(vec![mode])
    }

    /// Sets the Hermiticity flag after checking it to `1e-12`.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(QspError::InvalidParameter(format!(
                "operator is not Hermitian (defect {defect:.3e})"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub(crate) fn assume_hermitian(mut self) -> Self {
        self.hermitian = true;
        self
    }

    pub fn hermiticity_defect(&self) -> f64 {
        match &self.repr {
            OperatorRepr::Dense(m) => (m - m.adjoint()).camax(),
            OperatorRepr::Diagonal(d) => d.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        match &self.repr {
            OperatorRepr::Dense(m) => m[(row, col)],
            OperatorRepr::Diagonal(d) => {
                if row == col {
                    d[row]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match &self.repr {
            OperatorRepr::Dense(m) => m.clone(),
            OperatorRepr::Diagonal(d) => CMatrix::from_diagonal(d),
        }
    }

    pub fn diagonal_entries(&self) -> Option<&CVector> {
        match &self.repr {
            OperatorRepr::Diagonal(d) => Some(d),
            OperatorRepr::Dense(_) => None,
        }
    }

    pub fn adjoint(&self) -> Self {
        let repr = match &self.repr {
            OperatorRepr::Dense(m) => OperatorRepr::Dense(m.adjoint()),
            OperatorRepr::Diagonal(d) => OperatorRepr::Diagonal(d.map(|z| z.conj())),
        };
        Self {
            space: self.space,
            modes: self.modes.clone(),
            repr,
            hermitian: self.hermitian,
        }
    }

    /// Matrix product `self * other` on an identical mode signature.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.modes != other.modes || self.space != other.space {
            return Err(QspError::DimensionMismatch(
                "compose needs identical mode signatures".into(),
            ));
        }
        let repr = match (&self.repr, &other.repr) {
            (OperatorRepr::Diagonal(a), OperatorRepr::Diagonal(b)) => {
                OperatorRepr::Diagonal(a.component_mul(b))
            }
            (OperatorRepr::Diagonal(a), OperatorRepr::Dense(b)) => {
                let mut m = b.clone();
                for (i, mut row) in m.row_iter_mut().enumerate() {
                    row *= a[i];
                }
                OperatorRepr::Dense(m)
            }
            (OperatorRepr::Dense(a), OperatorRepr::Diagonal(b)) => {
                let mut m = a.clone();
                for (j, mut col) in m.column_iter_mut().enumerate() {
                    col *= b[j];
                }
                OperatorRepr::Dense(m)
            }
            (OperatorRepr::Dense(a), OperatorRepr::Dense(b)) => OperatorRepr::Dense(a * b),
        };
        Ok(Self {
            space: self.space,
            modes: self.modes.clone(),
            repr,
            hermitian: false,
        })
    }

    /// `z * self`.
    pub fn scaled(&self, z: Complex64) -> Self {
        let repr = match &self.repr {
            OperatorRepr::Dense(m) => OperatorRepr::Dense(m * z),
            OperatorRepr::Diagonal(d) => OperatorRepr::Diagonal(d * z),
        };
        Self {
            space: self.space,
            modes: self.modes.clone(),
            repr,
            hermitian: self.hermitian && z.im == 0.0,
        }
    }
}

/// Ladder operator with `sqrt(n+1)` on the superdiagonal.
pub fn make_annihilation(space: FockSpace) -> FockOperator {
    let d = space.cutoff();
    let mut m = CMatrix::zeros(d, d);
    for n in 0..d - 1 {
        m[(n, n + 1)] = Complex64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    FockOperator::dense(space, vec![0], m).expect("shape is consistent")
}

/// Number operator `a^dagger a`.
pub fn make_number(space: FockSpace) -> FockOperator {
    let diag = CVector::from_fn(space.cutoff(), |n, _| Complex64::new(n as f64, 0.0));
    FockOperator::diagonal(space, vec![0], diag)
        .expect("shape is consistent")
        .assume_hermitian()
}

/// Photon-number parity `exp(i pi a^dagger a)`, diagonal `(-1)^n`.
pub fn make_parity(space: FockSpace) -> FockOperator {
    let diag = CVector::from_fn(space.cutoff(), |n, _| {
        Complex64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    });
    FockOperator::diagonal(space, vec![0], diag)
        .expect("shape is consistent")
        .assume_hermitian()
}

/// Position quadrature `q = (a + a^dagger)/sqrt(2)`.
pub fn make_position(space: FockSpace) -> FockOperator {
    let a = make_annihilation(space).to_dense();
    let q = (&a + a.adjoint()) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    FockOperator::dense(space, vec![0], q)
        .expect("shape is consistent")
        .assume_hermitian()
}

/// Truncated displacement operator with its measured unitarity defect.
#[derive(Debug, Clone)]
pub struct Displacement {
    pub operator: FockOperator,
    /// Number of lowest levels `k` on which `D^dagger D` equals the identity
    /// to within the defect limit (columns whose displaced image fits).
    pub reliable_levels: usize,
    /// `max |(D^dagger D - I)_{mn}|` over the lowest `ceil(D/2)` levels.
    pub low_level_defect: f64,
    /// The same maximum over the whole truncated space.
    pub full_defect: f64,
}

/// `D(alpha) = exp(alpha a^dagger - alpha^* a)`.
///
/// The exponent is formed on a padded space (cutoff plus at least half again)
/// and exponentiated by scaling and squaring; the returned operator is the
/// leading `D x D` block. Probability that the block leaks out of the
/// truncated space shows up as the unitarity defect. The call fails when even
/// the vacuum column leaks more than `1e-6`; callers displacing other states
/// must check the trace of the result themselves.
///
/// Heuristic support requirement: `|alpha|^2 + 3|alpha| + 3 <~ D`.
pub fn make_displacement(alpha: Complex64, space: FockSpace) -> Result<Displacement> {
    let d = space.cutoff();
    if alpha == Complex64::new(0.0, 0.0) {
        return Ok(Displacement {
            operator: FockOperator::identity(space, vec![0])?,
            reliable_levels: d,
            low_level_defect: 0.0,
            full_defect: 0.0,
        });
    }
    let padded = d + (d / 2).max(16);
    let mut gen = CMatrix::zeros(padded, padded);
    for n in 0..padded - 1 {
        let s = ((n + 1) as f64).sqrt();
        // alpha a^dagger: (n+1, n); -alpha^* a: (n, n+1)
        gen[(n + 1, n)] = alpha * s;
        gen[(n, n + 1)] = -alpha.conj() * s;
    }
    let full = gen.exp();
    let block = full.view((0, 0), (d, d)).into_owned();
    let gram = block.adjoint() * &block;
    let half = d.div_ceil(2);
    // leading-block defect: prefix[k] = max over the k x k block
    let mut prefix = vec![0.0_f64; d + 1];
    for k in 0..d {
        let mut m = prefix[k];
        for j in 0..=k {
            let target = if j == k { 1.0 } else { 0.0 };
            m = m.max((gram[(k, j)] - Complex64::new(target, 0.0)).norm());
            m = m.max((gram[(j, k)] - Complex64::new(target, 0.0)).norm());
        }
        prefix[k + 1] = m;
    }
    let reliable = prefix
        .iter()
        .rposition(|v| *v <= DISPLACEMENT_DEFECT_LIMIT)
        .unwrap_or(0);
    if reliable == 0 {
        return Err(QspError::CutoffTooSmall {
            what: "displacement unitarity",
            defect: prefix[1],
            limit: DISPLACEMENT_DEFECT_LIMIT,
        });
    }
    Ok(Displacement {
        operator: FockOperator::dense(space, vec![0], block)?,
        reliable_levels: reliable,
        low_level_defect: prefix[half],
        full_defect: prefix[d],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, DensityMatrix, StateVector};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn annihilation_entries() {
        let a = make_annihilation(FockSpace::new(2).unwrap()).to_dense();
        assert_eq!(a[(0, 1)], c(1.0));
        assert_eq!(a[(0, 0)], c(0.0));
        assert_eq!(a[(1, 0)], c(0.0));
        assert_eq!(a[(1, 1)], c(0.0));
        let a3 = make_annihilation(FockSpace::new(3).unwrap()).to_dense();
        assert!((a3[(1, 2)] - c(2f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn annihilation_kills_vacuum() {
        let space = FockSpace::new(6).unwrap();
        let a = make_annihilation(space);
        let vac = StateVector::fock(space, 0);
        let out = crate::fock::apply(&a, &vac).unwrap();
        assert!(out.amplitudes().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn ladder_commutator_below_top_level() {
        let space = FockSpace::new(12).unwrap();
        let a = make_annihilation(space).to_dense();
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for i in 0..11 {
            for j in 0..11 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((comm[(i, j)] - c(target)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn parity_is_involution() {
        let space = FockSpace::new(4).unwrap();
        let p = make_parity(space);
        let d = p.diagonal_entries().unwrap();
        assert_eq!(d.as_slice(), &[c(1.0), c(-1.0), c(1.0), c(-1.0)]);
        let p2 = p.compose(&p).unwrap();
        assert!(p2.diagonal_entries().unwrap().iter().all(|z| *z == c(1.0)));
    }

    #[test]
    fn vacuum_q_variance_locks_convention() {
        let space = FockSpace::new(8).unwrap();
        let q = make_position(space);
        let q2 = q.compose(&q).unwrap();
        let vac = DensityMatrix::fock(space, 0);
        let v = expectation(&q2, &vac).unwrap();
        assert!((v.re - crate::fock::VACUUM_Q_VARIANCE).abs() < 1e-14);
    }

    #[test]
    fn displacement_identity_at_zero() {
        let space = FockSpace::new(10).unwrap();
        let d = make_displacement(c(0.0), space).unwrap();
        assert_eq!(d.operator.to_dense(), CMatrix::identity(10, 10));
    }

    #[test]
    fn displacement_vacuum_amplitude_matches_series() {
        // Oracle: coherent-state amplitude <0|alpha> from its power series.
        let space = FockSpace::new(40).unwrap();
        for &(re, im) in &[(1.0, 0.0), (2.0, 0.5), (-0.7, 1.3)] {
            let alpha = Complex64::new(re, im);
            let d = make_displacement(alpha, space).unwrap();
            let got = d.operator.entry(0, 0);
            let expected = (-alpha.norm_sqr() / 2.0).exp();
            assert!((got - c(expected)).norm() < 1e-12, "{got} vs {expected}");
            // <n|D|0> = e^{-|a|^2/2} a^n / sqrt(n!)
            let mut term = c(expected);
            for n in 1..10 {
                term = term * alpha / (n as f64).sqrt();
                assert!((d.operator.entry(n, 0) - term).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn displaced_vacuum_q_mean() {
        let space = FockSpace::new(40).unwrap();
        let q = make_position(space);
        for alpha in [0.5, 1.5, 2.5] {
            let d = make_displacement(c(alpha), space).unwrap();
            let psi = crate::fock::apply(&d.operator, &StateVector::fock(space, 0)).unwrap();
            let rho = DensityMatrix::from_pure(&psi);
            let mean = expectation(&q, &rho).unwrap().re;
            assert!((mean - 2f64.sqrt() * alpha).abs() < 1e-10);
        }
    }

    #[test]
    fn displacement_reports_small_cutoff() {
        let space = FockSpace::new(8).unwrap();
        let err = make_displacement(c(4.0), space).unwrap_err();
        assert!(matches!(err, QspError::CutoffTooSmall { .. }));
    }
}
