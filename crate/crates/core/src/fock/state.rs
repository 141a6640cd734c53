use super::{check_modes, CMatrix, CVector, FockSpace};
use crate::error::{QspError, Result};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;

/// Largest dimension for which `min_eigenvalue` runs a full decomposition.
const EIGEN_DIM_LIMIT: usize = 1024;

/// Dense mixed state on one or more modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    modes: Vec<usize>,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(space: FockSpace, modes: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        check_modes(&modes)?;
        let dim = space.dim(modes.len());
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(QspError::DimensionMismatch(format!(
                "density matrix on {} modes needs {dim}x{dim}, got {}x{}",
                modes.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            space,
            modes,
            matrix,
        })
    }

    /// Fock state `|n><n|` on mode 0.
    pub fn fock(space: FockSpace, n: usize) -> Self {
        let mut m = CMatrix::zeros(space.cutoff(), space.cutoff());
        m[(n, n)] = Complex64::new(1.0, 0.0);
        Self {
            space,
            modes: vec![0],
            matrix: m,
        }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        Self {
            space: psi.space(),
            modes: psi.modes().to_vec(),
            matrix: a * a.adjoint(),
        }
    }

    /// Zero-mode state: the `1 x 1` matrix `[weight]`.
    pub fn scalar(space: FockSpace, weight: f64) -> Self {
        Self {
            space,
            modes: Vec::new(),
            matrix: CMatrix::from_element(1, 1, Complex64::new(weight, 0.0)),
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_modes(mut self, modes: Vec<usize>) -> Result<Self> {
        check_modes(&modes)?;
        if modes.len() != self.modes.len() {
            return Err(QspError::DimensionMismatch("mode count changed".into()));
        }
        self.modes = modes;
        Ok(self)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn trace_defect(&self) -> f64 {
        (self.trace() - Complex64::new(1.0, 0.0)).norm()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let n = m.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn purity(&self) -> f64 {
        // Tr rho^2 = sum |rho_ij|^2 for Hermitian rho
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Smallest eigenvalue; `None` above the dense-decomposition size limit.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        if self.dim() > EIGEN_DIM_LIMIT {
            return None;
        }
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        Some(
            eig.eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min),
        )
    }

    /// Population of each Fock level of `mode` (reduced diagonal).
    pub fn populations(&self, mode: usize) -> Result<Vec<f64>> {
        let reduced = super::tensor::reduce_to(self, &[mode])?;
        Ok(reduced.matrix.diagonal().iter().map(|z| z.re).collect())
    }

    /// Returns the state scaled to unit trace along with the pre-scaling trace.
    pub fn normalized(mut self) -> Result<(Self, f64)> {
        let tr = self.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(QspError::TraceDefect((tr - 1.0).abs()));
        }
        self.matrix /= Complex64::new(tr, 0.0);
        Ok((self, tr))
    }

    /// Kronecker product; the result lists `self`'s modes first.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(QspError::DimensionMismatch("different cutoffs".into()));
        }
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        check_modes(&modes)?;
        Ok(Self {
            space: self.space,
            modes,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Matrix entries scaled in place by `f(row, col)`.
    pub(crate) fn map_entries(&mut self, f: impl Fn(usize, usize) -> Complex64) {
        let n = self.matrix.nrows();
        for j in 0..n {
            for i in 0..n {
                let z = f(i, j);
                self.matrix[(i, j)] *= z;
            }
        }
    }

    /// Position of `mode` in the signature.
    pub fn position_of(&self, mode: usize) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| *m == mode)
            .ok_or(QspError::UnknownMode(mode))
    }
}

/// Pure state vector on one or more modes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: FockSpace,
    modes: Vec<usize>,
    amps: CVector,
}

impl StateVector {
    pub fn new(space: FockSpace, modes: Vec<usize>, amps: CVector) -> Result<Self> {
        check_modes(&modes)?;
        let dim = space.dim(modes.len());
        if amps.len() != dim {
            return Err(QspError::DimensionMismatch(format!(
                "state on {} modes needs {dim} amplitudes, got {}",
                modes.len(),
                amps.len()
            )));
        }
        Ok(Self { space, modes, amps })
    }

    pub fn fock(space: FockSpace, n: usize) -> Self {
        let mut amps = CVector::zeros(space.cutoff());
        amps[n] = Complex64::new(1.0, 0.0);
        Self {
            space,
            modes: vec![0],
            amps,
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut CVector {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(mut self) -> Result<(Self, f64)> {
        let n = self.amps.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(QspError::ZeroProbabilityBranch(n * n));
        }
        self.amps /= Complex64::new(n, 0.0);
        Ok((self, n))
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(QspError::DimensionMismatch("different cutoffs".into()));
        }
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        check_modes(&modes)?;
        Ok(Self {
            space: self.space,
            modes,
            amps: self.amps.kronecker(&other.amps),
        })
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    pub fn position_of(&self, mode: usize) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| *m == mode)
            .ok_or(QspError::UnknownMode(mode))
    }
}

/// Weighted sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedMean {
    pub mean: f64,
    pub std_error: f64,
}

impl WeightedMean {
    /// `weights` need not be normalized.
    pub fn from_samples(weights: &[f64], values: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mean = weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total;
        let var = weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * (v - mean).powi(2))
            .sum::<f64>()
            / total;
        let sum_sq: f64 = weights.iter().map(|w| (w / total).powi(2)).sum();
        // effective sample size 1 / sum(w^2) with Bessel-style correction
        let n_eff = 1.0 / sum_sq;
        let std_error = if n_eff > 1.0 {
            (var * n_eff / (n_eff - 1.0) / n_eff).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error }
    }

    pub fn within_sigma(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + 1e-12
    }
}

/// Weighted pure-state ensemble standing in for a mixed state.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryEnsemble {
    members: Vec<(f64, StateVector)>,
}

impl TrajectoryEnsemble {
    /// Weights are normalized to sum to one.
    pub fn new(members: Vec<(f64, StateVector)>) -> Result<Self> {
        if members.is_empty() {
            return Err(QspError::InvalidParameter("empty ensemble".into()));
        }
        let total: f64 = members.iter().map(|(w, _)| *w).sum();
        if !(total > 0.0) {
            return Err(QspError::InvalidParameter(
                "ensemble weights sum to zero".into(),
            ));
        }
        let modes = members[0].1.modes().to_vec();
        if members.iter().any(|(_, s)| s.modes() != modes.as_slice()) {
            return Err(QspError::DimensionMismatch(
                "ensemble members must share a mode signature".into(),
            ));
        }
        Ok(Self {
            members: members.into_iter().map(|(w, s)| (w / total, s)).collect(),
        })
    }

    pub fn uniform(states: Vec<StateVector>) -> Result<Self> {
        Self::new(states.into_iter().map(|s| (1.0, s)).collect())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[(f64, StateVector)] {
        &self.members
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|(w, _)| *w).collect()
    }

    pub fn modes(&self) -> &[usize] {
        self.members[0].1.modes()
    }

    pub fn space(&self) -> FockSpace {
        self.members[0].1.space()
    }

    /// Real part of `<psi|op|psi>` averaged over the ensemble.
    pub fn expectation(&self, op: &super::FockOperator) -> Result<WeightedMean> {
        let mut values = Vec::with_capacity(self.members.len());
        for (_, psi) in &self.members {
            let out = super::apply(op, psi)?;
            values.push(psi.inner(&out).re);
        }
        Ok(WeightedMean::from_samples(&self.weights(), &values))
    }

    /// Dense reconstruction `sum_k w_k |psi_k><psi_k|`.
    pub fn to_density(&self) -> DensityMatrix {
        let first = &self.members[0].1;
        let dim = first.amplitudes().len();
        let mut m = CMatrix::zeros(dim, dim);
        for (w, psi) in &self.members {
            let a = psi.amplitudes();
            m.ger(
                Complex64::new(*w, 0.0),
                a,
                &a.conjugate(),
                Complex64::new(1.0, 0.0),
            );
        }
        DensityMatrix {
            space: first.space(),
            modes: first.modes().to_vec(),
            matrix: m,
        }
    }
}
