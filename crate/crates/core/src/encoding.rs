//! Analogous Pauli operators of the QSP encoding and logical-state tomography.
//!
//! `Z_E` is photon-number parity, `X_E` is `sign(q)`, `Y_E = i X_E Z_E`. An
//! `N`-qubit logical state is read off from the `4^N` expectation values of
//! tensor products of `{I_E, X_E, Y_E, Z_E}` over the designated modes.

use crate::error::{QspError, Result};
use crate::fock::{
    apply, make_parity, make_sign_q, CMatrix, DensityMatrix, FockOperator, FockSpace,
    SignQuadrature, StateVector, TrajectoryEnsemble, WeightedMean,
};
use crate::par::{try_map_indexed, Execution};
use crate::qubit;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Serialize, Serializer};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Full tomography is limited to this many logical qubits.
pub const MAX_TOMOGRAPHY_QUBITS: usize = 4;
const TRACE_TOL: f64 = 1e-6;
const MIN_BRANCH_WEIGHT: f64 = 1e-12;

fn sign_cache() -> &'static Mutex<HashMap<usize, Arc<SignQuadrature>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SignQuadrature>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `sign(q)` for this cutoff, computed once per process.
pub fn sign_quadrature(space: FockSpace) -> Result<Arc<SignQuadrature>> {
    if let Some(s) = sign_cache()
        .lock()
        .expect("cache poisoned")
        .get(&space.cutoff())
    {
        return Ok(s.clone());
    }
    let s = Arc::new(make_sign_q(space)?);
    sign_cache()
        .lock()
        .expect("cache poisoned")
        .insert(space.cutoff(), s.clone());
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct ApoSet {
    space: FockSpace,
    sign: Arc<SignQuadrature>,
    pub i: FockOperator,
    pub x: FockOperator,
    pub y: FockOperator,
    pub z: FockOperator,
}

impl ApoSet {
    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn sign(&self) -> &SignQuadrature {
        &self.sign
    }

    /// `[I_E, X_E, Y_E, Z_E]`.
    pub fn ops(&self) -> [&FockOperator; 4] {
        [&self.i, &self.x, &self.y, &self.z]
    }

    fn dense(&self) -> [CMatrix; 4] {
        self.ops().map(|o| o.to_dense())
    }

    /// `X_E^2`; equals the identity only up to truncation error.
    pub fn x_squared(&self) -> FockOperator {
        self.x.compose(&self.x).expect("same modes")
    }
}

pub fn apo_set(space: FockSpace) -> Result<ApoSet> {
    let sign = sign_quadrature(space)?;
    let x = sign.operator(space);
    let z = make_parity(space);
    let y = x
        .compose(&z)?
        .scaled(Complex64::new(0.0, 1.0))
        .mark_hermitian()?;
    Ok(ApoSet {
        space,
        i: FockOperator::identity(space, vec![0])?,
        x,
        y,
        z,
        sign,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TomographyDiagnostics {
    /// `<I_E ... I_E>` before renormalization (branch weight after post-selection).
    pub weight: f64,
    /// Largest `|<X_E^2> - 1|` over the encoded modes.
    pub x_squared_defect: f64,
    /// Largest population in the top tenth of Fock levels over the encoded modes.
    pub tail_mass: f64,
    /// Standard errors of the Pauli expectations (ensemble input only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pauli_std_errors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
}

/// Logical density matrix; qubit `k` is encoded in `modes[k]`, qubit 0 being
/// the most significant index.
#[derive(Debug, Clone)]
pub struct LogicalState {
    matrix: CMatrix,
    modes: Vec<usize>,
    diagnostics: TomographyDiagnostics,
}

impl LogicalState {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        if !dim.is_power_of_two() || matrix.ncols() != dim {
            return Err(QspError::DimensionMismatch(format!(
                "logical matrix must be 2^N square, got {}x{}",
                dim,
                matrix.ncols()
            )));
        }
        let n = dim.trailing_zeros() as usize;
        Ok(Self {
            matrix,
            modes: (0..n).collect(),
            diagnostics: TomographyDiagnostics {
                weight: 1.0,
                ..Default::default()
            },
        })
    }

    pub fn from_pure(v: &crate::fock::CVector) -> Result<Self> {
        Self::from_matrix(qubit::projector(&(v / Complex64::new(v.norm(), 0.0))))
    }

    /// Single-qubit state `(I + x X + y Y + z Z)/2`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Self {
        let [i, px, py, pz] = qubit::paulis();
        let m = (i
            + px * Complex64::new(x, 0.0)
            + py * Complex64::new(y, 0.0)
            + pz * Complex64::new(z, 0.0))
            * Complex64::new(0.5, 0.0);
        Self::from_matrix(m).expect("2x2")
    }

    pub fn n_qubits(&self) -> usize {
        self.modes.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn diagnostics(&self) -> &TomographyDiagnostics {
        &self.diagnostics
    }

    /// `Tr{sigma_mu rho_L}` with `mu` in base 4 over `[I, X, Y, Z]`, qubit 0 first.
    pub fn pauli_expectation(&self, mu: &[usize]) -> f64 {
        let p = qubit::paulis();
        let op = qubit::kron_all(&mu.iter().map(|k| p[*k].clone()).collect::<Vec<_>>());
        (op * &self.matrix).trace().re
    }

    /// `(<X>, <Y>, <Z>)` of a single logical qubit.
    pub fn bloch(&self) -> Result<[f64; 3]> {
        if self.n_qubits() != 1 {
            return Err(QspError::DimensionMismatch(
                "Bloch vector needs one qubit".into(),
            ));
        }
        Ok([
            self.pauli_expectation(&[1]),
            self.pauli_expectation(&[2]),
            self.pauli_expectation(&[3]),
        ])
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `<v|rho_L|v>` for a normalized target `v`.
    pub fn fidelity_to_pure(&self, v: &crate::fock::CVector) -> Result<f64> {
        if v.len() != self.matrix.nrows() {
            return Err(QspError::DimensionMismatch("target vector length".into()));
        }
        let vn = v / Complex64::new(v.norm(), 0.0);
        Ok(vn.dotc(&(&self.matrix * &vn)).re)
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.matrix.shape() != other.matrix.shape() {
            return Err(QspError::DimensionMismatch(
                "logical dimensions differ".into(),
            ));
        }
        Ok(qubit::trace_distance(&self.matrix, &other.matrix))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        nalgebra::linalg::SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .min()
    }

    /// Relabels the modes the qubits are attributed to.
    pub fn with_modes(mut self, modes: Vec<usize>) -> Result<Self> {
        if modes.len() != self.n_qubits() {
            return Err(QspError::DimensionMismatch("mode count changed".into()));
        }
        self.modes = modes;
        Ok(self)
    }

    /// `U rho_L U^dagger` for a logical unitary; diagnostics are kept.
    pub fn transformed(&self, u: &CMatrix) -> Result<Self> {
        if u.shape() != self.matrix.shape() {
            return Err(QspError::DimensionMismatch("unitary dimension".into()));
        }
        let mut out = self.clone();
        out.matrix = u * &self.matrix * u.adjoint();
        Ok(out)
    }
}

impl Serialize for LogicalState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc<'a> {
            n_qubits: usize,
            modes: &'a [usize],
            matrix: Vec<[f64; 2]>,
            diagnostics: &'a TomographyDiagnostics,
        }
        let n = self.matrix.nrows();
        let mut flat = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let z = self.matrix[(r, c)];
                flat.push([z.re, z.im]);
            }
        }
        Doc {
            n_qubits: self.n_qubits(),
            modes: &self.modes,
            matrix: flat,
            diagnostics: &self.diagnostics,
        }
        .serialize(serializer)
    }
}

/// `(1/2^N) sum_mu e_mu sigma_mu`, divided by `e_0`.
fn assemble(expectations: &[f64], n: usize) -> CMatrix {
    let p = qubit::paulis();
    let dim = 1 << n;
    let mut m = CMatrix::zeros(dim, dim);
    let mut digits = vec![0usize; n];
    for (mu, e) in expectations.iter().enumerate() {
        if *e == 0.0 {
            continue;
        }
        crate::fock::digits(mu, 4, n, &mut digits);
        let op = qubit::kron_all(&digits.iter().map(|k| p[*k].clone()).collect::<Vec<_>>());
        m += op * Complex64::new(*e, 0.0);
    }
    m / Complex64::new(expectations[0] * dim as f64, 0.0)
}

/// `Tr{(P_1 x ... x P_n) R}` for all Pauli strings, by contracting one mode at a time.
fn contract_expectations(r: &CMatrix, d: usize, n: usize, ops: &[CMatrix; 4]) -> Vec<Complex64> {
    if n == 0 {
        return vec![r[(0, 0)]];
    }
    let dr = d.pow((n - 1) as u32);
    let mut out = Vec::with_capacity(4usize.pow(n as u32));
    for p in ops {
        let mut m = CMatrix::zeros(dr, dr);
        for b in 0..d {
            for a in 0..d {
                let w = p[(b, a)];
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let block = r.view((a * dr, b * dr), (dr, dr));
                m.zip_apply(&block, |x, y| *x += w * y);
            }
        }
        out.extend(contract_expectations(&m, d, n - 1, ops));
    }
    out
}

fn tail_mass(pops: &[f64]) -> f64 {
    let d = pops.len();
    let start = d - d.div_ceil(10);
    pops[start..].iter().sum()
}

fn check_partition(modes: &[usize], partition: &[usize]) -> Result<()> {
    if partition.is_empty() || partition.len() > MAX_TOMOGRAPHY_QUBITS {
        return Err(QspError::InvalidParameter(format!(
            "tomography supports 1..={MAX_TOMOGRAPHY_QUBITS} qubits, got {}",
            partition.len()
        )));
    }
    crate::fock::check_modes(partition)?;
    for m in partition {
        if !modes.contains(m) {
            return Err(QspError::UnknownMode(*m));
        }
    }
    Ok(())
}

/// Single-qubit tomography of `mode`; the input must have unit trace.
pub fn logical_qubit(rho: &DensityMatrix, mode: usize) -> Result<LogicalState> {
    let defect = rho.trace_defect();
    if defect > TRACE_TOL {
        return Err(QspError::TraceDefect(defect));
    }
    logical_state(rho, &[mode])
}

/// Multi-qubit tomography; qubit `k` is encoded in mode `partition[k]`.
///
/// Inputs with non-unit trace (post-selected branches) are renormalized by
/// `<I_E ... I_E>`, which is reported as the diagnostics weight.
pub fn logical_state(rho: &DensityMatrix, partition: &[usize]) -> Result<LogicalState> {
    check_partition(rho.modes(), partition)?;
    let space = rho.space();
    let apo = apo_set(space)?;
    let reduced = crate::fock::tensor::reduce_to(rho, partition)?;
    let n = partition.len();
    let e: Vec<f64> = contract_expectations(reduced.matrix(), space.cutoff(), n, &apo.dense())
        .into_iter()
        .map(|z| z.re)
        .collect();
    let weight = e[0];
    if weight < MIN_BRANCH_WEIGHT {
        return Err(QspError::ZeroProbabilityBranch(weight));
    }
    let x2 = apo.x_squared();
    let mut x_def = 0.0_f64;
    let mut tail = 0.0_f64;
    for m in partition {
        let single = crate::fock::tensor::reduce_to(rho, &[*m])?;
        let v = crate::fock::expectation(&x2.clone().on_mode(*m)?, &single)?.re / weight;
        x_def = x_def.max((v - 1.0).abs());
        let pops: Vec<f64> = single
            .matrix()
            .diagonal()
            .iter()
            .map(|z| z.re / weight)
            .collect();
        tail = tail.max(tail_mass(&pops));
    }
    Ok(LogicalState {
        matrix: assemble(&e, n),
        modes: partition.to_vec(),
        diagnostics: TomographyDiagnostics {
            weight,
            x_squared_defect: x_def,
            tail_mass: tail,
            pauli_std_errors: None,
            trajectories: None,
        },
    })
}

/// `(P_1 x ... x P_k) psi` for every Pauli string on `modes`, in base-4 order.
fn pauli_branches(psi: &StateVector, modes: &[usize], apo: &ApoSet) -> Result<Vec<StateVector>> {
    let mut level = vec![psi.clone()];
    for m in modes {
        let x = apo.x.clone().on_mode(*m)?;
        let z = apo.z.clone().on_mode(*m)?;
        let mut next = Vec::with_capacity(level.len() * 4);
        for v in level {
            let zv = apply(&z, &v)?;
            let xv = apply(&x, &v)?;
            let mut yv = apply(&x, &zv)?;
            yv.amplitudes_mut()
                .iter_mut()
                .for_each(|a| *a *= Complex64::new(0.0, 1.0));
            next.push(v);
            next.push(xv);
            next.push(yv);
            next.push(zv);
        }
        level = next;
    }
    Ok(level)
}

pub(crate) struct PureTomography {
    /// Pauli-string expectations in base-4 order, qubit 0 most significant.
    pub expectations: Vec<f64>,
    pub x_squared: Vec<f64>,
    pub tail: f64,
}

pub(crate) fn pure_tomography(
    psi: &StateVector,
    partition: &[usize],
    apo: &ApoSet,
) -> Result<PureTomography> {
    let k = partition.len() / 2;
    let (left_modes, right_modes) = partition.split_at(k);
    let left = pauli_branches(psi, left_modes, apo)?;
    let right = pauli_branches(psi, right_modes, apo)?;
    let mut expectations = Vec::with_capacity(left.len() * right.len());
    for l in &left {
        for r in &right {
            expectations.push(l.inner(r).re);
        }
    }
    // X_E on a single mode sits at index 4^(k-1-j) within its half
    let mut x_squared = Vec::with_capacity(partition.len());
    for j in 0..left_modes.len() {
        x_squared.push(
            left[4usize.pow((left_modes.len() - 1 - j) as u32)]
                .norm()
                .powi(2),
        );
    }
    for j in 0..right_modes.len() {
        x_squared.push(
            right[4usize.pow((right_modes.len() - 1 - j) as u32)]
                .norm()
                .powi(2),
        );
    }
    let d = psi.space().cutoff();
    let n_modes = psi.modes().len();
    let mut tail = 0.0_f64;
    let mut digits = vec![0usize; n_modes];
    let start = d - d.div_ceil(10);
    let pos: Vec<usize> = partition
        .iter()
        .map(|m| psi.position_of(*m))
        .collect::<Result<_>>()?;
    let mut per_mode = vec![0.0; partition.len()];
    for (i, a) in psi.amplitudes().iter().enumerate() {
        crate::fock::digits(i, d, n_modes, &mut digits);
        for (slot, p) in per_mode.iter_mut().zip(&pos) {
            if digits[*p] >= start {
                *slot += a.norm_sqr();
            }
        }
    }
    for t in per_mode {
        tail = tail.max(t);
    }
    Ok(PureTomography {
        expectations,
        x_squared,
        tail,
    })
}

/// Tomography of a trajectory ensemble; every Pauli expectation is a weighted
/// sample mean and its standard error is reported in the diagnostics.
pub fn logical_state_ensemble(
    ens: &TrajectoryEnsemble,
    partition: &[usize],
    exec: Execution,
) -> Result<LogicalState> {
    check_partition(ens.modes(), partition)?;
    let apo = apo_set(ens.space())?;
    let members = ens.members();
    let per = try_map_indexed(exec, members.len(), |i| {
        pure_tomography(&members[i].1, partition, &apo)
    })?;
    combine_samples(&per, &ens.weights(), partition)
}

/// Weighted average of per-trajectory tomography samples.
pub(crate) fn combine_samples(
    per: &[PureTomography],
    weights: &[f64],
    partition: &[usize],
) -> Result<LogicalState> {
    let n = partition.len();
    let count = 4usize.pow(n as u32);
    let mut means = Vec::with_capacity(count);
    let mut errors = Vec::with_capacity(count);
    let mut column = vec![0.0; per.len()];
    for mu in 0..count {
        for (c, p) in column.iter_mut().zip(per) {
            *c = p.expectations[mu];
        }
        let wm = WeightedMean::from_samples(weights, &column);
        means.push(wm.mean);
        errors.push(wm.std_error);
    }
    let weight = means[0];
    if weight < MIN_BRANCH_WEIGHT {
        return Err(QspError::ZeroProbabilityBranch(weight));
    }
    let mut x_def = 0.0_f64;
    for q in 0..n {
        let v: f64 = per
            .iter()
            .zip(weights)
            .map(|(p, w)| w * p.x_squared[q])
            .sum::<f64>()
            / weight;
        x_def = x_def.max((v - 1.0).abs());
    }
    let tail = per
        .iter()
        .zip(weights)
        .map(|(p, w)| w * p.tail)
        .sum::<f64>()
        / weight;
    Ok(LogicalState {
        matrix: assemble(&means, n),
        modes: partition.to_vec(),
        diagnostics: TomographyDiagnostics {
            weight,
            x_squared_defect: x_def,
            tail_mass: tail,
            pauli_std_errors: Some(errors.iter().map(|e| e / weight).collect()),
            trajectories: Some(per.len()),
        },
    })
}

/// `Tr{a b}` clamped to `[0, 1 + 1e-9]`.
pub fn logical_fidelity(a: &LogicalState, b: &LogicalState) -> Result<f64> {
    if a.matrix.shape() != b.matrix.shape() {
        return Err(QspError::DimensionMismatch(format!(
            "{} vs {} logical qubits",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    let v = (&a.matrix * &b.matrix).trace().re;
    Ok(v.clamp(0.0, 1.0 + 1e-9))
}

/// Dense real matrix of the half-line projector for outcome `+1` / `-1`.
pub fn x_projector(apo: &ApoSet, outcome: i8) -> DMatrix<f64> {
    crate::fock::half_line_projector(&apo.sign().matrix, outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, tensor, CVector};
    use crate::states::{
        displaced_thermal, init_infidelity_analytic, thermal_state, ThermalParams,
    };

    fn space(d: usize) -> FockSpace {
        FockSpace::new(d).unwrap()
    }

    #[test]
    fn z_is_exact_parity() {
        let apo = apo_set(space(6)).unwrap();
        let d = apo.z.diagonal_entries().unwrap();
        for (n, z) in d.iter().enumerate() {
            assert_eq!(z.re, if n % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn pauli_algebra_in_truncated_basis() {
        let apo = apo_set(space(40)).unwrap();
        let [_, x, y, z] = apo.dense();
        let anti = &x * &z + &z * &x;
        assert!(qubit::max_abs(&anti) <= 1e-12);
        let comm = &x * &z - &z * &x;
        let target = &y * Complex64::new(0.0, -2.0);
        assert!(qubit::max_abs(&(comm - target)) <= 1e-12);
        let z2 = &z * &z;
        assert!(qubit::max_abs(&(z2 - CMatrix::identity(40, 40))) == 0.0);
    }

    #[test]
    fn vacuum_is_logical_zero() {
        let s = space(20);
        let l = logical_qubit(&DensityMatrix::fock(s, 0), 0).unwrap();
        let [x, y, z] = l.bloch().unwrap();
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
        assert!((z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_logical_state() {
        let s = space(60);
        for nbar in [0.5, 1.0, 2.0] {
            let l = logical_qubit(&thermal_state(nbar, s).unwrap(), 0).unwrap();
            let [x, y, z] = l.bloch().unwrap();
            assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
            assert!((z - 1.0 / (2.0 * nbar + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn y_expectation_is_real() {
        let s = space(30);
        let p = ThermalParams {
            n_bar: 0.5,
            alpha_re: 1.0,
            alpha_im: 0.7,
        };
        let rho = displaced_thermal(&p, s).unwrap();
        let apo = apo_set(s).unwrap();
        let y = expectation(&apo.y, &rho).unwrap();
        assert!(y.im.abs() <= 1e-10);
        assert!(y.re.abs() > 1e-3);
    }

    #[test]
    fn displaced_thermal_x_matches_erfc() {
        let p = ThermalParams::new(1.0, 3.0);
        let s = space(p.default_cutoff());
        let l = logical_qubit(&displaced_thermal(&p, s).unwrap(), 0).unwrap();
        let x = l.bloch().unwrap()[0];
        assert!((x - (1.0 - 2.0 * init_infidelity_analytic(1.0, 3.0))).abs() < 1e-4);
    }

    #[test]
    fn mixed_physical_state_can_be_logically_pure() {
        let p = ThermalParams::new(1.0, 4.0);
        let s = space(p.default_cutoff());
        let rho = displaced_thermal(&p, s).unwrap();
        assert!(rho.purity() < 0.4);
        let l = logical_qubit(&rho, 0).unwrap();
        assert!(l.purity() >= 0.999);
    }

    #[test]
    fn x_maps_parity_sectors_across() {
        let s = space(30);
        let apo = apo_set(s).unwrap();
        for k in [0, 2, 7] {
            let out = apply(&apo.x, &StateVector::fock(s, k)).unwrap();
            for (n, a) in out.amplitudes().iter().enumerate() {
                if (n + k) % 2 == 0 {
                    assert!(a.norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn product_of_vacua() {
        let s = space(12);
        let v0 = DensityMatrix::fock(s, 0);
        let v1 = v0.clone().with_modes(vec![1]).unwrap();
        let l = logical_state(&v0.tensor(&v1).unwrap(), &[0, 1]).unwrap();
        let target = qubit::ket(&[0, 0]);
        assert!((l.fidelity_to_pure(&target).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_order_permutes_qubits() {
        let s = space(12);
        let v0 = DensityMatrix::fock(s, 0);
        let v1 = DensityMatrix::fock(s, 1).with_modes(vec![1]).unwrap();
        let joint = v0.tensor(&v1).unwrap();
        let a = logical_state(&joint, &[0, 1]).unwrap();
        let b = logical_state(&joint, &[1, 0]).unwrap();
        assert!((a.fidelity_to_pure(&qubit::ket(&[0, 1])).unwrap() - 1.0).abs() < 1e-12);
        assert!((b.fidelity_to_pure(&qubit::ket(&[1, 0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_and_dense_tomography_agree() {
        let s = space(10);
        let amps = CVector::from_fn(100, |i, _| {
            Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())
        });
        let psi = StateVector::new(s, vec![0, 1], amps)
            .unwrap()
            .normalized()
            .unwrap()
            .0;
        let rho = DensityMatrix::from_pure(&psi);
        let dense = logical_state(&rho, &[0, 1]).unwrap();
        let ens = TrajectoryEnsemble::uniform(vec![psi]).unwrap();
        let traj = logical_state_ensemble(&ens, &[0, 1], Execution::Sequential).unwrap();
        assert!(qubit::max_abs(&(dense.matrix() - traj.matrix())) < 1e-12);
        assert!(
            (dense.diagnostics().x_squared_defect - traj.diagnostics().x_squared_defect).abs()
                < 1e-12
        );
    }

    #[test]
    fn fidelity_examples() {
        let zero = LogicalState::from_bloch(0.0, 0.0, 1.0);
        let one = LogicalState::from_bloch(0.0, 0.0, -1.0);
        let mixed = LogicalState::from_bloch(0.0, 0.0, 0.0);
        assert!((logical_fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(logical_fidelity(&zero, &one).unwrap(), 0.0);
        assert!((logical_fidelity(&mixed, &one).unwrap() - 0.5).abs() < 1e-15);
        let two = LogicalState::from_pure(&qubit::ket(&[0, 0])).unwrap();
        assert!(logical_fidelity(&zero, &two).is_err());
    }

    #[test]
    fn json_layout() {
        let l = LogicalState::from_bloch(1.0, 0.0, 0.0);
        let v = serde_json::to_value(&l).unwrap();
        assert_eq!(v["n_qubits"], 1);
        assert_eq!(v["matrix"].as_array().unwrap().len(), 4);
        assert_eq!(v["matrix"][1][0], 0.5);
        assert!(v["diagnostics"]["weight"].is_number());
    }

    #[test]
    fn tensor_operator_expectation_matches_tomography() {
        let s = space(24);
        let p = ThermalParams::new(0.3, 1.2);
        let a = displaced_thermal(&p, s).unwrap();
        let b = thermal_state(0.4, s).unwrap().with_modes(vec![1]).unwrap();
        let joint = a.tensor(&b).unwrap();
        let apo = apo_set(s).unwrap();
        let xz = tensor(&[apo.x.clone(), apo.z.clone().on_mode(1).unwrap()]).unwrap();
        let direct = expectation(&xz, &joint).unwrap().re;
        let l = logical_state(&joint, &[0, 1]).unwrap();
        assert!((l.pauli_expectation(&[1, 3]) - direct).abs() < 1e-12);
    }
}
