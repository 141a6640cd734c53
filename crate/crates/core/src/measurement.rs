//! Logical measurements: sign-binned homodyne (`X`), rotated homodyne
//! (`X`-`Y` plane) and parity (`Z`).
//!
//! Dense backend: `X`-type measurements apply the half-line projector
//! `(I +- X_E)/2` and trace out the measured mode. Trajectory backend: a
//! homodyne value `x` is sampled from the `q` marginal by inverse CDF and the
//! state collapses onto `<x_q|psi>`, which also removes the mode; binning `x`
//! by sign reproduces the half-line statistics. An exact `x = 0` reads as `+`.
//!
//! Parity measurements keep the measured mode in both backends.

use crate::encoding::{apo_set, x_projector};
use crate::error::{QspError, Result};
use crate::fock::hermite::hermite_row;
use crate::fock::tensor::{
    contract_mode, contract_pure_mode, grid_table, marginal_from_reduced, reduce_pure,
};
use crate::fock::{
    conjugate, q_marginal, CMatrix, CVector, DensityMatrix, FockOperator, MarginalTable, QGrid,
    StateVector,
};
use crate::gates::parity_rotation;
use crate::rng::RandomStream;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

/// Branches lighter than this cannot be selected.
pub const MIN_BRANCH_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "basis", content = "theta")]
pub enum Basis {
    X,
    Z,
    /// `X`-`Y` plane at angle `theta`; `+` is `(|0> + e^{i theta}|1>)/sqrt 2`.
    XY(f64),
}

impl Basis {
    pub fn label(&self) -> &'static str {
        match self {
            Basis::X => "X",
            Basis::Z => "Z",
            Basis::XY(_) => "XY",
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            Basis::XY(t) => *t,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub mode: usize,
    pub basis: Basis,
    /// Homodyne value, when one was sampled.
    pub raw_x: Option<f64>,
    /// `+1` or `-1`.
    pub logical_bit: i8,
    /// Probability of the branch that occurred.
    pub weight: f64,
}

impl MeasurementRecord {
    /// `0` for outcome `+1`, `1` for `-1`; the form used by byproduct bookkeeping.
    pub fn bit(&self) -> u8 {
        if self.logical_bit >= 0 {
            0
        } else {
            1
        }
    }
}

fn choose(p_plus: f64, rng: &mut RandomStream) -> i8 {
    let u: f64 = rng.random();
    if u < p_plus {
        1
    } else {
        -1
    }
}

fn branch_weight(p_plus: f64, outcome: i8) -> f64 {
    if outcome >= 0 {
        p_plus
    } else {
        1.0 - p_plus
    }
}

/// `P(+) = Tr{(I + X_E)/2 rho}` on `mode`.
pub fn prob_plus_x(rho: &DensityMatrix, mode: usize) -> Result<f64> {
    let apo = apo_set(rho.space())?;
    let x = apo.x.clone().on_mode(mode)?;
    let ex = crate::fock::expectation(&x, rho)?.re / rho.trace().re;
    Ok(0.5 * (1.0 + ex))
}

/// Unnormalized remainder `Tr_mode{(Pi_+- x I) rho}` and its weight.
pub fn x_branch(rho: &DensityMatrix, mode: usize, outcome: i8) -> Result<(DensityMatrix, f64)> {
    let apo = apo_set(rho.space())?;
    let proj = x_projector(&apo, outcome).map(|v| Complex64::new(v, 0.0));
    let rem = contract_mode(rho, mode, &proj)?;
    let w = rem.trace().re;
    Ok((rem, w))
}

/// Normalized remainder of the `X`-plane branch `outcome` at angle `theta`.
pub fn xy_branch(
    rho: &DensityMatrix,
    mode: usize,
    theta: f64,
    outcome: i8,
) -> Result<(DensityMatrix, f64)> {
    let rotated = rotate_for_xy(rho, mode, theta)?;
    let (rem, w) = x_branch(&rotated, mode, outcome)?;
    if w < MIN_BRANCH_WEIGHT {
        return Err(QspError::ZeroProbabilityBranch(w));
    }
    Ok((rem.normalized()?.0, w))
}

fn rotate_for_xy(rho: &DensityMatrix, mode: usize, theta: f64) -> Result<DensityMatrix> {
    if theta == 0.0 {
        return Ok(rho.clone());
    }
    let r = parity_rotation(theta / 2.0, rho.space()).on_mode(mode)?;
    conjugate(&r, rho)
}

/// Sign-binned homodyne measurement of `mode`; returns the record and the
/// normalized state of the other modes.
pub fn measure_logical_x(
    rho: &DensityMatrix,
    mode: usize,
    rng: &mut RandomStream,
) -> Result<(MeasurementRecord, DensityMatrix)> {
    measure_x_with_basis(rho, mode, rng, Basis::X)
}

fn measure_x_with_basis(
    rho: &DensityMatrix,
    mode: usize,
    rng: &mut RandomStream,
    basis: Basis,
) -> Result<(MeasurementRecord, DensityMatrix)> {
    let (plus, w_plus) = x_branch(rho, mode, 1)?;
    let total = rho.trace().re;
    let p_plus = (w_plus / total).clamp(0.0, 1.0);
    let outcome = choose(p_plus, rng);
    let weight = branch_weight(p_plus, outcome);
    if weight < MIN_BRANCH_WEIGHT {
        return Err(QspError::ZeroProbabilityBranch(weight));
    }
    let rem = if outcome > 0 {
        plus
    } else {
        x_branch(rho, mode, -1)?.0
    };
    Ok((
        MeasurementRecord {
            mode,
            basis,
            raw_x: None,
            logical_bit: outcome,
            weight,
        },
        rem.normalized()?.0,
    ))
}

/// `(Pi x I) rho (Pi x I) / p` with the measured mode kept.
pub fn project_logical_x(
    rho: &DensityMatrix,
    mode: usize,
    outcome: i8,
) -> Result<(DensityMatrix, f64)> {
    let apo = apo_set(rho.space())?;
    let proj = x_projector(&apo, outcome).map(|v| Complex64::new(v, 0.0));
    let op = FockOperator::dense(rho.space(), vec![mode], proj)?;
    let out = conjugate(&op, rho)?;
    let w = out.trace().re / rho.trace().re;
    if w < MIN_BRANCH_WEIGHT {
        return Err(QspError::ZeroProbabilityBranch(w));
    }
    Ok((out.normalized()?.0, w))
}

/// `R(theta/2)` on `mode`, then [`measure_logical_x`].
pub fn measure_xy(
    rho: &DensityMatrix,
    mode: usize,
    theta: f64,
    rng: &mut RandomStream,
) -> Result<(MeasurementRecord, DensityMatrix)> {
    let rotated = rotate_for_xy(rho, mode, theta)?;
    let basis = if theta == 0.0 {
        Basis::X
    } else {
        Basis::XY(theta)
    };
    measure_x_with_basis(&rotated, mode, rng, basis)
}

fn parity_projector_diag(d: usize, outcome: i8) -> CVector {
    CVector::from_fn(d, |n, _| {
        let even = n % 2 == 0;
        if even == (outcome >= 0) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Parity measurement; the measured mode stays in the returned state.
pub fn measure_logical_z(
    rho: &DensityMatrix,
    mode: usize,
    rng: &mut RandomStream,
) -> Result<(MeasurementRecord, DensityMatrix)> {
    let d = rho.space().cutoff();
    let pops = rho.populations(mode)?;
    let total: f64 = pops.iter().sum();
    let p_plus = (pops.iter().step_by(2).sum::<f64>() / total).clamp(0.0, 1.0);
    let outcome = choose(p_plus, rng);
    let weight = branch_weight(p_plus, outcome);
    if weight < MIN_BRANCH_WEIGHT {
        return Err(QspError::ZeroProbabilityBranch(weight));
    }
    let op = FockOperator::diagonal(rho.space(), vec![mode], parity_projector_diag(d, outcome))?;
    let out = conjugate(&op, rho)?;
    Ok((
        MeasurementRecord {
            mode,
            basis: Basis::Z,
            raw_x: None,
            logical_bit: outcome,
            weight,
        },
        out.normalized()?.0,
    ))
}

/// Inverse-CDF draw from a tabulated marginal, linear within each cell.
fn sample_table(table: &MarginalTable, rng: &mut RandomStream) -> f64 {
    let cdf = table.cdf();
    let total = *cdf.last().expect("non-empty grid");
    let u: f64 = rng.random::<f64>() * total;
    let k = cdf.partition_point(|c| *c < u).clamp(1, cdf.len() - 1);
    let (c0, c1) = (cdf[k - 1], cdf[k]);
    let (x0, x1) = (table.xs[k - 1], table.xs[k]);
    if c1 > c0 {
        x0 + (u - c0) / (c1 - c0) * (x1 - x0)
    } else {
        x0
    }
}

/// One homodyne sample of the `q` quadrature of `mode`.
pub fn homodyne_sample_q(
    rho: &DensityMatrix,
    mode: usize,
    rng: &mut RandomStream,
    grid: &QGrid,
) -> Result<f64> {
    let table = q_marginal(rho, mode, grid)?;
    Ok(sample_table(&table, rng))
}

/// `count` homodyne samples sharing one tabulated marginal.
pub fn homodyne_samples_q(
    rho: &DensityMatrix,
    mode: usize,
    rng: &mut RandomStream,
    grid: &QGrid,
    count: usize,
) -> Result<Vec<f64>> {
    let table = q_marginal(rho, mode, grid)?;
    Ok((0..count).map(|_| sample_table(&table, rng)).collect())
}

/// Trajectory-backend `X` measurement: sample `x`, bin by sign, collapse onto
/// `<x_q|psi>` and drop the mode.
pub fn measure_logical_x_pure(
    psi: &StateVector,
    mode: usize,
    rng: &mut RandomStream,
    grid: &QGrid,
) -> Result<(MeasurementRecord, Option<StateVector>)> {
    let reduced = reduce_pure(psi, mode)?;
    let xs = grid.points();
    let table = marginal_from_reduced(&reduced, &grid_table(psi.space().cutoff(), grid), &xs)?;
    let x = sample_table(&table, rng);
    // branch probability from the half-line projector on the reduced state
    let sign = crate::encoding::sign_quadrature(psi.space())?;
    let ex = reduced
        .iter()
        .zip(sign.matrix.iter())
        .map(|(r, s)| r.re * s)
        .sum::<f64>()
        / reduced.trace().re;
    let p_plus = (0.5 * (1.0 + ex)).clamp(0.0, 1.0);
    let outcome: i8 = if x >= 0.0 { 1 } else { -1 };
    let weight = branch_weight(p_plus, outcome);
    let record = MeasurementRecord {
        mode,
        basis: Basis::X,
        raw_x: Some(x),
        logical_bit: outcome,
        weight,
    };
    let mut h = vec![0.0; psi.space().cutoff()];
    hermite_row(x, &mut h);
    let rest = contract_pure_mode(psi, mode, &h)?;
    if psi.modes().len() == 1 {
        return Ok((record, None));
    }
    let rest_modes: Vec<usize> = psi.modes().iter().copied().filter(|m| *m != mode).collect();
    let state = StateVector::new(psi.space(), rest_modes, rest)?
        .normalized()?
        .0;
    Ok((record, Some(state)))
}

/// Trajectory-backend `X`-`Y` plane measurement.
pub fn measure_xy_pure(
    psi: &StateVector,
    mode: usize,
    theta: f64,
    rng: &mut RandomStream,
    grid: &QGrid,
) -> Result<(MeasurementRecord, Option<StateVector>)> {
    let rotated = if theta == 0.0 {
        psi.clone()
    } else {
        let r = parity_rotation(theta / 2.0, psi.space()).on_mode(mode)?;
        crate::fock::apply(&r, psi)?
    };
    let (mut rec, rest) = measure_logical_x_pure(&rotated, mode, rng, grid)?;
    if theta != 0.0 {
        rec.basis = Basis::XY(theta);
    }
    Ok((rec, rest))
}

/// Trajectory-backend parity measurement; the mode is kept.
pub fn measure_logical_z_pure(
    psi: &StateVector,
    mode: usize,
    rng: &mut RandomStream,
) -> Result<(MeasurementRecord, StateVector)> {
    let reduced = reduce_pure(psi, mode)?;
    let total: f64 = reduced.diagonal().iter().map(|z| z.re).sum();
    let even: f64 = reduced.diagonal().iter().step_by(2).map(|z| z.re).sum();
    let p_plus = (even / total).clamp(0.0, 1.0);
    let outcome = choose(p_plus, rng);
    let weight = branch_weight(p_plus, outcome);
    if weight < MIN_BRANCH_WEIGHT {
        return Err(QspError::ZeroProbabilityBranch(weight));
    }
    let op = FockOperator::diagonal(
        psi.space(),
        vec![mode],
        parity_projector_diag(psi.space().cutoff(), outcome),
    )?;
    let out = crate::fock::apply(&op, psi)?.normalized()?.0;
    Ok((
        MeasurementRecord {
            mode,
            basis: Basis::Z,
            raw_x: None,
            logical_bit: outcome,
            weight,
        },
        out,
    ))
}

/// Dense helper for tests and tools: `(I +- X_E)/2` as a matrix on one mode.
pub fn x_projector_matrix(rho_space: crate::fock::FockSpace, outcome: i8) -> Result<CMatrix> {
    let apo = apo_set(rho_space)?;
    Ok(x_projector(&apo, outcome).map(|v| Complex64::new(v, 0.0)))
}
