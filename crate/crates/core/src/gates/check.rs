use super::{cphase, parity_rotation};
use crate::encoding::{logical_qubit, logical_state, LogicalState};
use crate::error::{QspError, Result};
use crate::fock::{conjugate, CVector, DensityMatrix, FockOperator, FockSpace};
use crate::qubit;
use crate::states::{displaced_thermal, ThermalParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

/// Physical preparations of the logical basis states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogicalPrep {
    /// Even-parity part of the displaced thermal state.
    Zero,
    /// Odd-parity part of the displaced thermal state.
    One,
    /// The displaced thermal state itself.
    Plus,
    /// `R(-pi/4)` applied to [`LogicalPrep::Plus`].
    PlusI,
}

impl LogicalPrep {
    pub const ALL: [LogicalPrep; 4] = [Self::Zero, Self::One, Self::Plus, Self::PlusI];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Zero => "0",
            Self::One => "1",
            Self::Plus => "+",
            Self::PlusI => "+i",
        }
    }

    pub fn ideal(&self) -> CVector {
        match self {
            Self::Zero => qubit::ket(&[0]),
            Self::One => qubit::ket(&[1]),
            Self::Plus => qubit::plus(),
            Self::PlusI => qubit::xy_eigenstate(std::f64::consts::FRAC_PI_2, 1),
        }
    }
}

/// The physical state for `prep` on mode 0.
pub fn prepare_logical(
    prep: LogicalPrep,
    params: &ThermalParams,
    space: FockSpace,
) -> Result<DensityMatrix> {
    let plus = displaced_thermal(params, space)?;
    let project = |keep_even: bool| -> Result<DensityMatrix> {
        let diag = CVector::from_fn(space.cutoff(), |n, _| {
            Complex64::new(if (n % 2 == 0) == keep_even { 1.0 } else { 0.0 }, 0.0)
        });
        let p = FockOperator::diagonal(space, vec![0], diag)?;
        let (out, w) = conjugate(&p, &plus)?.normalized()?;
        if w < 1e-12 {
            return Err(QspError::ZeroProbabilityBranch(w));
        }
        Ok(out)
    };
    match prep {
        LogicalPrep::Plus => Ok(plus),
        LogicalPrep::Zero => project(true),
        LogicalPrep::One => project(false),
        LogicalPrep::PlusI => conjugate(&parity_rotation(-FRAC_PI_4, space), &plus),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GateTrial {
    /// Input labels for qubits 0 and 1, e.g. `"0+"`.
    pub input: String,
    pub logical_in: LogicalState,
    pub logical_out: LogicalState,
    /// `<ideal|rho_out|ideal>` with `ideal = CZ |a b>`.
    pub ideal_fidelity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CphaseCheck {
    pub params: ThermalParams,
    pub cutoff: usize,
    pub trials: Vec<GateTrial>,
    /// Pauli transfer matrix estimate, present when the inputs span the
    /// two-qubit operator space.
    pub ptm: Option<Vec<Vec<f64>>>,
    pub process_fidelity: Option<f64>,
}

impl CphaseCheck {
    pub fn trial(&self, input: &str) -> Option<&GateTrial> {
        self.trials.iter().find(|t| t.input == input)
    }
}

fn pauli_vector(m: &crate::fock::CMatrix) -> Vec<f64> {
    let p = qubit::paulis();
    let mut v = Vec::with_capacity(16);
    for a in 0..4 {
        for b in 0..4 {
            let op = p[a].kronecker(&p[b]);
            v.push((op * m).trace().re);
        }
    }
    v
}

/// `R_ij = Tr{P_i U P_j U^dagger} / 4` for the logical controlled-Z.
pub fn ideal_cz_ptm() -> DMatrix<f64> {
    let u = qubit::cz(0, 1, 2);
    let p = qubit::paulis();
    DMatrix::from_fn(16, 16, |i, j| {
        let pi = p[i / 4].kronecker(&p[i % 4]);
        let pj = p[j / 4].kronecker(&p[j % 4]);
        (pi * &u * pj * u.adjoint()).trace().re / 4.0
    })
}

/// Runs the CPhase gate on every product of `preps` (modes 0 and 1) and reads
/// the logical input and output states by tomography.
pub fn cphase_check(
    params: &ThermalParams,
    space: FockSpace,
    preps: &[LogicalPrep],
) -> Result<CphaseCheck> {
    let gate = cphase(space, (0, 1))?;
    let singles: Vec<(DensityMatrix, LogicalState)> = preps
        .iter()
        .map(|p| {
            let rho = prepare_logical(*p, params, space)?;
            let l = logical_qubit(&rho, 0)?;
            Ok((rho, l))
        })
        .collect::<Result<_>>()?;
    let cz = qubit::cz(0, 1, 2);
    let mut trials = Vec::with_capacity(preps.len() * preps.len());
    for (a, (ra, la)) in preps.iter().zip(&singles) {
        for (b, (rb, lb)) in preps.iter().zip(&singles) {
            let rho = ra.tensor(&rb.clone().with_modes(vec![1])?)?;
            let out = conjugate(&gate, &rho)?;
            drop(rho);
            let logical_out = logical_state(&out, &[0, 1])?;
            let logical_in = LogicalState::from_matrix(la.matrix().kronecker(lb.matrix()))?;
            let ideal = &cz * qubit::kron_vec(&[a.ideal(), b.ideal()]);
            let ideal_fidelity = logical_out.fidelity_to_pure(&ideal)?;
            trials.push(GateTrial {
                input: format!("{}{}", a.label(), b.label()),
                logical_in,
                logical_out,
                ideal_fidelity,
            });
        }
    }
    let (ptm, process_fidelity) = estimate_ptm(&trials);
    Ok(CphaseCheck {
        params: *params,
        cutoff: space.cutoff(),
        trials,
        ptm,
        process_fidelity,
    })
}

/// Linear-inversion PTM from measured inputs and outputs; `None` if fewer
/// than 16 trials or the inputs are not linearly independent.
fn estimate_ptm(trials: &[GateTrial]) -> (Option<Vec<Vec<f64>>>, Option<f64>) {
    if trials.len() != 16 {
        return (None, None);
    }
    let inputs = DMatrix::from_fn(16, 16, |i, k| {
        pauli_vector(trials[k].logical_in.matrix())[i]
    });
    let outputs = DMatrix::from_fn(16, 16, |i, k| {
        pauli_vector(trials[k].logical_out.matrix())[i]
    });
    let Some(inv) = inputs.try_inverse() else {
        return (None, None);
    };
    let r = outputs * inv;
    let fidelity = (ideal_cz_ptm().transpose() * &r).trace() / 16.0;
    let rows = (0..16)
        .map(|i| r.row(i).iter().copied().collect())
        .collect();
    (Some(rows), Some(fidelity))
}

/// Largest logical trace distance between matching trials of two checks.
pub fn max_trace_distance(a: &CphaseCheck, b: &CphaseCheck) -> Result<f64> {
    let mut worst = 0.0_f64;
    for t in &a.trials {
        let Some(u) = b.trial(&t.input) else {
            return Err(QspError::DimensionMismatch(format!(
                "input {} missing",
                t.input
            )));
        };
        worst = worst.max(t.logical_out.trace_distance(&u.logical_out)?);
    }
    Ok(worst)
}
