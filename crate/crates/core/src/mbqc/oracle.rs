use super::pattern::{ByproductFrame, GraphPattern};
use crate::encoding::LogicalState;
use crate::error::{QspError, Result};
use crate::fock::{CMatrix, CVector};
use crate::qubit;
use num_complex::Complex64;
use serde::Serialize;

/// Branches below this probability are dropped from the enumeration.
const NEGLIGIBLE: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct OracleBranch {
    /// Outcome bits in schedule order (`0` for `+`).
    pub outcomes: Vec<u8>,
    pub probability: f64,
    /// Output state as produced, byproduct not removed.
    pub raw: LogicalState,
    pub frame: ByproductFrame,
}

impl OracleBranch {
    /// Output state with the byproduct removed.
    pub fn corrected(&self) -> Result<LogicalState> {
        remove_frame(&self.raw, &self.frame)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub branches: Vec<OracleBranch>,
    /// Probability-weighted mixture of the corrected branch states.
    pub corrected: LogicalState,
}

impl OracleResult {
    pub fn branch(&self, outcomes: &[u8]) -> Option<&OracleBranch> {
        self.branches.iter().find(|b| b.outcomes == outcomes)
    }

    /// The all-`+` branch.
    pub fn post_selected(&self) -> Option<&OracleBranch> {
        self.branches
            .iter()
            .find(|b| b.outcomes.iter().all(|s| *s == 0))
    }
}

/// `B^dagger rho B` for the frame operator `B`.
pub fn remove_frame(state: &LogicalState, frame: &ByproductFrame) -> Result<LogicalState> {
    state.transformed(&frame.operator().adjoint())
}

/// Default logical inputs: `|+>` rotated by each vertex's prep angle.
pub fn default_inputs(pattern: &GraphPattern) -> Vec<CVector> {
    pattern
        .vertices
        .iter()
        .map(|v| qubit::xy_eigenstate(v.prep_rotation.unwrap_or(0.0), 1))
        .collect()
}

/// Projects qubit `k` of `n` onto `v`, leaving it in `v`.
fn project(psi: &CVector, k: usize, n: usize, v: &CVector) -> CVector {
    let shift = n - 1 - k;
    let mut out = CVector::zeros(psi.len());
    for i in 0..psi.len() {
        if (i >> shift) & 1 == 1 {
            continue;
        }
        let j = i | (1 << shift);
        let amp = v[0].conj() * psi[i] + v[1].conj() * psi[j];
        out[i] = v[0] * amp;
        out[j] = v[1] * amp;
    }
    out
}

/// Reduced density matrix on qubits `keep` (in that order) of an `n`-qubit vector.
fn reduce(psi: &CVector, keep: &[usize], n: usize) -> CMatrix {
    let m = keep.len();
    let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let index = |sub: usize, env: usize| -> usize {
        let mut i = 0;
        for (b, q) in keep.iter().enumerate() {
            i |= ((sub >> (m - 1 - b)) & 1) << (n - 1 - q);
        }
        for (b, q) in rest.iter().enumerate() {
            i |= ((env >> (rest.len() - 1 - b)) & 1) << (n - 1 - q);
        }
        i
    };
    let dim = 1 << m;
    let mut rho = CMatrix::zeros(dim, dim);
    for env in 0..1usize << rest.len() {
        for a in 0..dim {
            let pa = psi[index(a, env)];
            if pa == Complex64::new(0.0, 0.0) {
                continue;
            }
            for b in 0..dim {
                rho[(a, b)] += pa * psi[index(b, env)].conj();
            }
        }
    }
    rho
}

/// Exact one-way-model simulation on `2^N` amplitudes, enumerating every
/// outcome branch. `inputs[k]` is the logical state prepared on `vertices[k]`.
pub fn qubit_oracle(pattern: &GraphPattern, inputs: &[CVector]) -> Result<OracleResult> {
    pattern.validate()?;
    let flow = pattern.flow()?;
    let n = pattern.vertices.len();
    if inputs.len() != n || inputs.iter().any(|v| v.len() != 2) {
        return Err(QspError::DimensionMismatch(format!(
            "oracle needs {n} single-qubit inputs"
        )));
    }
    let pos = pattern.positions();
    let normalized: Vec<CVector> = inputs
        .iter()
        .map(|v| v / Complex64::new(v.norm(), 0.0))
        .collect();
    let mut psi = qubit::kron_vec(&normalized);
    for [a, b] in &pattern.edges {
        let (qa, qb) = (pos[a], pos[b]);
        for (i, amp) in psi.iter_mut().enumerate() {
            if (i >> (n - 1 - qa)) & 1 == 1 && (i >> (n - 1 - qb)) & 1 == 1 {
                *amp = -*amp;
            }
        }
    }
    let keep: Vec<usize> = pattern.outputs.iter().map(|o| pos[o]).collect();
    let m = pattern.schedule.len();
    let mut branches = Vec::new();
    let dim = 1 << keep.len();
    let mut mixture = CMatrix::zeros(dim, dim);
    for code in 0..1usize << m {
        let outcomes: Vec<u8> = (0..m).map(|i| ((code >> (m - 1 - i)) & 1) as u8).collect();
        let mut state = psi.clone();
        for (i, step) in pattern.schedule.iter().enumerate() {
            let theta = pattern.adapted_angle(i, &outcomes);
            let sign = if outcomes[i] == 0 { 1 } else { -1 };
            let e = qubit::xy_eigenstate(theta, sign);
            state = project(&state, pos[&step.vertex], n, &e);
        }
        let p = state.norm_squared();
        if p < NEGLIGIBLE {
            continue;
        }
        let rho = reduce(&state, &keep, n) / Complex64::new(p, 0.0);
        let raw = LogicalState::from_matrix(rho)?.with_modes(pattern.outputs.clone())?;
        let frame = pattern.frame(&flow, &outcomes);
        let corrected = remove_frame(&raw, &frame)?;
        mixture += corrected.matrix() * Complex64::new(p, 0.0);
        branches.push(OracleBranch {
            outcomes,
            probability: p,
            raw,
            frame,
        });
    }
    let corrected = LogicalState::from_matrix(mixture)?.with_modes(pattern.outputs.clone())?;
    Ok(OracleResult {
        branches,
        corrected,
    })
}
