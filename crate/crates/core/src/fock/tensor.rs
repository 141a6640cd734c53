use super::hermite::hermite_table;
use super::{CMatrix, CVector, DensityMatrix, FockOperator, FockSpace, OperatorRepr, StateVector};
use crate::error::{QspError, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

const GRID_MASS_TOL: f64 = 1e-6;

/// Flat-index offsets for a subset of positions and for its complement.
pub(crate) struct Split {
    pub sub: Vec<usize>,
    pub rest: Vec<usize>,
}

pub(crate) fn split_offsets(d: usize, n_modes: usize, positions: &[usize]) -> Split {
    let stride = |p: usize| d.pow((n_modes - 1 - p) as u32);
    let offsets = |pos: &[usize]| -> Vec<usize> {
        let count = d.pow(pos.len() as u32);
        let mut out = Vec::with_capacity(count);
        let mut digits = vec![0usize; pos.len()];
        for a in 0..count {
            super::digits(a, d, pos.len(), &mut digits);
            out.push(digits.iter().zip(pos).map(|(dg, p)| dg * stride(*p)).sum());
        }
        out
    };
    let rest_pos: Vec<usize> = (0..n_modes).filter(|p| !positions.contains(p)).collect();
    Split {
        sub: offsets(positions),
        rest: offsets(&rest_pos),
    }
}

fn positions(signature: &[usize], modes: &[usize]) -> Result<Vec<usize>> {
    modes
        .iter()
        .map(|m| {
            signature
                .iter()
                .position(|s| s == m)
                .ok_or(QspError::UnknownMode(*m))
        })
        .collect()
}

/// Kronecker product of operators on disjoint modes; signatures concatenate.
pub fn tensor(ops: &[FockOperator]) -> Result<FockOperator> {
    let first = ops
        .first()
        .ok_or_else(|| QspError::InvalidParameter("empty tensor product".into()))?;
    let space = first.space();
    let mut modes = Vec::new();
    let all_diag = ops.iter().all(|o| o.is_diagonal());
    let mut hermitian = true;
    for op in ops {
        if op.space() != space {
            return Err(QspError::DimensionMismatch("different cutoffs".into()));
        }
        modes.extend_from_slice(op.modes());
        hermitian &= op.is_hermitian();
    }
    let out = if all_diag {
        let mut diag = CVector::from_element(1, Complex64::new(1.0, 0.0));
        for op in ops {
            diag = diag.kronecker(op.diagonal_entries().expect("checked diagonal"));
        }
        FockOperator::diagonal(space, modes, diag)?
    } else {
        let mut m = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for op in ops {
            m = m.kronecker(&op.to_dense());
        }
        FockOperator::dense(space, modes, m)?
    };
    Ok(if hermitian {
        out.assume_hermitian()
    } else {
        out
    })
}

/// Reduced state on `keep`, in the order listed.
pub(crate) fn reduce_to(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let pos = positions(rho.modes(), keep)?;
    super::check_modes(keep)?;
    if keep == rho.modes() {
        return Ok(rho.clone());
    }
    let d = rho.space().cutoff();
    let split = split_offsets(d, rho.modes().len(), &pos);
    let k = split.sub.len();
    let m = rho.matrix();
    let mut out = CMatrix::zeros(k, k);
    for (b, ob) in split.sub.iter().enumerate() {
        for (a, oa) in split.sub.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in &split.rest {
                acc += m[(oa + t, ob + t)];
            }
            out[(a, b)] = acc;
        }
    }
    DensityMatrix::new(rho.space(), keep.to_vec(), out)
}

/// Traces out `modes`; the remaining modes keep their relative order.
pub fn partial_trace(rho: &DensityMatrix, modes: &[usize]) -> Result<DensityMatrix> {
    for m in modes {
        rho.position_of(*m)?;
    }
    let keep: Vec<usize> = rho
        .modes()
        .iter()
        .copied()
        .filter(|m| !modes.contains(m))
        .collect();
    if keep.is_empty() {
        return Ok(DensityMatrix::scalar(rho.space(), rho.trace().re));
    }
    reduce_to(rho, &keep)
}

/// `Tr{op rho}`; `op` may act on any subset of the state's modes.
pub fn expectation(op: &FockOperator, rho: &DensityMatrix) -> Result<Complex64> {
    let reduced = reduce_to(rho, op.modes())?;
    let r = reduced.matrix();
    Ok(match op.repr() {
        OperatorRepr::Diagonal(d) => d.iter().enumerate().map(|(i, z)| z * r[(i, i)]).sum(),
        OperatorRepr::Dense(a) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    acc += a[(i, j)] * r[(j, i)];
                }
            }
            acc
        }
    })
}

/// `op |psi>`; `op` may act on any subset of the state's modes.
pub fn apply(op: &FockOperator, psi: &StateVector) -> Result<StateVector> {
    if op.space() != psi.space() {
        return Err(QspError::DimensionMismatch("different cutoffs".into()));
    }
    let pos = positions(psi.modes(), op.modes())?;
    let d = psi.space().cutoff();
    let amps = psi.amplitudes();
    let out = if op.modes() == psi.modes() {
        match op.repr() {
            OperatorRepr::Dense(m) => m * amps,
            OperatorRepr::Diagonal(diag) => diag.component_mul(amps),
        }
    } else {
        let split = split_offsets(d, psi.modes().len(), &pos);
        let mut out = CVector::zeros(amps.len());
        match op.repr() {
            OperatorRepr::Diagonal(diag) => {
                for r in &split.rest {
                    for (a, oa) in split.sub.iter().enumerate() {
                        out[r + oa] = diag[a] * amps[r + oa];
                    }
                }
            }
            OperatorRepr::Dense(m) => {
                let k = split.sub.len();
                let mut local = CVector::zeros(k);
                for r in &split.rest {
                    for (a, oa) in split.sub.iter().enumerate() {
                        local[a] = amps[r + oa];
                    }
                    let mapped = m * &local;
                    for (a, oa) in split.sub.iter().enumerate() {
                        out[r + oa] = mapped[a];
                    }
                }
            }
        }
        out
    };
    StateVector::new(psi.space(), psi.modes().to_vec(), out)
}

/// `op rho op^dagger`.
pub fn conjugate(op: &FockOperator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let pos = positions(rho.modes(), op.modes())?;
    let d = rho.space().cutoff();
    let n = rho.dim();
    match op.repr() {
        OperatorRepr::Diagonal(diag) => {
            // full-space diagonal factor for every flat index
            let full = if op.modes() == rho.modes() {
                diag.clone()
            } else {
                let split = split_offsets(d, rho.modes().len(), &pos);
                let mut full = CVector::zeros(n);
                for r in &split.rest {
                    for (a, oa) in split.sub.iter().enumerate() {
                        full[r + oa] = diag[a];
                    }
                }
                full
            };
            let mut out = rho.clone();
            out.map_entries(|i, j| full[i] * full[j].conj());
            Ok(out)
        }
        OperatorRepr::Dense(m) => {
            if op.modes() == rho.modes() {
                let out = m * rho.matrix() * m.adjoint();
                return DensityMatrix::new(rho.space(), rho.modes().to_vec(), out);
            }
            let split = split_offsets(d, rho.modes().len(), &pos);
            let k = split.sub.len();
            let src = rho.matrix();
            // left multiply column by column, then right multiply row by row
            let mut left = CMatrix::zeros(n, n);
            let mut local = CVector::zeros(k);
            for j in 0..n {
                for r in &split.rest {
                    for (a, oa) in split.sub.iter().enumerate() {
                        local[a] = src[(r + oa, j)];
                    }
                    let mapped = m * &local;
                    for (a, oa) in split.sub.iter().enumerate() {
                        left[(r + oa, j)] = mapped[a];
                    }
                }
            }
            let mc = m.map(|z| z.conj());
            let mut out = CMatrix::zeros(n, n);
            for i in 0..n {
                for r in &split.rest {
                    for (a, oa) in split.sub.iter().enumerate() {
                        local[a] = left[(i, r + oa)];
                    }
                    let mapped = &mc * &local;
                    for (a, oa) in split.sub.iter().enumerate() {
                        out[(i, r + oa)] = mapped[a];
                    }
                }
            }
            DensityMatrix::new(rho.space(), rho.modes().to_vec(), out)
        }
    }
}

/// `Tr_mode{(op x I) rho}` as a state on the remaining modes.
pub(crate) fn contract_mode(
    rho: &DensityMatrix,
    mode: usize,
    op: &CMatrix,
) -> Result<DensityMatrix> {
    let pos = rho.position_of(mode)?;
    let rest_modes: Vec<usize> = rho.modes().iter().copied().filter(|m| *m != mode).collect();
    let d = rho.space().cutoff();
    let split = split_offsets(d, rho.modes().len(), &[pos]);
    let m = rho.matrix();
    let nr = split.rest.len();
    let mut out = CMatrix::zeros(nr, nr);
    for (b, ob) in split.sub.iter().enumerate() {
        for (a, oa) in split.sub.iter().enumerate() {
            let w = op[(b, a)];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (c2, r2) in split.rest.iter().enumerate() {
                for (c1, r1) in split.rest.iter().enumerate() {
                    out[(c1, c2)] += w * m[(oa + r1, ob + r2)];
                }
            }
        }
    }
    if rest_modes.is_empty() {
        return Ok(DensityMatrix::scalar(rho.space(), out[(0, 0)].re));
    }
    DensityMatrix::new(rho.space(), rest_modes, out)
}

/// `<x_q| psi` on `mode`, given the Hermite row `h_n = psi_n(x)`.
pub(crate) fn contract_pure_mode(psi: &StateVector, mode: usize, h: &[f64]) -> Result<CVector> {
    let pos = psi.position_of(mode)?;
    let d = psi.space().cutoff();
    let split = split_offsets(d, psi.modes().len(), &[pos]);
    let amps = psi.amplitudes();
    let mut out = CVector::zeros(split.rest.len());
    for (c, r) in split.rest.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, o) in split.sub.iter().enumerate() {
            acc += amps[o + r] * h[n];
        }
        out[c] = acc;
    }
    Ok(out)
}

/// Reduced single-mode density matrix of a pure multi-mode state.
pub(crate) fn reduce_pure(psi: &StateVector, mode: usize) -> Result<CMatrix> {
    let pos = psi.position_of(mode)?;
    let d = psi.space().cutoff();
    let split = split_offsets(d, psi.modes().len(), &[pos]);
    let amps = psi.amplitudes();
    let psi_mat = CMatrix::from_fn(d, split.rest.len(), |n, c| {
        amps[split.sub[n] + split.rest[c]]
    });
    Ok(&psi_mat * psi_mat.adjoint())
}

/// Uniform grid for q-quadrature marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct QGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl QGrid {
    /// `2048` points over `+-(sqrt(2D) + 6)`.
    pub fn default_for(space: FockSpace) -> Self {
        let x = space.x_max();
        Self {
            x_min: -x,
            x_max: x,
            n_points: 2048,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.n_points)
            .map(|i| self.x_min + h * i as f64)
            .collect()
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }
}

/// Tabulated q-quadrature density `P(x) = <x_q|rho|x_q>`.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalTable {
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
    /// Probability not captured by the grid (trace minus trapezoid integral).
    pub mass_outside: f64,
}

impl MarginalTable {
    /// Cumulative trapezoid integral, one entry per grid point.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.xs.len());
        out.push(0.0);
        for i in 1..self.xs.len() {
            let h = self.xs[i] - self.xs[i - 1];
            acc += 0.5 * h * (self.density[i] + self.density[i - 1]);
            out.push(acc);
        }
        out
    }
}

pub(crate) fn marginal_from_reduced(
    reduced: &CMatrix,
    table: &DMatrix<f64>,
    xs: &[f64],
) -> Result<MarginalTable> {
    // P(x) = sum_mn Re(rho_mn) psi_m psi_n; the imaginary part cancels
    let re = reduced.map(|z| z.re);
    let proj = table * &re;
    let density: Vec<f64> = (0..xs.len())
        .map(|i| proj.row(i).dot(&table.row(i)).max(0.0))
        .collect();
    let mut mass = 0.0;
    for i in 1..xs.len() {
        mass += 0.5 * (xs[i] - xs[i - 1]) * (density[i] + density[i - 1]);
    }
    let trace: f64 = reduced.diagonal().iter().map(|z| z.re).sum();
    let outside = trace - mass;
    if outside.abs() > GRID_MASS_TOL {
        return Err(QspError::GridTooNarrow(outside));
    }
    Ok(MarginalTable {
        xs: xs.to_vec(),
        density,
        mass_outside: outside,
    })
}

type TableKey = (usize, u64, u64, usize);

/// Hermite table for `levels` on `grid`, computed once per process.
pub(crate) fn grid_table(levels: usize, grid: &QGrid) -> std::sync::Arc<DMatrix<f64>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<TableKey, Arc<DMatrix<f64>>>>> = OnceLock::new();
    let key = (
        levels,
        grid.x_min.to_bits(),
        grid.x_max.to_bits(),
        grid.n_points,
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache poisoned").get(&key) {
        return t.clone();
    }
    let t = Arc::new(hermite_table(levels, &grid.points()));
    cache.lock().expect("cache poisoned").insert(key, t.clone());
    t
}

/// q-quadrature marginal of `mode` evaluated on `grid`.
pub fn q_marginal(rho: &DensityMatrix, mode: usize, grid: &QGrid) -> Result<MarginalTable> {
    let reduced = reduce_to(rho, &[mode])?;
    let table = grid_table(rho.space().cutoff(), grid);
    marginal_from_reduced(reduced.matrix(), &table, &grid.points())
}
