//! Physical state preparation and the dephasing channel.

use crate::error::{QspError, Result};
use crate::fock::{
    conjugate, make_displacement, CMatrix, CVector, DensityMatrix, FockSpace, StateVector,
    TrajectoryEnsemble,
};
use crate::par::{try_map_indexed, Execution};
use crate::rng::RandomStream;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Largest probability mass allowed to fall outside the truncated space.
pub const TAIL_MASS_LIMIT: f64 = 1e-6;

/// Displaced thermal state parameters as they appear in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub n_bar: f64,
    #[serde(default)]
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
}

impl ThermalParams {
    pub fn new(n_bar: f64, alpha: f64) -> Self {
        Self {
            n_bar,
            alpha_re: alpha,
            alpha_im: 0.0,
        }
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.alpha_re, self.alpha_im)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_bar >= 0.0 && self.n_bar.is_finite()) {
            return Err(QspError::InvalidParameter(format!(
                "n_bar must be finite and >= 0, got {}",
                self.n_bar
            )));
        }
        if !(self.alpha_re.is_finite() && self.alpha_im.is_finite()) {
            return Err(QspError::InvalidParameter("alpha must be finite".into()));
        }
        Ok(())
    }

    /// `max(16, ceil(2.5 (|alpha| + sqrt(3 n_bar))^2 + 10))`, raised until the
    /// thermal tail beyond the cutoff is below [`TAIL_MASS_LIMIT`] and the
    /// displaced tail is below a tenth of it.
    pub fn default_cutoff(&self) -> usize {
        let reach = self.alpha().norm() + (3.0 * self.n_bar).sqrt();
        let mut d = 16usize.max((2.5 * reach * reach + 10.0).ceil() as usize);
        while thermal_tail(self.n_bar, d) > TAIL_MASS_LIMIT
            || displaced_thermal_tail(self.n_bar, self.alpha().norm(), d) > 0.1 * TAIL_MASS_LIMIT
        {
            d += 1;
        }
        d
    }
}

/// Accumulated dephasing `kappa t`, the variance of the random rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingParams {
    pub kappa_t: f64,
}

impl DephasingParams {
    pub fn new(kappa_t: f64) -> Result<Self> {
        if !(kappa_t >= 0.0 && kappa_t.is_finite()) {
            return Err(QspError::InvalidParameter(format!(
                "kappa_t must be finite and >= 0, got {kappa_t}"
            )));
        }
        Ok(Self { kappa_t })
    }
}

/// Thermal population above level `d - 1`: `(n/(n+1))^d`.
pub fn thermal_tail(n_bar: f64, d: usize) -> f64 {
    if n_bar == 0.0 {
        return 0.0;
    }
    (n_bar / (n_bar + 1.0)).powi(d as i32)
}

/// Population above level `d - 1` of the untruncated displaced thermal state.
///
/// Uses `P(n) = n^k/(n+1)^(k+1) e^{-|a|^2/(n+1)} L_k(-|a|^2/(n(n+1)))` (Poisson
/// at `n_bar = 0`), with the Laguerre recurrence rescaled to stay finite.
pub fn displaced_thermal_tail(n_bar: f64, alpha: f64, d: usize) -> f64 {
    let a2 = alpha * alpha;
    let mut kept = 0.0;
    if n_bar == 0.0 {
        let mut ln_p = -a2;
        for k in 0..d {
            kept += ln_p.exp();
            ln_p += a2.ln() - ((k + 1) as f64).ln();
        }
        return (1.0 - kept).max(0.0);
    }
    let ln_c = (n_bar / (n_bar + 1.0)).ln();
    let base = -a2 / (n_bar + 1.0) - (n_bar + 1.0).ln();
    let x = -a2 / (n_bar * (n_bar + 1.0));
    let (mut prev, mut cur, mut offset) = (0.0_f64, 1.0_f64, 0.0_f64);
    for k in 0..d {
        kept += (base + k as f64 * ln_c + cur.ln() + offset).exp();
        let next = ((2 * k + 1) as f64 - x) * cur - k as f64 * prev;
        prev = cur;
        cur = next / (k + 1) as f64;
        if cur > 1e200 {
            prev /= 1e200;
            cur /= 1e200;
            offset += 200.0 * 10f64.ln();
        }
    }
    (1.0 - kept).max(0.0)
}

/// Geometric Fock populations `n^k / (n+1)^(k+1)` for `k < d`, not renormalized.
pub fn thermal_populations(n_bar: f64, d: usize) -> Vec<f64> {
    let ratio = n_bar / (n_bar + 1.0);
    let mut p = Vec::with_capacity(d);
    let mut cur = 1.0 / (n_bar + 1.0);
    for _ in 0..d {
        p.push(cur);
        cur *= ratio;
    }
    p
}

pub fn thermal_state(n_bar: f64, space: FockSpace) -> Result<DensityMatrix> {
    ThermalParams::new(n_bar, 0.0).validate()?;
    let tail = thermal_tail(n_bar, space.cutoff());
    if tail > TAIL_MASS_LIMIT {
        return Err(QspError::CutoffTooSmall {
            what: "thermal tail mass",
            defect: tail,
            limit: TAIL_MASS_LIMIT,
        });
    }
    let p = thermal_populations(n_bar, space.cutoff());
    let total: f64 = p.iter().sum();
    let diag = CVector::from_iterator(p.len(), p.iter().map(|x| Complex64::new(x / total, 0.0)));
    DensityMatrix::new(space, vec![0], CMatrix::from_diagonal(&diag))
}

/// Conjugates mode `mode` of `rho` by `D(alpha)` and renormalizes.
///
/// Fails when more than [`TAIL_MASS_LIMIT`] of the probability leaves the
/// truncated space. Returns the state and the mass that was lost.
pub fn displace(
    rho: &DensityMatrix,
    mode: usize,
    alpha: Complex64,
) -> Result<(DensityMatrix, f64)> {
    let disp = make_displacement(alpha, rho.space())?;
    let op = disp.operator.on_mode(mode)?;
    let out = conjugate(&op, rho)?;
    let lost = rho.trace().re - out.trace().re;
    if lost > TAIL_MASS_LIMIT {
        return Err(QspError::CutoffTooSmall {
            what: "displaced state tail mass",
            defect: lost,
            limit: TAIL_MASS_LIMIT,
        });
    }
    let (normed, _) = out.normalized()?;
    Ok((normed, lost))
}

/// `D(alpha) rho_th D(alpha)^dagger` on a single mode labelled 0.
pub fn displaced_thermal(params: &ThermalParams, space: FockSpace) -> Result<DensityMatrix> {
    params.validate()?;
    let th = thermal_state(params.n_bar, space)?;
    Ok(displace(&th, 0, params.alpha())?.0)
}

/// Logical infidelity of the displaced thermal state to `|+_L>`:
/// `erfc(alpha / sqrt(n_bar + 1/2)) / 2`.
pub fn init_infidelity_analytic(n_bar: f64, alpha: f64) -> f64 {
    0.5 * libm::erfc(alpha / (n_bar + 0.5).sqrt())
}

/// Truncated coherent state amplitudes and the probability mass beyond the cutoff.
pub(crate) fn coherent_amplitudes(alpha: Complex64, d: usize) -> (CVector, f64) {
    let mut amps = CVector::zeros(d);
    let mut cur = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for (n, a) in amps.iter_mut().enumerate() {
        *a = cur;
        cur = cur * alpha / ((n + 1) as f64).sqrt();
    }
    let kept: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    (
        (amps / Complex64::new(kept.sqrt(), 0.0)),
        (1.0 - kept).max(0.0),
    )
}

/// `|alpha>` on mode 0, renormalized; fails if the truncated tail exceeds
/// [`TAIL_MASS_LIMIT`].
pub fn coherent_state(alpha: Complex64, space: FockSpace) -> Result<StateVector> {
    let (amps, lost) = coherent_amplitudes(alpha, space.cutoff());
    if lost > TAIL_MASS_LIMIT {
        return Err(QspError::CutoffTooSmall {
            what: "coherent state tail mass",
            defect: lost,
            limit: TAIL_MASS_LIMIT,
        });
    }
    StateVector::new(space, vec![0], amps)
}

/// Coherent-ensemble unravelling of the displaced thermal state: `|alpha + beta>`
/// with `beta` complex Gaussian of variance `n_bar / 2` per component.
///
/// Individual samples far in the Gaussian tail may exceed the cutoff; each is
/// renormalized, and the call fails only if the ensemble-averaged lost mass
/// exceeds [`TAIL_MASS_LIMIT`].
pub fn sample_coherent_ensemble(
    params: &ThermalParams,
    space: FockSpace,
    rng: &mut RandomStream,
    count: usize,
    exec: Execution,
) -> Result<TrajectoryEnsemble> {
    params.validate()?;
    if count == 0 {
        return Err(QspError::InvalidParameter("empty ensemble".into()));
    }
    let root = rng.fork();
    let sigma = (params.n_bar / 2.0).sqrt();
    let alpha = params.alpha();
    let members = try_map_indexed(exec, count, |i| {
        let mut r = root.split(i as u64);
        let beta = if params.n_bar > 0.0 {
            let re: f64 = StandardNormal.sample(&mut r);
            let im: f64 = StandardNormal.sample(&mut r);
            Complex64::new(sigma * re, sigma * im)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let (amps, lost) = coherent_amplitudes(alpha + beta, space.cutoff());
        Ok((StateVector::new(space, vec![0], amps)?, lost))
    })?;
    let mean_lost = members.iter().map(|(_, l)| l).sum::<f64>() / count as f64;
    if mean_lost > TAIL_MASS_LIMIT {
        return Err(QspError::CutoffTooSmall {
            what: "coherent ensemble tail mass",
            defect: mean_lost,
            limit: TAIL_MASS_LIMIT,
        });
    }
    TrajectoryEnsemble::uniform(members.into_iter().map(|(s, _)| s).collect())
}

/// Closed-form dephasing of every mode: `rho_{mn} -> rho_{mn} exp(-kt (m-n)^2 / 2)`.
pub fn dephase(rho: &DensityMatrix, kappa_t: f64) -> Result<DensityMatrix> {
    DephasingParams::new(kappa_t)?;
    if kappa_t == 0.0 {
        return Ok(rho.clone());
    }
    let d = rho.space().cutoff();
    let n_modes = rho.modes().len();
    let levels: Vec<Vec<usize>> = (0..rho.dim())
        .map(|i| {
            let mut out = vec![0; n_modes];
            crate::fock::digits(i, d, n_modes, &mut out);
            out
        })
        .collect();
    let mut out = rho.clone();
    out.map_entries(|i, j| {
        let s: usize = levels[i]
            .iter()
            .zip(&levels[j])
            .map(|(a, b)| a.abs_diff(*b).pow(2))
            .sum();
        Complex64::new((-0.5 * kappa_t * s as f64).exp(), 0.0)
    });
    Ok(out)
}

/// One trajectory of the dephasing channel: each mode is rotated by an
/// independent `phi ~ N(0, kappa t)`, `|psi> -> exp(-i phi n) |psi>`.
pub fn dephase_trajectory(
    psi: &StateVector,
    kappa_t: f64,
    rng: &mut RandomStream,
) -> Result<StateVector> {
    DephasingParams::new(kappa_t)?;
    if kappa_t == 0.0 {
        return Ok(psi.clone());
    }
    let d = psi.space().cutoff();
    let n_modes = psi.modes().len();
    let sd = kappa_t.sqrt();
    let phis: Vec<f64> = (0..n_modes)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect::<Vec<f64>>();
    let mut out = psi.clone();
    let mut digits = vec![0; n_modes];
    for (i, a) in out.amplitudes_mut().iter_mut().enumerate() {
        crate::fock::digits(i, d, n_modes, &mut digits);
        let angle: f64 = digits.iter().zip(&phis).map(|(n, p)| *n as f64 * p).sum();
        *a *= Complex64::from_polar(1.0, -angle);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, make_annihilation, make_number, make_parity, make_position};

    fn space(d: usize) -> FockSpace {
        FockSpace::new(d).unwrap()
    }

    #[test]
    fn vacuum_thermal_state() {
        let rho = thermal_state(0.0, space(8)).unwrap();
        assert_eq!(rho.matrix()[(0, 0)], Complex64::new(1.0, 0.0));
        assert!(rho.matrix().iter().skip(1).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn thermal_moments() {
        let s = space(100);
        let rho = thermal_state(1.0, s).unwrap();
        let n = expectation(&make_number(s), &rho).unwrap().re;
        assert!((n - 1.0).abs() < 1e-8);
        for nbar in [0.5, 1.0, 2.0] {
            let rho = thermal_state(nbar, s).unwrap();
            assert!((rho.purity() - 1.0 / (2.0 * nbar + 1.0)).abs() < 1e-10);
            let p = expectation(&make_parity(s), &rho).unwrap().re;
            assert!((p - 1.0 / (2.0 * nbar + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn thermal_tail_is_checked() {
        let err = thermal_state(5.0, space(20)).unwrap_err();
        assert!(matches!(err, QspError::CutoffTooSmall { .. }));
    }

    #[test]
    fn default_cutoff_policy() {
        assert_eq!(ThermalParams::new(0.0, 0.5).default_cutoff(), 16);
        // 2.5 (3 + sqrt 3)^2 + 10 = 65.98...
        assert_eq!(ThermalParams::new(1.0, 3.0).default_cutoff(), 66);
        // the formula gives 32 here, too short for the n_bar = 2 tail
        let p = ThermalParams::new(2.0, 0.5);
        let d = p.default_cutoff();
        assert!(thermal_tail(2.0, d) <= TAIL_MASS_LIMIT);
        // displacement pushes the n_bar = 2 tail past the thermal bound
        for alpha in [0.5, 1.0, 2.0, 3.0] {
            let p = ThermalParams::new(2.0, alpha);
            let d = p.default_cutoff();
            let rho = displaced_thermal(&p, space(d)).unwrap();
            assert!(rho.trace_defect() < 1e-12);
            assert!(displaced_thermal_tail(2.0, alpha, d) <= 0.1 * TAIL_MASS_LIMIT);
        }
    }

    #[test]
    fn displaced_tail_matches_large_space_populations() {
        let s = space(160);
        for (n_bar, alpha, d) in [
            (2.0, 1.0, 40),
            (0.5, 3.0, 30),
            (0.0, 2.0, 12),
            (0.01, 3.0, 25),
        ] {
            let rho = displaced_thermal(&ThermalParams::new(n_bar, alpha), s).unwrap();
            let pops = rho.populations(0).unwrap();
            let oracle: f64 = pops[d..].iter().sum();
            let tail = displaced_thermal_tail(n_bar, alpha, d);
            assert!(
                (tail - oracle).abs() <= 1e-12 + 1e-6 * oracle,
                "{n_bar} {alpha} {d}: {tail} vs {oracle}"
            );
        }
    }

    #[test]
    fn displaced_coherent_moments() {
        let s = space(40);
        let rho = displaced_thermal(&ThermalParams::new(0.0, 2.0), s).unwrap();
        let n = expectation(&make_number(s), &rho).unwrap().re;
        assert!((n - 4.0).abs() < 1e-9);
        let coh = DensityMatrix::from_pure(&coherent_state(Complex64::new(2.0, 0.0), s).unwrap());
        assert!((rho.matrix() - coh.matrix()).camax() < 1e-10);
    }

    #[test]
    fn displaced_thermal_quadrature_moments() {
        let s = space(90);
        for (alpha, nbar) in [(1.0, 0.5), (2.0, 1.0), (0.5, 2.0)] {
            let rho = displaced_thermal(&ThermalParams::new(nbar, alpha), s).unwrap();
            let q = make_position(s);
            let mean = expectation(&q, &rho).unwrap().re;
            let q2 = expectation(&q.compose(&q).unwrap(), &rho).unwrap().re;
            assert!((mean - 2f64.sqrt() * alpha).abs() < 1e-8);
            assert!((q2 - mean * mean - (nbar + 0.5)).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_alpha_gives_thermal() {
        let s = space(30);
        let a = displaced_thermal(&ThermalParams::new(0.5, 0.0), s).unwrap();
        let b = thermal_state(0.5, s).unwrap();
        assert!((a.matrix() - b.matrix()).camax() < 1e-15);
    }

    #[test]
    fn analytic_infidelity_values() {
        assert_eq!(init_infidelity_analytic(0.3, 0.0), 0.5);
        assert!(init_infidelity_analytic(0.0, 40.0) < 1e-300);
        // erfc(sqrt 3) / 2 = 7.1529e-3
        let v = init_infidelity_analytic(1.0, 3f64.sqrt() * 1.5f64.sqrt());
        assert!((v - 7.152_939_217_714_824e-3).abs() < 1e-12);
    }

    #[test]
    fn dephasing_first_coherence() {
        let s = space(40);
        let rho = DensityMatrix::from_pure(&coherent_state(Complex64::new(2.0, 0.0), s).unwrap());
        for kt in [0.1, 0.7] {
            let out = dephase(&rho, kt).unwrap();
            // Oracle: rotation mixture integrated numerically,
            // int N(phi; 0, kt) e^{i phi} dphi by the trapezoid rule.
            let sd = f64::sqrt(kt);
            let steps = 4000;
            let h = 16.0 * sd / steps as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=steps {
                let phi = -8.0 * sd + h * k as f64;
                let w = (-phi * phi / (2.0 * kt)).exp() / (2.0 * std::f64::consts::PI * kt).sqrt();
                let tw = if k == 0 || k == steps { 0.5 } else { 1.0 };
                // rho_{01} picks up e^{-i phi (0 - 1)}
                acc += Complex64::from_polar(tw * w * h, phi);
            }
            let expected = rho.matrix()[(0, 1)] * acc;
            assert!((out.matrix()[(0, 1)] - expected).norm() < 1e-6);
        }
    }

    #[test]
    fn dephasing_keeps_diagonal_and_semigroup() {
        let s = space(30);
        let rho = displaced_thermal(&ThermalParams::new(0.5, 1.5), s).unwrap();
        let a = dephase(&dephase(&rho, 0.3).unwrap(), 0.4).unwrap();
        let b = dephase(&rho, 0.7).unwrap();
        assert!((a.matrix() - b.matrix()).camax() <= 1e-12);
        for i in 0..30 {
            assert_eq!(b.matrix()[(i, i)], rho.matrix()[(i, i)]);
        }
    }

    #[test]
    fn trajectory_dephasing_leaves_fock_state() {
        let s = space(8);
        let psi = StateVector::fock(s, 3);
        let mut rng = RandomStream::new(1);
        let out = dephase_trajectory(&psi, 2.0, &mut rng).unwrap();
        assert!((out.inner(&psi).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ensemble_number_moment() {
        let s = space(40);
        let p = ThermalParams::new(0.5, 2.0);
        let mut rng = RandomStream::new(5);
        let ens = sample_coherent_ensemble(&p, s, &mut rng, 10_000, Execution::Parallel).unwrap();
        let m = ens.expectation(&make_number(s)).unwrap();
        assert!(m.within_sigma(4.5, 3.0), "{m:?}");
        let a = ens.expectation(&make_annihilation(s)).unwrap();
        assert!(a.within_sigma(2.0, 3.0), "{a:?}");
    }

    #[test]
    fn ensemble_matches_dense_in_trace_distance() {
        let s = space(40);
        let p = ThermalParams::new(0.5, 2.0);
        let mut rng = RandomStream::new(8);
        let ens = sample_coherent_ensemble(&p, s, &mut rng, 10_000, Execution::Parallel).unwrap();
        let diff = ens.to_density().matrix() - displaced_thermal(&p, s).unwrap().matrix();
        let eig = nalgebra::linalg::SymmetricEigen::new(diff).eigenvalues;
        let td = 0.5 * eig.iter().map(|x| x.abs()).sum::<f64>();
        assert!(td <= 0.02, "{td}");
    }

    #[test]
    fn ensemble_reproducible_across_execution_modes() {
        let s = space(20);
        let p = ThermalParams::new(1.0, 1.0);
        let a =
            sample_coherent_ensemble(&p, s, &mut RandomStream::new(3), 64, Execution::Sequential)
                .unwrap();
        let b = sample_coherent_ensemble(&p, s, &mut RandomStream::new(3), 64, Execution::Parallel)
            .unwrap();
        for (x, y) in a.members().iter().zip(b.members()) {
            assert_eq!(x.1.amplitudes(), y.1.amplitudes());
        }
    }

    #[test]
    fn zero_nbar_ensemble_is_single_coherent_state() {
        let s = space(30);
        let p = ThermalParams::new(0.0, 1.0);
        let ens =
            sample_coherent_ensemble(&p, s, &mut RandomStream::new(2), 5, Execution::Sequential)
                .unwrap();
        let c = coherent_state(Complex64::new(1.0, 0.0), s).unwrap();
        for (_, m) in ens.members() {
            assert!((m.amplitudes() - c.amplitudes()).camax() < 1e-15);
        }
    }
}
