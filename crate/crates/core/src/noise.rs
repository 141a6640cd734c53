//! Dephasing tolerance of cat-code qubits read as pure-state qubits versus
//! read as QSP qubits.

use crate::encoding::sign_quadrature;
use crate::error::{QspError, Result};
use crate::fock::{gauss_legendre, CVector, FockSpace, StateVector};
use crate::par::{try_map_indexed, Execution};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Truncated mass allowed in either cat basis state.
pub const CAT_TAIL_LIMIT: f64 = 1e-10;
/// Cutoff used for the `alpha = 2` benchmark.
pub const DEFAULT_CAT_CUTOFF: usize = 60;
/// Largest change allowed when the quadrature is refined.
pub const SPHERE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Code {
    Cs,
    Qsp,
}

impl Code {
    pub fn label(&self) -> &'static str {
        match self {
            Code::Cs => "cs",
            Code::Qsp => "qsp",
        }
    }
}

/// Cat code `|0_cs> = (|a> + |-a>)/N+`, `|1_cs> = (|a> - |-a>)/N-`.
#[derive(Debug, Clone)]
pub struct CatParams {
    pub alpha: f64,
    space: FockSpace,
    zero: CVector,
    one: CVector,
    tail: f64,
}

/// `sqrt(2 (1 +- e^{-2 a^2}))`.
pub fn cat_norms(alpha: f64) -> (f64, f64) {
    let e = (-2.0 * alpha * alpha).exp();
    ((2.0 * (1.0 + e)).sqrt(), (2.0 * (1.0 - e)).sqrt())
}

impl CatParams {
    pub fn new(alpha: f64, cutoff: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(QspError::InvalidParameter(format!(
                "cat amplitude must be positive, got {alpha}"
            )));
        }
        let space = FockSpace::new(cutoff)?;
        let (n_plus, n_minus) = cat_norms(alpha);
        let mut zero = CVector::zeros(cutoff);
        let mut one = CVector::zeros(cutoff);
        // <n|a> = exp(-a^2/2 + n ln a - ln n! / 2)
        let mut log_fact = 0.0;
        for n in 0..cutoff {
            if n > 0 {
                log_fact += (n as f64).ln();
            }
            let amp = (-0.5 * alpha * alpha + n as f64 * alpha.ln() - 0.5 * log_fact).exp();
            if n % 2 == 0 {
                zero[n] = Complex64::new(2.0 * amp / n_plus, 0.0);
            } else {
                one[n] = Complex64::new(2.0 * amp / n_minus, 0.0);
            }
        }
        let tail = (1.0 - zero.norm_squared())
            .max(1.0 - one.norm_squared())
            .max(0.0);
        if tail > CAT_TAIL_LIMIT {
            return Err(QspError::CutoffTooSmall {
                what: "cat basis tail mass",
                defect: tail,
                limit: CAT_TAIL_LIMIT,
            });
        }
        zero /= Complex64::new(zero.norm(), 0.0);
        one /= Complex64::new(one.norm(), 0.0);
        Ok(Self {
            alpha,
            space,
            zero,
            one,
            tail,
        })
    }

    /// `D = 60`, raised for large amplitudes until the tail check passes.
    pub fn with_default_cutoff(alpha: f64) -> Result<Self> {
        let mut d = DEFAULT_CAT_CUTOFF.max((alpha * alpha + 12.0 * alpha + 30.0).ceil() as usize);
        loop {
            match Self::new(alpha, d) {
                Err(QspError::CutoffTooSmall { .. }) if d < 4096 => d += 10,
                other => return other,
            }
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn cutoff(&self) -> usize {
        self.space.cutoff()
    }

    pub fn zero(&self) -> &CVector {
        &self.zero
    }

    pub fn one(&self) -> &CVector {
        &self.one
    }

    /// Mass lost to truncation before renormalization.
    pub fn tail(&self) -> f64 {
        self.tail
    }
}

fn coefficients(theta: f64, phi: f64) -> [Complex64; 2] {
    [
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ]
}

fn check_angles(theta: f64, phi: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) || !phi.is_finite() {
        return Err(QspError::InvalidParameter(format!(
            "Bloch angles out of range: theta {theta}, phi {phi}"
        )));
    }
    Ok(())
}

/// `cos(theta/2)|0_cs> + e^{i phi} sin(theta/2)|1_cs>`.
pub fn cat_qubit(theta: f64, phi: f64, params: &CatParams) -> Result<StateVector> {
    check_angles(theta, phi)?;
    let [a, b] = coefficients(theta, phi);
    let v = &params.zero * a + &params.one * b;
    StateVector::new(params.space, vec![0], v)
}

fn kernel(kappa_t: f64, m: usize, n: usize) -> f64 {
    let d = m.abs_diff(n) as f64;
    (-0.5 * kappa_t * d * d).exp()
}

fn check_kappa(kappa_t: f64) -> Result<()> {
    if !(kappa_t >= 0.0) || !kappa_t.is_finite() {
        return Err(QspError::InvalidParameter(format!(
            "kappa t must be finite and non-negative, got {kappa_t}"
        )));
    }
    Ok(())
}

/// Angle-independent pieces of both fidelities at one dephasing strength.
///
/// With `c = w_0 z_0 + w_1 z_1` and the two cat states supported on opposite
/// parities, every quantity below is a quadratic form in `w`.
#[derive(Debug, Clone, Copy)]
pub struct DephasedResponse {
    pub kappa_t: f64,
    /// `G_ab = sum |z_a,m|^2 |z_b,n|^2 K_mn`; `F_cs = sum |w_a|^2 |w_b|^2 G_ab`.
    pub g: [[f64; 2]; 2],
    /// `<O> = sum w_a w_b^* T_ab` for `O = X_E, Y_E, Z_E`.
    pub t: [[[Complex64; 2]; 2]; 3],
}

impl DephasedResponse {
    pub fn new(kappa_t: f64, params: &CatParams) -> Result<Self> {
        check_kappa(kappa_t)?;
        let d = params.cutoff();
        let sign = sign_quadrature(params.space)?;
        let s = &sign.matrix;
        let z = [&params.zero, &params.one];
        let k: Vec<f64> = (0..d)
            .map(|j| (-0.5 * kappa_t * (j * j) as f64).exp())
            .collect();
        let par = |n: usize| if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut g = [[0.0; 2]; 2];
        let mut t = [[[Complex64::new(0.0, 0.0); 2]; 2]; 3];
        for a in 0..2 {
            for b in 0..2 {
                let mut gab = 0.0;
                let mut tx = Complex64::new(0.0, 0.0);
                let mut ty = Complex64::new(0.0, 0.0);
                let mut tz = Complex64::new(0.0, 0.0);
                for m in 0..d {
                    let zam = z[a][m];
                    if zam.norm_sqr() == 0.0 {
                        continue;
                    }
                    for n in 0..d {
                        let zbn = z[b][n];
                        if zbn.norm_sqr() == 0.0 {
                            continue;
                        }
                        let kmn = k[m.abs_diff(n)];
                        gab += zam.norm_sqr() * zbn.norm_sqr() * kmn;
                        // rho_mn = z_a,m z_b,n^* K_mn; <O> = sum O_nm rho_mn
                        let rho = zam * zbn.conj() * kmn;
                        let snm = s[(n, m)];
                        tx += rho * snm;
                        ty += rho * Complex64::new(0.0, snm * par(m));
                        if m == n {
                            tz += rho * par(m);
                        }
                    }
                }
                g[a][b] = gab;
                t[0][a][b] = tx;
                t[1][a][b] = ty;
                t[2][a][b] = tz;
            }
        }
        Ok(Self { kappa_t, g, t })
    }

    pub fn fidelity_cs(&self, theta: f64, phi: f64) -> f64 {
        let w = coefficients(theta, phi);
        let p = [w[0].norm_sqr(), w[1].norm_sqr()];
        let mut f = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                f += p[a] * p[b] * self.g[a][b];
            }
        }
        f
    }

    /// `(<X_E>, <Y_E>, <Z_E>)` of the dephased cat qubit.
    pub fn bloch(&self, theta: f64, phi: f64) -> [f64; 3] {
        let w = coefficients(theta, phi);
        let mut out = [0.0; 3];
        for (o, slot) in out.iter_mut().enumerate() {
            let mut v = Complex64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    v += w[a] * w[b].conj() * self.t[o][a][b];
                }
            }
            *slot = v.re;
        }
        out
    }

    /// `Tr{rho_L(t) rho_L(0)}` against the ideal logical state.
    pub fn fidelity_qsp(&self, theta: f64, phi: f64) -> f64 {
        let r = self.bloch(theta, phi);
        let n = [
            phi.cos() * theta.sin(),
            phi.sin() * theta.sin(),
            theta.cos(),
        ];
        0.5 * (1.0 + r[0] * n[0] + r[1] * n[1] + r[2] * n[2])
    }

    pub fn fidelity(&self, code: Code, theta: f64, phi: f64) -> f64 {
        match code {
            Code::Cs => self.fidelity_cs(theta, phi),
            Code::Qsp => self.fidelity_qsp(theta, phi),
        }
    }
}

/// Physical fidelity of the dephased cat qubit with its initial state.
pub fn fidelity_cs(theta: f64, phi: f64, kappa_t: f64, params: &CatParams) -> Result<f64> {
    check_angles(theta, phi)?;
    Ok(DephasedResponse::new(kappa_t, params)?.fidelity_cs(theta, phi))
}

/// Logical fidelity of the same dephased state read as a QSP qubit.
pub fn fidelity_qsp(theta: f64, phi: f64, kappa_t: f64, params: &CatParams) -> Result<f64> {
    check_angles(theta, phi)?;
    Ok(DephasedResponse::new(kappa_t, params)?.fidelity_qsp(theta, phi))
}

/// Direct evaluation of `sum |c_m|^2 |c_n|^2 K_mn`, used as a cross-check.
pub fn fidelity_cs_direct(psi: &StateVector, kappa_t: f64) -> f64 {
    let c = psi.amplitudes();
    let mut f = 0.0;
    for m in 0..c.len() {
        for n in 0..c.len() {
            f += c[m].norm_sqr() * c[n].norm_sqr() * kernel(kappa_t, m, n);
        }
    }
    f
}

/// Gauss-Legendre in `cos(theta)` times the trapezoid rule in `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub theta_nodes: usize,
    pub phi_nodes: usize,
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self {
            theta_nodes: 16,
            phi_nodes: 16,
        }
    }
}

impl SphereQuadrature {
    pub fn doubled(&self) -> Self {
        Self {
            theta_nodes: 2 * self.theta_nodes,
            phi_nodes: 2 * self.phi_nodes,
        }
    }

    /// `(1/4 pi) int f sin(theta) dtheta dphi`.
    pub fn average(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (u, wu) = gauss_legendre(self.theta_nodes);
        let mut total = 0.0;
        for (x, w) in u.iter().zip(&wu) {
            let theta = x.clamp(-1.0, 1.0).acos();
            let mut ring = 0.0;
            for j in 0..self.phi_nodes {
                let phi = 2.0 * PI * j as f64 / self.phi_nodes as f64;
                ring += f(theta, phi);
            }
            total += 0.5 * w * ring / self.phi_nodes as f64;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageFidelity {
    pub value: f64,
    /// `|F(quad) - F(quad doubled)|`.
    pub quad_error: f64,
}

/// Sphere-averaged fidelity; fails if doubling the nodes moves the result by
/// more than [`SPHERE_TOL`].
pub fn avg_fidelity(
    code: Code,
    kappa_t: f64,
    params: &CatParams,
    quad: SphereQuadrature,
) -> Result<AverageFidelity> {
    let resp = DephasedResponse::new(kappa_t, params)?;
    average_response(&resp, code, quad)
}

fn average_response(
    resp: &DephasedResponse,
    code: Code,
    quad: SphereQuadrature,
) -> Result<AverageFidelity> {
    if quad.theta_nodes == 0 || quad.phi_nodes == 0 {
        return Err(QspError::InvalidParameter("empty sphere quadrature".into()));
    }
    let value = quad.average(|t, p| resp.fidelity(code, t, p));
    let fine = quad.doubled().average(|t, p| resp.fidelity(code, t, p));
    let quad_error = (fine - value).abs();
    if quad_error > SPHERE_TOL {
        return Err(QspError::NonConvergence(format!(
            "sphere average of {} at kappa t = {}: refinement changed it by {quad_error:.3e}",
            code.label(),
            resp.kappa_t
        )));
    }
    Ok(AverageFidelity { value, quad_error })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityCurve {
    pub code: Code,
    pub kappa_t: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub quad_error: Vec<f64>,
}

/// Both codes over a shared grid, one row per `kappa t`.
pub fn fidelity_curves(
    grid: &[f64],
    params: &CatParams,
    quad: SphereQuadrature,
    exec: Execution,
) -> Result<(FidelityCurve, FidelityCurve)> {
    let rows = try_map_indexed(exec, grid.len(), |i| {
        let resp = DephasedResponse::new(grid[i], params)?;
        Ok((
            average_response(&resp, Code::Cs, quad)?,
            average_response(&resp, Code::Qsp, quad)?,
        ))
    })?;
    let curve = |code: Code, pick: fn(&(AverageFidelity, AverageFidelity)) -> AverageFidelity| {
        FidelityCurve {
            code,
            kappa_t: grid.to_vec(),
            fidelity: rows.iter().map(|r| pick(r).value).collect(),
            quad_error: rows.iter().map(|r| pick(r).quad_error).collect(),
        }
    };
    Ok((curve(Code::Cs, |r| r.0), curve(Code::Qsp, |r| r.1)))
}

/// `n` points spaced evenly in `log(kappa t)` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Figure tracked by the threshold scan: physical fidelity of `|+_cs>` for
/// the cat code, retained fraction of `<X_E>` on `|+_cs>` for QSP.
pub fn threshold_figure(code: Code, kappa_t: f64, params: &CatParams) -> Result<f64> {
    let theta = PI / 2.0;
    let resp = DephasedResponse::new(kappa_t, params)?;
    Ok(match code {
        Code::Cs => resp.fidelity_cs(theta, 0.0),
        Code::Qsp => {
            let x0 = DephasedResponse::new(0.0, params)?.bloch(theta, 0.0)[0];
            resp.bloch(theta, 0.0)[0] / x0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub code: Code,
    pub alpha: f64,
    pub kappa_t: f64,
    /// Width of the final bisection bracket.
    pub bracket: f64,
}

pub const THRESHOLD_TOL: f64 = 1e-3;

/// Bisection for the `kappa t` where [`threshold_figure`] drops to `drop_level`.
pub fn threshold_scan(code: Code, params: &CatParams, drop_level: f64) -> Result<Threshold> {
    if !(drop_level > 0.0 && drop_level < 1.0) {
        return Err(QspError::InvalidParameter(format!(
            "drop level must lie in (0, 1), got {drop_level}"
        )));
    }
    let f = |k: f64| threshold_figure(code, k, params);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi)? > drop_level {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(QspError::NonConvergence(format!(
                "{} figure stays above {drop_level} up to kappa t = {hi}",
                code.label()
            )));
        }
    }
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > drop_level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Threshold {
        code,
        alpha: params.alpha,
        kappa_t: 0.5 * (lo + hi),
        bracket: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::apo_set;
    use crate::fock::{expectation, DensityMatrix};
    use crate::states::{coherent_state, dephase};

    fn alpha2() -> CatParams {
        CatParams::new(2.0, DEFAULT_CAT_CUTOFF).unwrap()
    }

    #[test]
    fn basis_is_orthonormal_with_definite_parity() {
        let p = alpha2();
        assert!(p.zero().dotc(p.one()).norm() < 1e-10);
        assert!((p.zero().norm() - 1.0).abs() < 1e-14);
        assert!(p.tail() < 1e-10);
        for n in 0..p.cutoff() {
            let (even, odd) = (p.zero()[n], p.one()[n]);
            if n % 2 == 0 {
                assert_eq!(odd.norm(), 0.0);
            } else {
                assert_eq!(even.norm(), 0.0);
            }
        }
        assert!(CatParams::new(2.0, 20).is_err());
        assert!(CatParams::new(-1.0, 60).is_err());
    }

    #[test]
    fn plus_state_is_nearly_coherent() {
        let p = alpha2();
        let plus = cat_qubit(PI / 2.0, 0.0, &p).unwrap();
        let coh = coherent_state(Complex64::new(2.0, 0.0), p.space()).unwrap();
        let overlap = plus.inner(&coh).norm_sqr();
        // |<+_cs|a>|^2 = (N+ + N-)^2 / 8 from the norm algebra
        let (np, nm) = cat_norms(2.0);
        let exact = (np + nm).powi(2) / 8.0;
        assert!((overlap - exact).abs() < 1e-12);
        assert!(overlap >= 0.999);
        let zero = cat_qubit(0.0, 0.0, &p).unwrap();
        assert!((zero.amplitudes() - p.zero()).norm() < 1e-15);
    }

    #[test]
    fn fidelity_cs_agrees_with_direct_sum() {
        let p = alpha2();
        for &(t, ph, k) in &[(0.3, 1.0, 0.05), (2.0, 4.0, 0.4), (PI / 2.0, 0.0, 1.3)] {
            let psi = cat_qubit(t, ph, &p).unwrap();
            let direct = fidelity_cs_direct(&psi, k);
            assert!((fidelity_cs(t, ph, k, &p).unwrap() - direct).abs() < 1e-13);
        }
        assert!((fidelity_cs(1.0, 2.0, 0.0, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fully_dephased_cs_limit() {
        // kappa t -> infinity keeps only the diagonal: F = sum |c_n|^4
        let p = alpha2();
        let zero = p.zero();
        let limit: f64 = zero.iter().map(|c| c.norm_sqr().powi(2)).sum();
        let f = fidelity_cs(0.0, 0.0, 200.0, &p).unwrap();
        assert!((f - limit).abs() < 1e-14);
        // 40-digit sum over the even Poisson weights of |2>
        assert!((limit - 0.286_786_284_140_795_4).abs() < 1e-12, "{limit}");
        let a = fidelity_cs(1.1, 0.4, 200.0, &p).unwrap();
        let b = fidelity_cs(1.1, 0.4 + PI, 200.0, &p).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn bloch_vector_matches_dense_expectations() {
        let p = alpha2();
        let apo = apo_set(p.space()).unwrap();
        let (theta, phi, k) = (1.2, 0.7, 0.3);
        let psi = cat_qubit(theta, phi, &p).unwrap();
        let rho = dephase(&DensityMatrix::from_pure(&psi), k).unwrap();
        let r = DephasedResponse::new(k, &p).unwrap().bloch(theta, phi);
        for (op, v) in [&apo.x, &apo.y, &apo.z].iter().zip(r) {
            let e = expectation(op, &rho).unwrap().re;
            assert!((e - v).abs() < 1e-12, "{e} vs {v}");
        }
        // parity is untouched by dephasing
        assert!((r[2] - theta.cos()).abs() < 1e-12);
    }

    #[test]
    fn qsp_quadrature_is_exact_at_low_order() {
        let p = alpha2();
        let resp = DephasedResponse::new(0.4, &p).unwrap();
        let f = |q: SphereQuadrature| q.average(|t, ph| resp.fidelity_qsp(t, ph));
        let a = f(SphereQuadrature {
            theta_nodes: 8,
            phi_nodes: 8,
        });
        let b = f(SphereQuadrature::default());
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn averages_start_at_one_and_approach_two_thirds() {
        let p = alpha2();
        let q = SphereQuadrature::default();
        let cs = avg_fidelity(Code::Cs, 0.0, &p, q).unwrap();
        assert!((cs.value - 1.0).abs() < 1e-12);
        let qsp = avg_fidelity(Code::Qsp, 50.0, &p, q).unwrap();
        assert!((qsp.value - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn qsp_outlasts_cat_code() {
        let p = alpha2();
        let grid = log_grid(0.01, 2.0, 25);
        let (cs, qsp) =
            fidelity_curves(&grid, &p, SphereQuadrature::default(), Execution::Parallel).unwrap();
        for i in 0..grid.len() {
            assert!(qsp.fidelity[i] >= cs.fidelity[i], "kappa t {}", grid[i]);
        }
        assert!((grid[24] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn thresholds_are_bracketed() {
        let p = alpha2();
        let cs = threshold_scan(Code::Cs, &p, 0.9).unwrap();
        let qsp = threshold_scan(Code::Qsp, &p, 0.9).unwrap();
        assert!(cs.bracket <= THRESHOLD_TOL);
        assert!(qsp.kappa_t > cs.kappa_t);
        let above = threshold_figure(Code::Qsp, qsp.kappa_t - 2e-3, &p).unwrap();
        let below = threshold_figure(Code::Qsp, qsp.kappa_t + 2e-3, &p).unwrap();
        assert!(above > 0.9 && below < 0.9);
        assert!(threshold_scan(Code::Cs, &p, 1.5).is_err());
    }
}
