//! Truncated power-series construction of the parity gate.
//!
//! `P = exp(i pi n)` is expanded as `sum_k (i pi n)^k / k!` and cut at order
//! `k_max`. The partial sums cancel catastrophically (terms near `e^{pi n}`
//! for a result of modulus one), so they are accumulated in binary fixed
//! point with enough integer headroom for the largest term plus 160 bits.

use crate::error::{QspError, Result};
use crate::fock::{CVector, FockOperator, FockSpace};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::f64::consts::PI;

/// Working precision kept below the binary point after the headroom.
pub const MANTISSA_BITS: u64 = 160;
/// Largest tolerated rigorous error bound on a partial sum.
const SERIES_ERROR_LIMIT: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationBudget {
    pub n_bar: f64,
    /// Coherent-amplitude bound `12 (n_bar + 1/2)`.
    pub lambda: f64,
    /// Fock truncation level `ceil(30 (n_bar + 1/2))`.
    pub r_max: usize,
    /// Smallest order whose majorized tail at `pi r_max` is within `tol`.
    pub k_max: usize,
    pub tol: f64,
    /// The tail bound evaluated at `k_max`.
    pub tail_bound: f64,
}

/// `ln B(K)` with `B(K) = x^K / K! / (1 - x/(K+1))`, valid for `K + 1 > x`.
fn log_tail_bound(x: f64, k: usize) -> f64 {
    let kf = k as f64;
    if x == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    kf * x.ln() - libm::lgamma(kf + 1.0) - (1.0 - x / (kf + 1.0)).ln()
}

/// Smallest `K` with `K + 1 > x` and `B(K) <= tol`, together with `B(K)`.
pub fn tail_bound_order(x: f64, tol: f64) -> (usize, f64) {
    let ln_tol = tol.ln();
    let mut k = x.floor() as usize;
    loop {
        let lb = log_tail_bound(x, k);
        if lb <= ln_tol {
            return (k, lb.exp());
        }
        k += 1;
    }
}

pub fn truncation_budget(n_bar: f64, tol: f64) -> Result<TruncationBudget> {
    if !(n_bar >= 0.0 && n_bar.is_finite()) {
        return Err(QspError::InvalidParameter(format!("n_bar = {n_bar}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(QspError::InvalidParameter(format!("tol = {tol}")));
    }
    let lambda = 12.0 * (n_bar + 0.5);
    // guard against 30 * 0.6 = 18.000000000000004
    let r_max = (30.0 * (n_bar + 0.5) - 1e-9).ceil() as usize;
    let (k_max, tail_bound) = tail_bound_order(PI * r_max as f64, tol);
    Ok(TruncationBudget {
        n_bar,
        lambda,
        r_max,
        k_max,
        tol,
        tail_bound,
    })
}

/// `pi * 2^bits`, rounded down, from Machin's formula.
fn pi_fixed(bits: u64) -> BigInt {
    let guard = 32;
    let one = BigInt::one() << (bits + guard);
    let atan_inv = |m: u64| -> BigInt {
        let m2 = BigInt::from(m * m);
        let mut power = &one / BigInt::from(m);
        let mut sum = BigInt::zero();
        let mut k = 0u64;
        while !power.is_zero() {
            let term = &power / BigInt::from(2 * k + 1);
            if k.is_multiple_of(2) {
                sum += term;
            } else {
                sum -= term;
            }
            power /= &m2;
            k += 1;
        }
        sum
    };
    let pi = atan_inv(5) * 16 - atan_inv(239) * 4;
    pi >> guard
}

fn to_f64(v: &BigInt, frac_bits: u64) -> f64 {
    // keep 64 significant fractional bits before converting
    let shift = frac_bits.saturating_sub(64);
    let reduced: BigInt = v >> shift;
    reduced.to_f64().unwrap_or(f64::NAN) / 2f64.powi((frac_bits - shift) as i32)
}

/// Partial sum `sum_{k<=k_max} (i pi n)^k / k!` and its rigorous error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParitySeries {
    pub value: Complex64,
    pub error_bound: f64,
    pub frac_bits: u64,
}

impl ParitySeries {
    pub fn compute(n: usize, k_max: usize) -> Self {
        let x = PI * n as f64;
        // log2 of the largest term x^k/k!, bounded by e^x
        let headroom = (x / std::f64::consts::LN_2).ceil() as u64 + 8;
        let frac_bits = MANTISSA_BITS + headroom;
        let scale = BigInt::one() << frac_bits;
        // x in fixed point; pi carries 1 ulp error at frac_bits + 16
        let xf: BigInt = (pi_fixed(frac_bits + 16) * BigInt::from(n)) >> 16;
        let mut term = scale.clone();
        let mut re = BigInt::zero();
        let mut im = BigInt::zero();
        // running error bound on |term| in ulps, and the accumulated sum error
        let mut term_err = 0.0_f64;
        let mut total_err = 0.0_f64;
        let x_rel = (n as f64 + 1.0) * 2f64.powi(-(frac_bits as i32)) / x.max(1.0);
        for k in 0..=k_max {
            if k > 0 {
                term = (&term * &xf) / (&scale * BigInt::from(k as u64));
                let mag = to_f64(&term.abs(), frac_bits);
                // propagated error, rounding of this step, and the error in x
                term_err = term_err * x / k as f64
                    + 1.0
                    + mag * k as f64 * x_rel / 2f64.powi(-(frac_bits as i32));
            }
            match k % 4 {
                0 => re += &term,
                1 => im += &term,
                2 => re -= &term,
                _ => im -= &term,
            }
            total_err += term_err;
        }
        Self {
            value: Complex64::new(to_f64(&re, frac_bits), to_f64(&im, frac_bits)),
            error_bound: total_err * 2f64.powi(-(frac_bits as i32)) + 2f64.powi(-52),
            frac_bits,
        }
    }
}

/// The same partial sum accumulated naively in double precision.
pub fn naive_parity_series(n: usize, k_max: usize) -> Complex64 {
    let x = Complex64::new(0.0, PI * n as f64);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..=k_max {
        term = term * x / k as f64;
        sum += term;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationRow {
    pub n: usize,
    /// `|P~_n - (-1)^n|`.
    pub defect: f64,
    pub population: f64,
    /// `population * min(1, |e^{i theta P~_n} - e^{i theta (-1)^n}| / 2)`.
    pub weighted_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub budget: TruncationBudget,
    pub theta: f64,
    pub rows: Vec<TruncationRow>,
    /// Sum of the per-level weighted errors.
    pub weighted_gate_error: f64,
    /// Largest rigorous error bound over the accumulated partial sums.
    pub max_series_error: f64,
}

/// Diagonal gate `exp(i theta P~_n)` from the truncated series, with
/// per-level defects and the gate error weighted by `populations` (missing
/// entries count as zero population).
pub fn truncated_parity_gate(
    budget: &TruncationBudget,
    theta: f64,
    space: FockSpace,
    populations: &[f64],
) -> Result<(FockOperator, TruncationReport)> {
    let d = space.cutoff();
    if d < budget.r_max {
        return Err(QspError::CutoffTooSmall {
            what: "truncated parity gate (cutoff below r_max)",
            defect: budget.r_max as f64,
            limit: d as f64,
        });
    }
    let mut diag = CVector::zeros(d);
    let mut rows = Vec::with_capacity(d);
    let mut total = 0.0;
    let mut max_err = 0.0_f64;
    for n in 0..d {
        let s = ParitySeries::compute(n, budget.k_max);
        if s.error_bound > SERIES_ERROR_LIMIT.max(1e-15) {
            return Err(QspError::PrecisionInsufficient(s.error_bound));
        }
        max_err = max_err.max(s.error_bound);
        let exact = if n % 2 == 0 { 1.0 } else { -1.0 };
        let defect = (s.value - exact).norm();
        let entry = (Complex64::new(0.0, theta) * s.value).exp();
        let ideal = Complex64::from_polar(1.0, theta * exact);
        let eps = ((entry - ideal).norm() / 2.0).min(1.0);
        let eps = if eps.is_finite() { eps } else { 1.0 };
        let population = populations.get(n).copied().unwrap_or(0.0);
        let weighted = population * eps;
        total += weighted;
        diag[n] = entry;
        rows.push(TruncationRow {
            n,
            defect,
            population,
            weighted_error: weighted,
        });
    }
    let op = FockOperator::diagonal(space, vec![0], diag)?;
    Ok((
        op,
        TruncationReport {
            budget: *budget,
            theta,
            rows,
            weighted_gate_error: total,
            max_series_error: max_err,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{displaced_thermal, ThermalParams};

    /// Oracle: smallest `K` from which every tail `|sum_{k>=K} (i x)^k/k!|`
    /// stays within `tol`, by direct summation of the decreasing tail terms.
    fn direct_tail_order(x: f64, tol: f64) -> usize {
        let tail = |k0: usize| -> f64 {
            let mut ln_term = k0 as f64 * x.ln() - libm::lgamma(k0 as f64 + 1.0);
            let mut sum = Complex64::new(0.0, 0.0);
            let mut k = k0;
            loop {
                let phase = match k % 4 {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, 1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, -1.0),
                };
                sum += phase * ln_term.exp();
                if ln_term < -800.0 || (k as f64 > x && ln_term < (sum.norm() * 1e-18).ln()) {
                    break;
                }
                k += 1;
                ln_term += x.ln() - (k as f64).ln();
            }
            sum.norm()
        };
        let mut k = (x.ceil() as usize) + 200;
        while k > x.ceil() as usize && tail(k - 1) <= tol {
            k -= 1;
        }
        k
    }

    #[test]
    fn closed_form_budget() {
        let b = truncation_budget(0.5, 0.01).unwrap();
        assert_eq!(b.lambda, 12.0);
        assert_eq!(b.r_max, 30);
        assert!(b.tail_bound <= 0.01);
        assert_eq!(truncation_budget(0.1, 0.01).unwrap().r_max, 18);
    }

    #[test]
    fn bound_order_brackets_direct_tail() {
        // frozen values, confirmed by a 120-digit summation: 3 pi -> 28, 30 pi -> 258
        let k_true = direct_tail_order(3.0 * PI, 0.01);
        assert_eq!(k_true, 28);
        let (k_bound, _) = tail_bound_order(3.0 * PI, 0.01);
        assert!(
            k_bound >= k_true && k_bound - k_true <= 5,
            "{k_bound} {k_true}"
        );
        let k_true = direct_tail_order(30.0 * PI, 0.01);
        assert_eq!(k_true, 258);
        let b = truncation_budget(0.5, 0.01).unwrap();
        assert!(
            b.k_max >= k_true && b.k_max - k_true <= 5,
            "{} {k_true}",
            b.k_max
        );
    }

    #[test]
    fn order_is_monotone_in_tolerance() {
        let mut last = usize::MAX;
        for tol in [1e-6, 1e-4, 1e-2, 0.5, 1.0] {
            let (k, _) = tail_bound_order(20.0, tol);
            assert!(k <= last);
            last = k;
        }
    }

    #[test]
    fn level_zero_is_exact() {
        for k in [0, 1, 10] {
            assert_eq!(ParitySeries::compute(0, k).value, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn extended_precision_converges_to_parity() {
        let s = ParitySeries::compute(30, 400);
        assert!((s.value - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(s.error_bound < 1e-15);
        let s = ParitySeries::compute(7, 120);
        assert!((s.value + Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn naive_double_precision_fails_at_level_30() {
        let k = truncation_budget(0.5, 0.01).unwrap().k_max;
        let naive = naive_parity_series(30, k);
        assert!((naive - Complex64::new(1.0, 0.0)).norm() > 1.0);
        let exact = ParitySeries::compute(30, k);
        assert!((exact.value - Complex64::new(1.0, 0.0)).norm() < 0.01);
    }

    #[test]
    fn weighted_gate_error_within_budget() {
        let b = truncation_budget(0.5, 0.01).unwrap();
        let p = ThermalParams::new(0.5, 3f64.sqrt());
        let d = p.default_cutoff().max(b.r_max);
        let s = FockSpace::new(d).unwrap();
        let pops = displaced_thermal(&p, s).unwrap().populations(0).unwrap();
        let (_, report) = truncated_parity_gate(&b, std::f64::consts::FRAC_PI_4, s, &pops).unwrap();
        assert!(
            report.weighted_gate_error <= 0.05,
            "{}",
            report.weighted_gate_error
        );
        assert_eq!(report.rows.len(), d);
    }

    #[test]
    fn defect_shrinks_with_order_past_pi_n() {
        let n = 12;
        let start = (PI * n as f64).ceil() as usize;
        let mut last = f64::INFINITY;
        for k in start..start + 40 {
            let d = (ParitySeries::compute(n, k).value - Complex64::new(1.0, 0.0)).norm();
            assert!(d <= last * (1.0 + 1e-12) + 1e-15);
            last = d;
        }
    }
}
