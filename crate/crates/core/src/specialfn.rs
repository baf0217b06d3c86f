//! Modified Bessel functions I0, I1 and the confluent hypergeometric
//! 0F1(;1;z), with exponentially scaled variants.
//!
//! The steady-state and deformation coefficients always pair I_n(2R^2/g^2)
//! with exp(-2R^2/g^2); for interaction strengths of order 10^2 the unscaled
//! values overflow quickly, so the scaled forms are first-class here.

use crate::{Error, Result};

/// Series truncation: stop when the term ratio drops below this floor.
const SERIES_EPS: f64 = 1e-17;
/// Hard cap on series length.
const MAX_TERMS: usize = 500;
/// Crossover between the power series and the asymptotic expansion.
const ASYMPTOTIC_CUTOFF: f64 = 20.0;

fn check_arg(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Numerics(format!(
            "{name} requires a finite argument >= 0, got {x}"
        )));
    }
    Ok(())
}

/// Power series sum_k (x^2/4)^k / (k!)^2, valid for any x >= 0 (all terms
/// positive, no cancellation); used below the asymptotic cutoff.
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < SERIES_EPS * sum {
            break;
        }
    }
    sum
}

fn i1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for k in 1..MAX_TERMS {
        term *= q / ((k * (k + 1)) as f64);
        sum += term;
        if term < SERIES_EPS * sum {
            break;
        }
    }
    sum
}

/// Asymptotic series for e^{-x} I_nu(x), nu in {0, 1}. Terms follow the
/// recurrence t_k = t_{k-1} * ((2k-1)^2 - 4 nu^2) / (8 k x); summation stops
/// at the smallest term (optimal truncation, error ~ e^{-2x}).
fn scaled_asymptotic(nu: u32, x: f64) -> f64 {
    let musq = 4.0 * (nu * nu) as f64;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let next = term * ((2.0 * kf - 1.0).powi(2) - musq) / (8.0 * kf * x);
        if next.abs() >= term.abs() && k > 1 {
            break;
        }
        sum += next;
        term = next;
        if next.abs() < SERIES_EPS * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Modified Bessel function of the first kind, I0(x), x >= 0.
pub fn i0(x: f64) -> Result<f64> {
    check_arg("i0", x)?;
    if x <= ASYMPTOTIC_CUTOFF {
        Ok(i0_series(x))
    } else {
        let v = x.exp() * scaled_asymptotic(0, x);
        if !v.is_finite() {
            return Err(Error::Numerics(format!(
                "i0({x}) overflows f64; use i0_scaled"
            )));
        }
        Ok(v)
    }
}

/// Modified Bessel function of the first kind, I1(x), x >= 0.
pub fn i1(x: f64) -> Result<f64> {
    check_arg("i1", x)?;
    if x <= ASYMPTOTIC_CUTOFF {
        Ok(i1_series(x))
    } else {
        let v = x.exp() * scaled_asymptotic(1, x);
        if !v.is_finite() {
            return Err(Error::Numerics(format!(
                "i1({x}) overflows f64; use i1_scaled"
            )));
        }
        Ok(v)
    }
}

/// Exponentially scaled e^{-x} I0(x).
pub fn i0_scaled(x: f64) -> Result<f64> {
    check_arg("i0_scaled", x)?;
    if x <= ASYMPTOTIC_CUTOFF {
        Ok((-x).exp() * i0_series(x))
    } else {
        Ok(scaled_asymptotic(0, x))
    }
}

/// Exponentially scaled e^{-x} I1(x).
pub fn i1_scaled(x: f64) -> Result<f64> {
    check_arg("i1_scaled", x)?;
    if x <= ASYMPTOTIC_CUTOFF {
        Ok((-x).exp() * i1_series(x))
    } else {
        Ok(scaled_asymptotic(1, x))
    }
}

/// Confluent hypergeometric 0F1(;1;z) = sum_k z^k / (k!)^2, z >= 0.
///
/// Satisfies the identity 0F1(;1;z) = I0(2 sqrt(z)).
pub fn hyp0f1_b1(z: f64) -> Result<f64> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::Numerics(format!(
            "hyp0f1_b1 requires a finite argument >= 0, got {z}"
        )));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        term *= z / ((k * k) as f64);
        sum += term;
        if term < SERIES_EPS * sum {
            return Ok(sum);
        }
    }
    if term >= SERIES_EPS * sum {
        return Err(Error::Numerics(format!(
            "hyp0f1_b1({z}) did not converge within {MAX_TERMS} terms"
        )));
    }
    Ok(sum)
}
