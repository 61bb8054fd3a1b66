//! Modified Bessel functions of the first kind at integer order.
//!
//! The likelihood only ever needs `log I_ν(x)` and the ratios
//! `I_{ν+1}(x) / I_ν(x)`, so nothing here returns `I_ν(x)` itself: for the
//! arguments used by the macroscopic regime it overflows long before the
//! pmf stops being meaningful.
//!
//! Evaluation strategy:
//! - `x <= 30`: the power series, summed in log space.
//! - `x > 30`: `log I_0` from its large-argument expansion, higher orders by
//!   accumulating log-ratios.
//! - Ratios always come from the Gauss continued fraction at an order at or
//!   above `x`, followed by the stable backward recurrence
//!   `r_{ν-1} = 1 / (2ν/x + r_ν)`.

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Crossover between the power series and the large-argument route.
pub const SERIES_LIMIT: f64 = 30.0;

const SERIES_REL_TOL: f64 = 1e-18;
const SERIES_MAX_TERMS: usize = 500;
const CF_MAX_ITER: usize = 100_000;

/// A validated `(order, argument)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselArg {
    pub order: u32,
    pub argument: f64,
}

impl BesselArg {
    pub fn new(order: u32, argument: f64) -> Result<Self> {
        if !argument.is_finite() || argument <= 0.0 {
            return Err(Error::domain(format!(
                "Bessel argument must be positive and finite, got {argument}"
            )));
        }
        Ok(Self { order, argument })
    }
}

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!(
            "Bessel argument must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// `log I_ν(x)`.
///
/// `x = 0` is accepted only for `ν = 0`, where `I_0(0) = 1`.
pub fn log_bessel_i(nu: u32, x: f64) -> Result<f64> {
    if x == 0.0 {
        return if nu == 0 {
            Ok(0.0)
        } else {
            Err(Error::domain(format!("I_{nu}(0) = 0 has no logarithm")))
        };
    }
    check_arg(x)?;
    if x <= SERIES_LIMIT {
        Ok(log_series(nu, x))
    } else {
        let ratios = ratio_sequence(nu as usize, x)?;
        Ok(log_i0_asymptotic(x) + ratios[..nu as usize].iter().map(|r| r.ln()).sum::<f64>())
    }
}

/// `I_{ν+1}(x) / I_ν(x)`, strictly inside `(0, 1)`.
pub fn bessel_ratio(nu: u32, x: f64) -> Result<f64> {
    check_arg(x)?;
    let top = (nu as f64).max(x.ceil()) as usize;
    let mut r = continued_fraction(top, x)?;
    for j in (nu as usize + 1..=top).rev() {
        r = 1.0 / (2.0 * j as f64 / x + r);
    }
    Ok(r)
}

/// `I_{ν+2}(x) / I_ν(x)`, the product of two consecutive one-step ratios.
pub fn bessel_ratio2(nu: u32, x: f64) -> Result<f64> {
    check_arg(x)?;
    let top = (nu as f64 + 1.0).max(x.ceil()) as usize;
    let mut r = continued_fraction(top, x)?;
    let mut upper = r;
    for j in (nu as usize + 1..=top).rev() {
        upper = r;
        r = 1.0 / (2.0 * j as f64 / x + r);
    }
    // loop leaves r = r_ν and upper = r_{ν+1}; when top == ν+1 the loop runs once
    Ok(r * upper)
}

/// Ratios `r_j = I_{j+1}(x) / I_j(x)` for `j = 0..=nu_max`, from a single
/// backward sweep.
pub fn ratio_sequence(nu_max: usize, x: f64) -> Result<Vec<f64>> {
    check_arg(x)?;
    let top = nu_max.max(x.ceil() as usize);
    let mut out = vec![0.0; top + 1];
    out[top] = continued_fraction(top, x)?;
    for j in (1..=top).rev() {
        out[j - 1] = 1.0 / (2.0 * j as f64 / x + out[j]);
    }
    out.truncate(nu_max + 1);
    Ok(out)
}

/// `log I_j(x)` for `j = 0..=nu_max`.
pub fn log_bessel_sequence(nu_max: usize, x: f64) -> Result<Vec<f64>> {
    check_arg(x)?;
    let ratios = ratio_sequence(nu_max, x)?;
    let mut out = Vec::with_capacity(nu_max + 1);
    let mut acc = if x <= SERIES_LIMIT {
        log_series(0, x)
    } else {
        log_i0_asymptotic(x)
    };
    out.push(acc);
    for r in &ratios[..nu_max] {
        acc += r.ln();
        out.push(acc);
    }
    Ok(out)
}

fn log_series(nu: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let nu_f = nu as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..SERIES_MAX_TERMS {
        let mf = m as f64;
        term *= q / (mf * (nu_f + mf));
        sum += term;
        if term < SERIES_REL_TOL * sum {
            break;
        }
    }
    nu_f * (0.5 * x).ln() - ln_factorial(nu as u64) + sum.ln()
}

// I_0(x) ~ e^x / sqrt(2πx) · Σ_k a_k x^{-k}, a_k = a_{k-1} (2k-1)² / (8k).
fn log_i0_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        if next > term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

// Modified Lentz evaluation of I_{ν+1}/I_ν = 1/(b_1 + 1/(b_2 + ...)), b_j = 2(ν+j)/x.
fn continued_fraction(nu: usize, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..=CF_MAX_ITER {
        let b = 2.0 * (nu + j) as f64 / x;
        d += b;
        if d == 0.0 {
            d = TINY;
        }
        d = 1.0 / d;
        c = b + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            return Ok(f);
        }
    }
    Err(Error::Convergence(format!(
        "Bessel ratio continued fraction at order {nu}, x = {x}"
    )))
}
