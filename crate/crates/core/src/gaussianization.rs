//! Squared L2 distance between the jittered increment density and its
//! Gaussian counterpart `N(0, θΔ)`.
//!
//! Jittering adds an independent uniform on `[-1/2, 1/2]` to the lattice
//! increment, giving the piecewise-constant density `p(y) = pmf(x, round(y))`.
//! The distance `∫ (p - q)²` is computed twice:
//!
//! - directly, cell by cell, with Gauss–Legendre quadrature;
//! - in frequency space, where `p̂(ξ) = e^{-x(1 - cos ξ)} sinc(ξ/2)` and
//!   `q̂(ξ) = e^{-xξ²/2}`, and `∫ (p - q)² = (2π)^{-1} ∫ (p̂ - q̂)²`.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::increment_law::{truncation_order, LatticeTable};
use crate::quad;

/// At or below this scale the lattice law is nowhere near Gaussian; distances are
/// still computed but flagged.
pub const GAUSSIAN_RANGE_MIN: f64 = 0.5;

const CELL_RULE_ORDER: usize = 16;

/// The jittered law at scale `x = θΔ`.
#[derive(Debug, Clone)]
pub struct JitteredLaw {
    table: LatticeTable,
}

impl JitteredLaw {
    pub fn new(x: f64) -> Result<Self> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::domain(format!("theta*delta must be positive, got {x}")));
        }
        Ok(Self { table: LatticeTable::new(x, truncation_order(x))? })
    }

    pub fn scale(&self) -> f64 {
        self.table.scale()
    }

    pub fn density(&self, y: f64) -> f64 {
        let k = y.round().abs() as usize;
        if k > self.table.max_abs_k() {
            0.0
        } else {
            self.table.pmf(k)
        }
    }

    /// `∫ p`, i.e. the total pmf mass retained by the truncation.
    pub fn total_mass(&self) -> f64 {
        (1..=self.table.max_abs_k()).map(|k| 2.0 * self.table.pmf(k)).sum::<f64>() + self.table.pmf(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L2Distance {
    pub value: f64,
    /// `θΔ` at or below [`GAUSSIAN_RANGE_MIN`].
    pub small_scale: bool,
}

fn check(theta: f64, delta: f64) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0 && delta.is_finite() && delta > 0.0) {
        return Err(Error::domain(format!("theta and delta must be positive, got {theta}, {delta}")));
    }
    Ok(theta * delta)
}

fn gaussian_density(y: f64, var: f64) -> f64 {
    (-0.5 * y * y / var).exp() / (2.0 * PI * var).sqrt()
}

/// `Σ_k ∫_{k-1/2}^{k+1/2} (pmf(x,k) - q(y))² dy` plus the Gaussian mass
/// outside the truncated lattice.
pub fn l2_distance_direct(theta: f64, delta: f64) -> Result<L2Distance> {
    let x = check(theta, delta)?;
    let law = JitteredLaw::new(x)?;
    let (nodes, weights) = quad::gauss_legendre(CELL_RULE_ORDER);
    // split cells when the Gaussian is narrower than a cell
    let pieces = (2.0 / x.sqrt()).ceil().max(1.0) as usize;
    let width = 1.0 / pieces as f64;
    let cell = |k: usize| -> f64 {
        let p = law.table.pmf(k);
        let mut acc = 0.0;
        for j in 0..pieces {
            let a = k as f64 - 0.5 + j as f64 * width;
            let c = a + 0.5 * width;
            let s: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| {
                    let d = p - gaussian_density(c + 0.5 * width * t, x);
                    w * d * d
                })
                .sum();
            acc += 0.5 * width * s;
        }
        acc
    };
    let kmax = law.table.max_abs_k();
    let mut total = cell(0);
    for k in 1..=kmax {
        total += 2.0 * cell(k);
    }
    // ∫_{|y| > K+1/2} q² with q² ∝ N(0, x/2)
    let edge = kmax as f64 + 0.5;
    total += erfc(edge / x.sqrt()) / (2.0 * (PI * x).sqrt());
    Ok(L2Distance { value: total, small_scale: x <= GAUSSIAN_RANGE_MIN })
}

// Trigamma ψ₁(z) for z ≥ ~10 by its asymptotic series.
fn trigamma_large(z: f64) -> f64 {
    let z2 = 1.0 / (z * z);
    1.0 / z
        + 0.5 * z2
        + z2 / z
            * (1.0 / 6.0 + z2 * (-1.0 / 30.0 + z2 * (1.0 / 42.0 + z2 * (-1.0 / 30.0 + z2 * 5.0 / 66.0))))
}

/// `(2π)^{-1} ∫ (p̂(ξ) - q̂(ξ))² dξ`.
///
/// The integral is taken numerically over `|ξ| ≤ 2πM - π`, where the
/// Gaussian factor is below `e^{-40}`. Beyond that only `p̂²` survives, and
/// its periods sum in closed form through the trigamma function:
/// `Σ_{j≥M} (2πj + u)^{-2} = ψ₁(M + u/2π) / 4π²`.
pub fn l2_distance_spectral(theta: f64, delta: f64) -> Result<L2Distance> {
    let x = check(theta, delta)?;
    let periods = ((80.0 / x).sqrt() / (2.0 * PI)).ceil().max(20.0);
    let cutoff = 2.0 * PI * periods - PI;

    let integrand = |xi: f64| {
        let half = 0.5 * xi;
        let sin_half = half.sin();
        let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { sin_half / half };
        let lattice = (-2.0 * x * sin_half * sin_half).exp() * sinc;
        let gauss = (-0.5 * x * xi * xi).exp();
        let d = lattice - gauss;
        d * d
    };

    // concentrate effort near ξ = 0 where both transforms are close to 1
    let core = (8.0 / x.sqrt()).min(PI);
    let mut body = quad::integrate(integrand, 0.0, core, 0.0, 1e-12)?;
    if core < PI {
        body += quad::integrate(integrand, core, PI, 0.0, 1e-12)?;
    }
    let mut a = PI;
    while a < cutoff - 1e-9 {
        let b = a + 2.0 * PI;
        // each period is peaked at its centre 2πj
        let c = 0.5 * (a + b);
        body += quad::integrate(integrand, a, c, 0.0, 1e-12)?;
        body += quad::integrate(integrand, c, b, 0.0, 1e-12)?;
        a = b;
    }

    let tail_integrand = |u: f64| {
        let s = (0.5 * u).sin();
        (-4.0 * x * s * s).exp() * 4.0 * s * s * trigamma_large(periods + u / (2.0 * PI)) / (4.0 * PI * PI)
    };
    let tail = quad::integrate(tail_integrand, -PI, 0.0, 0.0, 1e-12)? + quad::integrate(tail_integrand, 0.0, PI, 0.0, 1e-12)?;

    let value = 2.0 * (body + tail) / (2.0 * PI);
    Ok(L2Distance { value, small_scale: x <= GAUSSIAN_RANGE_MIN })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceRow {
    pub delta: f64,
    pub l2_direct: f64,
    pub l2_spectral: f64,
}

impl DistanceRow {
    pub fn delta_times_l2(&self) -> f64 {
        self.delta * self.l2_direct
    }
}

pub fn distance_rows(theta: f64, deltas: &[f64]) -> Result<Vec<DistanceRow>> {
    use rayon::prelude::*;
    deltas
        .par_iter()
        .map(|&delta| {
            Ok(DistanceRow {
                delta,
                l2_direct: l2_distance_direct(theta, delta)?.value,
                l2_spectral: l2_distance_spectral(theta, delta)?.value,
            })
        })
        .collect()
}

/// Least-squares slope of `log value` against `log delta`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(d, v)| (a + d.ln(), b + v.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), &(d, v)| {
        let dx = d.ln() - mx;
        (num + dx * (v.ln() - my), den + dx * dx)
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn spectral_integrand_vanishes_at_origin() {
        let x: f64 = 3.0;
        let lattice = (-x * (1.0 - 0f64.cos())).exp();
        assert_eq!(lattice - (-0.5 * x * 0.0).exp(), 0.0);
    }

    #[test]
    fn trigamma_series() {
        // ψ₁(20) = π²/6 - Σ_{j<20} 1/j²
        let direct = PI * PI / 6.0 - (1..20).map(|j| 1.0 / (j * j) as f64).sum::<f64>();
        assert!(rel(trigamma_large(20.0), direct) < 1e-13);
    }

    #[test]
    fn jitter_normalisation() {
        for x in [0.5, 3.0, 100.0, 5000.0] {
            let law = JitteredLaw::new(x).unwrap();
            assert!((law.total_mass() - 1.0).abs() < 1e-12, "x={x}");
            assert_eq!(law.density(0.49), law.density(-0.49));
        }
    }

    #[test]
    fn routes_agree() {
        for (theta, delta) in [(1.0, 10.0), (1.0, 100.0), (2.0, 0.5), (1.0, 3000.0)] {
            let a = l2_distance_direct(theta, delta).unwrap().value;
            let b = l2_distance_spectral(theta, delta).unwrap().value;
            assert!(rel(a, b) < 1e-4, "θ={theta} Δ={delta}: {a} vs {b}");
        }
    }

    #[test]
    fn small_scale_is_flagged_and_order_one() {
        let d = l2_distance_direct(1.0, 0.5).unwrap();
        assert!(d.small_scale);
        assert!(d.value > 1e-3);
        // adaptive scipy quadrature over every cell
        assert!(rel(d.value, 0.052_519_037_882_904_3) < 1e-8);
        let s = l2_distance_spectral(1.0, 0.5).unwrap();
        assert!(rel(d.value, s.value) < 1e-4);
        assert!(!l2_distance_direct(1.0, 2.0).unwrap().small_scale);
    }

    #[test]
    fn large_scale_constant() {
        // Within a unit cell q moves linearly, so ∫(p - q)² → (1/12)∫q'² =
        // 1/(48 √π x^{3/2}) as x → ∞.
        for x in [1e3, 1e4] {
            let lead = 1.0 / (48.0 * PI.sqrt() * x * x.sqrt());
            let d = l2_distance_direct(1.0, x).unwrap().value;
            assert!(rel(d, lead) < 2e-3, "x={x}: {d} vs {lead}");
        }
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        assert!(l2_distance_direct(0.0, 1.0).is_err());
        assert!(l2_distance_spectral(1.0, -1.0).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0f64, 10.0, 100.0].iter().map(|&d| (d, 3.0 * d.powf(-1.25))).collect();
        assert!((log_log_slope(&pts) + 1.25).abs() < 1e-12);
    }
}
