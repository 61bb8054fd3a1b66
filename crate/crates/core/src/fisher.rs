//! Fisher information of the discretely observed process, its regime
//! limits, and the deficiency of the quadratic-variation estimator.
//!
//! Everything here is exact summation over the lattice; nothing is Monte
//! Carlo. The per-increment information at step `Δ` is `Δ² ψ(θΔ)` with
//!
//! ```text
//! ψ(x) = E[(h(|X|, x) + |X|/x - 1)²],   X ~ pmf(x, ·),
//! ```
//!
//! and `ψ(x)(2x² + x)` is the ratio between the variance of the
//! quadratic-variation estimator and the efficient bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::increment_law::{LatticeTable, ModelParams, RegimeTag, SamplingScheme};

/// Default bracket for the deficiency maximum.
pub const DEFAULT_BRACKET: (f64, f64) = (0.05, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoCurvePoint {
    pub x: f64,
    pub psi: f64,
    pub ratio: f64,
}

/// Normalised per-increment information `ψ(x)`.
pub fn psi(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("psi needs x > 0, got {x}")));
    }
    LatticeTable::expect(x, |k, h| {
        let s = h + k as f64 / x - 1.0;
        s * s
    })
}

/// `I_{T,Δ}(θ) = n Δ² ψ(θΔ)`.
pub fn total_information(params: &ModelParams, scheme: &SamplingScheme) -> Result<f64> {
    let step = scheme.step;
    Ok(scheme.count as f64 * step * step * psi(scheme.scale(params))?)
}

/// Closed-form information in the requested regime:
/// `T/θ` (microscopic), `TΔψ(θΔ)` (intermediate), `(T/Δ)/(2θ²)` (macroscopic).
pub fn limit_information(regime: RegimeTag, params: &ModelParams, scheme: &SamplingScheme) -> Result<f64> {
    let (t, d, th) = (scheme.horizon, scheme.step, params.theta);
    Ok(match regime {
        RegimeTag::Microscopic => t / th,
        RegimeTag::Intermediate => t * d * psi(th * d)?,
        RegimeTag::Macroscopic => t / d / (2.0 * th * th),
    })
}

/// Asymptotic variance of the quadratic-variation estimator,
/// `I_{T,0}^{-1} + I_{T,∞}^{-1}`.
pub fn qv_variance(params: &ModelParams, scheme: &SamplingScheme) -> f64 {
    let (t, d, th) = (scheme.horizon, scheme.step, params.theta);
    th / t + 2.0 * th * th * d / t
}

/// `ψ(x)(2x² + x)`.
pub fn deficiency_ratio(x: f64) -> Result<f64> {
    Ok(psi(x)? * (2.0 * x * x + x))
}

pub fn curve_point(x: f64) -> Result<InfoCurvePoint> {
    let p = psi(x)?;
    Ok(InfoCurvePoint { x, psi: p, ratio: p * (2.0 * x * x + x) })
}

/// Evaluates the curve on `xs` in parallel; output order follows `xs`.
pub fn info_curve(xs: &[f64]) -> Result<Vec<InfoCurvePoint>> {
    xs.par_iter().map(|&x| curve_point(x)).collect()
}

/// `points` log-spaced values on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BracketEnd {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeficiencyMax {
    pub x_star: f64,
    pub ratio_star: f64,
    /// Set when the maximum sits on an end of the bracket.
    pub boundary: Option<BracketEnd>,
}

impl DeficiencyMax {
    /// Relative efficiency loss of the quadratic-variation estimator.
    pub fn loss(&self) -> f64 {
        self.ratio_star - 1.0
    }
}

const SCAN_POINTS: usize = 17;

/// Maximises the deficiency ratio on `[x_lo, x_hi]`.
///
/// A coarse log-spaced scan first rejects brackets containing a strict
/// interior valley (which no unimodal function has), then golden-section
/// search refines around the best scan point until the bracket is below
/// `tol`.
pub fn max_deficiency(x_lo: f64, x_hi: f64, tol: f64) -> Result<DeficiencyMax> {
    if !(x_lo > 0.0 && x_hi > x_lo && x_hi.is_finite()) {
        return Err(Error::domain(format!("need 0 < x_lo < x_hi, got ({x_lo}, {x_hi})")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    max_on_bracket(deficiency_ratio, x_lo, x_hi, tol)
}

fn max_on_bracket<F>(f: F, x_lo: f64, x_hi: f64, tol: f64) -> Result<DeficiencyMax>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let grid = log_grid(x_lo, x_hi, SCAN_POINTS);
    let values = grid.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    for i in 1..grid.len() - 1 {
        let floor = values[i - 1].min(values[i + 1]);
        if values[i] < floor - 1e-12 * floor.abs() {
            return Err(Error::NotUnimodal(grid[i - 1], grid[i], grid[i + 1]));
        }
    }
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x_star, ratio_star) = golden_max(&f, lo, hi, tol)?;

    let mut out = DeficiencyMax { x_star, ratio_star, boundary: None };
    for (end, tag, v) in [
        (x_lo, BracketEnd::Lower, values[0]),
        (x_hi, BracketEnd::Upper, values[grid.len() - 1]),
    ] {
        if (x_star - end).abs() <= tol && v >= ratio_star {
            out = DeficiencyMax { x_star: end, ratio_star: v, boundary: Some(tag) };
        }
    }
    Ok(out)
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increment_law::{log_pmf, log_pmf_hessian, score};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Independent per-increment information: -E[∂²_θ log pmf] by second
    // central differences of log pmf in θ.
    fn fd_information(theta: f64, step: f64) -> f64 {
        let h = 1e-4 * theta;
        let x = theta * step;
        let kmax = crate::increment_law::truncation_order(x) as i64;
        let mut acc = 0.0;
        for k in -kmax..=kmax {
            let p = log_pmf(x, k).unwrap().exp();
            let l = |t: f64| log_pmf(t * step, k).unwrap();
            let d2 = (l(theta + h) - 2.0 * l(theta) + l(theta - h)) / (h * h);
            acc -= p * d2;
        }
        acc
    }

    #[test]
    fn small_x_limit() {
        let x = 1e-4;
        assert!((x * psi(x).unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn large_x_limit() {
        let x = 1e3;
        assert!((2.0 * x * x * psi(x).unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn psi_agrees_with_score_route() {
        let (theta, step) = (2.0, 0.3);
        let p = ModelParams::new(theta).unwrap();
        let x = theta * step;
        let kmax = 60;
        let mut e = 0.0;
        for k in -kmax..=kmax {
            e += crate::increment_law::pmf(x, k).unwrap() * score(&p, step, k).unwrap().powi(2);
        }
        assert!(rel(psi(x).unwrap(), e / (step * step)) < 1e-6);
    }

    #[test]
    fn three_way_agreement_on_grid() {
        let thetas = [0.5, 1.0, 3.0];
        let steps = [0.01, 0.2, 1.5, 20.0];
        for &theta in &thetas {
            for &step in &steps {
                let p = ModelParams::new(theta).unwrap();
                let scheme = SamplingScheme::with_count(1000, step).unwrap();
                let x = theta * step;
                let n = scheme.count as f64;
                let via_psi = total_information(&p, &scheme).unwrap();
                let via_score =
                    n * LatticeTable::expect(x, |k, _| score(&p, step, k as i64).unwrap().powi(2)).unwrap();
                let via_hess =
                    n * LatticeTable::expect(x, |k, _| -log_pmf_hessian(&p, step, k as i64).unwrap()).unwrap();
                assert!(rel(via_psi, via_score) < 1e-7, "θ={theta} Δ={step}");
                assert!(rel(via_psi, via_hess) < 1e-7, "θ={theta} Δ={step}");
                assert!(rel(via_score, via_hess) < 1e-7, "θ={theta} Δ={step}");
            }
        }
    }

    #[test]
    fn finite_difference_information() {
        for (theta, step) in [(1.0, 0.6), (0.5, 0.05), (2.0, 3.0)] {
            let exact = step * step * psi(theta * step).unwrap();
            assert!(rel(fd_information(theta, step), exact) < 1e-4, "θ={theta} Δ={step}");
        }
    }

    #[test]
    fn total_information_limits() {
        let p = ModelParams::new(1.0).unwrap();
        let micro = SamplingScheme::new(100.0, 1e-4).unwrap();
        assert!(rel(total_information(&p, &micro).unwrap(), 100.0) < 0.01);
        let macro_ = SamplingScheme::new(1e6, 1e3).unwrap();
        assert!(rel(total_information(&p, &macro_).unwrap(), 500.0) < 0.1);
        let single = SamplingScheme::new(0.6, 0.6).unwrap();
        assert_eq!(single.count, 1);
        assert!(rel(total_information(&p, &single).unwrap(), 0.36 * psi(0.6).unwrap()) < 1e-15);
    }

    #[test]
    fn closed_form_limits() {
        let p2 = ModelParams::new(2.0).unwrap();
        let p1 = ModelParams::new(1.0).unwrap();
        let s = SamplingScheme::new(10.0, 0.1).unwrap();
        assert_eq!(limit_information(RegimeTag::Microscopic, &p2, &s).unwrap(), 5.0);
        let s = SamplingScheme::new(100.0, 10.0).unwrap();
        assert_eq!(limit_information(RegimeTag::Macroscopic, &p1, &s).unwrap(), 5.0);
        let s = SamplingScheme::new(60.0, 0.6).unwrap();
        let v = limit_information(RegimeTag::Intermediate, &p1, &s).unwrap();
        assert!(rel(v, 36.0 * psi(0.6).unwrap()) < 1e-14);
    }

    #[test]
    fn deficiency_examples() {
        assert!((deficiency_ratio(0.6).unwrap() - 1.2297).abs() < 0.005);
        assert!((deficiency_ratio(1e-3).unwrap() - 1.0).abs() < 0.02);
        for x in log_grid(1e-3, 0.25, 30) {
            assert!(deficiency_ratio(x).unwrap() > 1.0, "x={x}");
        }
    }

    #[test]
    fn monotone_approach_to_limits() {
        let grid = log_grid(1e-4, 1e3, 36);
        let small: Vec<f64> = grid.iter().map(|&x| x * psi(x).unwrap()).collect();
        let large: Vec<f64> = grid.iter().map(|&x| 2.0 * x * x * psi(x).unwrap()).collect();
        // xψ decreases away from 1 as x grows; 2x²ψ increases towards 1
        assert!(small.windows(2).all(|w| w[1] < w[0]));
        assert!(large.windows(2).all(|w| w[1] > w[0]));
        assert!(large.iter().all(|&v| v < 1.0) && small.iter().all(|&v| v < 1.0));
    }

    #[test]
    fn information_is_continuous_in_step() {
        let p = ModelParams::new(1.0).unwrap();
        let t = 1000.0;
        let grid = log_grid(0.01, 100.0, 400);
        let info: Vec<f64> = grid
            .iter()
            .map(|&d| limit_information(RegimeTag::Intermediate, &p, &SamplingScheme::new(t, d).unwrap()).unwrap())
            .collect();
        // TΔψ(Δ) moves smoothly between T/θ and T/(2θ²Δ); on a 400-point log
        // grid no relative jump between neighbours exceeds the grid ratio
        let step_ratio = grid[1] / grid[0];
        for w in info.windows(2) {
            assert!((w[1] / w[0]).max(w[0] / w[1]) < step_ratio);
        }
    }

    #[test]
    fn finds_deficiency_maximum() {
        let m = max_deficiency(0.1, 5.0, 1e-4).unwrap();
        assert!((m.x_star - 0.600).abs() < 0.01, "{m:?}");
        assert!((m.ratio_star - 1.2297).abs() < 0.005);
        assert!(m.boundary.is_none());
        assert!((m.loss() * 100.0 - 23.0).abs() < 1.0);
    }

    #[test]
    fn boundary_maximum_is_flagged() {
        let m = max_deficiency(0.01, 0.09, 1e-5).unwrap();
        assert_eq!(m.boundary, Some(BracketEnd::Upper));
        assert_eq!(m.x_star, 0.09);
    }

    #[test]
    fn rejects_bad_brackets() {
        assert!(max_deficiency(1.0, 0.5, 1e-4).is_err());
        assert!(max_deficiency(0.0, 1.0, 1e-4).is_err());
        assert!(psi(0.0).is_err());
    }

    #[test]
    fn valley_in_bracket_is_reported() {
        let f = |x: f64| -> Result<f64> { Ok((x.ln()).powi(2)) };
        match max_on_bracket(f, 0.1, 10.0, 1e-6) {
            Err(Error::NotUnimodal(a, b, c)) => assert!(a < 1.0 && 1.0 < c && a < b && b < c),
            other => panic!("expected a unimodality error, got {other:?}"),
        }
    }

    #[test]
    fn curve_keeps_input_order() {
        let xs = log_grid(0.05, 10.0, 25);
        let c = info_curve(&xs).unwrap();
        assert!(c.iter().zip(&xs).all(|(p, &x)| p.x == x));
    }
}
