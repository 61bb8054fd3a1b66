//! Quadratic-variation, one-step and maximum-likelihood estimators of the
//! jump intensity.
//!
//! All likelihood quantities are evaluated on the histogram of `|increment|`
//! so that one backward Bessel-ratio sweep serves the whole sample.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::error::{Error, Result};
use crate::fisher;
use crate::increment_law::{self, IncrementSeries, ModelParams, SamplingScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "QV")]
    Qv,
    #[serde(rename = "OneStep")]
    OneStep,
    #[serde(rename = "MLE")]
    Mle,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qv" => Some(Method::Qv),
            "os" | "onestep" | "one-step" => Some(Method::OneStep),
            "mle" => Some(Method::Mle),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Qv => "QV",
            Method::OneStep => "OneStep",
            Method::Mle => "MLE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// All increments are zero.
    Degenerate,
    /// The Newton step was unusable and the MLE was returned instead.
    FallbackToMle,
    /// The MLE bracket had to be widened beyond its starting interval.
    BracketExpanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    pub stderr: Option<f64>,
    pub avar: Option<f64>,
    pub method: Method,
    pub converged: bool,
    pub iterations: u32,
    pub flags: Vec<Flag>,
}

impl EstimateResult {
    fn new(value: f64, avar: Option<f64>, method: Method, iterations: u32) -> Self {
        Self {
            value,
            stderr: avar.map(f64::sqrt),
            avar,
            method,
            converged: true,
            iterations,
            flags: Vec::new(),
        }
    }

    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Sufficient statistic of the sample: counts of `|k|` plus the grid.
#[derive(Debug, Clone)]
pub struct AbsCounts {
    counts: Vec<u64>,
    scheme: SamplingScheme,
}

impl AbsCounts {
    pub fn from_series(data: &IncrementSeries) -> Self {
        Self { counts: data.abs_histogram(), scheme: *data.scheme() }
    }

    fn max_abs(&self) -> usize {
        self.counts.len() - 1
    }

    fn all_zero(&self) -> bool {
        self.counts.iter().skip(1).all(|&c| c == 0)
    }

    fn nonzero(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k, c as f64))
    }

    /// Total score and total second derivative of the log-likelihood at `theta`.
    pub fn score_and_hessian(&self, theta: f64) -> Result<(f64, f64)> {
        let step = self.scheme.step;
        let ratios = bessel::ratio_sequence(self.max_abs() + 1, theta * step)?;
        let mut s = 0.0;
        let mut h = 0.0;
        for (k, c) in self.nonzero() {
            let r = ratios[k];
            s += c * increment_law::score_from_ratio(theta, step, k as u64, r);
            h += c * increment_law::hessian_from_ratios(theta, step, k as u64, r, r * ratios[k + 1]);
        }
        Ok((s, h))
    }

    pub fn total_score(&self, theta: f64) -> Result<f64> {
        let step = self.scheme.step;
        let ratios = bessel::ratio_sequence(self.max_abs(), theta * step)?;
        Ok(self
            .nonzero()
            .map(|(k, c)| c * increment_law::score_from_ratio(theta, step, k as u64, ratios[k]))
            .sum())
    }

    pub fn log_likelihood(&self, theta: f64) -> Result<f64> {
        let x = theta * self.scheme.step;
        let logs = bessel::log_bessel_sequence(self.max_abs(), x)?;
        Ok(self.nonzero().map(|(k, c)| c * (logs[k] - x)).sum())
    }
}

pub fn log_likelihood(data: &IncrementSeries, theta: f64) -> Result<f64> {
    AbsCounts::from_series(data).log_likelihood(theta)
}

fn qv_value(data: &IncrementSeries) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptySeries);
    }
    let ss: f64 = data.values().iter().map(|&d| (d as f64) * (d as f64)).sum();
    Ok(ss / data.scheme().horizon)
}

/// `(1/T) Σ d_i²`, with asymptotic variance `θ/T + 2θ²Δ/T` at the estimate.
///
/// All-zero data give value 0 with [`Flag::Degenerate`] and no variance.
pub fn qv_estimate(data: &IncrementSeries) -> Result<EstimateResult> {
    let value = qv_value(data)?;
    if value == 0.0 {
        let mut r = EstimateResult::new(0.0, None, Method::Qv, 0);
        r.converged = false;
        r.flags.push(Flag::Degenerate);
        return Ok(r);
    }
    let avar = fisher::qv_variance(&ModelParams { theta: value }, data.scheme());
    Ok(EstimateResult::new(value, Some(avar), Method::Qv, 0))
}

fn efficient_avar(theta: f64, scheme: &SamplingScheme) -> Result<f64> {
    Ok(1.0 / fisher::total_information(&ModelParams::new(theta)?, scheme)?)
}

/// One Newton–Raphson step on the exact log-likelihood started at the QV
/// estimate.
///
/// When the summed second derivative is not negative, or the step leaves
/// `(0, ∞)`, the MLE is returned with [`Flag::FallbackToMle`].
pub fn one_step_estimate(data: &IncrementSeries) -> Result<EstimateResult> {
    let start = qv_value(data)?;
    if start == 0.0 {
        return Err(Error::Degenerate("quadratic variation is zero".into()));
    }
    let counts = AbsCounts::from_series(data);
    let (s, h) = counts.score_and_hessian(start)?;
    let next = start - s / h;
    if !(h < 0.0) || !next.is_finite() || next <= 0.0 {
        let mut r = mle_from_counts(&counts, None, Some(start))?;
        r.method = Method::OneStep;
        r.flags.push(Flag::FallbackToMle);
        return Ok(r);
    }
    let avar = efficient_avar(next, data.scheme())?;
    Ok(EstimateResult::new(next, Some(avar), Method::OneStep, 1))
}

/// Root of the total score.
///
/// With `bracket = None` the search starts on `[θ_QV/8, 8θ_QV]` and widens
/// by factors of 4 until the score changes sign. An explicit bracket is
/// used as given.
pub fn mle_estimate(data: &IncrementSeries, bracket: Option<(f64, f64)>) -> Result<EstimateResult> {
    let start = qv_value(data)?;
    mle_from_counts(&AbsCounts::from_series(data), bracket, Some(start))
}

const MAX_EXPANSIONS: usize = 40;
const MAX_ITER: u32 = 200;

fn mle_from_counts(counts: &AbsCounts, bracket: Option<(f64, f64)>, start: Option<f64>) -> Result<EstimateResult> {
    if counts.all_zero() {
        return Err(Error::Boundary);
    }
    let mut expanded = false;
    let (mut lo, mut hi) = match bracket {
        Some((a, b)) => {
            if !(a > 0.0 && b > a && b.is_finite()) {
                return Err(Error::domain(format!("MLE bracket must satisfy 0 < lo < hi, got ({a}, {b})")));
            }
            (a, b)
        }
        None => {
            let s = start.unwrap_or(1.0);
            (s / 8.0, s * 8.0)
        }
    };
    let mut s_lo = counts.total_score(lo)?;
    let mut s_hi = counts.total_score(hi)?;
    if bracket.is_none() {
        let mut n = 0;
        while s_lo <= 0.0 && n < MAX_EXPANSIONS {
            lo /= 4.0;
            s_lo = counts.total_score(lo)?;
            expanded = true;
            n += 1;
        }
        n = 0;
        while s_hi >= 0.0 && n < MAX_EXPANSIONS {
            hi *= 4.0;
            s_hi = counts.total_score(hi)?;
            expanded = true;
            n += 1;
        }
    }
    if !(s_lo > 0.0 && s_hi < 0.0) {
        return Err(Error::NoSignChange { lo, hi, score_lo: s_lo, score_hi: s_hi });
    }

    // safeguarded Newton: take the Newton step when it stays inside the
    // current bracket, bisect otherwise
    let mut theta = match start {
        Some(s) if s > lo && s < hi => s,
        _ => 0.5 * (lo + hi),
    };
    let n = counts.counts.iter().sum::<u64>() as f64;
    let resid_tol = 1e-12 * n * counts.scheme.step;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let (s, h) = counts.score_and_hessian(theta)?;
        if s > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        if s.abs() <= resid_tol {
            converged = true;
            break;
        }
        let newton = theta - s / h;
        let next = if h < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - theta).abs() <= 4.0 * f64::EPSILON * theta {
            theta = next;
            converged = true;
            break;
        }
        theta = next;
    }
    if !converged {
        return Err(Error::Convergence(format!("MLE after {MAX_ITER} iterations, last theta = {theta}")));
    }
    let mut r = EstimateResult::new(theta, Some(efficient_avar(theta, &counts.scheme)?), Method::Mle, iterations);
    if expanded {
        r.flags.push(Flag::BracketExpanded);
    }
    Ok(r)
}

pub fn estimate(method: Method, data: &IncrementSeries) -> Result<EstimateResult> {
    match method {
        Method::Qv => qv_estimate(data),
        Method::OneStep => one_step_estimate(data),
        Method::Mle => mle_estimate(data, None),
    }
}
