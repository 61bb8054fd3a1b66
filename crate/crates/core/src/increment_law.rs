//! The law of one sampled increment `X_{iΔ} - X_{(i-1)Δ}`.
//!
//! With jump intensity `θ` and step `Δ`, the increment is a Poisson(`θΔ`)
//! number of independent ±1 signs, i.e. the difference of two independent
//! Poisson(`θΔ/2`) counts. Its pmf is `e^{-x} I_{|k|}(x)` with `x = θΔ`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::bessel;
use crate::error::{Error, Result};
use crate::streams;

/// Jump intensity per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
}

impl ModelParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::domain(format!("theta must be positive and finite, got {theta}")));
        }
        Ok(Self { theta })
    }
}

/// Observation grid: horizon `T`, step `Δ`, and `n = floor(T/Δ)` increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub horizon: f64,
    pub step: f64,
    pub count: usize,
}

impl SamplingScheme {
    pub fn new(horizon: f64, step: f64) -> Result<Self> {
        if !step.is_finite() || step <= 0.0 || !horizon.is_finite() || horizon < step {
            return Err(Error::domain(format!(
                "need 0 < delta <= T, got T = {horizon}, delta = {step}"
            )));
        }
        // tolerate T = n·Δ landing a hair below an integer multiple
        let count = ((horizon / step) * (1.0 + 1e-12)).floor() as usize;
        Ok(Self { horizon, step, count: count.max(1) })
    }

    /// `n` increments of size `Δ`, so `T = nΔ`.
    pub fn with_count(count: usize, step: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::domain("increment count must be positive"));
        }
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::domain(format!("delta must be positive, got {step}")));
        }
        Ok(Self { horizon: count as f64 * step, step, count })
    }

    /// The dimensionless scale `x = θΔ`.
    pub fn scale(&self, params: &ModelParams) -> f64 {
        params.theta * self.step
    }
}

/// Observed lattice increments on a sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries {
    values: Vec<i64>,
    scheme: SamplingScheme,
}

impl IncrementSeries {
    pub fn new(values: Vec<i64>, scheme: SamplingScheme) -> Result<Self> {
        if values.len() != scheme.count {
            return Err(Error::Invalid(format!(
                "series has {} increments but floor(T/delta) = {}",
                values.len(),
                scheme.count
            )));
        }
        Ok(Self { values, scheme })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn scheme(&self) -> &SamplingScheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Counts of `|k|`, indexed by `|k|`.
    pub fn abs_histogram(&self) -> Vec<u64> {
        let max = self.values.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as usize;
        let mut counts = vec![0u64; max + 1];
        for v in &self.values {
            counts[v.unsigned_abs() as usize] += 1;
        }
        counts
    }

    /// Writes the `index,increment` CSV body (with header).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,increment")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, v)?;
        }
        Ok(())
    }

    /// Reads `index,increment` rows; `#` lines are skipped.
    pub fn read_csv<R: BufRead>(input: R, scheme: SamplingScheme) -> Result<Self> {
        let values = read_increment_values(input)?;
        Self::new(values, scheme)
    }

    pub fn read_csv_path(path: &Path, scheme: SamplingScheme) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), scheme)
    }
}

pub(crate) fn read_increment_values<R: BufRead>(input: R) -> Result<Vec<i64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "index" || &headers[1] != "increment" {
        return Err(Error::Invalid(format!(
            "expected header `index,increment`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v: i64 = rec[1]
            .parse()
            .map_err(|_| Error::Invalid(format!("row {}: `{}` is not an integer", row + 1, &rec[1])))?;
        values.push(v);
    }
    Ok(values)
}

/// Sampling regime of a scale sequence `Δ_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeTag {
    /// `Δ_T → 0`.
    Microscopic,
    /// `Δ_T → Δ_∞ ∈ (0, ∞)`.
    Intermediate,
    /// `Δ_T → ∞` with `T/Δ_T → ∞`.
    Macroscopic,
}

impl RegimeTag {
    pub const ALL: [RegimeTag; 3] = [RegimeTag::Microscopic, RegimeTag::Intermediate, RegimeTag::Macroscopic];
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeTag::Microscopic => "microscopic",
            RegimeTag::Intermediate => "intermediate",
            RegimeTag::Macroscopic => "macroscopic",
        })
    }
}

fn check_scale(x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("scale x = theta*delta must be positive, got {x}")));
    }
    Ok(())
}

/// `P(increment = k)` at scale `x = θΔ`.
pub fn pmf(x: f64, k: i64) -> Result<f64> {
    check_scale(x)?;
    Ok((bessel::log_bessel_i(abs_order(k)?, x)? - x).exp())
}

pub fn log_pmf(x: f64, k: i64) -> Result<f64> {
    check_scale(x)?;
    Ok(bessel::log_bessel_i(abs_order(k)?, x)? - x)
}

fn abs_order(k: i64) -> Result<u32> {
    u32::try_from(k.unsigned_abs()).map_err(|_| Error::domain(format!("increment {k} out of range")))
}

/// Probability that a simple symmetric walk started at 0 sits at `k` after
/// `m` steps.
pub fn walk_kernel(m: u64, k: i64) -> f64 {
    let ak = k.unsigned_abs();
    if ak > m || (m - ak) % 2 == 1 {
        return 0.0;
    }
    let up = (m + ak) / 2;
    (ln_factorial(m) - ln_factorial(up) - ln_factorial(m - up) - m as f64 * std::f64::consts::LN_2).exp()
}

/// The Poisson mixture `Σ_{m ≤ m_max} φ_m(k) e^{-x} x^m / m!`.
///
/// Fails when the Poisson mass beyond `m_max` is not below `1e-14`.
pub fn pmf_oracle(x: f64, k: i64, m_max: u64) -> Result<f64> {
    check_scale(x)?;
    let tail = poisson_tail_bound(x, m_max);
    if tail >= 1e-14 {
        return Err(Error::Truncation { tail_bound: tail });
    }
    let ak = k.unsigned_abs();
    let mut s = 0.0;
    let mut m = ak;
    while m <= m_max {
        s += walk_kernel(m, k) * (-x + m as f64 * x.ln() - ln_factorial(m)).exp();
        m += 2;
    }
    Ok(s)
}

// P(Poisson(x) > m) bounded by the first omitted term times a geometric factor.
fn poisson_tail_bound(x: f64, m: u64) -> f64 {
    let next = (m + 1) as f64;
    if next <= x {
        return 1.0;
    }
    let first = (-x + next * x.ln() - ln_factorial(m + 1)).exp();
    first / (1.0 - x / (next + 1.0))
}

/// Draws the `n` increments of `scheme`; increment `i` uses its own stream
/// keyed by `(seed, i)`.
pub fn sample_increments(params: &ModelParams, scheme: &SamplingScheme, seed: u64) -> IncrementSeries {
    let half = 0.5 * scheme.scale(params);
    let values = match Poisson::new(half) {
        Ok(pois) => (0..scheme.count)
            .map(|i| {
                let mut rng = streams::increment_rng(seed, i as u64);
                skellam_draw(&pois, &mut rng)
            })
            .collect(),
        // θΔ/2 underflowed to zero: no jumps
        Err(_) => vec![0; scheme.count],
    };
    IncrementSeries { values, scheme: *scheme }
}

pub(crate) fn skellam_draw<R: Rng + ?Sized>(pois: &Poisson<f64>, rng: &mut R) -> i64 {
    let up: f64 = pois.sample(rng);
    let down: f64 = pois.sample(rng);
    up as i64 - down as i64
}

/// `∂_θ log f_Δ(θ, k) = Δ (h + |k|/(θΔ) - 1)` with `h = I_{|k|+1}/I_{|k|}` at `θΔ`.
pub fn score(params: &ModelParams, step: f64, k: i64) -> Result<f64> {
    let x = params.theta * step;
    check_scale(x)?;
    let h = bessel::bessel_ratio(abs_order(k)?, x)?;
    Ok(score_from_ratio(params.theta, step, k.unsigned_abs(), h))
}

pub(crate) fn score_from_ratio(theta: f64, step: f64, abs_k: u64, h: f64) -> f64 {
    step * (h + abs_k as f64 / (theta * step) - 1.0)
}

/// `∂²_θ log f_Δ(θ, k) = Δ² I_{|k|+2}/I_{|k|} + (Δ/θ) h - Δ² h² - |k|/θ²`.
pub fn log_pmf_hessian(params: &ModelParams, step: f64, k: i64) -> Result<f64> {
    let x = params.theta * step;
    check_scale(x)?;
    let nu = abs_order(k)?;
    let h = bessel::bessel_ratio(nu, x)?;
    let h2 = bessel::bessel_ratio2(nu, x)?;
    Ok(hessian_from_ratios(params.theta, step, k.unsigned_abs(), h, h2))
}

pub(crate) fn hessian_from_ratios(theta: f64, step: f64, abs_k: u64, h: f64, h2: f64) -> f64 {
    step * step * h2 + step / theta * h - step * step * h * h - abs_k as f64 / (theta * theta)
}

/// Even moments of the increment law at scale `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralMoments {
    pub second: f64,
    pub fourth: f64,
}

impl CentralMoments {
    /// `Var(X²) = E[X⁴] - E[X²]² = x(1 + 2x)`.
    pub fn variance_of_square(&self) -> f64 {
        self.fourth - self.second * self.second
    }
}

pub fn central_moments(x: f64) -> Result<CentralMoments> {
    check_scale(x)?;
    Ok(CentralMoments { second: x, fourth: x * (1.0 + 3.0 * x) })
}

/// Default truncation order for sums over the lattice at scale `x`.
pub fn truncation_order(x: f64) -> usize {
    (x + 12.0 * x.sqrt() + 25.0).ceil() as usize
}

/// pmf values and Bessel ratios on `|k| = 0..=K` for one scale, the building
/// block for every exact expectation over the increment law.
#[derive(Debug, Clone)]
pub struct LatticeTable {
    x: f64,
    pmf: Vec<f64>,
    ratio: Vec<f64>,
}

impl LatticeTable {
    pub fn new(x: f64, max_abs_k: usize) -> Result<Self> {
        check_scale(x)?;
        let logs = bessel::log_bessel_sequence(max_abs_k, x)?;
        let ratio = bessel::ratio_sequence(max_abs_k + 1, x)?;
        let pmf = logs.into_iter().map(|l| (l - x).exp()).collect();
        Ok(Self { x, pmf, ratio })
    }

    pub fn scale(&self) -> f64 {
        self.x
    }

    pub fn max_abs_k(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self, abs_k: usize) -> f64 {
        self.pmf[abs_k]
    }

    /// `I_{k+1}/I_k` at this scale.
    pub fn ratio(&self, abs_k: usize) -> f64 {
        self.ratio[abs_k]
    }

    /// `I_{k+2}/I_k` at this scale.
    pub fn ratio2(&self, abs_k: usize) -> f64 {
        self.ratio[abs_k] * self.ratio[abs_k + 1]
    }

    /// `E[g(|X|, h(|X|))]` over the symmetric law, truncated adaptively.
    pub fn expect<G: Fn(usize, f64) -> f64>(x: f64, g: G) -> Result<f64> {
        let k0 = truncation_order(x);
        let mut table = Self::new(x, k0 + 64)?;
        loop {
            let mut acc = 0.0;
            let mut settled = false;
            for k in 0..=table.max_abs_k() {
                let w = if k == 0 { 1.0 } else { 2.0 };
                let term = w * table.pmf[k] * g(k, table.ratio[k]);
                acc += term;
                if k >= k0 && term.abs() <= 1e-16 * acc.abs() {
                    settled = true;
                    break;
                }
            }
            if settled {
                return Ok(acc);
            }
            table = Self::new(x, 2 * table.max_abs_k())?;
        }
    }
}
