//! Replicated estimation studies across sampling steps.
//!
//! Every replica draws from streams keyed by `(seed, Δ-index, replica)`, the
//! parallel map collects results in replica order, and all reductions run
//! sequentially afterwards, so the output is bit-identical for any thread
//! count.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::estimators::{estimate, Method};
use crate::fisher;
use crate::increment_law::{sample_increments, ModelParams, SamplingScheme};
use crate::report::fmt_f64;
use crate::streams::derive_seed;

/// Cells whose failure rate exceeds this are flagged.
pub const MAX_FAILURE_RATE: f64 = 0.01;

pub const MIN_KS_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub theta: f64,
    pub delta_grid: Vec<f64>,
    /// Increments per replica; the horizon is `n Δ`.
    pub n_per_scheme: usize,
    pub replicas: usize,
    pub seed: u64,
    pub estimators: Vec<Method>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.theta)?;
        if self.delta_grid.is_empty() {
            return Err(Error::Invalid("delta grid is empty".into()));
        }
        if self.delta_grid.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Invalid("delta grid must be positive".into()));
        }
        if self.delta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("delta grid must be strictly increasing".into()));
        }
        if self.replicas < 2 {
            return Err(Error::Invalid(format!("need at least 2 replicas, got {}", self.replicas)));
        }
        if self.n_per_scheme == 0 {
            return Err(Error::Invalid("n must be positive".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Invalid("no estimators requested".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub delta: f64,
    pub estimator: Method,
    pub empirical_variance: f64,
    /// `1 / I_{T,Δ}` at the true intensity.
    pub theoretical_inverse_info: f64,
    /// `I_{T,0}^{-1} + I_{T,∞}^{-1}` at the true intensity.
    pub qv_theoretical_variance: f64,
    /// KS statistic of the estimates standardised by the truth and the
    /// estimator's theoretical variance.
    pub ks_statistic: f64,
    pub empirical_mean: f64,
    /// Jackknife standard error of `empirical_variance`.
    pub variance_stderr: f64,
    pub failures: usize,
    pub flagged: bool,
}

impl StudyRow {
    /// The variance this estimator should attain asymptotically.
    pub fn theoretical_variance(&self) -> f64 {
        match self.estimator {
            Method::Qv => self.qv_theoretical_variance,
            Method::OneStep | Method::Mle => self.theoretical_inverse_info,
        }
    }
}

/// Sample mean and unbiased variance, summed in index order.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Jackknife standard error of the unbiased sample variance.
pub fn jackknife_variance_stderr(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let loo: Vec<f64> = xs
        .iter()
        .map(|x| (ss - (x - mean) * (x - mean) * nf / (nf - 1.0)) / (nf - 2.0))
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    ((nf - 1.0) / nf * loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).sum::<f64>()).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov–Smirnov statistic of `(samples - center) / scale` against the
/// standard normal.
pub fn normality_diagnostic(samples: &[f64], center: f64, scale: f64) -> Result<f64> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples { got: samples.len(), need: MIN_KS_SAMPLES });
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::domain(format!("scale must be positive, got {scale}")));
    }
    let mut z: Vec<f64> = samples.iter().map(|s| (s - center) / scale).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    Ok(z.iter().enumerate().fold(0.0, |d, (i, &v)| {
        let f = std_normal_cdf(v);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Asymptotic critical value of the KS statistic at level 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Per-replica estimates at one grid point, in replica order.
fn replicate(config: &ExperimentConfig, delta_index: usize, scheme: &SamplingScheme) -> Vec<Vec<Option<f64>>> {
    let params = ModelParams { theta: config.theta };
    (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(&[config.seed, delta_index as u64, r as u64]);
            let data = sample_increments(&params, scheme, seed);
            config
                .estimators
                .iter()
                .map(|&m| match estimate(m, &data) {
                    Ok(e) if e.value > 0.0 && e.value.is_finite() => Some(e.value),
                    _ => None,
                })
                .collect()
        })
        .collect()
}

pub fn run_variance_study(config: &ExperimentConfig) -> Result<Vec<StudyRow>> {
    config.validate()?;
    let params = ModelParams::new(config.theta)?;
    let mut rows = Vec::with_capacity(config.delta_grid.len() * config.estimators.len());
    for (di, &delta) in config.delta_grid.iter().enumerate() {
        let scheme = SamplingScheme::with_count(config.n_per_scheme, delta)?;
        let inv_info = 1.0 / fisher::total_information(&params, &scheme)?;
        let qv_var = fisher::qv_variance(&params, &scheme);
        let per_replica = replicate(config, di, &scheme);
        for (ei, &method) in config.estimators.iter().enumerate() {
            let values: Vec<f64> = per_replica.iter().filter_map(|r| r[ei]).collect();
            let failures = config.replicas - values.len();
            let (mean, var) = if values.len() >= 2 {
                mean_variance(&values)
            } else {
                (f64::NAN, f64::NAN)
            };
            let target = match method {
                Method::Qv => qv_var,
                Method::OneStep | Method::Mle => inv_info,
            };
            let ks = normality_diagnostic(&values, config.theta, target.sqrt()).unwrap_or(f64::NAN);
            rows.push(StudyRow {
                delta,
                estimator: method,
                empirical_variance: var,
                theoretical_inverse_info: inv_info,
                qv_theoretical_variance: qv_var,
                ks_statistic: ks,
                empirical_mean: mean,
                variance_stderr: jackknife_variance_stderr(&values),
                failures,
                flagged: failures as f64 > MAX_FAILURE_RATE * config.replicas as f64 || !(var > 0.0),
            });
        }
    }
    Ok(rows)
}

/// Writes `delta,estimator,emp_var,inv_info,qv_var_theory,ks`.
pub fn write_study_csv<W: Write>(rows: &[StudyRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "delta,estimator,emp_var,inv_info,qv_var_theory,ks")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.delta),
            r.estimator,
            fmt_f64(r.empirical_variance),
            fmt_f64(r.theoretical_inverse_info),
            fmt_f64(r.qv_theoretical_variance),
            fmt_f64(r.ks_statistic)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn config(deltas: Vec<f64>, n: usize, replicas: usize) -> ExperimentConfig {
        ExperimentConfig {
            theta: 1.0,
            delta_grid: deltas,
            n_per_scheme: n,
            replicas,
            seed: 7,
            estimators: vec![Method::Qv, Method::OneStep],
        }
    }

    #[test]
    fn ks_calibration_under_null() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = normality_diagnostic(&xs, 0.0, 1.0).unwrap();
        assert!(d < ks_critical_001(10_000), "{d}");
    }

    #[test]
    fn ks_of_constant_samples() {
        let d = normality_diagnostic(&[3.0; 100], 3.0, 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!(d > ks_critical_001(100));
    }

    #[test]
    fn ks_needs_enough_samples() {
        assert!(matches!(normality_diagnostic(&[0.0; 49], 0.0, 1.0), Err(Error::TooFewSamples { .. })));
        assert!(normality_diagnostic(&[0.0; 60], 0.0, 0.0).is_err());
    }

    #[test]
    fn variance_uses_n_minus_one() {
        let (m, v) = mean_variance(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn two_replicas_give_one_degree_of_freedom() {
        let rows = run_variance_study(&config(vec![0.6], 200, 2)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.empirical_variance.is_finite()));
        assert!(rows.iter().all(|r| r.ks_statistic.is_nan()));
    }

    #[test]
    fn jackknife_matches_normal_theory() {
        // for Gaussian data SE(s²) ≈ σ² sqrt(2/(n-1))
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..20_000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 2.0 * z }).collect();
        let se = jackknife_variance_stderr(&xs);
        let expect = 4.0 * (2.0 / 19_999.0f64).sqrt();
        assert!(((se - expect) / expect).abs() < 0.05, "{se} vs {expect}");
    }

    #[test]
    fn config_validation() {
        assert!(config(vec![], 10, 5).validate().is_err());
        assert!(config(vec![1.0, 0.5], 10, 5).validate().is_err());
        assert!(config(vec![1.0], 10, 1).validate().is_err());
        assert!(config(vec![0.1, 1.0], 10, 2).validate().is_ok());
    }

    #[test]
    fn study_is_reproducible_across_pools() {
        let cfg = config(vec![0.05, 0.6, 20.0], 500, 40);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let rows = pool.install(|| run_variance_study(&cfg)).unwrap();
            let mut buf = Vec::new();
            write_study_csv(&rows, &mut buf).unwrap();
            buf
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn small_study_sanity() {
        let rows = run_variance_study(&config(vec![0.01, 0.6, 50.0], 2000, 300)).unwrap();
        for r in &rows {
            assert!(!r.flagged, "{r:?}");
            let z = (r.empirical_variance - r.theoretical_variance()) / r.variance_stderr;
            assert!(z.abs() < 4.0, "{r:?}");
        }
        // OS never worse than QV beyond noise
        for pair in rows.chunks(2) {
            let (qv, os) = (&pair[0], &pair[1]);
            assert!(os.empirical_variance <= qv.empirical_variance * (1.0 + 3.0 * qv.variance_stderr / qv.empirical_variance));
        }
    }
}
