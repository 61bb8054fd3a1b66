//! Time-varying jump intensity `λ(θ, s/T)` on `[0, T]`.
//!
//! The counting process has compensator `Λ_T(t, θ) = ∫_0^t λ(θ, s/T) ds`, so
//! increment `i` is the difference of two independent Poisson counts with
//! means `Λ_i / 2`, `Λ_i = Λ_T(iΔ) - Λ_T((i-1)Δ)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand_distr::Poisson;

use crate::error::{Error, Result};
use crate::fisher;
use crate::increment_law::{skellam_draw, IncrementSeries, RegimeTag, SamplingScheme};
use crate::quad;
use crate::streams;

const ABS_TOL: f64 = 1e-10;
const REL_TOL: f64 = 1e-12;

/// `(θ, s) ↦ value`, with `s ∈ [0, 1]` the rescaled time.
pub type RateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct IntensityModel {
    name: String,
    rate: RateFn,
    rate_dtheta: RateFn,
    sup_bound: f64,
}

impl fmt::Debug for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntensityModel")
            .field("name", &self.name)
            .field("sup_bound", &self.sup_bound)
            .finish_non_exhaustive()
    }
}

impl IntensityModel {
    /// `rate` and `rate_dtheta` must be reentrant; `sup_bound` bounds `rate`
    /// over every `θ` the model will be evaluated at and all `s ∈ [0, 1]`.
    pub fn new(name: impl Into<String>, rate: RateFn, rate_dtheta: RateFn, sup_bound: f64) -> Result<Self> {
        if !(sup_bound.is_finite() && sup_bound > 0.0) {
            return Err(Error::domain(format!("sup bound must be positive and finite, got {sup_bound}")));
        }
        Ok(Self { name: name.into(), rate, rate_dtheta, sup_bound })
    }

    /// `λ(θ, s) = θ`.
    pub fn constant(theta_max: f64) -> Result<Self> {
        Self::new("constant", Arc::new(|th, _| th), Arc::new(|_, _| 1.0), theta_max)
    }

    /// `λ(θ, s) = θ(1 + s)`.
    pub fn linear(theta_max: f64) -> Result<Self> {
        Self::new("linear", Arc::new(|th, s| th * (1.0 + s)), Arc::new(|_, s| 1.0 + s), 2.0 * theta_max)
    }

    /// `λ(θ, s) = θ(1 + sin(2πs)/2)`.
    pub fn sine(theta_max: f64) -> Result<Self> {
        let shape = |s: f64| 1.0 + 0.5 * (2.0 * PI * s).sin();
        Self::new(
            "sine",
            Arc::new(move |th, s| th * shape(s)),
            Arc::new(move |_, s| shape(s)),
            1.5 * theta_max,
        )
    }

    /// Built-in intensities by CLI name.
    pub fn by_name(name: &str, theta_max: f64) -> Result<Self> {
        match name {
            "constant" => Self::constant(theta_max),
            "linear" => Self::linear(theta_max),
            "sine" => Self::sine(theta_max),
            other => Err(Error::Invalid(format!(
                "unknown intensity `{other}` (expected constant, linear or sine)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn rate(&self, theta: f64, s: f64) -> f64 {
        (self.rate)(theta, s)
    }

    pub fn rate_dtheta(&self, theta: f64, s: f64) -> f64 {
        (self.rate_dtheta)(theta, s)
    }

    /// Checks positivity and the sup bound on a grid of `s`.
    pub fn validate(&self, theta: f64) -> Result<()> {
        for i in 0..=256 {
            let s = i as f64 / 256.0;
            let v = self.rate(theta, s);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("intensity {} is {v} at theta = {theta}, s = {s}", self.name)));
            }
            if v > self.sup_bound {
                return Err(Error::domain(format!(
                    "intensity {} = {v} exceeds its bound {} at theta = {theta}",
                    self.name, self.sup_bound
                )));
            }
        }
        Ok(())
    }
}

/// `Λ_T(t, θ) = ∫_0^t λ(θ, s/T) ds`.
pub fn cumulative_intensity(model: &IntensityModel, theta: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0 && (0.0..=horizon).contains(&t)) {
        return Err(Error::domain(format!("need 0 <= t <= T, got t = {t}, T = {horizon}")));
    }
    model.validate(theta)?;
    window_intensity(model, theta, 0.0, t, horizon)
}

fn window_intensity(model: &IntensityModel, theta: f64, a: f64, b: f64, horizon: f64) -> Result<f64> {
    quad::integrate(|s| model.rate(theta, s / horizon), a, b, ABS_TOL, REL_TOL)
}

/// Per-increment means `Λ_i`, `i = 1..=n`.
pub fn increment_means(model: &IntensityModel, theta: f64, scheme: &SamplingScheme) -> Result<Vec<f64>> {
    model.validate(theta)?;
    let d = scheme.step;
    (0..scheme.count)
        .map(|i| window_intensity(model, theta, i as f64 * d, (i + 1) as f64 * d, scheme.horizon))
        .collect()
}

/// Draws one path; increment `i` uses the stream keyed by `(seed, i)`.
pub fn sample_increments_nh(
    model: &IntensityModel,
    theta: f64,
    scheme: &SamplingScheme,
    seed: u64,
) -> Result<IncrementSeries> {
    let means = increment_means(model, theta, scheme)?;
    let values = means
        .iter()
        .enumerate()
        .map(|(i, &m)| match Poisson::new(0.5 * m) {
            Ok(pois) => skellam_draw(&pois, &mut streams::increment_rng(seed, i as u64)),
            Err(_) => 0,
        })
        .collect();
    IncrementSeries::new(values, *scheme)
}

/// `∫_0^1 λ(θ, s) ds`, the limit of the normalised quadratic variation.
pub fn mean_intensity(model: &IntensityModel, theta: f64) -> Result<f64> {
    model.validate(theta)?;
    quad::integrate(|s| model.rate(theta, s), 0.0, 1.0, ABS_TOL, REL_TOL)
}

/// `H(θ, s) = ψ(λ(θ, s) Δ)`.
pub fn h_factor(model: &IntensityModel, theta: f64, s: f64, step: f64) -> Result<f64> {
    fisher::psi(model.rate(theta, s) * step)
}

/// Fisher information in each regime:
///
/// - microscopic: `T ∫ (∂_θ log λ)² λ ds`
/// - intermediate: `TΔ ∫ (∂_θ log λ)² λ² H ds`
/// - macroscopic: `(T/Δ)/2 ∫ (∂_θ log λ)² ds`
pub fn info_nonhomog(
    regime: RegimeTag,
    model: &IntensityModel,
    theta: f64,
    scheme: &SamplingScheme,
) -> Result<f64> {
    model.validate(theta)?;
    let (t, d) = (scheme.horizon, scheme.step);
    let dlog = |s: f64| model.rate_dtheta(theta, s) / model.rate(theta, s);
    match regime {
        RegimeTag::Microscopic => {
            let v = quad::integrate(|s| dlog(s).powi(2) * model.rate(theta, s), 0.0, 1.0, ABS_TOL, REL_TOL)?;
            Ok(t * v)
        }
        RegimeTag::Intermediate => {
            // ψ can fail only on a non-positive rate, which validate() excludes
            let v = quad::integrate(
                |s| {
                    let lam = model.rate(theta, s);
                    let h = fisher::psi(lam * d).unwrap_or(f64::NAN);
                    dlog(s).powi(2) * lam * lam * h
                },
                0.0,
                1.0,
                ABS_TOL,
                REL_TOL,
            )?;
            if !v.is_finite() {
                return Err(Error::Quadrature { residual: f64::NAN });
            }
            Ok(t * d * v)
        }
        RegimeTag::Macroscopic => {
            let v = quad::integrate(|s| dlog(s).powi(2), 0.0, 1.0, ABS_TOL, REL_TOL)?;
            Ok(0.5 * t / d * v)
        }
    }
}
