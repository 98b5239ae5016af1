//! Green's function of `(p x')' = 0` on `[0, ∞)` with Robin-type data at
//! both ends.
//!
//! With `B(t, s) = ∫ₜˢ dσ/p(σ)` the two homogeneous solutions are
//! `θ(t) = b1 + a1·B(0, t)` and `φ(t) = b2 + a2·B(t, ∞)`, and
//! `G(t, s) = θ(min(t, s))·φ(max(t, s)) / D` with
//! `D = a2·b1 + a1·b2 + a1·a2·B(0, ∞)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, gauss7, QuadratureConfig, QuadratureError};
use crate::Side;

/// Positive weight `p(t)`.
pub type Weight = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl SlCoefficients {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64) -> Self {
        SlCoefficients { a1, a2, b1, b2 }
    }

    fn check(&self) -> Result<(), KernelError> {
        for (name, v) in [
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(KernelError::InvalidCoefficient { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("coefficient {name} = {value} must be a nonnegative finite number")]
    InvalidCoefficient { name: &'static str, value: f64 },
    #[error("1/p is not integrable on [0, ∞){}", fmt_location(.location))]
    NonIntegrableWeight { location: Option<f64> },
    #[error("weight p is not positive and finite at t = {t} (p = {value})")]
    InvalidWeight { t: f64, value: f64 },
    #[error("D = {d} is not positive")]
    NonPositiveD { d: f64 },
    #[error("min(b1, b2) = 0, the constant c is undefined")]
    ZeroDenominator,
    #[error("window [{a}, {b}] must satisfy 0 < a < b < ∞")]
    InvalidWindow { a: f64, b: f64 },
    #[error("w = {w} is outside (0, 1)")]
    WOutOfRange { w: f64 },
    #[error("invalid time {t}")]
    InvalidTime { t: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn fmt_location(loc: &Option<f64>) -> String {
    match loc {
        Some(s) => format!(" (quadrature failed near s = {s})"),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// `B(0, ·)` is tabulated on `[0, cache_horizon]`.
    pub cache_horizon: f64,
    pub cache_step: f64,
    pub quadrature: QuadratureConfig,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            cache_horizon: 64.0,
            cache_step: 1.0 / 32.0,
            quadrature: QuadratureConfig {
                atol: 1e-14,
                rtol: 1e-13,
                ..QuadratureConfig::default()
            },
        }
    }
}

/// Tabulated `B(0, t)` with prefix sums on a uniform grid and suffix sums
/// that include the tail `B(horizon, ∞)` when it exists.
pub struct WeightIntegral {
    weight: Weight,
    step: f64,
    prefix: Vec<f64>,
    /// `suffix[i] = B(i·step, horizon)`; add `tail` for `B(i·step, ∞)`.
    suffix: Vec<f64>,
    horizon: f64,
    tail: Result<f64, Option<f64>>,
    quadrature: QuadratureConfig,
}

impl fmt::Debug for WeightIntegral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightIntegral")
            .field("step", &self.step)
            .field("horizon", &self.horizon)
            .field("cells", &(self.prefix.len() - 1))
            .field("tail", &self.tail)
            .finish()
    }
}

impl WeightIntegral {
    pub fn new(weight: Weight, cfg: &KernelConfig) -> Result<Self, KernelError> {
        cfg.quadrature.validate()?;
        if !(cfg.cache_step > 0.0 && cfg.cache_horizon > cfg.cache_step) {
            return Err(KernelError::Quadrature(QuadratureError::InvalidConfig(
                "kernel cache needs 0 < step < horizon".into(),
            )));
        }
        let cells = (cfg.cache_horizon / cfg.cache_step).ceil() as usize;
        let horizon = cells as f64 * cfg.cache_step;
        let recip = |s: f64| 1.0 / weight(s);

        let mut pieces = Vec::with_capacity(cells);
        for i in 0..cells {
            let lo = i as f64 * cfg.cache_step;
            let hi = lo + cfg.cache_step;
            let est = quadrature::integrate_interval(recip, lo, hi, &cfg.quadrature).map_err(
                |e| match e {
                    QuadratureError::NonFinite { abscissa } => KernelError::InvalidWeight {
                        t: abscissa,
                        value: weight(abscissa),
                    },
                    other => other.into(),
                },
            )?;
            if !est.converged {
                return Err(KernelError::NonIntegrableWeight {
                    location: est.divergence_hint,
                });
            }
            pieces.push(est.value);
        }
        let mut prefix = Vec::with_capacity(cells + 1);
        prefix.push(0.0);
        for p in &pieces {
            prefix.push(prefix.last().unwrap() + p);
        }
        let mut suffix = vec![0.0; cells + 1];
        for i in (0..cells).rev() {
            suffix[i] = suffix[i + 1] + pieces[i];
        }
        let tail = match quadrature::integrate_tail(recip, horizon, &cfg.quadrature) {
            Ok(est) if est.converged => Ok(est.value),
            Ok(est) => Err(est.divergence_hint),
            Err(QuadratureError::NonFinite { abscissa }) => Err(Some(abscissa)),
            Err(e) => return Err(e.into()),
        };
        Ok(WeightIntegral {
            weight,
            step: cfg.cache_step,
            prefix,
            suffix,
            horizon,
            tail,
            quadrature: cfg.quadrature.clone(),
        })
    }

    pub fn weight(&self, t: f64) -> f64 {
        (self.weight)(t)
    }

    fn cell(&self, t: f64) -> usize {
        ((t / self.step).floor() as usize).min(self.prefix.len() - 2)
    }

    fn local(&self, i: usize, t: f64) -> f64 {
        let lo = i as f64 * self.step;
        if t == lo {
            0.0
        } else {
            gauss7(|s| 1.0 / (self.weight)(s), lo, t)
        }
    }

    /// `B(0, ∞)`, or the location where the tail integral failed.
    pub fn total(&self) -> Result<f64, KernelError> {
        match self.tail {
            Ok(tail) => Ok(self.prefix.last().unwrap() + tail),
            Err(location) => Err(KernelError::NonIntegrableWeight { location }),
        }
    }

    /// `B(0, t)` for finite `t ≥ 0`.
    pub fn from_zero(&self, t: f64) -> Result<f64, KernelError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(KernelError::InvalidTime { t });
        }
        if t <= self.horizon {
            let i = self.cell(t);
            Ok(self.prefix[i] + self.local(i, t))
        } else {
            Ok(self.total()? - self.to_infinity(t)?)
        }
    }

    /// `B(t, ∞)` for `t ≥ 0`.
    pub fn to_infinity(&self, t: f64) -> Result<f64, KernelError> {
        if t == f64::INFINITY {
            return Ok(0.0);
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(KernelError::InvalidTime { t });
        }
        let tail = self
            .tail
            .map_err(|location| KernelError::NonIntegrableWeight { location })?;
        if t <= self.horizon {
            let i = self.cell(t);
            return Ok(self.suffix[i] - self.local(i, t) + tail);
        }
        let est = quadrature::integrate_tail(|s| 1.0 / (self.weight)(s), t, &self.quadrature)?;
        if !est.converged {
            return Err(KernelError::NonIntegrableWeight {
                location: est.divergence_hint,
            });
        }
        Ok(est.value)
    }

    /// `B(t, s)` for `0 ≤ t ≤ s ≤ ∞`.
    pub fn between(&self, t: f64, s: f64) -> Result<f64, KernelError> {
        if !(t >= 0.0) || !(s >= t) {
            return Err(KernelError::InvalidTime { t: s });
        }
        if t == s {
            return Ok(0.0);
        }
        if s == f64::INFINITY {
            return self.to_infinity(t);
        }
        Ok((self.from_zero(s)? - self.from_zero(t)?).max(0.0))
    }
}

/// Green's function together with the derived constants `D`, `c` and `w`.
#[derive(Debug)]
pub struct GreenKernel {
    coefficients: SlCoefficients,
    integral: WeightIntegral,
    b0inf: f64,
    d: f64,
}

impl GreenKernel {
    pub fn new(
        coefficients: SlCoefficients,
        weight: Weight,
        cfg: &KernelConfig,
    ) -> Result<Self, KernelError> {
        coefficients.check()?;
        let integral = WeightIntegral::new(weight, cfg)?;
        let b0inf = integral.total()?;
        let SlCoefficients { a1, a2, b1, b2 } = coefficients;
        let d = a2 * b1 + a1 * b2 + a1 * a2 * b0inf;
        if !(d > 1e-12 * 1f64.max(b1 + b2)) {
            return Err(KernelError::NonPositiveD { d });
        }
        Ok(GreenKernel {
            coefficients,
            integral,
            b0inf,
            d,
        })
    }

    pub fn coefficients(&self) -> SlCoefficients {
        self.coefficients
    }

    pub fn weight(&self, t: f64) -> f64 {
        self.integral.weight(t)
    }

    pub fn weight_integral(&self) -> &WeightIntegral {
        &self.integral
    }

    pub fn b_integral(&self, t: f64, s: f64) -> Result<f64, KernelError> {
        self.integral.between(t, s)
    }

    pub fn b0inf(&self) -> f64 {
        self.b0inf
    }

    pub fn coupling_d(&self) -> f64 {
        self.d
    }

    pub fn theta(&self, t: f64) -> Result<f64, KernelError> {
        let SlCoefficients { a1, b1, .. } = self.coefficients;
        if t == f64::INFINITY {
            return Ok(self.theta_at_infinity());
        }
        if a1 == 0.0 {
            return Ok(b1);
        }
        Ok(b1 + a1 * self.integral.from_zero(t)?)
    }

    pub fn phi(&self, t: f64) -> Result<f64, KernelError> {
        let SlCoefficients { a2, b2, .. } = self.coefficients;
        if a2 == 0.0 {
            return Ok(b2);
        }
        Ok(b2 + a2 * self.integral.to_infinity(t)?)
    }

    /// `θ'(t) = a1 / p(t)`
    pub fn theta_prime(&self, t: f64) -> f64 {
        self.coefficients.a1 / self.weight(t)
    }

    /// `φ'(t) = −a2 / p(t)`
    pub fn phi_prime(&self, t: f64) -> f64 {
        -self.coefficients.a2 / self.weight(t)
    }

    pub fn theta_at_infinity(&self) -> f64 {
        self.coefficients.b1 + self.coefficients.a1 * self.b0inf
    }

    pub fn phi_at_zero(&self) -> f64 {
        self.coefficients.b2 + self.coefficients.a2 * self.b0inf
    }

    pub fn green(&self, t: f64, s: f64) -> Result<f64, KernelError> {
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        Ok(self.theta(lo)? * self.phi(hi)? / self.d)
    }

    /// `∂G/∂t` on the branch selected by the position of `t` relative to
    /// `s`; at `t = s`, `Left` means the `t < s` branch.
    pub fn green_dt(&self, t: f64, s: f64, side: Side) -> Result<f64, KernelError> {
        let SlCoefficients { a1, a2, .. } = self.coefficients;
        let p = self.weight(t);
        if t < s || (t == s && side == Side::Left) {
            Ok(a1 * self.phi(s)? / (self.d * p))
        } else {
            Ok(-a2 * self.theta(s)? / (self.d * p))
        }
    }

    /// `∂G/∂s` on the branch selected by the position of `s` relative to
    /// `t`; at `s = t`, `Left` means the `s < t` branch.
    pub fn green_ds(&self, t: f64, s: f64, side: Side) -> Result<f64, KernelError> {
        let SlCoefficients { a1, a2, .. } = self.coefficients;
        let p = self.weight(s);
        if s < t || (s == t && side == Side::Left) {
            Ok(a1 * self.phi(t)? / (self.d * p))
        } else {
            Ok(-a2 * self.theta(t)? / (self.d * p))
        }
    }

    /// `lim_{t→∞} G(t, s) = b2·θ(s)/D`
    pub fn green_bar(&self, s: f64) -> Result<f64, KernelError> {
        Ok(self.coefficients.b2 * self.theta(s)? / self.d)
    }

    /// `b2·θ'(s)/D`
    pub fn green_bar_prime(&self, s: f64) -> f64 {
        self.coefficients.b2 * self.theta_prime(s) / self.d
    }

    /// `p(s)·∂G/∂s` at the diagonal, as the larger of the two one-sided
    /// magnitudes: `max(a1·φ(s), a2·θ(s)) / D`.
    pub fn diagonal_flux_max(&self, s: f64) -> Result<f64, KernelError> {
        let SlCoefficients { a1, a2, .. } = self.coefficients;
        Ok((a1 * self.phi(s)?).max(a2 * self.theta(s)?) / self.d)
    }

    /// The smaller one-sided magnitude, reported for sensitivity.
    pub fn diagonal_flux_min(&self, s: f64) -> Result<f64, KernelError> {
        let SlCoefficients { a1, a2, .. } = self.coefficients;
        Ok((a1 * self.phi(s)?).min(a2 * self.theta(s)?) / self.d)
    }

    /// `c = max(a1, a2) / min(b1, b2)`
    pub fn constant_c(&self) -> Result<f64, KernelError> {
        let SlCoefficients { a1, a2, b1, b2 } = self.coefficients;
        let den = b1.min(b2);
        if den <= 0.0 {
            return Err(KernelError::ZeroDenominator);
        }
        Ok(a1.max(a2) / den)
    }

    pub fn constant_w(&self, a: f64, b: f64) -> Result<f64, KernelError> {
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(KernelError::InvalidWindow { a, b });
        }
        let SlCoefficients { a1, a2, b1, b2 } = self.coefficients;
        let left = (b1 + a1 * self.integral.from_zero(a)?) / (b1 + a1 * self.b0inf);
        let right = (b2 + a2 * self.integral.to_infinity(b)?) / (b2 + a2 * self.b0inf);
        let w = [left, right]
            .into_iter()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        if !(w > 0.0 && w < 1.0) {
            return Err(KernelError::WOutOfRange { w });
        }
        Ok(w)
    }

    /// `sup 1/p` over `[0, ∞)`: dense grid on `[0, horizon]`, a local
    /// refinement around the grid argmax, and geometric probes beyond.
    pub fn sup_reciprocal_weight(&self, horizon: f64) -> f64 {
        let n = 4000;
        let h = horizon / n as f64;
        let recip = |t: f64| 1.0 / self.weight(t);
        let (mut best_t, mut best) = (0.0, recip(0.0));
        for i in 1..=n {
            let t = i as f64 * h;
            let v = recip(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        let lo = (best_t - h).max(0.0);
        for i in 0..=200 {
            let v = recip(lo + 2.0 * h * i as f64 / 200.0);
            best = best.max(v);
        }
        let mut t = horizon;
        while t < 1e6 {
            t *= 1.5;
            best = best.max(recip(t));
        }
        best
    }
}
