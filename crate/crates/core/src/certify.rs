//! Asymptotic constants and the two-solution existence conditions (A1)–(A4).
//!
//! Every liminf/limsup ratio is estimated by evaluating the defining ratio
//! along a geometric sequence approaching `0`, `∞` or `q` and reading off
//! the last term. A last term above `infinity_threshold` reports `+∞`; at
//! `0` and `∞`, a last term below `zero_threshold` in magnitude reports `0`.
//! A last term that differs from its predecessor by more than
//! `unreliable_rel` is flagged.
//!
//! Conditions are evaluated in extended-real arithmetic: `∞ + a = ∞`,
//! `∞·a = ∞` for `a > 0`, and `∞·0` makes the condition indeterminate. So
//! does any divergent integral.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::kernel::{GreenKernel, KernelError};
use crate::problem::ProblemSpec;
use crate::quadrature::{self, IntegralEstimate, QuadratureConfig, QuadratureError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtendedReal::PosInfinity
        } else {
            ExtendedReal::Finite(v)
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == ExtendedReal::PosInfinity
    }

    pub fn add(self, other: Self) -> Self {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::PosInfinity,
        }
    }

    /// `None` for `∞·0` and for `∞` times a negative number.
    pub fn mul(self, other: Self) -> Option<Self> {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => Some(ExtendedReal::Finite(a * b)),
            (ExtendedReal::PosInfinity, ExtendedReal::PosInfinity) => {
                Some(ExtendedReal::PosInfinity)
            }
            (ExtendedReal::PosInfinity, ExtendedReal::Finite(a))
            | (ExtendedReal::Finite(a), ExtendedReal::PosInfinity) => {
                (a > 0.0).then_some(ExtendedReal::PosInfinity)
            }
        }
    }

    pub fn gt(self, v: f64) -> bool {
        match self {
            ExtendedReal::Finite(a) => a > v,
            ExtendedReal::PosInfinity => true,
        }
    }

    pub fn lt(self, v: f64) -> bool {
        match self {
            ExtendedReal::Finite(a) => a < v,
            ExtendedReal::PosInfinity => false,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::PosInfinity => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("unknown asymptotic constant '{0}'")]
    UnknownConstant(String),
    #[error("invalid window [{a}, {b}]: need 0 < a < b < ∞")]
    InvalidWindow { a: f64, b: f64 },
    #[error("q must be positive and finite, got {0}")]
    InvalidLevel(f64),
    #[error("invalid sampling configuration: {0}")]
    InvalidSampling(String),
}

/// Where a ratio limit is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitPoint {
    Zero,
    Q,
    Infinity,
}

impl LimitPoint {
    fn label(self) -> &'static str {
        match self {
            LimitPoint::Zero => "0",
            LimitPoint::Q => "q",
            LimitPoint::Infinity => "inf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Liminf,
    Limsup,
}

/// The function whose ratio is taken; impulse indices start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "function", content = "index", rename_all = "lowercase")]
pub enum Subject {
    F,
    H,
    G1,
    G2,
    I(usize),
    Ibar(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstantKey {
    pub subject: Subject,
    pub kind: LimitKind,
    pub point: LimitPoint,
}

impl ConstantKey {
    pub fn new(subject: Subject, kind: LimitKind, point: LimitPoint) -> Self {
        ConstantKey {
            subject,
            kind,
            point,
        }
    }

    /// `g1_0` for a liminf, `g1^q` for a limsup, `Ibar_inf(2)` for an
    /// impulse constant.
    pub fn name(&self) -> String {
        let (base, index) = match self.subject {
            Subject::F => ("f", None),
            Subject::H => ("h", None),
            Subject::G1 => ("g1", None),
            Subject::G2 => ("g2", None),
            Subject::I(k) => ("I", Some(k)),
            Subject::Ibar(k) => ("Ibar", Some(k)),
        };
        let sep = match self.kind {
            LimitKind::Liminf => "_",
            LimitKind::Limsup => "^",
        };
        let index = index.map_or(String::new(), |k| format!("({k})"));
        format!("{base}{sep}{}{index}", self.point.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Provenance {
    UserSupplied,
    Sampled {
        /// `[a, b]` for f-type constants.
        window: Option<(f64, f64)>,
        /// Last two terms of the ratio sequence.
        last_terms: (f64, f64),
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    /// `None` when the ratio could not be evaluated.
    pub value: Option<ExtendedReal>,
    pub provenance: Provenance,
    /// The last two sequence terms differ by more than the tolerance.
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEntry {
    pub name: String,
    pub key: ConstantKey,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticSampling {
    pub t_points: usize,
    /// Directions `(x, y) = z·(λ, ±(1 − λ))`.
    pub lambdas: Vec<f64>,
    /// Sequence `10^{−j}` and `10^{j}` for `j = 1..=decades`.
    pub decades: u32,
    /// Sequence `q·(1 ± 10^{−j})` for `j = 1..=q_steps`.
    pub q_steps: u32,
    pub infinity_threshold: f64,
    pub zero_threshold: f64,
    pub unreliable_rel: f64,
}

impl Default for AsymptoticSampling {
    fn default() -> Self {
        AsymptoticSampling {
            t_points: 9,
            lambdas: vec![1.0, 0.75, 0.5, 0.25],
            decades: 12,
            q_steps: 8,
            infinity_threshold: 1e9,
            zero_threshold: 1e-9,
            unreliable_rel: 0.05,
        }
    }
}

impl AsymptoticSampling {
    fn validate(&self) -> Result<(), CertifyError> {
        let bad = |m: &str| Err(CertifyError::InvalidSampling(m.into()));
        if self.t_points < 1 || self.decades < 2 || self.q_steps < 2 {
            return bad("need t_points >= 1, decades >= 2 and q_steps >= 2");
        }
        if self.lambdas.is_empty()
            || self
                .lambdas
                .iter()
                .any(|l| !(0.0..=1.0).contains(l) || *l == 0.0)
        {
            return bad("lambdas must lie in (0, 1]");
        }
        Ok(())
    }

    fn levels(&self, point: LimitPoint, q: f64) -> Vec<Vec<f64>> {
        match point {
            LimitPoint::Zero => (1..=self.decades)
                .map(|j| vec![10f64.powi(-(j as i32))])
                .collect(),
            LimitPoint::Infinity => (1..=self.decades)
                .map(|j| vec![10f64.powi(j as i32)])
                .collect(),
            LimitPoint::Q => (1..=self.q_steps)
                .map(|j| {
                    let e = 10f64.powi(-(j as i32));
                    vec![q * (1.0 - e), q * (1.0 + e)]
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub window: (f64, f64),
    pub q: f64,
    pub entries: Vec<ConstantEntry>,
}

impl AsymptoticConstants {
    pub fn get(&self, key: ConstantKey) -> Option<&Estimate> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| &e.estimate)
    }

    pub fn by_name(&self, name: &str) -> Option<&Estimate> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &e.estimate)
    }

    pub fn value(&self, key: ConstantKey) -> Option<ExtendedReal> {
        self.get(key).and_then(|e| e.value)
    }

    /// Replace the named constant by a fixed value.
    pub fn set(&mut self, name: &str, value: ExtendedReal) -> Result<(), CertifyError> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.name == name)
            .ok_or_else(|| CertifyError::UnknownConstant(name.to_string()))?;
        entry.estimate = Estimate {
            value: Some(value),
            provenance: Provenance::UserSupplied,
            unreliable: false,
        };
        Ok(())
    }
}

fn finalize(
    seq: &[f64],
    point: LimitPoint,
    window: Option<(f64, f64)>,
    cfg: &AsymptoticSampling,
) -> Estimate {
    let n = seq.len();
    let (prev, last) = (seq[n - 2], seq[n - 1]);
    let provenance = Provenance::Sampled {
        window,
        last_terms: (prev, last),
    };
    if last.is_nan() {
        return Estimate {
            value: None,
            provenance,
            unreliable: true,
        };
    }
    if last > cfg.infinity_threshold {
        return Estimate {
            value: Some(ExtendedReal::PosInfinity),
            provenance,
            unreliable: false,
        };
    }
    if point != LimitPoint::Q && last.abs() < cfg.zero_threshold {
        return Estimate {
            value: Some(ExtendedReal::ZERO),
            provenance,
            unreliable: false,
        };
    }
    let scale = last.abs().max(prev.abs());
    Estimate {
        value: Some(ExtendedReal::Finite(last)),
        provenance,
        unreliable: !((last - prev).abs() <= cfg.unreliable_rel * scale),
    }
}

fn combine(values: impl Iterator<Item = f64>, kind: LimitKind) -> f64 {
    let mut out = f64::NAN;
    for v in values.filter(|v| !v.is_nan()) {
        out = match kind {
            _ if out.is_nan() => v,
            LimitKind::Liminf => out.min(v),
            LimitKind::Limsup => out.max(v),
        };
    }
    out
}

fn estimate_scalar(
    g: &(dyn Fn(f64) -> f64 + Sync + Send),
    kind: LimitKind,
    point: LimitPoint,
    q: f64,
    cfg: &AsymptoticSampling,
) -> Estimate {
    let seq: Vec<f64> = cfg
        .levels(point, q)
        .iter()
        .map(|xs| combine(xs.iter().map(|&x| g(x) / x), kind))
        .collect();
    finalize(&seq, point, None, cfg)
}

/// Ratio `F(x, y)/(|x| + |y|)` over all directions, and over `ts` when
/// `ts` is non-empty.
fn estimate_planar(
    ratio: &dyn Fn(f64, f64, f64) -> f64,
    ts: &[f64],
    kind: LimitKind,
    point: LimitPoint,
    q: f64,
    window: Option<(f64, f64)>,
    cfg: &AsymptoticSampling,
) -> Estimate {
    let ts: &[f64] = if ts.is_empty() { &[f64::NAN] } else { ts };
    let seq: Vec<f64> = cfg
        .levels(point, q)
        .iter()
        .map(|zs| {
            let mut vals = Vec::new();
            for &z in zs {
                for &t in ts {
                    for &l in &cfg.lambdas {
                        let x = z * l;
                        let y = z * (1.0 - l);
                        vals.push(ratio(t, x, y) / z);
                        if y != 0.0 {
                            vals.push(ratio(t, x, -y) / z);
                        }
                    }
                }
            }
            combine(vals.into_iter(), kind)
        })
        .collect();
    finalize(&seq, point, window, cfg)
}

/// Estimate every asymptotic constant of `spec` for the window `[a, b]`
/// and level `q`, then apply `overrides` (by constant name).
pub fn estimate_asymptotics(
    spec: &ProblemSpec,
    window: (f64, f64),
    q: f64,
    cfg: &AsymptoticSampling,
    overrides: &BTreeMap<String, ExtendedReal>,
) -> Result<AsymptoticConstants, CertifyError> {
    let (a, b) = window;
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(CertifyError::InvalidWindow { a, b });
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(CertifyError::InvalidLevel(q));
    }
    cfg.validate()?;
    let points = [LimitPoint::Zero, LimitPoint::Q, LimitPoint::Infinity];
    let ts: Vec<f64> = if cfg.t_points == 1 {
        vec![0.5 * (a + b)]
    } else {
        (0..cfg.t_points)
            .map(|i| a + (b - a) * i as f64 / (cfg.t_points - 1) as f64)
            .collect()
    };
    let mut entries = Vec::new();
    let mut push = |key: ConstantKey, estimate: Estimate| {
        entries.push(ConstantEntry {
            name: key.name(),
            key,
            estimate,
        })
    };

    let f = |t: f64, x: f64, y: f64| (spec.f)(t, x, y);
    for point in points {
        let est = estimate_planar(&f, &ts, LimitKind::Liminf, point, q, Some(window), cfg);
        push(ConstantKey::new(Subject::F, LimitKind::Liminf, point), est);
    }
    let h = |_: f64, x: f64, y: f64| (spec.h)(x, y);
    for point in points {
        let est = estimate_planar(&h, &[], LimitKind::Limsup, point, q, None, cfg);
        push(ConstantKey::new(Subject::H, LimitKind::Limsup, point), est);
    }
    let mut scalars: Vec<(Subject, &(dyn Fn(f64) -> f64 + Send + Sync))> =
        vec![(Subject::G1, &*spec.g1), (Subject::G2, &*spec.g2)];
    for (i, imp) in spec.impulses.iter().enumerate() {
        scalars.push((Subject::I(i + 1), &*imp.jump));
        scalars.push((Subject::Ibar(i + 1), &*imp.slope_jump));
    }
    for (subject, g) in scalars {
        for kind in [LimitKind::Liminf, LimitKind::Limsup] {
            for point in points {
                push(
                    ConstantKey::new(subject, kind, point),
                    estimate_scalar(g, kind, point, q, cfg),
                );
            }
        }
    }

    let mut constants = AsymptoticConstants { window, q, entries };
    for (name, &value) in overrides {
        constants.set(name, value)?;
    }
    Ok(constants)
}

/// Comparison of an estimate with an externally stated value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub name: String,
    pub reference: ExtendedReal,
    pub estimate: Option<ExtendedReal>,
    pub agrees: bool,
}

/// Compare estimates with reference values; finite values agree when
/// their relative difference is at most `rel_tol`.
pub fn compare_with_reference(
    constants: &AsymptoticConstants,
    references: &BTreeMap<String, ExtendedReal>,
    rel_tol: f64,
) -> Result<Vec<Discrepancy>, CertifyError> {
    references
        .iter()
        .map(|(name, &reference)| {
            let est = constants
                .by_name(name)
                .ok_or_else(|| CertifyError::UnknownConstant(name.clone()))?;
            let agrees = match (reference, est.value) {
                (ExtendedReal::PosInfinity, Some(ExtendedReal::PosInfinity)) => true,
                (ExtendedReal::Finite(r), Some(ExtendedReal::Finite(e))) => {
                    (r - e).abs() <= rel_tol * r.abs().max(e.abs()).max(f64::MIN_POSITIVE)
                }
                _ => false,
            };
            Ok(Discrepancy {
                name: name.clone(),
                reference,
                estimate: est.value,
                agrees,
            })
        })
        .collect()
}

/// A number entering a condition, or the reason it is missing.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Quantity {
    Value { value: ExtendedReal },
    Divergent { location: Option<f64> },
    Unavailable { reason: String },
}

impl Quantity {
    fn finite(v: f64) -> Self {
        Quantity::Value {
            value: ExtendedReal::Finite(v),
        }
    }

    pub fn value(&self) -> Option<ExtendedReal> {
        match self {
            Quantity::Value { value } => Some(*value),
            _ => None,
        }
    }

    fn from_kernel(r: Result<f64, KernelError>) -> Self {
        match r {
            Ok(v) => Quantity::finite(v),
            Err(e) => Quantity::Unavailable {
                reason: e.to_string(),
            },
        }
    }

    fn from_integral(r: Result<IntegralEstimate, QuadratureError>) -> Self {
        match r {
            Ok(est) if est.converged && est.value.is_finite() => Quantity::finite(est.value),
            Ok(est) => Quantity::Divergent {
                location: est.divergence_hint,
            },
            Err(e) => Quantity::Unavailable {
                reason: e.to_string(),
            },
        }
    }

    fn from_estimate(est: Option<&Estimate>) -> Self {
        match est.and_then(|e| e.value) {
            Some(value) => Quantity::Value { value },
            None => Quantity::Unavailable {
                reason: "constant could not be estimated".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factor {
    pub name: String,
    #[serde(flatten)]
    pub quantity: Quantity,
}

/// Product of its factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub factors: Vec<Factor>,
    pub value: Option<ExtendedReal>,
}

/// Kernel- and data-dependent ingredients shared by all conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ingredients {
    pub window: (f64, f64),
    pub w: Quantity,
    pub c: Quantity,
    pub sup_reciprocal_weight: Quantity,
    /// `∫ₐᵇ G(s,s) p(s) ds`
    pub green_weight_window: Quantity,
    /// `∫ₐᵇ ψ`
    pub psi_window: Quantity,
    /// `∫₀^∞ G(s,s) p(s) k(s) ds`
    pub green_weight_k: Quantity,
    /// `∫₀^∞ ψ`
    pub psi_half_line: Quantity,
    /// `min{φ(∞), θ(0)}/D`
    pub min_boundary: f64,
    /// `max{φ(0), θ(∞)}/D`
    pub max_boundary: f64,
    pub impulses: Vec<ImpulseFactors>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpulseFactors {
    pub time: f64,
    /// `G(t_k, t_k)`
    pub green_diagonal: Quantity,
    /// `max{a1 φ(t_k), a2 θ(t_k)}/D`
    pub flux_max: Quantity,
    /// `min{a1 φ(t_k), a2 θ(t_k)}/D`
    pub flux_min: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyConfig {
    pub window: (f64, f64),
    pub q: f64,
    pub quadrature: QuadratureConfig,
    pub sampling: AsymptoticSampling,
    /// Grid end for `sup 1/p`; `None` means `max(b, t_n) + 10`.
    pub sup_horizon: Option<f64>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            window: (1.0, 2.0),
            q: 10.0,
            quadrature: QuadratureConfig {
                atol: 1e-12,
                rtol: 1e-10,
                ..QuadratureConfig::default()
            },
            sampling: AsymptoticSampling::default(),
            sup_horizon: None,
        }
    }
}

impl Ingredients {
    pub fn compute(
        spec: &ProblemSpec,
        kernel: &GreenKernel,
        cfg: &CertifyConfig,
    ) -> Result<Self, CertifyError> {
        let (a, b) = cfg.window;
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(CertifyError::InvalidWindow { a, b });
        }
        let quad = &cfg.quadrature;
        let times = spec.impulses.times();
        let diag = |s: f64| match kernel.green(s, s) {
            Ok(g) => g * kernel.weight(s),
            Err(_) => f64::NAN,
        };
        let diag_k = |s: f64| match (spec.k)(s) {
            // p may overflow where k has underflowed
            0.0 => 0.0,
            k => match kernel.green(s, s) {
                Ok(g) => g * kernel.weight(s) * k,
                Err(_) => f64::NAN,
            },
        };
        let inside: Vec<f64> = times.iter().copied().filter(|&t| t > a && t < b).collect();
        let window_integral = |f: &dyn Fn(f64) -> f64| {
            let mut total = IntegralEstimate::zero();
            let mut lo = a;
            for &hi in inside.iter().chain(std::iter::once(&b)) {
                let est = quadrature::integrate_interval(f, lo, hi, quad)?;
                total.value += est.value;
                total.error_estimate += est.error_estimate;
                total.panels_used += est.panels_used;
                if !est.converged {
                    total.converged = false;
                    total.divergence_hint = est.divergence_hint;
                }
                lo = hi;
            }
            Ok(total)
        };
        let horizon = cfg
            .sup_horizon
            .unwrap_or_else(|| b.max(times.last().copied().unwrap_or(0.0)) + 10.0);
        let coeffs = kernel.coefficients();
        let d = kernel.coupling_d();
        let impulses = times
            .iter()
            .map(|&t| ImpulseFactors {
                time: t,
                green_diagonal: Quantity::from_kernel(kernel.green(t, t)),
                flux_max: Quantity::from_kernel(kernel.diagonal_flux_max(t)),
                flux_min: Quantity::from_kernel(kernel.diagonal_flux_min(t)),
            })
            .collect();
        Ok(Ingredients {
            window: cfg.window,
            w: Quantity::from_kernel(kernel.constant_w(a, b)),
            c: Quantity::from_kernel(kernel.constant_c()),
            sup_reciprocal_weight: Quantity::finite(kernel.sup_reciprocal_weight(horizon)),
            green_weight_window: Quantity::from_integral(window_integral(&diag)),
            psi_window: Quantity::from_integral(window_integral(&*spec.psi)),
            green_weight_k: Quantity::from_integral(quadrature::integrate_half_line(
                diag_k, &times, quad,
            )),
            psi_half_line: Quantity::from_integral(quadrature::integrate_half_line(
                &*spec.psi, &times, quad,
            )),
            min_boundary: coeffs.b2.min(coeffs.b1) / d,
            max_boundary: kernel.phi_at_zero().max(kernel.theta_at_infinity()) / d,
            impulses,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionId {
    #[serde(rename = "A1-small")]
    A1Small,
    #[serde(rename = "A1-large")]
    A1Large,
    #[serde(rename = "A2")]
    A2,
    #[serde(rename = "A3-small")]
    A3Small,
    #[serde(rename = "A3-large")]
    A3Large,
    #[serde(rename = "A4")]
    A4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threshold {
    /// Pass iff LHS > 1.
    GreaterThanOne,
    /// Pass iff LHS < 1.
    LessThanOne,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    Indeterminate { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEntry {
    pub condition: ConditionId,
    pub threshold: Threshold,
    /// LHS = prefactor · Σ terms.
    pub prefactor: Factor,
    pub terms: Vec<Term>,
    pub lhs: Option<ExtendedReal>,
    #[serde(flatten)]
    pub status: ConditionStatus,
    /// LHS with the smaller one-sided diagonal flux factor, for the
    /// conditions where that choice makes passing harder.
    pub lhs_min_flux: Option<ExtendedReal>,
}

impl ConditionEntry {
    pub fn passed(&self) -> bool {
        self.status == ConditionStatus::Pass
    }
}

fn product(factors: &[Factor]) -> Result<ExtendedReal, String> {
    let mut acc = ExtendedReal::Finite(1.0);
    for f in factors {
        let v = match &f.quantity {
            Quantity::Value { value } => *value,
            Quantity::Divergent { location } => {
                return Err(match location {
                    Some(s) => format!("{} diverges (quadrature failed near s = {s:.6})", f.name),
                    None => format!("{} diverges", f.name),
                })
            }
            Quantity::Unavailable { reason } => {
                return Err(format!("{} unavailable: {reason}", f.name))
            }
        };
        acc = acc.mul(v).ok_or_else(|| format!("∞·0 in {}", f.name))?;
    }
    Ok(acc)
}

/// Factors of `∞·0` are checked over the whole product, not pairwise in
/// order, so `0·∞·2` is indeterminate too.
fn term(name: impl Into<String>, factors: Vec<Factor>) -> (Term, Result<ExtendedReal, String>) {
    let name = name.into();
    let has_zero = factors
        .iter()
        .any(|f| f.quantity.value() == Some(ExtendedReal::ZERO));
    let has_inf = factors
        .iter()
        .any(|f| f.quantity.value() == Some(ExtendedReal::PosInfinity));
    let value = if has_zero && has_inf {
        Err(format!("∞·0 in term {name}"))
    } else {
        product(&factors).map_err(|e| format!("{e} (term {name})"))
    };
    (
        Term {
            name,
            factors,
            value: value.as_ref().ok().copied(),
        },
        value,
    )
}

fn factor(name: impl Into<String>, quantity: Quantity) -> Factor {
    Factor {
        name: name.into(),
        quantity,
    }
}

#[derive(Clone, Copy)]
struct Shape {
    id: ConditionId,
    threshold: Threshold,
    /// Kind and point of the g, I and Ī constants.
    kind: LimitKind,
    point: LimitPoint,
}

fn evaluate(
    shape: Shape,
    ing: &Ingredients,
    constants: &AsymptoticConstants,
    min_flux: bool,
) -> (Factor, Vec<Term>, Result<ExtendedReal, String>) {
    let Shape {
        threshold,
        kind,
        point,
        ..
    } = shape;
    let windowed = threshold == Threshold::GreaterThanOne;
    let constant = |subject: Subject| {
        let key = ConstantKey::new(subject, kind, point);
        factor(key.name(), Quantity::from_estimate(constants.get(key)))
    };

    let prefactor = if windowed {
        factor("w", ing.w.clone())
    } else {
        let q = match (ing.c.value(), ing.sup_reciprocal_weight.value()) {
            (Some(c), Some(s)) => match c.mul(s) {
                Some(cs) => Quantity::Value {
                    value: ExtendedReal::Finite(1.0).add(cs),
                },
                None => Quantity::Unavailable {
                    reason: "∞·0 in c·sup 1/p".into(),
                },
            },
            _ => Quantity::Unavailable {
                reason: "c or sup 1/p unavailable".into(),
            },
        };
        factor("1 + c·sup 1/p", q)
    };

    let mut terms = Vec::new();
    let mut results = Vec::new();
    let mut add = |t: (Term, Result<ExtendedReal, String>)| {
        results.push(t.1.clone());
        terms.push(t.0);
    };
    let (main, integral, boundary, psi) = if windowed {
        (
            ConstantKey::new(Subject::F, LimitKind::Liminf, point),
            factor("∫_a^b G(s,s)p(s)ds", ing.green_weight_window.clone()),
            factor("min{φ(∞),θ(0)}/D", Quantity::finite(ing.min_boundary)),
            factor("∫_a^b ψ", ing.psi_window.clone()),
        )
    } else {
        (
            ConstantKey::new(Subject::H, LimitKind::Limsup, point),
            factor("∫_0^∞ G(s,s)p(s)k(s)ds", ing.green_weight_k.clone()),
            factor("max{φ(0),θ(∞)}/D", Quantity::finite(ing.max_boundary)),
            factor("∫_0^∞ ψ", ing.psi_half_line.clone()),
        )
    };
    let main_factor = factor(main.name(), Quantity::from_estimate(constants.get(main)));
    add(term(
        format!("{} · {}", main_factor.name, integral.name),
        vec![main_factor, integral],
    ));
    for g in [Subject::G1, Subject::G2] {
        let gf = constant(g);
        add(term(
            format!("{} · {} · {}", boundary.name, gf.name, psi.name),
            vec![boundary.clone(), gf, psi.clone()],
        ));
    }
    for (i, imp) in ing.impulses.iter().enumerate() {
        let k = i + 1;
        let ib = constant(Subject::Ibar(k));
        add(term(
            format!("G(t_{k},t_{k}) · {}", ib.name),
            vec![
                factor(format!("G(t_{k},t_{k})"), imp.green_diagonal.clone()),
                ib,
            ],
        ));
        let i_c = constant(Subject::I(k));
        let flux = if min_flux {
            &imp.flux_min
        } else {
            &imp.flux_max
        };
        add(term(
            format!("P_{k} · {}", i_c.name),
            vec![factor(format!("P_{k}"), flux.clone()), i_c],
        ));
    }

    let mut sum = Ok(ExtendedReal::ZERO);
    for r in results {
        sum = match (sum, r) {
            (Ok(s), Ok(v)) => Ok(s.add(v)),
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
    }
    let lhs = sum.and_then(|s| {
        let pre = product(std::slice::from_ref(&prefactor))?;
        pre.mul(s)
            .ok_or_else(|| format!("∞·0 in {} · Σ", prefactor.name))
    });
    (prefactor, terms, lhs)
}

fn condition(shape: Shape, ing: &Ingredients, constants: &AsymptoticConstants) -> ConditionEntry {
    let report_min = shape.threshold == Threshold::GreaterThanOne;
    let lhs_min_flux = if report_min {
        evaluate(shape, ing, constants, true).2.ok()
    } else {
        None
    };
    let (prefactor, terms, lhs) = evaluate(shape, ing, constants, false);
    let status = match &lhs {
        Err(reason) => ConditionStatus::Indeterminate {
            reason: reason.clone(),
        },
        Ok(v) => {
            let pass = match shape.threshold {
                Threshold::GreaterThanOne => v.gt(1.0),
                Threshold::LessThanOne => v.lt(1.0),
            };
            if pass {
                ConditionStatus::Pass
            } else {
                ConditionStatus::Fail
            }
        }
    };
    ConditionEntry {
        condition: shape.id,
        threshold: shape.threshold,
        prefactor,
        terms,
        lhs: lhs.ok(),
        status,
        lhs_min_flux,
    }
}

fn shape_point(id: ConditionId) -> LimitPoint {
    match id {
        ConditionId::A1Small | ConditionId::A3Small => LimitPoint::Zero,
        ConditionId::A1Large | ConditionId::A3Large => LimitPoint::Infinity,
        ConditionId::A2 | ConditionId::A4 => LimitPoint::Q,
    }
}

fn shape(id: ConditionId) -> Shape {
    let (threshold, kind) = match id {
        ConditionId::A1Small | ConditionId::A1Large | ConditionId::A4 => {
            (Threshold::GreaterThanOne, LimitKind::Liminf)
        }
        _ => (Threshold::LessThanOne, LimitKind::Limsup),
    };
    Shape {
        id,
        threshold,
        kind,
        point: shape_point(id),
    }
}

/// Small- and large-argument inequalities of (A1).
pub fn check_a1(ing: &Ingredients, constants: &AsymptoticConstants) -> Vec<ConditionEntry> {
    [ConditionId::A1Small, ConditionId::A1Large]
        .into_iter()
        .map(|id| condition(shape(id), ing, constants))
        .collect()
}

pub fn check_a2(ing: &Ingredients, constants: &AsymptoticConstants) -> ConditionEntry {
    condition(shape(ConditionId::A2), ing, constants)
}

/// Both inequalities of (A3), then (A4).
pub fn check_a3_a4(ing: &Ingredients, constants: &AsymptoticConstants) -> Vec<ConditionEntry> {
    [ConditionId::A3Small, ConditionId::A3Large, ConditionId::A4]
        .into_iter()
        .map(|id| condition(shape(id), ing, constants))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub window: (f64, f64),
    pub q: f64,
    pub ingredients: Ingredients,
    pub conditions: Vec<ConditionEntry>,
    /// (A1) and (A2) both pass.
    pub a1_a2_hold: bool,
    /// (A3) and (A4) both pass.
    pub a3_a4_hold: bool,
}

impl ConditionReport {
    pub fn get(&self, id: ConditionId) -> &ConditionEntry {
        self.conditions
            .iter()
            .find(|c| c.condition == id)
            .expect("every condition is reported")
    }
}

/// Evaluate all conditions for `spec` with the given constants.
pub fn certify(
    spec: &ProblemSpec,
    kernel: &GreenKernel,
    constants: &AsymptoticConstants,
    cfg: &CertifyConfig,
) -> Result<ConditionReport, CertifyError> {
    let ing = Ingredients::compute(spec, kernel, cfg)?;
    let mut conditions = check_a1(&ing, constants);
    conditions.push(check_a2(&ing, constants));
    conditions.extend(check_a3_a4(&ing, constants));
    let pass = |ids: &[ConditionId]| {
        ids.iter()
            .all(|id| conditions.iter().any(|c| c.condition == *id && c.passed()))
    };
    let a1_a2_hold = pass(&[ConditionId::A1Small, ConditionId::A1Large, ConditionId::A2]);
    let a3_a4_hold = pass(&[ConditionId::A3Small, ConditionId::A3Large, ConditionId::A4]);
    Ok(ConditionReport {
        window: cfg.window,
        q: cfg.q,
        ingredients: ing,
        conditions,
        a1_a2_hold,
        a3_a4_hold,
    })
}
