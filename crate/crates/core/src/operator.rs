//! The fixed-point operator `T` and the residuals of the boundary value
//! problem.
//!
//! With `L(t) = ∫₀ᵗ θ p f ds` and `R(t) = ∫ₜ^∞ φ p f ds`, the kernel term is
//! `∫ G(t,s) p(s) f ds = (φ(t)L(t) + θ(t)R(t)) / D`. Both are accumulated
//! from per-gap integrals between consecutive mesh nodes, so every node,
//! and in particular every impulse point, is a quadrature breakpoint.
//!
//! The five terms of `Tx(t)` are
//!
//! ```text
//! kernel    (φ(t)L(t) + θ(t)R(t)) / D
//! g1        φ(t)/D · ∫ g1(x) ψ
//! g2        θ(t)/D · ∫ g2(x) ψ
//! slope     Σ G(t, t_k) · s_k · Ī_k(x(t_k))
//! jump      Σ p(t_k) ∂G/∂s(t, t_k) · I_k(x(t_k))
//! ```
//!
//! where `s_k` depends on the [`ImpulseConvention`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{GreenKernel, KernelError, SlCoefficients};
use crate::problem::{PiecewiseC1Function, ProblemError, ProblemSpec, ScalarFn};
use crate::quadrature::{self, IntegralEstimate, QuadratureConfig, QuadratureError};
use crate::Side;

/// Scaling of the `Ī_k` summand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpulseConvention {
    /// `Σ G(t, t_k)·Ī_k`. Gives `Δ(Tx)' = −Ī_k / p(t_k)`.
    AsPrinted,
    /// `Σ p(t_k)·G(t, t_k)·Ī_k`. Gives `Δ(Tx)' = −Ī_k`.
    #[default]
    FluxScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub quadrature: QuadratureConfig,
    pub convention: ImpulseConvention,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            quadrature: QuadratureConfig {
                atol: 1e-13,
                rtol: 1e-11,
                ..QuadratureConfig::default()
            },
            convention: ImpulseConvention::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("{term}: quadrature did not converge{}", location.map_or(String::new(), |s| format!(" near s = {s}")))]
    Divergent {
        term: &'static str,
        location: Option<f64>,
    },
    #[error("{term}: non-finite value at t = {t}")]
    NonFinite { term: &'static str, t: f64 },
    #[error("probe t = {t} is within {min_distance} of the breakpoint {breakpoint}")]
    ProbeTooClose {
        t: f64,
        breakpoint: f64,
        min_distance: f64,
    },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Quadrature(QuadratureError),
}

pub const TERM_KERNEL: &str = "kernel integral";
pub const TERM_G1: &str = "g1 boundary integral";
pub const TERM_G2: &str = "g2 boundary integral";
pub const TERM_IMPULSE: &str = "impulse map";

fn lift(
    term: &'static str,
    r: Result<IntegralEstimate, QuadratureError>,
) -> Result<IntegralEstimate, OperatorError> {
    match r {
        Ok(est) if est.converged && est.value.is_finite() => Ok(est),
        Ok(est) => Err(OperatorError::Divergent {
            term,
            location: est.divergence_hint,
        }),
        Err(QuadratureError::NonFinite { abscissa }) => {
            Err(OperatorError::NonFinite { term, t: abscissa })
        }
        Err(e) => Err(OperatorError::Quadrature(e)),
    }
}

/// In the tail an infinite integrand means `p·f` overflowed on the way to a
/// non-integrable tail.
fn lift_tail(
    r: Result<IntegralEstimate, QuadratureError>,
) -> Result<IntegralEstimate, OperatorError> {
    match lift(TERM_KERNEL, r) {
        Err(OperatorError::NonFinite { term, t }) => Err(OperatorError::Divergent {
            term,
            location: Some(t),
        }),
        other => other,
    }
}

/// The five summands of `Tx` and of `(Tx)'` at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermBreakdown {
    pub t: f64,
    /// Set at impulse points only.
    pub side: Option<Side>,
    pub kernel: f64,
    pub g1: f64,
    pub g2: f64,
    pub slope_impulses: f64,
    pub jump_impulses: f64,
    pub d_kernel: f64,
    pub d_g1: f64,
    pub d_g2: f64,
    pub d_slope_impulses: f64,
    pub d_jump_impulses: f64,
}

impl TermBreakdown {
    pub fn value(&self) -> f64 {
        self.kernel + self.g1 + self.g2 + self.slope_impulses + self.jump_impulses
    }

    pub fn derivative(&self) -> f64 {
        self.d_kernel + self.d_g1 + self.d_g2 + self.d_slope_impulses + self.d_jump_impulses
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorDiagnostics {
    /// `∫ g1(x) ψ` and `∫ g2(x) ψ`.
    pub g1_integral: f64,
    pub g2_integral: f64,
    /// `L(∞) = ∫₀^∞ θ p f`.
    pub kernel_total: f64,
    /// Sum of all quadrature error estimates.
    pub error_estimate: f64,
    pub panels_used: usize,
}

#[derive(Debug, Clone)]
pub struct OperatorResult {
    pub tx: PiecewiseC1Function,
    /// One entry per mesh node, laid out like the node data of `tx`.
    pub terms: Vec<TermBreakdown>,
    pub diagnostics: OperatorDiagnostics,
}

struct ImpulseData {
    time: f64,
    jump: f64,
    /// `s_k · Ī_k(x(t_k))`
    slope: f64,
}

fn impulse_data(
    spec: &ProblemSpec,
    kernel: &GreenKernel,
    x: &PiecewiseC1Function,
    convention: ImpulseConvention,
) -> Result<Vec<ImpulseData>, OperatorError> {
    spec.impulses
        .iter()
        .map(|imp| {
            let xk = x.value(imp.time)?;
            let jump = (imp.jump)(xk);
            let bar = (imp.slope_jump)(xk);
            let scale = match convention {
                ImpulseConvention::AsPrinted => 1.0,
                ImpulseConvention::FluxScaled => kernel.weight(imp.time),
            };
            let slope = scale * bar;
            if !(jump.is_finite() && slope.is_finite()) {
                return Err(OperatorError::NonFinite {
                    term: TERM_IMPULSE,
                    t: imp.time,
                });
            }
            Ok(ImpulseData {
                time: imp.time,
                jump,
                slope,
            })
        })
        .collect()
}

/// Integrand `p(s)·f(s, x(s), x'(s))`.
fn forcing<'a>(
    spec: &'a ProblemSpec,
    kernel: &'a GreenKernel,
    x: &'a PiecewiseC1Function,
) -> impl Fn(f64) -> f64 + Sync + 'a {
    move |s| match x.eval(s, Side::Right) {
        Ok((v, d)) => match (spec.f)(s, v, d) {
            // p may overflow far out in the tail where f has underflowed
            0.0 => 0.0,
            f => kernel.weight(s) * f,
        },
        Err(_) => f64::NAN,
    }
}

fn boundary_integrals(
    spec: &ProblemSpec,
    x: &PiecewiseC1Function,
    quad: &QuadratureConfig,
) -> Result<(IntegralEstimate, IntegralEstimate), OperatorError> {
    let mesh = x.mesh();
    let cfg = QuadratureConfig {
        tail_split: Some(mesh.horizon()),
        ..quad.clone()
    };
    let integrand = |gfun: &ScalarFn, s: f64| match x.eval(s, Side::Right) {
        Ok((v, _)) => gfun(v) * (spec.psi)(s),
        Err(_) => f64::NAN,
    };
    let bps = mesh.breakpoints();
    let c1 = lift(
        TERM_G1,
        quadrature::integrate_half_line(|s| integrand(&spec.g1, s), bps, &cfg),
    )?;
    let c2 = lift(
        TERM_G2,
        quadrature::integrate_half_line(|s| integrand(&spec.g2, s), bps, &cfg),
    )?;
    Ok((c1, c2))
}

/// Evaluate `Tx` at every node of `x`'s mesh, including both one-sided
/// limits at the impulse points.
pub fn apply_t(
    spec: &ProblemSpec,
    kernel: &GreenKernel,
    x: &PiecewiseC1Function,
    cfg: &OperatorConfig,
) -> Result<OperatorResult, OperatorError> {
    let mesh = x.mesh().clone();
    let n = mesh.nodes_per_panel();
    let panels = mesh.panels().len();
    let total = mesh.node_count();
    let SlCoefficients { a1, a2, b2, .. } = kernel.coefficients();
    let d = kernel.coupling_d();
    let quad = &cfg.quadrature;

    let pf = forcing(spec, kernel, x);
    let theta_pf = |s: f64| match kernel.theta(s) {
        Ok(th) => th * pf(s),
        Err(_) => f64::NAN,
    };
    let phi_pf = |s: f64| match kernel.phi(s) {
        Ok(ph) => ph * pf(s),
        Err(_) => f64::NAN,
    };

    // Gap (p, j) runs from node j to node j + 1 of panel p.
    let gaps: Vec<(usize, usize)> = (0..panels)
        .flat_map(|p| (0..n - 1).map(move |j| (p, j)))
        .collect();
    let gap_integrals: Vec<(IntegralEstimate, IntegralEstimate)> = gaps
        .par_iter()
        .map(|&(p, j)| {
            let (lo, hi) = (mesh.node(p, j), mesh.node(p, j + 1));
            let l = lift(
                TERM_KERNEL,
                quadrature::integrate_interval(theta_pf, lo, hi, quad),
            )?;
            let r = lift(
                TERM_KERNEL,
                quadrature::integrate_interval(phi_pf, lo, hi, quad),
            )?;
            Ok((l, r))
        })
        .collect::<Result<_, OperatorError>>()?;
    let horizon = mesh.horizon();
    let tail_l = lift_tail(quadrature::integrate_tail(theta_pf, horizon, quad))?;
    let tail_r = lift_tail(quadrature::integrate_tail(phi_pf, horizon, quad))?;

    // Prefix sums for L, suffix sums for R, both indexed by node.
    let gap_index = |p: usize, j: usize| p * (n - 1) + j;
    let mut left = vec![0.0; total];
    let mut acc = 0.0;
    for p in 0..panels {
        for j in 0..n {
            if j > 0 {
                acc += gap_integrals[gap_index(p, j - 1)].0.value;
            }
            left[p * n + j] = acc;
        }
    }
    let kernel_total = acc + tail_l.value;
    let mut right = vec![0.0; total];
    let mut acc = tail_r.value;
    for p in (0..panels).rev() {
        for j in (0..n).rev() {
            if j + 1 < n {
                acc += gap_integrals[gap_index(p, j)].1.value;
            }
            right[p * n + j] = acc;
        }
    }

    let (c1, c2) = boundary_integrals(spec, x, quad)?;
    let impulses = impulse_data(spec, kernel, x, cfg.convention)?;

    let mut terms = Vec::with_capacity(total);
    for p in 0..panels {
        for j in 0..n {
            let t = mesh.node(p, j);
            let side = mesh.node_side(j);
            let idx = p * n + j;
            let theta = kernel.theta(t)?;
            let phi = kernel.phi(t)?;
            let (dtheta, dphi) = (kernel.theta_prime(t), kernel.phi_prime(t));
            let mut slope = 0.0;
            let mut d_slope = 0.0;
            let mut jump = 0.0;
            let mut d_jump = 0.0;
            let pt = kernel.weight(t);
            for imp in &impulses {
                slope += kernel.green(t, imp.time)? * imp.slope;
                d_slope += kernel.green_dt(t, imp.time, side)? * imp.slope;
                let after = imp.time < t || (imp.time == t && side == Side::Right);
                let flux = if after { a1 * phi / d } else { -a2 * theta / d };
                jump += flux * imp.jump;
                d_jump += -a1 * a2 / (d * pt) * imp.jump;
            }
            let entry = TermBreakdown {
                t,
                side: mesh.is_breakpoint(t).then_some(side),
                kernel: (phi * left[idx] + theta * right[idx]) / d,
                g1: phi * c1.value / d,
                g2: theta * c2.value / d,
                slope_impulses: slope,
                jump_impulses: jump,
                d_kernel: (dphi * left[idx] + dtheta * right[idx]) / d,
                d_g1: dphi * c1.value / d,
                d_g2: dtheta * c2.value / d,
                d_slope_impulses: d_slope,
                d_jump_impulses: d_jump,
            };
            if !(entry.value().is_finite() && entry.derivative().is_finite()) {
                return Err(OperatorError::NonFinite {
                    term: TERM_KERNEL,
                    t,
                });
            }
            terms.push(entry);
        }
    }

    let theta_inf = kernel.theta_at_infinity();
    let mut limit = b2 * kernel_total / d + b2 * c1.value / d + theta_inf * c2.value / d;
    let mut flux = (-a2 * kernel_total - a2 * c1.value + a1 * c2.value) / d;
    for imp in &impulses {
        let th = kernel.theta(imp.time)?;
        limit += b2 * th / d * imp.slope + b2 * a1 / d * imp.jump;
        flux += -a2 * th / d * imp.slope - a1 * a2 / d * imp.jump;
    }

    let values = terms.iter().map(TermBreakdown::value).collect();
    let derivs = terms.iter().map(TermBreakdown::derivative).collect();
    let tx = PiecewiseC1Function::from_nodes(mesh, values, derivs, limit, Some(flux))?;

    let all = gap_integrals
        .iter()
        .flat_map(|(l, r)| [l, r])
        .chain([&tail_l, &tail_r, &c1, &c2]);
    let (error_estimate, panels_used) = all.fold((0.0, 0), |(e, n), est| {
        (e + est.error_estimate, n + est.panels_used)
    });
    Ok(OperatorResult {
        tx,
        terms,
        diagnostics: OperatorDiagnostics {
            g1_integral: c1.value,
            g2_integral: c2.value,
            kernel_total,
            error_estimate,
            panels_used,
        },
    })
}

/// `‖x − Tx‖` in the BPC¹ norm, with `Tx` attached.
pub fn residual_norm(
    spec: &ProblemSpec,
    kernel: &GreenKernel,
    x: &PiecewiseC1Function,
    cfg: &OperatorConfig,
) -> Result<(f64, OperatorResult), OperatorError> {
    let result = apply_t(spec, kernel, x, cfg)?;
    let diff = x.linear_combination(1.0, &result.tx, -1.0)?;
    Ok((diff.bpc1_norm(), result))
}

/// `(1/p)(p x')' + f(t, x, x')` at each probe, with `(p x')'` by central
/// differences of step `step`. Probes must lie at least `2·step` away from
/// `0` and from every impulse point. Beyond the mesh horizon `x` follows its
/// tail model, which does not solve the equation, so probes belong in
/// `[0, horizon]`.
pub fn ode_residual(
    spec: &ProblemSpec,
    x: &PiecewiseC1Function,
    probes: &[f64],
    step: f64,
) -> Result<Vec<f64>, OperatorError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(OperatorError::InvalidStep(step));
    }
    let min_distance = 2.0 * step;
    let p = &spec.weight;
    probes
        .iter()
        .map(|&t| {
            for &b in std::iter::once(&0.0).chain(x.mesh().breakpoints()) {
                if (t - b).abs() < min_distance {
                    return Err(OperatorError::ProbeTooClose {
                        t,
                        breakpoint: b,
                        min_distance,
                    });
                }
            }
            let flux =
                |s: f64| -> Result<f64, OperatorError> { Ok(p(s) * x.eval(s, Side::Right)?.1) };
            let dflux = (flux(t + step)? - flux(t - step)?) / (2.0 * step);
            let (v, dv) = x.eval(t, Side::Right)?;
            Ok(dflux / p(t) + (spec.f)(t, v, dv))
        })
        .collect()
}

/// `lim_{t→∞} p(t)x'(t)`: exact when `x` carries it, otherwise
/// `p(H)·x'(H)` at the mesh horizon `H`.
pub fn flux_at_infinity(
    kernel: &GreenKernel,
    x: &PiecewiseC1Function,
) -> Result<f64, OperatorError> {
    if let Some(f) = x.flux_limit() {
        return Ok(f);
    }
    let h = x.mesh().horizon();
    Ok(kernel.weight(h) * x.eval(h, Side::Left)?.1)
}

/// `(r_left, r_right)`:
/// `a1 x(0) − b1 p(0) x'(0) − ∫ g1(x) ψ` and
/// `a2 x(∞) + b2 lim p x' − ∫ g2(x) ψ`.
pub fn boundary_residuals(
    spec: &ProblemSpec,
    kernel: &GreenKernel,
    x: &PiecewiseC1Function,
    quad: &QuadratureConfig,
) -> Result<(f64, f64), OperatorError> {
    let SlCoefficients { a1, a2, b1, b2 } = kernel.coefficients();
    let (c1, c2) = boundary_integrals(spec, x, quad)?;
    let (x0, dx0) = x.eval(0.0, Side::Right)?;
    let left = a1 * x0 - b1 * kernel.weight(0.0) * dx0 - c1.value;
    let right = a2 * x.limit() + b2 * flux_at_infinity(kernel, x)? - c2.value;
    Ok((left, right))
}

/// Per impulse: `(|Δx − I_k(x(t_k))|, |Δx' + Ī_k(x(t_k))|)` with
/// `x(t_k) = x(t_k⁻)`.
pub fn jump_residuals(
    spec: &ProblemSpec,
    x: &PiecewiseC1Function,
) -> Result<Vec<(f64, f64)>, OperatorError> {
    spec.impulses
        .iter()
        .map(|imp| {
            let (xl, dl) = x.eval(imp.time, Side::Left)?;
            let (xr, dr) = x.eval(imp.time, Side::Right)?;
            Ok((
                ((xr - xl) - (imp.jump)(xl)).abs(),
                ((dr - dl) + (imp.slope_jump)(xl)).abs(),
            ))
        })
        .collect()
}
