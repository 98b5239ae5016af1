//! Numerical evidence for the standing hypotheses H1–H7.
//!
//! H1 is checked exactly through the kernel constant `D`; H5, H6 and H7
//! involve integrals and are checked by quadrature; everything stated on an
//! open or unbounded domain (signs, the envelope `f ≤ k·h`, monotonicity,
//! the impulse inequality) is checked on a sampling grid and reported as
//! sampled evidence only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ProblemSpec;
use crate::kernel::{GreenKernel, KernelConfig, KernelError};
use crate::quadrature::{self, QuadratureConfig, QuadratureError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub t_min: f64,
    /// Upper end of the logarithmic time grid; `None` means
    /// "last impulse + 10".
    pub t_max: Option<f64>,
    pub t_points: usize,
    pub tail_probes: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    pub y_points: usize,
    /// Extra uniformly drawn (log-scale) probes on top of the grid.
    pub random_probes: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            t_min: 1e-3,
            t_max: None,
            t_points: 48,
            tail_probes: 6,
            x_min: 1e-3,
            x_max: 100.0,
            x_points: 32,
            y_points: 8,
            random_probes: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationConfig {
    pub kernel: KernelConfig,
    pub quadrature: QuadratureConfig,
    pub sampling: SamplingConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
}

/// Concrete point at which a hypothesis fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub detail: String,
}

impl Witness {
    fn at(t: Option<f64>, x: Option<f64>, y: Option<f64>, detail: impl Into<String>) -> Self {
        Witness {
            t,
            x,
            y,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum HypothesisStatus {
    VerifiedExact,
    VerifiedSampled,
    Violated { witness: Witness },
    Divergent { location: Option<f64> },
}

impl HypothesisStatus {
    pub fn is_verified(&self) -> bool {
        matches!(
            self,
            HypothesisStatus::VerifiedExact | HypothesisStatus::VerifiedSampled
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisEntry {
    pub hypothesis: Hypothesis,
    #[serde(flatten)]
    pub status: HypothesisStatus,
    /// Integral or constant the check computed, when there is one.
    pub value: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn get(&self, h: Hypothesis) -> &HypothesisEntry {
        self.entries
            .iter()
            .find(|e| e.hypothesis == h)
            .expect("every hypothesis is reported")
    }

    pub fn all_verified(&self) -> bool {
        self.entries.iter().all(|e| e.status.is_verified())
    }

    /// H1 or H7 failing makes the operator meaningless.
    pub fn has_hard_violation(&self) -> bool {
        !self.get(Hypothesis::H1).status.is_verified()
            || !self.get(Hypothesis::H7).status.is_verified()
    }
}

struct Grids {
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    random: Vec<(f64, f64, f64)>,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl Grids {
    fn new(cfg: &SamplingConfig, default_t_max: f64) -> Self {
        let t_max = cfg.t_max.unwrap_or(default_t_max);
        let mut t = log_space(cfg.t_min, t_max, cfg.t_points);
        let mut probe = t_max;
        for _ in 0..cfg.tail_probes {
            probe *= 2.0;
            t.push(probe);
        }
        let x = log_space(cfg.x_min, cfg.x_max, cfg.x_points);
        let mut y = vec![0.0];
        for m in log_space(cfg.x_min, cfg.x_max, cfg.y_points) {
            y.push(m);
            y.push(-m);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            (lo.ln() + (hi.ln() - lo.ln()) * rng.gen::<f64>()).exp()
        };
        let random = (0..cfg.random_probes)
            .map(|_| {
                let t = log_uniform(&mut rng, cfg.t_min, t_max);
                let x = log_uniform(&mut rng, cfg.x_min, cfg.x_max);
                let y = log_uniform(&mut rng, cfg.x_min, cfg.x_max);
                let y = if rng.gen::<bool>() { y } else { -y };
                (t, x, y)
            })
            .collect();
        Grids { t, x, y, random }
    }

    /// Grid triples followed by the random probes.
    fn triples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.t
            .iter()
            .flat_map(move |&t| {
                self.x
                    .iter()
                    .flat_map(move |&x| self.y.iter().map(move |&y| (t, x, y)))
            })
            .chain(self.random.iter().copied())
    }

    fn states(&self) -> impl Iterator<Item = f64> + '_ {
        self.x
            .iter()
            .copied()
            .chain(self.random.iter().map(|r| r.1))
    }
}

fn violated(h: Hypothesis, witness: Witness) -> HypothesisEntry {
    HypothesisEntry {
        hypothesis: h,
        note: witness.detail.clone(),
        status: HypothesisStatus::Violated { witness },
        value: None,
    }
}

fn sampled(h: Hypothesis, note: impl Into<String>) -> HypothesisEntry {
    HypothesisEntry {
        hypothesis: h,
        status: HypothesisStatus::VerifiedSampled,
        value: None,
        note: note.into(),
    }
}

fn divergent(h: Hypothesis, location: Option<f64>, note: impl Into<String>) -> HypothesisEntry {
    HypothesisEntry {
        hypothesis: h,
        status: HypothesisStatus::Divergent { location },
        value: None,
        note: note.into(),
    }
}

fn check_h2(spec: &ProblemSpec, g: &Grids) -> HypothesisEntry {
    for &t in &g.t {
        let k = (spec.k)(t);
        if !(k >= 0.0) {
            return violated(
                Hypothesis::H2,
                Witness::at(
                    Some(t),
                    None,
                    None,
                    format!("k(t) = {k} is negative or not finite"),
                ),
            );
        }
    }
    for (t, x, y) in g.triples() {
        let f = (spec.f)(t, x, y);
        let k = (spec.k)(t);
        let h = (spec.h)(x, y);
        let w = || Witness::at(Some(t), Some(x), Some(y), String::new());
        let fail = |detail: String| {
            let mut wit = w();
            wit.detail = detail;
            violated(Hypothesis::H2, wit)
        };
        if !(f.is_finite() && k.is_finite() && h.is_finite()) {
            return fail(format!("non-finite value: f = {f}, k = {k}, h = {h}"));
        }
        if f < 0.0 {
            return fail(format!("f(t, x, y) = {f} is negative"));
        }
        if k < 0.0 {
            return fail(format!("k(t) = {k} is negative"));
        }
        if h < 0.0 {
            return fail(format!("h(x, y) = {h} is negative"));
        }
        let bound = k * h;
        if f > bound + 1e-12 * bound.abs().max(1.0) {
            return fail(format!("f = {f} exceeds k·h = {bound}"));
        }
    }
    sampled(
        Hypothesis::H2,
        "f ≥ 0, k ≥ 0, h ≥ 0 and f ≤ k·h on the sampling grid",
    )
}

fn check_h3(spec: &ProblemSpec, g: &Grids) -> HypothesisEntry {
    let mut xs: Vec<f64> = g.states().collect();
    xs.sort_by(f64::total_cmp);
    for (name, func) in [("g1", &spec.g1), ("g2", &spec.g2)] {
        let mut prev: Option<(f64, f64)> = None;
        for &x in &xs {
            let v = func(x);
            if !(v >= 0.0 && v.is_finite()) {
                return violated(
                    Hypothesis::H3,
                    Witness::at(
                        None,
                        Some(x),
                        None,
                        format!("{name}(x) = {v} is not a nonnegative number"),
                    ),
                );
            }
            if let Some((px, pv)) = prev {
                if v < pv - 1e-12 * pv.abs().max(1.0) {
                    return violated(
                        Hypothesis::H3,
                        Witness::at(
                            None,
                            Some(x),
                            None,
                            format!("{name} decreases: {name}({px}) = {pv} > {name}({x}) = {v}"),
                        ),
                    );
                }
            }
            prev = Some((x, v));
        }
    }
    sampled(
        Hypothesis::H3,
        "g1, g2 nonnegative and nondecreasing on the sampling grid",
    )
}

fn check_h4(spec: &ProblemSpec, kernel: Option<&GreenKernel>, g: &Grids) -> HypothesisEntry {
    if spec.impulses.is_empty() {
        return HypothesisEntry {
            hypothesis: Hypothesis::H4,
            status: HypothesisStatus::VerifiedExact,
            value: None,
            note: "no impulses".into(),
        };
    }
    let c = spec.coefficients;
    for imp in spec.impulses.iter() {
        let tk = imp.time;
        let weight_factor = match kernel {
            Some(k) => k.weight_integral().to_infinity(tk).map(|b| c.b2 + c.a2 * b),
            None => Err(KernelError::NonIntegrableWeight { location: None }),
        };
        let p = (spec.weight)(tk);
        for x in g.states() {
            let i = (imp.jump)(x);
            let ib = (imp.slope_jump)(x);
            let wit = |detail: String| Witness::at(Some(tk), Some(x), None, detail);
            if !(i >= 0.0 && i.is_finite()) {
                return violated(
                    Hypothesis::H4,
                    wit(format!("I(x) = {i} is not a nonnegative number")),
                );
            }
            if !(ib >= 0.0 && ib.is_finite()) {
                return violated(
                    Hypothesis::H4,
                    wit(format!("Ī(x) = {ib} is not a nonnegative number")),
                );
            }
            if let Ok(factor) = &weight_factor {
                let lhs = factor * ib - c.a2 / p * i;
                if !(lhs > 0.0) {
                    return violated(
                        Hypothesis::H4,
                        wit(format!(
                            "[b2 + a2·B(t_k, ∞)]·Ī − (a2/p(t_k))·I = {lhs} is not positive"
                        )),
                    );
                }
            }
        }
        if let Err(e) = weight_factor {
            return divergent(Hypothesis::H4, None, format!("B(t_k, ∞) unavailable: {e}"));
        }
    }
    sampled(
        Hypothesis::H4,
        "impulse maps nonnegative and the weighted inequality holds on the sampling grid",
    )
}

fn check_h5(spec: &ProblemSpec, g: &Grids, quad: &QuadratureConfig) -> HypothesisEntry {
    for &t in std::iter::once(&0.0).chain(g.t.iter()) {
        let v = (spec.psi)(t);
        if !(v >= 0.0 && v.is_finite()) {
            return violated(
                Hypothesis::H5,
                Witness::at(
                    Some(t),
                    None,
                    None,
                    format!("ψ(t) = {v} is not a nonnegative number"),
                ),
            );
        }
    }
    match quadrature::integrate_half_line(&*spec.psi, &spec.impulses.times(), quad) {
        Ok(est) if est.converged => HypothesisEntry {
            hypothesis: Hypothesis::H5,
            status: HypothesisStatus::VerifiedSampled,
            value: Some(est.value),
            note: "ψ ≥ 0 on the sampling grid; ∫ψ converged".into(),
        },
        Ok(est) => divergent(Hypothesis::H5, est.divergence_hint, "∫ψ did not converge"),
        Err(QuadratureError::NonFinite { abscissa }) => violated(
            Hypothesis::H5,
            Witness::at(Some(abscissa), None, None, "ψ is not finite"),
        ),
        Err(e) => divergent(Hypothesis::H5, None, e.to_string()),
    }
}

fn check_h7(spec: &ProblemSpec, kernel: &GreenKernel, quad: &QuadratureConfig) -> HypothesisEntry {
    let integrand = |s: f64| match (spec.k)(s) {
        // p may overflow where k has underflowed
        0.0 => 0.0,
        k => match kernel.green(s, s) {
            Ok(g) => g * kernel.weight(s) * k,
            Err(_) => f64::NAN,
        },
    };
    match quadrature::integrate_half_line(integrand, &spec.impulses.times(), quad) {
        Ok(est) if est.converged && est.value > 0.0 => HypothesisEntry {
            hypothesis: Hypothesis::H7,
            status: HypothesisStatus::VerifiedSampled,
            value: Some(est.value),
            note: format!("∫ G(s,s) p(s) k(s) ds = {} (quadrature)", est.value),
        },
        Ok(est) if est.converged => {
            let mut e = violated(
                Hypothesis::H7,
                Witness::at(
                    None,
                    None,
                    None,
                    format!("∫ G(s,s) p(s) k(s) ds = {} is not positive", est.value),
                ),
            );
            e.value = Some(est.value);
            e
        }
        Ok(est) => divergent(
            Hypothesis::H7,
            est.divergence_hint,
            format!(
                "∫ G(s,s) p(s) k(s) ds does not converge; quadrature failed near s = {}",
                est.divergence_hint
                    .map_or("?".to_string(), |h| format!("{h:.6}"))
            ),
        ),
        Err(QuadratureError::NonFinite { abscissa }) => {
            // An overflowing weight with finite k means the tail was pushed
            // past the representable range: the integral is not resolved.
            let (p, k) = (kernel.weight(abscissa), (spec.k)(abscissa));
            if p.is_infinite() && k.is_finite() {
                divergent(
                    Hypothesis::H7,
                    Some(abscissa),
                    format!("tail not resolved: p(s)·k(s) overflows at s = {abscissa:.6}"),
                )
            } else {
                violated(
                    Hypothesis::H7,
                    Witness::at(Some(abscissa), None, None, "G(s,s) p(s) k(s) is not finite"),
                )
            }
        }
        Err(e) => divergent(Hypothesis::H7, None, e.to_string()),
    }
}

/// Check H1–H7 for `spec`. Never fails; every finding is in the report.
pub fn validate(spec: &ProblemSpec, cfg: &ValidationConfig) -> HypothesisReport {
    let last = spec.impulses.times().last().copied().unwrap_or(0.0);
    let grids = Grids::new(&cfg.sampling, last + 10.0);

    let mut p_bad = None;
    for &t in std::iter::once(&0.0).chain(grids.t.iter()) {
        let p = (spec.weight)(t);
        if !(p > 0.0 && p.is_finite()) {
            p_bad = Some((t, p));
            break;
        }
    }

    let kernel = spec.kernel(&cfg.kernel);
    let (h1, h6) = match (&kernel, p_bad) {
        (_, Some((t, p))) => (
            divergent(Hypothesis::H1, None, "weight invalid, D not computed"),
            violated(
                Hypothesis::H6,
                Witness::at(Some(t), None, None, format!("p(t) = {p} is not positive")),
            ),
        ),
        (Ok(k), None) => (
            HypothesisEntry {
                hypothesis: Hypothesis::H1,
                status: HypothesisStatus::VerifiedExact,
                value: Some(k.coupling_d()),
                note: format!("D = {}", k.coupling_d()),
            },
            HypothesisEntry {
                hypothesis: Hypothesis::H6,
                status: HypothesisStatus::VerifiedSampled,
                value: Some(k.b0inf()),
                note: format!("p > 0 on the sampling grid; B(0, ∞) = {}", k.b0inf()),
            },
        ),
        (Err(KernelError::NonPositiveD { d }), None) => (
            violated(
                Hypothesis::H1,
                Witness::at(None, None, None, format!("D = {d} is not positive")),
            ),
            sampled(Hypothesis::H6, "p > 0 on the sampling grid; B(0, ∞) finite"),
        ),
        (Err(KernelError::NonIntegrableWeight { location }), None) => (
            divergent(Hypothesis::H1, *location, "B(0, ∞) diverges, D undefined"),
            divergent(Hypothesis::H6, *location, "∫ 1/p does not converge"),
        ),
        (Err(KernelError::InvalidWeight { t, value }), None) => (
            divergent(Hypothesis::H1, None, "weight invalid, D not computed"),
            violated(
                Hypothesis::H6,
                Witness::at(
                    Some(*t),
                    None,
                    None,
                    format!("p(t) = {value} is not positive"),
                ),
            ),
        ),
        (Err(e), None) => (
            violated(Hypothesis::H1, Witness::at(None, None, None, e.to_string())),
            sampled(Hypothesis::H6, "p > 0 on the sampling grid"),
        ),
    };

    let h7 = match &kernel {
        Ok(k) => check_h7(spec, k, &cfg.quadrature),
        Err(KernelError::NonIntegrableWeight { location }) => divergent(
            Hypothesis::H7,
            *location,
            "Green's function unavailable: B(0, ∞) diverges",
        ),
        Err(e) => violated(
            Hypothesis::H7,
            Witness::at(
                None,
                None,
                None,
                format!("Green's function unavailable: {e}"),
            ),
        ),
    };

    HypothesisReport {
        entries: vec![
            h1,
            check_h2(spec, &grids),
            check_h3(spec, &grids),
            check_h4(spec, kernel.as_ref().ok(), &grids),
            check_h5(spec, &grids, &cfg.quadrature),
            h6,
            h7,
        ],
    }
}
