//! Problem instances, candidate solutions and hypothesis checks.

mod piecewise;
mod validate;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kernel::{GreenKernel, KernelConfig, KernelError, SlCoefficients, Weight};

pub use piecewise::{Mesh, MeshConfig, Panel, PiecewiseC1Function};
pub use validate::{
    validate, Hypothesis, HypothesisEntry, HypothesisReport, HypothesisStatus, SamplingConfig,
    ValidationConfig, Witness,
};

/// Function of a single real argument (time or state).
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `f(t, x, y)`
pub type Nonlinearity = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// `h(x, y)`
pub type Envelope = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("impulse times must be finite, positive and strictly increasing")]
    InvalidImpulseTimes,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("t = {t} is outside the representable range [0, ∞) of the tail model")]
    TailModel { t: f64 },
    #[error("functions live on different meshes")]
    MeshMismatch,
}

/// One impulse: `Δx = jump(x(t_k))`, `Δx' = −slope_jump(x(t_k))`.
#[derive(Clone)]
pub struct Impulse {
    pub time: f64,
    pub jump: ScalarFn,
    pub slope_jump: ScalarFn,
}

impl fmt::Debug for Impulse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Impulse")
            .field("time", &self.time)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ImpulseSet {
    impulses: Vec<Impulse>,
}

impl ImpulseSet {
    pub fn new(impulses: Vec<Impulse>) -> Result<Self, ProblemError> {
        let ok = impulses.iter().all(|i| i.time > 0.0 && i.time.is_finite())
            && impulses.windows(2).all(|w| w[0].time < w[1].time);
        if !ok {
            return Err(ProblemError::InvalidImpulseTimes);
        }
        Ok(ImpulseSet { impulses })
    }

    pub fn empty() -> Self {
        ImpulseSet::default()
    }

    pub fn times(&self) -> Vec<f64> {
        self.impulses.iter().map(|i| i.time).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Impulse> {
        self.impulses.iter()
    }

    pub fn len(&self) -> usize {
        self.impulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impulses.is_empty()
    }
}

/// A complete problem instance:
///
/// ```text
/// (1/p)(p x')' + f(t, x, x') = 0,           t ≠ t_k
/// Δx|_{t_k} = I_k(x(t_k)),  Δx'|_{t_k} = −Ī_k(x(t_k))
/// a1 x(0) − b1 lim_{t→0+} p x' = ∫ g1(x) ψ
/// a2 x(∞) + b2 lim_{t→∞} p x' = ∫ g2(x) ψ
/// ```
///
/// with the envelope `f ≤ k·h`. All functions default to zero.
#[derive(Clone)]
pub struct ProblemSpec {
    pub coefficients: SlCoefficients,
    pub weight: Weight,
    pub f: Nonlinearity,
    pub k: ScalarFn,
    pub h: Envelope,
    pub g1: ScalarFn,
    pub g2: ScalarFn,
    pub psi: ScalarFn,
    pub impulses: ImpulseSet,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("coefficients", &self.coefficients)
            .field("impulses", &self.impulses)
            .finish_non_exhaustive()
    }
}

fn zero1() -> ScalarFn {
    Arc::new(|_| 0.0)
}

impl ProblemSpec {
    pub fn new(coefficients: SlCoefficients, weight: Weight) -> Self {
        ProblemSpec {
            coefficients,
            weight,
            f: Arc::new(|_, _, _| 0.0),
            k: zero1(),
            h: Arc::new(|_, _| 0.0),
            g1: zero1(),
            g2: zero1(),
            psi: zero1(),
            impulses: ImpulseSet::empty(),
        }
    }

    pub fn with_f(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.f = Arc::new(f);
        self
    }

    pub fn with_k(mut self, k: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.k = Arc::new(k);
        self
    }

    pub fn with_h(mut self, h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.h = Arc::new(h);
        self
    }

    pub fn with_g(
        mut self,
        g1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.g1 = Arc::new(g1);
        self.g2 = Arc::new(g2);
        self
    }

    pub fn with_psi(mut self, psi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.psi = Arc::new(psi);
        self
    }

    pub fn with_impulses(mut self, impulses: ImpulseSet) -> Self {
        self.impulses = impulses;
        self
    }

    pub fn kernel(&self, cfg: &KernelConfig) -> Result<GreenKernel, KernelError> {
        GreenKernel::new(self.coefficients, self.weight.clone(), cfg)
    }

    pub fn mesh(&self, cfg: &MeshConfig) -> Result<Arc<Mesh>, ProblemError> {
        Ok(Arc::new(Mesh::new(&self.impulses.times(), cfg)?))
    }
}

impl Impulse {
    pub fn new(
        time: f64,
        jump: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope_jump: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Impulse {
            time,
            jump: Arc::new(jump),
            slope_jump: Arc::new(slope_jump),
        }
    }
}
