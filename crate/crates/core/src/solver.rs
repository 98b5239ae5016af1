//! Damped Picard iteration for fixed points of `T`, and a multi-start
//! search for solutions on either side of a norm level `q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::GreenKernel;
use crate::operator::{self, OperatorConfig, OperatorError};
use crate::problem::{MeshConfig, PiecewiseC1Function, ProblemError, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// `β` in `x ← (1 − β)x + β·Tx`.
    pub damping: f64,
    /// Target for `‖x − Tx‖` in the BPC¹ norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Constant starting levels for the multi-start search.
    pub initial_levels: Vec<f64>,
    /// Iterates with a norm above this count as divergent.
    pub divergence_guard: f64,
    pub operator: OperatorConfig,
    pub mesh: MeshConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            damping: 0.5,
            tol: 1e-8,
            max_iter: 500,
            initial_levels: vec![0.1, 1.0, 10.0, 100.0],
            divergence_guard: 1e8,
            operator: OperatorConfig::default(),
            mesh: MeshConfig::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolveError::InvalidConfig(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) {
            return Err(SolveError::InvalidConfig(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.initial_levels.is_empty() {
            return Err(SolveError::InvalidConfig(
                "at least one initial level is required".into(),
            ));
        }
        if self
            .initial_levels
            .iter()
            .any(|&l| !(l > 0.0 && l.is_finite()))
        {
            return Err(SolveError::InvalidConfig(
                "initial levels must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("operator evaluation failed at iteration {iteration}: {source}")]
    Operator {
        source: OperatorError,
        iteration: usize,
        iterate: Box<PiecewiseC1Function>,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: PiecewiseC1Function,
    /// `T` applied to `solution`.
    pub image: PiecewiseC1Function,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub norm: f64,
    /// Minimum of the solution over all mesh nodes is positive.
    pub positivity_certified: bool,
    /// Residual before each update, starting with the initial guess.
    pub residual_history: Vec<f64>,
    /// Set when iteration stopped at the divergence guard.
    pub diverged: bool,
}

fn finish(
    x: PiecewiseC1Function,
    image: PiecewiseC1Function,
    residual: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    diverged: bool,
) -> SolveResult {
    SolveResult {
        norm: x.bpc1_norm(),
        positivity_certified: x.min_node_value() > 0.0,
        solution: x,
        image,
        residual,
        iterations,
        converged,
        residual_history: history,
        diverged,
    }
}

/// Iterate `x ← (1 − β)x + β·Tx` from `x0` until the residual drops to
/// `tol` or `max_iter` updates have been made. On convergence the result is
/// `Tx` of the last iterate when that is at least as good; otherwise the
/// iterate with the smallest residual is returned.
pub fn picard_solve(
    spec: &ProblemSpec,
    kernel: &GreenKernel,
    x0: PiecewiseC1Function,
    cfg: &SolveConfig,
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let beta = cfg.damping;
    let mut x = x0;
    let mut history = Vec::new();
    let mut best: Option<(f64, PiecewiseC1Function, PiecewiseC1Function, usize)> = None;
    for iteration in 0..=cfg.max_iter {
        let (residual, result) = match operator::residual_norm(spec, kernel, &x, &cfg.operator) {
            Ok(r) => r,
            Err(source) => {
                return Err(SolveError::Operator {
                    source,
                    iteration,
                    iterate: Box::new(x),
                })
            }
        };
        history.push(residual);
        if residual <= cfg.tol {
            // Tx is usually the closer fixed point; keep it if its own
            // residual is no worse.
            let polished = result.tx;
            return Ok(
                match operator::residual_norm(spec, kernel, &polished, &cfg.operator) {
                    Ok((r, image)) if r <= residual => {
                        finish(polished, image.tx, r, iteration, true, history, false)
                    }
                    _ => {
                        let image = operator::apply_t(spec, kernel, &x, &cfg.operator)
                            .map(|r| r.tx)
                            .unwrap_or(polished);
                        finish(x, image, residual, iteration, true, history, false)
                    }
                },
            );
        }
        if !residual.is_finite() || result.tx.bpc1_norm() > cfg.divergence_guard {
            let (r, bx, bt, it) = best.unwrap_or((residual, x, result.tx, iteration));
            return Ok(finish(bx, bt, r, it, false, history, true));
        }
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, x.clone(), result.tx.clone(), iteration));
        }
        if iteration == cfg.max_iter {
            break;
        }
        x = x.linear_combination(1.0 - beta, &result.tx, beta)?;
    }
    let (r, bx, bt, it) = best.expect("at least one iteration ran");
    Ok(finish(bx, bt, r, it, false, history, false))
}

/// Outcome of one start of the multi-start search.
#[derive(Debug, Clone, Serialize)]
pub struct StartOutcome {
    pub level: f64,
    pub converged: bool,
    pub residual: Option<f64>,
    pub norm: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
    /// Index into [`TwoSolutionReport::distinct`] when this start found a
    /// converged solution.
    pub solution_index: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TwoSolutionReport {
    pub q: f64,
    /// Smallest-residual converged solution with norm below `q`.
    pub below: Option<SolveResult>,
    /// Smallest-residual converged solution with norm above `q`.
    pub above: Option<SolveResult>,
    /// Converged solutions after deduplication, in start order.
    pub distinct: Vec<SolveResult>,
    pub starts: Vec<StartOutcome>,
}

/// Run [`picard_solve`] from every constant level in `cfg.initial_levels`
/// and sort the converged fixed points by their norm relative to `q`.
/// Solutions within `10·tol` of each other in BPC¹ norm count as one.
pub fn find_two_solutions(
    spec: &ProblemSpec,
    kernel: &GreenKernel,
    q: f64,
    cfg: &SolveConfig,
) -> Result<TwoSolutionReport, SolveError> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(SolveError::InvalidConfig(format!(
            "q must be positive, got {q}"
        )));
    }
    cfg.validate()?;
    let mesh = spec.mesh(&cfg.mesh)?;
    let runs: Vec<Result<SolveResult, SolveError>> = cfg
        .initial_levels
        .par_iter()
        .map(|&level| {
            let x0 = PiecewiseC1Function::constant(mesh.clone(), level);
            picard_solve(spec, kernel, x0, cfg)
        })
        .collect();

    let mut distinct: Vec<SolveResult> = Vec::new();
    let mut starts = Vec::with_capacity(runs.len());
    for (&level, run) in cfg.initial_levels.iter().zip(runs) {
        match run {
            Ok(r) => {
                let mut index = None;
                if r.converged {
                    for (i, kept) in distinct.iter().enumerate() {
                        let gap = r
                            .solution
                            .linear_combination(1.0, &kept.solution, -1.0)?
                            .bpc1_norm();
                        if gap <= 10.0 * cfg.tol {
                            index = Some(i);
                            break;
                        }
                    }
                    if index.is_none() {
                        index = Some(distinct.len());
                        distinct.push(r.clone());
                    } else if let Some(i) = index {
                        if r.residual < distinct[i].residual {
                            distinct[i] = r.clone();
                        }
                    }
                }
                starts.push(StartOutcome {
                    level,
                    converged: r.converged,
                    residual: Some(r.residual),
                    norm: Some(r.norm),
                    iterations: Some(r.iterations),
                    error: None,
                    solution_index: index,
                });
            }
            Err(e) => starts.push(StartOutcome {
                level,
                converged: false,
                residual: None,
                norm: None,
                iterations: None,
                error: Some(e.to_string()),
                solution_index: None,
            }),
        }
    }

    let pick = |below: bool| {
        distinct
            .iter()
            .filter(|r| if below { r.norm < q } else { r.norm > q })
            .min_by(|a, b| a.residual.total_cmp(&b.residual))
            .cloned()
    };
    Ok(TwoSolutionReport {
        q,
        below: pick(true),
        above: pick(false),
        distinct,
        starts,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::kernel::{KernelConfig, SlCoefficients};
    use crate::problem::{Impulse, ImpulseSet};

    fn worked_example_kernel_spec() -> ProblemSpec {
        ProblemSpec::new(
            SlCoefficients::new(1.0, 0.0, 1.0, 1.0),
            Arc::new(|t: f64| t.exp()),
        )
    }

    fn corpus() -> ProblemSpec {
        worked_example_kernel_spec()
            .with_f(|t, x, _| 0.25 * (-2.0 * t).exp() * (1.0 + x.sin().powi(2)))
            .with_k(|t| 0.5 * (-2.0 * t).exp())
            .with_h(|_, _| 1.0)
            .with_psi(|t| (-t).exp())
            .with_g(|x| 0.01 * x.atan(), |x| 0.01 * x.atan())
            .with_impulses(
                ImpulseSet::new(vec![Impulse::new(
                    0.5,
                    |x| x / 100.0,
                    |x| x / (100.0 * (1.0 + x)),
                )])
                .unwrap(),
            )
    }

    #[test]
    fn constant_map_converges_immediately() {
        let spec = worked_example_kernel_spec()
            .with_f(|t, _, _| (-2.0 * t).exp())
            .with_g(|_| 0.3, |_| 0.2)
            .with_psi(|t| (-t).exp());
        let kernel = spec.kernel(&KernelConfig::default()).unwrap();
        let cfg = SolveConfig {
            damping: 1.0,
            ..SolveConfig::default()
        };
        let x0 = PiecewiseC1Function::constant(spec.mesh(&cfg.mesh).unwrap(), 2.0);
        let r = picard_solve(&spec, &kernel, x0, &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.residual <= 1e-8);
    }

    #[test]
    fn zero_spec() {
        let spec = worked_example_kernel_spec();
        let kernel = spec.kernel(&KernelConfig::default()).unwrap();
        let cfg = SolveConfig::default();
        let x0 = PiecewiseC1Function::constant(spec.mesh(&cfg.mesh).unwrap(), 1.0);
        let r = picard_solve(&spec, &kernel, x0, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.norm < 1e-8);
        assert!(!r.positivity_certified);

        let report = find_two_solutions(&spec, &kernel, 1.0, &cfg).unwrap();
        let below = report.below.unwrap();
        assert!(below.norm < 1.0 && !below.positivity_certified);
        assert!(report.above.is_none());
        assert_eq!(report.distinct.len(), 1);
        assert!(report.starts.iter().all(|s| s.solution_index == Some(0)));
    }

    #[test]
    fn corpus_converges() {
        let spec = corpus();
        let kernel = spec.kernel(&KernelConfig::default()).unwrap();
        let cfg = SolveConfig::default();
        let x0 = PiecewiseC1Function::constant(spec.mesh(&cfg.mesh).unwrap(), 1.0);
        let r = picard_solve(&spec, &kernel, x0, &cfg).unwrap();
        assert!(r.converged, "{:?}", r.residual_history);
        assert!(r.iterations <= 200);
        assert!(r.positivity_certified);
        for w in r.residual_history[5..].windows(2) {
            assert!(w[1] <= w[0], "{:?}", r.residual_history);
        }
    }

    #[test]
    fn invalid_config() {
        let spec = worked_example_kernel_spec();
        let kernel = spec.kernel(&KernelConfig::default()).unwrap();
        let cfg = SolveConfig {
            damping: 0.0,
            ..SolveConfig::default()
        };
        let x0 = PiecewiseC1Function::constant(spec.mesh(&cfg.mesh).unwrap(), 1.0);
        assert!(matches!(
            picard_solve(&spec, &kernel, x0, &cfg),
            Err(SolveError::InvalidConfig(_))
        ));
        assert!(find_two_solutions(&spec, &kernel, 0.0, &SolveConfig::default()).is_err());
    }

    #[test]
    fn operator_failure_carries_iterate() {
        let k = |t: f64| (-t).exp() / (t.exp() - 2.0);
        let spec = worked_example_kernel_spec().with_f(move |t, _, _| k(t));
        let kernel = spec.kernel(&KernelConfig::default()).unwrap();
        let cfg = SolveConfig::default();
        let x0 = PiecewiseC1Function::constant(spec.mesh(&cfg.mesh).unwrap(), 1.0);
        match picard_solve(&spec, &kernel, x0, &cfg) {
            Err(SolveError::Operator {
                iteration, iterate, ..
            }) => {
                assert_eq!(iteration, 0);
                assert_eq!(iterate.limit(), 1.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
