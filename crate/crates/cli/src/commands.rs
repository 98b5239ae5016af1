//! The four subcommands: each turns a loaded config into a report.

use ibvp_core::certify::{self, AsymptoticConstants, ConditionReport, Discrepancy};
use ibvp_core::kernel::{GreenKernel, SlCoefficients};
use ibvp_core::operator::{self, OperatorError};
use ibvp_core::problem::{
    self, Hypothesis, HypothesisEntry, HypothesisReport, HypothesisStatus, ProblemSpec,
    SamplingConfig,
};
use ibvp_core::solver::{self, SolveConfig, SolveResult, StartOutcome};
use ibvp_core::Side;
use serde::Serialize;
use serde_json::Value;

use crate::config::{GreenSection, LoadedConfig};
use crate::report::{self, Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Green,
    Solve,
    Certify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Green => "green",
            Command::Solve => "solve",
            Command::Certify => "certify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Command-line overrides applied on top of the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub format: Format,
    /// Solver tolerance.
    pub tol: Option<f64>,
    /// Seed of the random hypothesis probes.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub enum Output {
    Json(Value),
    Csv(Table),
}

impl Output {
    pub fn render(&self) -> Result<String, CliError> {
        match self {
            Output::Json(v) => Ok(report::render(v)),
            Output::Csv(t) => t.to_csv(),
        }
    }

    pub fn json(&self) -> Option<&Value> {
        match self {
            Output::Json(v) => Some(v),
            Output::Csv(_) => None,
        }
    }
}

pub fn run(cfg: &LoadedConfig, command: Command, opts: &Options) -> Result<Output, CliError> {
    if opts.format == Format::Csv && matches!(command, Command::Validate | Command::Certify) {
        return Err(CliError::Usage(format!(
            "`{}` only writes JSON; CSV is available for `green` and `solve`",
            command.name()
        )));
    }
    if let Some(tol) = opts.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Usage(format!(
                "--tol must be positive, got {tol}"
            )));
        }
    }
    let spec = cfg.problem()?;
    let (result, table) = match command {
        Command::Validate => (run_validate(cfg, &spec, opts)?, None),
        Command::Green => {
            let (v, t) = run_green(cfg, &spec)?;
            (v, Some(t))
        }
        Command::Solve => {
            let (v, t) = run_solve(cfg, &spec, opts)?;
            (v, Some(t))
        }
        Command::Certify => (run_certify(cfg, &spec, opts)?, None),
    };
    match (opts.format, table) {
        (Format::Csv, Some(t)) => Ok(Output::Csv(t)),
        _ => Ok(Output::Json(report::envelope(
            command.name(),
            cfg.config.name.as_deref(),
            &cfg.hash,
            &cfg.config.metadata,
            result,
        ))),
    }
}

fn kernel(cfg: &LoadedConfig, spec: &ProblemSpec) -> Result<GreenKernel, CliError> {
    spec.kernel(&cfg.config.numerics.kernel)
        .map_err(|e| CliError::Numerics(format!("cannot build the Green's function: {e}")))
}

fn sampling(cfg: &LoadedConfig, opts: &Options) -> SamplingConfig {
    let mut s = cfg.config.numerics.sampling.clone();
    if let Some(seed) = opts.seed {
        s.seed = seed;
    }
    s
}

/// A stated hypothesis value set against the computed one.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceCheck {
    pub hypothesis: String,
    pub stated: f64,
    pub computed: Option<f64>,
    pub reproduced: bool,
    pub note: String,
}

fn hypothesis_by_name(name: &str) -> Option<Hypothesis> {
    use Hypothesis::*;
    [H1, H2, H3, H4, H5, H6, H7]
        .into_iter()
        .find(|h| format!("{h:?}") == name)
}

fn reference_checks(
    cfg: &LoadedConfig,
    report: &HypothesisReport,
) -> Result<Vec<ReferenceCheck>, CliError> {
    let refs = &cfg.config.references;
    refs.hypotheses
        .iter()
        .map(|(name, &stated)| {
            let h = hypothesis_by_name(name).ok_or_else(|| CliError::Config {
                location: format!("{}: references.hypotheses", cfg.path.display()),
                message: format!("unknown hypothesis `{name}` (expected H1..H7)"),
            })?;
            let entry: &HypothesisEntry = report.get(h);
            let computed = entry.value.filter(|_| entry.status.is_verified());
            let reproduced =
                computed.is_some_and(|v| (v - stated).abs() <= refs.rel_tol * stated.abs().max(v.abs()).max(1e-300));
            let note = match (&entry.status, computed) {
                (HypothesisStatus::Divergent { location: Some(s) }, _) => format!(
                    "stated value {stated} is not reproduced: the integral diverges, quadrature fails near s = {s:.6}"
                ),
                (HypothesisStatus::Divergent { location: None }, _) => {
                    format!("stated value {stated} is not reproduced: the integral diverges")
                }
                (HypothesisStatus::Violated { witness }, _) => {
                    format!("stated value {stated} is not reproduced: {name} is violated ({})", witness.detail)
                }
                (_, Some(v)) if reproduced => format!("stated value {stated} reproduced (computed {v})"),
                (_, Some(v)) => format!("stated value {stated} is not reproduced: computed {v}"),
                (_, None) => format!("stated value {stated}: {name} has no computed value to compare"),
            };
            Ok(ReferenceCheck {
                hypothesis: name.clone(),
                stated,
                computed,
                reproduced,
                note,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct ValidateResult<'a> {
    all_verified: bool,
    hard_violation: bool,
    hypotheses: &'a [HypothesisEntry],
    reference_checks: Vec<ReferenceCheck>,
    sampling: &'a SamplingConfig,
}

fn run_validate(cfg: &LoadedConfig, spec: &ProblemSpec, opts: &Options) -> Result<Value, CliError> {
    let mut vcfg = cfg.validation_config();
    vcfg.sampling = sampling(cfg, opts);
    let report = problem::validate(spec, &vcfg);
    report::to_value(&ValidateResult {
        all_verified: report.all_verified(),
        hard_violation: report.has_hard_violation(),
        hypotheses: &report.entries,
        reference_checks: reference_checks(cfg, &report)?,
        sampling: &vcfg.sampling,
    })
}

#[derive(Serialize)]
struct KernelSummary {
    coefficients: SlCoefficients,
    /// `a2 b1 + a1 b2 + a1 a2 B(0, ∞)`
    d: f64,
    b0inf: f64,
    c: Option<f64>,
    window: (f64, f64),
    w: Option<f64>,
    theta_at_infinity: f64,
    phi_at_zero: f64,
}

#[derive(Serialize)]
struct GreenResult {
    kernel: KernelSummary,
    grid: GreenSection,
    table: Value,
}

pub const GREEN_HEADER: [&str; 5] = ["t", "s", "G", "Gt_left", "Gt_right"];
pub const SOLVE_HEADER: [&str; 7] = ["t", "side", "x", "dx", "Tx", "dTx", "residual"];

fn run_green(cfg: &LoadedConfig, spec: &ProblemSpec) -> Result<(Value, Table), CliError> {
    let k = kernel(cfg, spec)?;
    let grid = cfg.config.green;
    let mut rows = Vec::new();
    for &t in &grid.t.values() {
        for &s in &grid.s.values() {
            let nan = |r: Result<f64, _>| Cell::Num(r.unwrap_or(f64::NAN));
            rows.push(vec![
                Cell::Num(t),
                Cell::Num(s),
                nan(k.green(t, s)),
                nan(k.green_dt(t, s, Side::Left)),
                nan(k.green_dt(t, s, Side::Right)),
            ]);
        }
    }
    let table = Table {
        header: GREEN_HEADER.to_vec(),
        rows,
    };
    let window = cfg.config.certify.window;
    let result = report::to_value(&GreenResult {
        kernel: KernelSummary {
            coefficients: k.coefficients(),
            d: k.coupling_d(),
            b0inf: k.b0inf(),
            c: k.constant_c().ok(),
            window,
            w: k.constant_w(window.0, window.1).ok(),
            theta_at_infinity: k.theta_at_infinity(),
            phi_at_zero: k.phi_at_zero(),
        },
        grid,
        table: table.to_value(),
    })?;
    Ok((result, table))
}

/// Residuals of the boundary value problem itself at a computed solution.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// Largest `|(1/p)(p x')' + f|` over panel midpoints.
    pub ode_residual_max: Option<f64>,
    pub ode_step: f64,
    pub boundary_left: Option<f64>,
    pub boundary_right: Option<f64>,
    /// Per impulse: `|Δx − I_k|` and `|Δx' + Ī_k|`.
    pub jumps: Vec<(f64, f64)>,
    pub error: Option<String>,
}

pub const ODE_STEP: f64 = 1e-4;

fn certificate(
    cfg: &LoadedConfig,
    spec: &ProblemSpec,
    kernel: &GreenKernel,
    r: &SolveResult,
) -> Certificate {
    let x = &r.solution;
    let probes: Vec<f64> = x
        .mesh()
        .panels()
        .iter()
        .map(|p| 0.5 * (p.a + p.b))
        .collect();
    let quad = &cfg.config.numerics.solver.operator.quadrature;
    let mut errors = Vec::new();
    let mut keep = |r: Result<(), OperatorError>| {
        if let Err(e) = r {
            errors.push(e.to_string());
        }
    };
    let mut cert = Certificate {
        ode_residual_max: None,
        ode_step: ODE_STEP,
        boundary_left: None,
        boundary_right: None,
        jumps: Vec::new(),
        error: None,
    };
    keep(operator::ode_residual(spec, x, &probes, ODE_STEP).map(|v| {
        cert.ode_residual_max = Some(v.iter().fold(0.0f64, |m, r| m.max(r.abs())));
    }));
    keep(
        operator::boundary_residuals(spec, kernel, x, quad).map(|(l, r)| {
            cert.boundary_left = Some(l);
            cert.boundary_right = Some(r);
        }),
    );
    keep(operator::jump_residuals(spec, x).map(|j| cert.jumps = j));
    if !errors.is_empty() {
        cert.error = Some(errors.join("; "));
    }
    cert
}

#[derive(Serialize)]
struct SolutionSummary {
    index: usize,
    norm: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    diverged: bool,
    positivity_certified: bool,
    min_node_value: f64,
    value_at_zero: Option<f64>,
    limit: f64,
    residual_history: Vec<f64>,
    certificate: Certificate,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    q: f64,
    solver: &'a SolveConfig,
    starts: &'a [StartOutcome],
    solutions: Vec<SolutionSummary>,
    /// Index into `solutions` of the best solution with norm below `q`.
    below: Option<usize>,
    /// Index into `solutions` of the best solution with norm above `q`.
    above: Option<usize>,
    /// Solution sampled in the table: `below`, else `above`, else the first.
    tabulated: Option<usize>,
    table: Value,
}

fn same(a: &SolveResult, b: &SolveResult) -> bool {
    a.residual.to_bits() == b.residual.to_bits() && a.norm.to_bits() == b.norm.to_bits()
}

fn solution_table(r: Option<&SolveResult>) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    if let Some(r) = r {
        let err = |e: problem::ProblemError| CliError::Numerics(e.to_string());
        for (t, side) in r.solution.mesh().grid_points() {
            let eval_side = side.unwrap_or(Side::Left);
            let (x, dx) = r.solution.eval(t, eval_side).map_err(err)?;
            let (tx, dtx) = r.image.eval(t, eval_side).map_err(err)?;
            rows.push(vec![
                Cell::Num(t),
                Cell::Text(side.map_or("", |s| s.as_str()).to_string()),
                Cell::Num(x),
                Cell::Num(dx),
                Cell::Num(tx),
                Cell::Num(dtx),
                Cell::Num((x - tx).abs() + (dx - dtx).abs()),
            ]);
        }
    }
    Ok(Table {
        header: SOLVE_HEADER.to_vec(),
        rows,
    })
}

fn run_solve(
    cfg: &LoadedConfig,
    spec: &ProblemSpec,
    opts: &Options,
) -> Result<(Value, Table), CliError> {
    let k = kernel(cfg, spec)?;
    let mut scfg = cfg.config.numerics.solver.clone();
    if let Some(tol) = opts.tol {
        scfg.tol = tol;
    }
    let q = cfg.config.certify.q;
    let report = solver::find_two_solutions(spec, &k, q, &scfg).map_err(|e| match e {
        solver::SolveError::InvalidConfig(m) => CliError::Config {
            location: format!("{}: numerics.solver", cfg.path.display()),
            message: m,
        },
        other => CliError::Numerics(other.to_string()),
    })?;
    let index_of = |r: &Option<SolveResult>| {
        r.as_ref()
            .and_then(|r| report.distinct.iter().position(|d| same(d, r)))
    };
    let below = index_of(&report.below);
    let above = index_of(&report.above);
    let tabulated = below
        .or(above)
        .or((!report.distinct.is_empty()).then_some(0));
    let solutions = report
        .distinct
        .iter()
        .enumerate()
        .map(|(index, r)| SolutionSummary {
            index,
            norm: r.norm,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
            diverged: r.diverged,
            positivity_certified: r.positivity_certified,
            min_node_value: r.solution.min_node_value(),
            value_at_zero: r.solution.value(0.0).ok(),
            limit: r.solution.limit(),
            residual_history: r.residual_history.clone(),
            certificate: certificate(cfg, spec, &k, r),
        })
        .collect();
    let table = solution_table(tabulated.map(|i| &report.distinct[i]))?;
    let result = report::to_value(&SolveReport {
        q,
        solver: &scfg,
        starts: &report.starts,
        solutions,
        below,
        above,
        tabulated,
        table: table.to_value(),
    })?;
    Ok((result, table))
}

#[derive(Serialize)]
struct HypothesisSummary<'a> {
    all_verified: bool,
    hard_violation: bool,
    entries: &'a [HypothesisEntry],
}

#[derive(Serialize)]
struct CertifyReport<'a> {
    window: (f64, f64),
    q: f64,
    hypotheses: HypothesisSummary<'a>,
    constants: &'a AsymptoticConstants,
    discrepancies: &'a [Discrepancy],
    conditions: &'a ConditionReport,
}

fn certify_error(cfg: &LoadedConfig, e: certify::CertifyError) -> CliError {
    CliError::Config {
        location: format!("{}: certify", cfg.path.display()),
        message: e.to_string(),
    }
}

/// Sampled constants, their comparison with stated values and the
/// condition report, together with the hypothesis checks they rest on.
pub fn certify_parts(
    cfg: &LoadedConfig,
    spec: &ProblemSpec,
    opts: &Options,
) -> Result<
    (
        HypothesisReport,
        AsymptoticConstants,
        Vec<Discrepancy>,
        ConditionReport,
    ),
    CliError,
> {
    let k = kernel(cfg, spec)?;
    let section = &cfg.config.certify;
    let ccfg = section.config();
    let constants = certify::estimate_asymptotics(
        spec,
        ccfg.window,
        ccfg.q,
        &ccfg.sampling,
        &section.overrides(),
    )
    .map_err(|e| certify_error(cfg, e))?;
    let refs = &cfg.config.references;
    let discrepancies =
        certify::compare_with_reference(&constants, &refs.constants(), refs.rel_tol)
            .map_err(|e| certify_error(cfg, e))?;
    let conditions =
        certify::certify(spec, &k, &constants, &ccfg).map_err(|e| certify_error(cfg, e))?;
    let mut vcfg = cfg.validation_config();
    vcfg.sampling = sampling(cfg, opts);
    let hypotheses = problem::validate(spec, &vcfg);
    Ok((hypotheses, constants, discrepancies, conditions))
}

fn run_certify(cfg: &LoadedConfig, spec: &ProblemSpec, opts: &Options) -> Result<Value, CliError> {
    let (hyp, constants, discrepancies, conditions) = certify_parts(cfg, spec, opts)?;
    report::to_value(&CertifyReport {
        window: conditions.window,
        q: conditions.q,
        hypotheses: HypothesisSummary {
            all_verified: hyp.all_verified(),
            hard_violation: hyp.has_hard_violation(),
            entries: &hyp.entries,
        },
        constants: &constants,
        discrepancies: &discrepancies,
        conditions: &conditions,
    })
}
