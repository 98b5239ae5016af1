//! JSON run configuration and its translation into a [`ProblemSpec`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ibvp_core::certify::{AsymptoticSampling, CertifyConfig, ExtendedReal};
use ibvp_core::exprlang::{self, Bindings, Expr, Var};
use ibvp_core::kernel::{KernelConfig, SlCoefficients};
use ibvp_core::problem::{Impulse, ImpulseSet, ProblemSpec, SamplingConfig, ValidationConfig};
use ibvp_core::quadrature::QuadratureConfig;
use ibvp_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    /// Free-form notes, echoed into every report.
    #[serde(default)]
    pub metadata: serde_json::Value,
    pub problem: ProblemSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub references: ReferenceSection,
    #[serde(default)]
    pub green: GreenSection,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub coefficients: Coefficients,
    /// `p(t)`
    pub p: String,
    /// `f(t, x, y)` with `y` standing for `x'`.
    #[serde(default = "zero_expr")]
    pub f: String,
    /// `k(t)`
    #[serde(default = "zero_expr")]
    pub k: String,
    /// `h(x, y)`
    #[serde(default = "zero_expr")]
    pub h: String,
    /// `g1(x)`
    #[serde(default = "zero_expr")]
    pub g1: String,
    /// `g2(x)`
    #[serde(default = "zero_expr")]
    pub g2: String,
    /// `ψ(s)`; `t` is accepted as a synonym of `s`.
    #[serde(default = "zero_expr")]
    pub psi: String,
    #[serde(default)]
    pub impulses: Vec<ImpulseEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseEntry {
    pub t: f64,
    /// `I_k(x)`
    pub jump: String,
    /// `Ī_k(x)`
    pub slope_jump: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub kernel: KernelConfig,
    /// Quadrature for the hypothesis checks.
    pub quadrature: QuadratureConfig,
    pub sampling: SamplingConfig,
    pub solver: SolveConfig,
}

/// `inf` as a string or a plain number.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ConfigReal {
    Number(f64),
    Text(InfText),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub enum InfText {
    #[serde(rename = "inf", alias = "+inf", alias = "infinity", alias = "Infinity")]
    Inf,
}

impl From<ConfigReal> for ExtendedReal {
    fn from(v: ConfigReal) -> Self {
        match v {
            ConfigReal::Number(x) => ExtendedReal::Finite(x),
            ConfigReal::Text(InfText::Inf) => ExtendedReal::PosInfinity,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    pub window: (f64, f64),
    pub q: f64,
    pub quadrature: QuadratureConfig,
    pub sampling: AsymptoticSampling,
    pub sup_horizon: Option<f64>,
    /// Constants replacing the sampled estimates, by name (`f_0`, `h^q`, ...).
    pub overrides: BTreeMap<String, ConfigReal>,
}

impl Default for CertifySection {
    fn default() -> Self {
        let d = CertifyConfig::default();
        CertifySection {
            window: d.window,
            q: d.q,
            quadrature: d.quadrature,
            sampling: d.sampling,
            sup_horizon: d.sup_horizon,
            overrides: BTreeMap::new(),
        }
    }
}

impl CertifySection {
    pub fn config(&self) -> CertifyConfig {
        CertifyConfig {
            window: self.window,
            q: self.q,
            quadrature: self.quadrature.clone(),
            sampling: self.sampling.clone(),
            sup_horizon: self.sup_horizon,
        }
    }

    pub fn overrides(&self) -> BTreeMap<String, ExtendedReal> {
        self.overrides
            .iter()
            .map(|(k, &v)| (k.clone(), v.into()))
            .collect()
    }
}

/// Externally stated values the computed ones are compared against.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    /// Hypothesis name (`H1`..`H7`) to the stated value of its integral.
    pub hypotheses: BTreeMap<String, f64>,
    /// Asymptotic constants by name.
    pub constants: BTreeMap<String, ConfigReal>,
    pub rel_tol: f64,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        ReferenceSection {
            hypotheses: BTreeMap::new(),
            constants: BTreeMap::new(),
            rel_tol: 1e-6,
        }
    }
}

impl ReferenceSection {
    pub fn constants(&self) -> BTreeMap<String, ExtendedReal> {
        self.constants
            .iter()
            .map(|(k, &v)| (k.clone(), v.into()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenSection {
    pub t: GridSpec,
    pub s: GridSpec,
}

impl Default for GreenSection {
    fn default() -> Self {
        let g = GridSpec {
            start: 0.0,
            stop: 4.0,
            points: 9,
        };
        GreenSection { t: g, s: g }
    }
}

/// A parsed configuration with its source location and hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: RunConfig,
    /// `sha256:<hex>` of the raw file bytes.
    pub hash: String,
    source: String,
}

pub fn config_hash(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let source = String::from_utf8(bytes).map_err(|e| CliError::Config {
            location: path.display().to_string(),
            message: format!("not valid UTF-8: {e}"),
        })?;
        Self::from_source(path, source)
    }

    pub fn from_source(path: &Path, source: String) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(&source).map_err(|e| CliError::Config {
            location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
            message: strip_position(&e.to_string()),
        })?;
        let loaded = LoadedConfig {
            path: path.to_path_buf(),
            hash: config_hash(source.as_bytes()),
            config,
            source,
        };
        loaded.problem()?;
        Ok(loaded)
    }

    /// File position of an expression error: the string literal is located
    /// in the source and the column inside the expression is added.
    fn expr_error(
        &self,
        field: &str,
        expr: &str,
        line: usize,
        col: usize,
        message: String,
    ) -> CliError {
        let literal = serde_json::to_string(expr).unwrap_or_default();
        let location = match self.source.find(&literal) {
            Some(offset) if line == 1 && !expr.contains('\n') => {
                let before = &self.source[..offset];
                let file_line = before.matches('\n').count() + 1;
                let line_start = before.rfind('\n').map_or(0, |i| i + 1);
                let file_col = before[line_start..].chars().count() + 1 + col;
                format!("{}:{file_line}:{file_col}", self.path.display())
            }
            _ => format!("{}: {field}", self.path.display()),
        };
        CliError::Config {
            location,
            message: format!("{field}: {message}"),
        }
    }

    fn parse_expr(&self, field: &str, src: &str, allowed: &[Var]) -> Result<Expr, CliError> {
        let expr = exprlang::parse(src).map_err(|e| {
            let (line, col) = e.position();
            self.expr_error(field, src, line, col, strip_position(&e.to_string()))
        })?;
        if let Some(v) = expr.variables().into_iter().find(|v| !allowed.contains(v)) {
            let names: Vec<&str> = allowed.iter().map(|v| v.name()).collect();
            return Err(CliError::Config {
                location: format!("{}: {field}", self.path.display()),
                message: format!(
                    "{field}: variable `{}` is not allowed here (allowed: {})",
                    v.name(),
                    names.join(", ")
                ),
            });
        }
        Ok(expr)
    }

    /// Build the problem instance. Expressions are evaluated with IEEE
    /// semantics so that overflow and poles surface as `inf`/`NaN` for the
    /// numerical checks to classify.
    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let pr = &self.config.problem;
        let c = pr.coefficients;
        let time = [Var::T, Var::S];
        let p = self.parse_expr("problem.p", &pr.p, &time)?;
        let f = self.parse_expr("problem.f", &pr.f, &[Var::T, Var::X, Var::Y])?;
        let k = self.parse_expr("problem.k", &pr.k, &time)?;
        let h = self.parse_expr("problem.h", &pr.h, &[Var::X, Var::Y])?;
        let g1 = self.parse_expr("problem.g1", &pr.g1, &[Var::X])?;
        let g2 = self.parse_expr("problem.g2", &pr.g2, &[Var::X])?;
        let psi = self.parse_expr("problem.psi", &pr.psi, &time)?;

        let mut impulses = Vec::with_capacity(pr.impulses.len());
        for (i, imp) in pr.impulses.iter().enumerate() {
            let jump =
                self.parse_expr(&format!("problem.impulses[{i}].jump"), &imp.jump, &[Var::X])?;
            let slope = self.parse_expr(
                &format!("problem.impulses[{i}].slope_jump"),
                &imp.slope_jump,
                &[Var::X],
            )?;
            impulses.push(Impulse::new(imp.t, state_fn(jump), state_fn(slope)));
        }
        let impulses = ImpulseSet::new(impulses).map_err(|e| CliError::Config {
            location: format!("{}: problem.impulses", self.path.display()),
            message: e.to_string(),
        })?;

        let weight = time_fn(p);
        let f = Arc::new(f);
        let h = Arc::new(h);
        Ok(ProblemSpec::new(
            SlCoefficients::new(c.a1, c.a2, c.b1, c.b2),
            Arc::new(weight),
        )
        .with_f(move |t, x, y| f.eval_ieee(&Bindings::full(t, x, y)))
        .with_k(time_fn(k))
        .with_h(move |x, y| {
            h.eval_ieee(&Bindings {
                x: Some(x),
                y: Some(y),
                ..Default::default()
            })
        })
        .with_g(state_fn(g1), state_fn(g2))
        .with_psi(time_fn(psi))
        .with_impulses(impulses))
    }

    pub fn validation_config(&self) -> ValidationConfig {
        let n = &self.config.numerics;
        ValidationConfig {
            kernel: n.kernel.clone(),
            quadrature: n.quadrature.clone(),
            sampling: n.sampling.clone(),
        }
    }
}

fn time_fn(e: Expr) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    move |t| e.eval_ieee(&Bindings::time(t))
}

fn state_fn(e: Expr) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    move |x| e.eval_ieee(&Bindings::state(x))
}

/// serde_json appends " at line L column C"; the location is reported
/// separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}
