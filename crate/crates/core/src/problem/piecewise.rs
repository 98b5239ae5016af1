//! Piecewise-C¹ functions on `[0, ∞)` with jumps at the impulse points.
//!
//! `[0, horizon]` is cut at every impulse point and each segment is split
//! into equal panels. On every panel, value and derivative are stored
//! separately at Chebyshev–Lobatto nodes and evaluated by barycentric
//! interpolation. Panel endpoints are nodes, so the one-sided limits at an
//! impulse point are the stored endpoint values of the two adjacent panels.
//!
//! Beyond the horizon `H` the function follows
//! `x(t) = x(∞) + (x(H) − x(∞))·e^{−(t−H)}`, `x'(t) = x'(H)·e^{−(t−H)}`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ProblemError;
use crate::Side;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// End of the interpolated region. `None` means "last impulse + 10".
    pub horizon: Option<f64>,
    pub max_panel_length: f64,
    /// Polynomial degree per panel; each panel carries `order + 1` nodes.
    pub order: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            horizon: None,
            max_panel_length: 0.5,
            order: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    breakpoints: Vec<f64>,
    horizon: f64,
    panels: Vec<Panel>,
    order: usize,
    /// Reference nodes on [-1, 1], ascending.
    reference: Vec<f64>,
    bary: Vec<f64>,
}

impl Mesh {
    pub fn new(breakpoints: &[f64], cfg: &MeshConfig) -> Result<Self, ProblemError> {
        if cfg.order < 2 || !(cfg.max_panel_length > 0.0) {
            return Err(ProblemError::InvalidMesh(
                "need order >= 2 and a positive panel length".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0])
            || breakpoints.iter().any(|&t| !(t > 0.0 && t.is_finite()))
        {
            return Err(ProblemError::InvalidImpulseTimes);
        }
        let last = breakpoints.last().copied().unwrap_or(0.0);
        let horizon = cfg.horizon.unwrap_or(last + 10.0);
        if !(horizon > last && horizon.is_finite()) {
            return Err(ProblemError::InvalidMesh(format!(
                "horizon {horizon} must exceed the last impulse point {last}"
            )));
        }
        let mut panels = Vec::new();
        let mut lo = 0.0;
        for &hi in breakpoints.iter().chain(std::iter::once(&horizon)) {
            let n = ((hi - lo) / cfg.max_panel_length).ceil().max(1.0) as usize;
            let h = (hi - lo) / n as f64;
            for i in 0..n {
                let a = lo + i as f64 * h;
                let b = if i + 1 == n {
                    hi
                } else {
                    lo + (i + 1) as f64 * h
                };
                panels.push(Panel { a, b });
            }
            lo = hi;
        }
        let m = cfg.order;
        let reference: Vec<f64> = (0..=m).map(|j| -(PI * j as f64 / m as f64).cos()).collect();
        let bary = (0..=m)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == m {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        Ok(Mesh {
            breakpoints: breakpoints.to_vec(),
            horizon,
            panels,
            order: m,
            reference,
            bary,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.order + 1
    }

    pub fn node_count(&self) -> usize {
        self.panels.len() * self.nodes_per_panel()
    }

    /// Time of node `j` of panel `p`. Endpoints are returned exactly.
    pub fn node(&self, p: usize, j: usize) -> f64 {
        let Panel { a, b } = self.panels[p];
        if j == 0 {
            a
        } else if j == self.order {
            b
        } else {
            0.5 * (a + b) + 0.5 * (b - a) * self.reference[j]
        }
    }

    /// The side a node represents: left endpoints of a panel carry right
    /// limits and vice versa.
    pub fn node_side(&self, j: usize) -> Side {
        if j == self.order {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn is_breakpoint(&self, t: f64) -> bool {
        self.breakpoints
            .binary_search_by(|b| b.total_cmp(&t))
            .is_ok()
    }

    fn locate(&self, t: f64, side: Side) -> usize {
        let idx = self.panels.partition_point(|p| p.b < t);
        let idx = idx.min(self.panels.len() - 1);
        if side == Side::Right
            && self.panels[idx].b == t
            && idx + 1 < self.panels.len()
            && self.is_breakpoint(t)
        {
            idx + 1
        } else {
            idx
        }
    }

    /// Distinct grid times in increasing order; impulse points appear
    /// twice, once per side.
    pub fn grid_points(&self) -> Vec<(f64, Option<Side>)> {
        let mut out = Vec::with_capacity(self.node_count());
        for p in 0..self.panels.len() {
            for j in 0..=self.order {
                let t = self.node(p, j);
                if self.is_breakpoint(t) {
                    out.push((t, Some(self.node_side(j))));
                } else if out.last().is_none_or(|&(last, _)| last != t) {
                    out.push((t, None));
                }
            }
        }
        out
    }

    fn interpolate(&self, p: usize, data: &[f64], t: f64) -> f64 {
        let Panel { a, b } = self.panels[p];
        let z = (2.0 * t - a - b) / (b - a);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..=self.order {
            let diff = z - self.reference[j];
            if diff == 0.0 {
                return data[j];
            }
            let w = self.bary[j] / diff;
            num += w * data[j];
            den += w;
        }
        num / den
    }
}

/// A member of the space of bounded piecewise-C¹ functions with a finite
/// limit at infinity, represented on a [`Mesh`].
#[derive(Debug, Clone)]
pub struct PiecewiseC1Function {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    limit: f64,
    flux_limit: Option<f64>,
}

impl PiecewiseC1Function {
    /// Sample `sample(t, side) -> (x, x')` at every node.
    pub fn from_fn<F>(mesh: Arc<Mesh>, sample: F, limit: f64) -> Self
    where
        F: Fn(f64, Side) -> (f64, f64),
    {
        let n = mesh.nodes_per_panel();
        let mut values = Vec::with_capacity(mesh.node_count());
        let mut derivs = Vec::with_capacity(mesh.node_count());
        for p in 0..mesh.panels().len() {
            for j in 0..n {
                let (v, d) = sample(mesh.node(p, j), mesh.node_side(j));
                values.push(v);
                derivs.push(d);
            }
        }
        PiecewiseC1Function {
            mesh,
            values,
            derivs,
            limit,
            flux_limit: None,
        }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.node_count();
        PiecewiseC1Function {
            mesh,
            values: vec![c; n],
            derivs: vec![0.0; n],
            limit: c,
            flux_limit: Some(0.0),
        }
    }

    /// Build from node data laid out panel by panel.
    pub fn from_nodes(
        mesh: Arc<Mesh>,
        values: Vec<f64>,
        derivs: Vec<f64>,
        limit: f64,
        flux_limit: Option<f64>,
    ) -> Result<Self, ProblemError> {
        if values.len() != mesh.node_count() || derivs.len() != mesh.node_count() {
            return Err(ProblemError::InvalidMesh(format!(
                "expected {} node values, got {} and {}",
                mesh.node_count(),
                values.len(),
                derivs.len()
            )));
        }
        Ok(PiecewiseC1Function {
            mesh,
            values,
            derivs,
            limit,
            flux_limit,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn limit(&self) -> f64 {
        self.limit
    }

    /// `lim p(t)·x'(t)` when known exactly; `None` when only the tail model
    /// is available.
    pub fn flux_limit(&self) -> Option<f64> {
        self.flux_limit
    }

    pub fn with_flux_limit(mut self, flux: Option<f64>) -> Self {
        self.flux_limit = flux;
        self
    }

    fn end_state(&self) -> (f64, f64) {
        let last = self.values.len() - 1;
        (self.values[last], self.derivs[last])
    }

    /// Value and derivative at `t`. At impulse points `side` picks the
    /// one-sided limit; elsewhere it is ignored.
    pub fn eval(&self, t: f64, side: Side) -> Result<(f64, f64), ProblemError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(ProblemError::TailModel { t });
        }
        let h = self.mesh.horizon();
        if t > h {
            let (xh, dh) = self.end_state();
            let decay = (-(t - h)).exp();
            return Ok((self.limit + (xh - self.limit) * decay, dh * decay));
        }
        let p = self.mesh.locate(t, side);
        let n = self.mesh.nodes_per_panel();
        let range = p * n..(p + 1) * n;
        Ok((
            self.mesh.interpolate(p, &self.values[range.clone()], t),
            self.mesh.interpolate(p, &self.derivs[range], t),
        ))
    }

    /// `x(t)` with the left-continuous convention at impulse points.
    pub fn value(&self, t: f64) -> Result<f64, ProblemError> {
        Ok(self.eval(t, Side::Left)?.0)
    }

    fn same_mesh(&self, other: &Self) -> Result<(), ProblemError> {
        if Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh {
            Ok(())
        } else {
            Err(ProblemError::MeshMismatch)
        }
    }

    /// `α·self + β·other` on the shared mesh.
    pub fn linear_combination(
        &self,
        alpha: f64,
        other: &Self,
        beta: f64,
    ) -> Result<Self, ProblemError> {
        self.same_mesh(other)?;
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect()
        };
        Ok(PiecewiseC1Function {
            mesh: self.mesh.clone(),
            values: mix(&self.values, &other.values),
            derivs: mix(&self.derivs, &other.derivs),
            limit: alpha * self.limit + beta * other.limit,
            flux_limit: match (self.flux_limit, other.flux_limit) {
                (Some(a), Some(b)) => Some(alpha * a + beta * b),
                _ => None,
            },
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        PiecewiseC1Function {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
            derivs: self.derivs.iter().map(|v| alpha * v).collect(),
            limit: alpha * self.limit,
            flux_limit: self.flux_limit.map(|f| alpha * f),
        }
    }

    pub fn min_node_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sup_t (|x(t)| + |x'(t)|)`, from node values, five sub-samples per
    /// node gap, a refinement pass around the running argmax and the
    /// tail limit.
    pub fn bpc1_norm(&self) -> f64 {
        let mesh = &*self.mesh;
        let n = mesh.nodes_per_panel();
        let mut best = self.limit.abs();
        let mut arg: Option<(usize, f64, f64)> = None;
        for p in 0..mesh.panels().len() {
            let vals = &self.values[p * n..(p + 1) * n];
            let ders = &self.derivs[p * n..(p + 1) * n];
            for j in 0..n {
                let v = vals[j].abs() + ders[j].abs();
                if v > best {
                    best = v;
                    arg = Some((
                        p,
                        mesh.node(p, j.saturating_sub(1)),
                        mesh.node(p, (j + 1).min(n - 1)),
                    ));
                }
            }
            for j in 0..n - 1 {
                let (lo, hi) = (mesh.node(p, j), mesh.node(p, j + 1));
                for k in 1..5 {
                    let t = lo + (hi - lo) * k as f64 / 5.0;
                    let v = mesh.interpolate(p, vals, t).abs() + mesh.interpolate(p, ders, t).abs();
                    if v > best {
                        best = v;
                        arg = Some((p, lo, hi));
                    }
                }
            }
        }
        if let Some((p, lo, hi)) = arg {
            let vals = &self.values[p * n..(p + 1) * n];
            let ders = &self.derivs[p * n..(p + 1) * n];
            for k in 0..=64 {
                let t = lo + (hi - lo) * k as f64 / 64.0;
                let v = mesh.interpolate(p, vals, t).abs() + mesh.interpolate(p, ders, t).abs();
                best = best.max(v);
            }
        }
        best
    }
}
