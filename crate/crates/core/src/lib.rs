//! Numerical machinery for second-order impulsive boundary value problems
//! with integral boundary conditions on the half-line `[0, ∞)`:
//!
//! * [`kernel`] builds the Green's function and its derived constants,
//! * [`quadrature`] integrates on finite panels and on `[0, ∞)`,
//! * [`problem`] holds a problem instance, candidate solutions and the
//!   sampled hypothesis checks,
//! * [`operator`] evaluates the fixed-point operator and the residuals of
//!   the original boundary value problem,
//! * [`solver`] runs damped Picard iteration from several starts,
//! * [`certify`] estimates the asymptotic constants and evaluates the
//!   two-solution existence conditions,
//! * [`exprlang`] parses the expressions used in configuration files.

// Negated comparisons are deliberate: they reject NaN together with out-of-range values.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::should_implement_trait,
    clippy::needless_range_loop
)]

pub mod certify;
pub mod exprlang;
pub mod kernel;
pub mod operator;
pub mod problem;
pub mod quadrature;
pub mod solver;

use serde::Serialize;

/// Which one-sided limit to take at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}
