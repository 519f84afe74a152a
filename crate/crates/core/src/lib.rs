//! Growth of plant stems and vines as evolving curves.
//!
//! A stem is a curve `s -> P(t, s)` parameterized by the birth time `s` of its
//! cells. Its unit tangents rotate in response to gravity and, for vines, to the
//! proximity of obstacles. Obstacles are hard unilateral constraints: after each
//! smooth growth step the curve is pushed back out by the rotation field of
//! least elastic energy.
//!
//! Modules, bottom-up:
//! - [`geom`]: vectors, the rotation exponential, trapezoid quadrature.
//! - [`obstacle`]: signed distance fields and the sensing field used for clinging.
//! - [`stem`]: the discretized curve, elongation and penetration bookkeeping.
//! - [`growth`]: the smooth growth kernel and rotation step.
//! - [`pushout`]: constraint handling (push-out operator, contact measures,
//!   admissible-cone checks, Volterra recovery, breakdown detection).
//! - [`sim`]: the operator-splitting driver and trajectory diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod geom;
pub mod growth;
pub mod obstacle;
pub mod pushout;
pub mod sim;
pub mod stem;

pub use geom::{QuadratureGrid, Rot3, Vec3};
pub use growth::GrowthParams;
pub use obstacle::{Obstacle, ObstacleSet, SensingParams};
pub use pushout::{BreakdownReport, ContactMeasure, EnergyWeights, RotationField};
pub use sim::{FrameLog, RunOutcome, RunStatus, SimConfig};
pub use stem::{ContactSet, ElongationLaw, StemState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("degenerate gradient at ({x}, {y}, {z})")]
    DegenerateGradient { x: f64, y: f64, z: f64 },

    #[error("configuration close to breakdown at node {node}: multiplier denominator {denominator:e}")]
    BreakdownProximity { node: usize, denominator: f64 },

    #[error("push-out did not converge after {iterations} iterations (residual depth {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("ill-conditioned frame while recovering rotation field: {0}")]
    IllConditionedFrame(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
