//! Distortion riskmetrics and optimal risk sharing on finite equiprobable grids.
//!
//! The crate covers the algebra of distortion functions ([`distortion`]), Choquet
//! evaluation and quantiles ([`riskmetric`]), closed-form inf-convolutions
//! ([`infconv`]), constructors for optimal allocations ([`allocate`]),
//! heterogeneous beliefs ([`beliefs`]), and randomized oracles ([`verify`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocate;
pub mod beliefs;
pub mod distortion;
pub mod error;
pub mod infconv;
pub mod io;
pub mod riskmetric;
pub mod verify;

pub use allocate::{AgentSpec, Allocation, Role, TailAssignment, TieRule};
pub use beliefs::BeliefMeasure;
pub use distortion::{envelope_min, g_transform, DistortionFunction, NamedKind, Quadratic};
pub use error::{Error, Result};
pub use infconv::{InfconvResult, Regime};
pub use riskmetric::{choquet, quantile, DiscreteRv, QuantileSide};
pub use verify::{SampleMode, VerificationReport};

/// Numerical tolerances shared across modules.
pub mod tol {
    /// Identities that hold exactly in real arithmetic are checked at this relative level.
    pub const EXACT: f64 = 1e-12;
    /// Comparisons across independent floating-point paths.
    pub const FLOAT: f64 = 1e-9;
    /// Probability levels this close to a breakpoint are treated as the breakpoint.
    pub const SNAP: f64 = 1e-12;

    /// `|a - b| <= tol * max(1, |a|, |b|)`.
    #[inline]
    pub fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * 1.0f64.max(a.abs()).max(b.abs())
    }

    /// `max(1, max |v|)` over a slice, used to scale absolute tolerances.
    pub fn scale_of(values: &[f64]) -> f64 {
        values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    }
}
