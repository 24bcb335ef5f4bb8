//! Null controls for coupled linear parabolic systems driven by one control
//! fewer than the number of equations.
//!
//! The construction has two steps. An analytic step computes a penalized
//! HUM control acting on every equation (`hum`). An algebraic step then
//! removes the extra control with a differential operator `𝓜` satisfying
//! `𝓛 ∘ 𝓜 = 𝓝` or `𝓛 ∘ 𝓜 = Id` (`algebraic`). `pipeline` assembles the
//! final pair `(y, u) = (z − ẑ, −v̂)` and checks it.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::should_implement_trait, clippy::type_complexity, clippy::redundant_guards)]

pub mod algebraic;
pub mod banded;
pub mod config;
pub mod dense;
pub mod error;
pub mod expr;
pub mod field;
pub mod grid;
pub mod hum;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use expr::Expr;
pub use field::{CallbackBundle, CoefficientField};
pub use grid::{DiscreteNorms, Grid, GridFunction, Trajectory};
pub use model::{CoefficientSet, Interval, ProblemSpec, SpaceTimeWindow};
pub use solver::Propagator;
