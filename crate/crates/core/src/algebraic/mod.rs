//! Differential-operator algebra for the algebraic step.

pub mod hmatrix;
pub mod operator;
pub mod ops;
pub mod poincare;
pub mod verify;

pub use hmatrix::{build_h, build_m, det_h_explicit, det_h_expansion, det_h_numeric, pm_inverse, HInputs};
pub use operator::{Coef, DiffOperator, OperatorChain, StField, StGrid, Term};
pub use ops::{
    build_m_thm1, build_mstar_case_i, build_mstar_case_ii, build_mstar_thm1, build_q, build_s, op_l, op_l_star,
    op_n, op_n_star, MOperator,
};
pub use poincare::poincare_rayleigh;
pub use verify::{
    fit_order, verify_lm_identity, verify_ml_identity, IdentityKind, IdentityReport, LevelResidual, Theorem2Case,
};
