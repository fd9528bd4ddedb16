//! Problems in the general form `sum_i h_i(sum_j A_ij x_j)`, their split into
//! a smooth part and a proximable part, and dual and smoothed reformulations.

mod dual;
mod problem;

pub use dual::{
    dual_to_primal, fenchel_dual, regularize_then_dualize, smooth_term, smoothing_continuation,
    ContinuationStep, DualProblem,
};
pub use problem::{
    check_prox_computable, gradient_general, split, Mapping, Problem, ProxPart, ProxReport,
    SmoothPart, SplitProblem, SplittingError, Term, TermFn, ValueFn, VarId, Violation,
};
