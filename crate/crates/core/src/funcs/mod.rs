//! Proximable and smooth functions.
//!
//! `prox(x, gamma)` returns a minimizer of `g(z) + |z - x|^2 / (2 gamma)`.
//! Where that minimizer is not unique (nonconvex `g`), implementations pick
//! deterministically: ties go to zero and lower indices win.

mod calculus;
mod catalog;
mod sets;
mod smooth;

use std::fmt;

pub use calculus::{
    affine_addition, convex_conjugate, indexed_sum, postcompose, precompose_tight_frame,
    regularize, separable_sum, translate, AffineAddition, ConvexConjugate, IndexedSum, Postcompose,
    PrecomposeTightFrame, Regularize, SeparableSum, Translate,
};
pub use catalog::{
    l0_pseudo_norm, l1_norm, l2_norm, least_squares_quadratic, mixed_l21_norm, nuclear_norm,
    zero_fn, L0PseudoNorm, L1Norm, L2Norm, LeastSquaresQuadratic, MixedL21Norm, NuclearNorm, Zero,
};
pub use sets::{
    affine_set, ball_l0, ball_l2, box_set, halfspace_ge, halfspace_le, rank_ball, AffineSet,
    BallL0, BallL2, BoxSet, RankBall, FEASIBILITY_TOL,
};
pub use smooth::{
    cross_entropy, least_squares, least_squares_dag, linear_fn, moreau_envelope, regularized,
    smooth_sum, sqr_dist, CrossEntropy, DagComposite, LinearComposite, LinearFn, MoreauEnvelope,
    Regularized, SmoothSum, SqrDist, PROBABILITY_FLOOR,
};

use crate::error::{Error, Result};
use crate::tensor::Signal;

/// A possibly nonsmooth, extended-real-valued function with a computable prox.
pub trait ProxFn<X = Signal>: Send + Sync + fmt::Debug {
    /// `g(x)`; `f64::INFINITY` outside the domain.
    fn value(&self, x: &X) -> Result<f64>;

    fn prox(&self, x: &X, gamma: f64) -> Result<X>;

    /// `(z, g(z))` with `z = prox(x, gamma)`. Indicators report 0 for their
    /// own projections instead of re-testing feasibility.
    fn prox_and_value(&self, x: &X, gamma: f64) -> Result<(X, f64)> {
        let z = self.prox(x, gamma)?;
        let v = self.value(&z)?;
        Ok((z, v))
    }

    fn is_convex(&self) -> bool;

    fn is_separable(&self) -> bool {
        false
    }

    /// `g*(u) = sup_x <u, x> - g(x)`, when a closed form is known.
    fn conjugate_value(&self, _u: &X) -> Result<f64> {
        Err(Error::Unsupported(format!(
            "no closed-form conjugate for {self:?}"
        )))
    }
}

/// A differentiable function with Lipschitz gradient.
pub trait SmoothFn<X = Signal>: Send + Sync + fmt::Debug {
    fn value(&self, x: &X) -> Result<f64>;

    fn value_and_gradient(&self, x: &X) -> Result<(f64, X)>;

    fn gradient(&self, x: &X) -> Result<X> {
        self.value_and_gradient(x).map(|(_, g)| g)
    }

    /// Known Lipschitz constant of the gradient.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn is_convex(&self) -> bool;

    /// Strong convexity modulus (0 when not strongly convex).
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    /// Convex conjugate, when it is smooth and available in closed form.
    fn conjugate(&self) -> Option<std::sync::Arc<dyn SmoothFn<X>>> {
        None
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "prox stepsize must be positive, got {gamma}"
        )))
    }
}

pub(crate) fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be nonnegative, got {v}")))
    }
}
