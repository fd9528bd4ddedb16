use std::sync::Arc;

use super::problem::{Problem, VarId};
use crate::error::{Error, Result};
use crate::fao::{adjoint_op, compose_linear, identity_op, scale_op, LinearOp};
use crate::funcs::{convex_conjugate, moreau_envelope, MoreauEnvelope, ProxFn, SmoothFn};
use crate::tensor::{Signal, Vector};

/// `minimize f*(-A* u) + g*(u)` with the map back to the primal variable.
#[derive(Clone, Debug)]
pub struct DualProblem {
    problem: Problem,
    u: VarId,
    conj: Arc<dyn SmoothFn>,
    op: Arc<dyn LinearOp>,
}

impl DualProblem {
    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn into_problem(self) -> Problem {
        self.problem
    }

    pub fn dual_var(&self) -> VarId {
        self.u
    }

    /// Smooth conjugate used by the dual and by the primal recovery.
    pub fn conjugate(&self) -> &Arc<dyn SmoothFn> {
        &self.conj
    }

    /// `x = grad f*(-A* u)`.
    pub fn recover(&self, u: &Signal) -> Result<Signal> {
        recover_with(self.conj.as_ref(), self.op.as_ref(), u)
    }
}

fn recover_with(conj: &dyn SmoothFn, op: &dyn LinearOp, u: &Signal) -> Result<Signal> {
    conj.gradient(&op.adjoint(u)?.scaled(-1.0))
}

fn assemble(
    conj: Arc<dyn SmoothFn>,
    g: Arc<dyn ProxFn>,
    op: Arc<dyn LinearOp>,
) -> Result<DualProblem> {
    let neg_adjoint = compose_linear(scale_op(&op.domain(), -1.0), adjoint_op(op.clone()))?;
    let codomain = op.codomain();
    let mut problem = Problem::new();
    let u = problem.variable("u", Signal::zeros(&codomain));
    problem.add_smooth(conj.clone(), vec![(u, neg_adjoint)])?;
    problem.add_nonsmooth(
        Arc::new(convex_conjugate(g)?),
        vec![(u, identity_op(&codomain))],
    )?;
    Ok(DualProblem {
        problem,
        u,
        conj,
        op,
    })
}

/// Fenchel dual of `minimize f(x) + g(A x)` for strongly convex `f` with a
/// closed-form conjugate and convex `g`.
pub fn fenchel_dual(
    f: Arc<dyn SmoothFn>,
    g: Arc<dyn ProxFn>,
    op: Arc<dyn LinearOp>,
) -> Result<DualProblem> {
    if !f.is_convex() || !g.is_convex() {
        return Err(Error::NotConvex("fenchel_dual"));
    }
    if !(f.strong_convexity() > 0.0) {
        return Err(Error::NotStronglyConvex("fenchel_dual"));
    }
    let conj = f
        .conjugate()
        .ok_or(Error::NotStronglyConvex("fenchel_dual"))?;
    assemble(conj, g, op)
}

/// `x* = grad f*(-A* u*)`.
pub fn dual_to_primal(f: &dyn SmoothFn, op: &dyn LinearOp, u: &Signal) -> Result<Signal> {
    let conj = f
        .conjugate()
        .ok_or(Error::NotStronglyConvex("dual_to_primal"))?;
    recover_with(conj.as_ref(), op, u)
}

/// Dual of `minimize f(x) + beta/2 |x|^2 + g(A x)`. The regularized term has
/// conjugate `(f*)^beta`, the Moreau envelope of `f*`, so it is smooth for
/// any convex `f` with a prox.
pub fn regularize_then_dualize(
    f: Arc<dyn ProxFn>,
    g: Arc<dyn ProxFn>,
    op: Arc<dyn LinearOp>,
    beta: f64,
) -> Result<DualProblem> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param(format!(
            "regularization weight must be positive, got {beta}"
        )));
    }
    if !g.is_convex() {
        return Err(Error::NotConvex("regularize_then_dualize"));
    }
    let conj = moreau_envelope(convex_conjugate(f)?, beta)?;
    assemble(Arc::new(conj), g, op)
}

/// `h^beta`; `beta()` on the result reports the smoothing level.
pub fn smooth_term(h: Arc<dyn ProxFn>, beta: f64) -> Result<MoreauEnvelope<Arc<dyn ProxFn>>> {
    moreau_envelope(h, beta)
}

#[derive(Clone, Debug)]
pub struct ContinuationStep<X> {
    pub beta: f64,
    pub x: X,
}

/// Solves a sequence of smoothed problems with `beta_{t+1} = beta_t / 2`,
/// each warm-started from the previous solution, until two successive
/// solutions are closer than `tol` or `max_rounds` is reached.
pub fn smoothing_continuation<X, S>(
    beta0: f64,
    tol: f64,
    max_rounds: usize,
    x0: X,
    mut solve_round: S,
) -> Result<Vec<ContinuationStep<X>>>
where
    X: Vector,
    S: FnMut(f64, &X) -> Result<X>,
{
    if !(beta0 > 0.0 && beta0.is_finite()) {
        return Err(Error::param(format!(
            "initial smoothing must be positive, got {beta0}"
        )));
    }
    let mut history: Vec<ContinuationStep<X>> = Vec::new();
    let mut beta = beta0;
    let mut x = x0;
    for _ in 0..max_rounds {
        let next = solve_round(beta, &x)?;
        let settled = !history.is_empty() && next.sub(&x)?.norm2() < tol;
        history.push(ContinuationStep {
            beta,
            x: next.clone(),
        });
        if settled {
            break;
        }
        x = next;
        beta *= 0.5;
    }
    Ok(history)
}
