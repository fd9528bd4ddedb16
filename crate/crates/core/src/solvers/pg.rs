//! Forward-backward splitting and its accelerated variant.

use super::{
    enforce_majorization, IterRecord, Observer, Point, Recorder, Solution, SolverConfig,
    SolverKind, Status, Stepsize,
};
use crate::error::{Error, Result};
use crate::funcs::{ProxFn, SmoothFn};
use crate::tensor::Vector;

fn finish<X>(x: X, status: Status, iterations: usize, rec: Recorder) -> Result<Solution<X>> {
    Ok(Solution {
        x,
        status,
        iterations,
        trace: rec.trace,
    })
}

/// Proximal gradient: `x_{k+1} = prox_{gamma g}(x_k - gamma grad f(x_k))`
/// with `gamma = 1/L` unless configured.
pub fn solve_pg<X, F, G>(f: &F, g: &G, x0: &X, config: &SolverConfig) -> Result<Solution<X>>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    pg_observed(f, g, x0, config, &mut |_, _| {})
}

pub(crate) fn pg_observed<X, F, G>(
    f: &F,
    g: &G,
    x0: &X,
    config: &SolverConfig,
    observer: &mut Observer<'_, X>,
) -> Result<Solution<X>>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    let mut step = Stepsize::resolve(f, x0, config, 1.0)?;
    let mut rec = Recorder::new(SolverKind::Pg);
    let mut g_x = g.value(x0)?;
    let mut p = Point::evaluate(f, g, x0.clone(), step.gamma)?;
    for k in 0..=config.max_iters {
        if !p.is_finite() {
            return Err(rec.non_finite(k));
        }
        enforce_majorization(f, g, &mut p, &mut step)?;
        let (residual, step_sq, fbe) = p.summary(step.gamma)?;
        rec.push_observed(
            IterRecord {
                k,
                objective: p.fx + g_x,
                fbe: Some(fbe),
                residual,
                step_sq,
                tau: None,
                gamma: step.gamma,
                sigma: None,
                elapsed: 0.0,
            },
            &p.x,
            observer,
        );
        if residual <= config.tol {
            return finish(p.v, Status::Converged, k, rec);
        }
        if k == config.max_iters {
            return finish(p.v, Status::MaxIters, k, rec);
        }
        g_x = p.gv;
        p = Point::evaluate(f, g, p.v, step.gamma)?;
    }
    unreachable!("loop returns at k == max_iters")
}

/// `theta_{k+1} = (1 + sqrt(1 + 4 theta_k^2)) / 2`.
pub fn fpg_theta_next(theta: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt())
}

/// Fast proximal gradient with Nesterov extrapolation. Convex problems only.
pub fn solve_fpg<X, F, G>(f: &F, g: &G, x0: &X, config: &SolverConfig) -> Result<Solution<X>>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    fpg_observed(f, g, x0, config, &mut |_, _| {})
}

pub(crate) fn fpg_observed<X, F, G>(
    f: &F,
    g: &G,
    x0: &X,
    config: &SolverConfig,
    observer: &mut Observer<'_, X>,
) -> Result<Solution<X>>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    if !f.is_convex() || !g.is_convex() {
        return Err(Error::NotConvex("the fast proximal gradient method"));
    }
    let mut step = Stepsize::resolve(f, x0, config, 1.0)?;
    let mut rec = Recorder::new(SolverKind::Fpg);
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut theta = 1.0;
    let mut objective = f.value(x0)? + g.value(x0)?;
    for k in 0..=config.max_iters {
        let mut p = Point::evaluate(f, g, y, step.gamma)?;
        if !p.is_finite() {
            return Err(rec.non_finite(k));
        }
        enforce_majorization(f, g, &mut p, &mut step)?;
        let (residual, step_sq, _) = p.summary(step.gamma)?;
        rec.push_observed(
            IterRecord {
                k,
                objective,
                fbe: None,
                residual,
                step_sq,
                tau: None,
                gamma: step.gamma,
                sigma: None,
                elapsed: 0.0,
            },
            &x,
            observer,
        );
        if residual <= config.tol {
            return finish(p.v, Status::Converged, k, rec);
        }
        if k == config.max_iters {
            return finish(p.v, Status::MaxIters, k, rec);
        }
        let x_next = p.v;
        let theta_next = fpg_theta_next(theta);
        let momentum = (theta - 1.0) / theta_next;
        y = x_next.sub(&x)?.axpy(momentum, &x_next)?;
        objective = f.value(&x_next)? + p.gv;
        x = x_next;
        theta = theta_next;
    }
    unreachable!("loop returns at k == max_iters")
}
