//! PANOC: forward-backward steps blended with L-BFGS steps on the residual,
//! globalized by a line search on the forward-backward envelope.

use super::{
    default_sigma, enforce_majorization, IterRecord, LbfgsBuffer, Observer, Point, Recorder,
    Solution, SolverConfig, SolverKind, Status, Stepsize, DECREASE_SLACK, PANOC_STEP_FRACTION,
};
use crate::error::{Error, Result};
use crate::funcs::{ProxFn, SmoothFn};
use crate::tensor::Vector;

/// Iterates `x_{k+1} = (1 - tau) v_k + tau (x_k + d_k)` where `v_k` is the
/// forward-backward step, `d_k = -H_k R(x_k)` the L-BFGS direction, and `tau`
/// the largest of `1, 1/2, 1/4, ...` giving
/// `fbe(x_{k+1}) <= fbe(x_k) - sigma |v_k - x_k|^2`. After `max_backtracks`
/// halvings the prox point `v_k` itself is taken (`tau = 0`).
pub fn solve_panoc<X, F, G>(f: &F, g: &G, x0: &X, config: &SolverConfig) -> Result<Solution<X>>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    panoc_observed(f, g, x0, config, &mut |_, _| {})
}

pub(crate) fn panoc_observed<X, F, G>(
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
    let mut step = Stepsize::resolve(f, x0, config, PANOC_STEP_FRACTION)?;
    let sigma_for = |step: &Stepsize| {
        config
            .sigma
            .unwrap_or_else(|| default_sigma(step.gamma, step.lipschitz.min(step.curvature())))
    };
    let mut sigma = sigma_for(&step);
    if let Some(s) = config.sigma {
        let upper = (1.0 - step.gamma * step.lipschitz) / (2.0 * step.gamma);
        if !(s > 0.0 && s < upper) && !step.adaptive {
            return Err(Error::param(format!(
                "line-search constant {s} outside (0, {upper})"
            )));
        }
    }

    let mut rec = Recorder::new(SolverKind::Panoc);
    let mut buffer = LbfgsBuffer::new(config.memory);
    let mut p = Point::evaluate(f, g, x0.clone(), step.gamma)?;
    if !p.is_finite() {
        return Err(rec.non_finite(0));
    }
    if enforce_majorization(f, g, &mut p, &mut step)? {
        sigma = sigma_for(&step);
    }

    for k in 0..=config.max_iters {
        let gamma = step.gamma;
        let fbe_x = p.fbe(gamma)?;
        let step_sq = p.step_sq()?;
        let r = p.residual()?;
        let residual = r.norm_inf() / gamma;
        let mut record = IterRecord {
            k,
            objective: f.value(&p.v)? + p.gv,
            fbe: Some(fbe_x),
            residual,
            step_sq,
            tau: None,
            gamma,
            sigma: Some(sigma),
            elapsed: 0.0,
        };
        if residual <= config.tol || k == config.max_iters {
            rec.push_observed(record, &p.v, observer);
            let status = if residual <= config.tol {
                Status::Converged
            } else {
                Status::MaxIters
            };
            return Ok(Solution {
                x: p.v,
                status,
                iterations: k,
                trace: rec.trace,
            });
        }

        let d = buffer.direction(&r)?;
        // x + d - v = r + d
        let blend = d.add(&r)?;
        let threshold = fbe_x - sigma * step_sq + DECREASE_SLACK * (1.0 + fbe_x.abs());
        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let q = Point::evaluate(f, g, blend.axpy(tau, &p.v)?, gamma)?;
            if q.is_finite() && q.fbe(gamma)? <= threshold {
                accepted = Some(q);
                break;
            }
            tau *= 0.5;
        }
        let mut q = match accepted {
            Some(q) => q,
            None => {
                tau = 0.0;
                Point::evaluate(f, g, p.v.clone(), gamma)?
            }
        };
        if !q.is_finite() {
            return Err(rec.non_finite(k + 1));
        }
        record.tau = Some(tau);
        rec.push_observed(record, &p.v, observer);

        if enforce_majorization(f, g, &mut q, &mut step)? {
            // residual pairs from different stepsizes do not fit one model
            buffer.clear();
            sigma = sigma_for(&step);
        } else {
            let s = q.x.sub(&p.x)?;
            let w = q.residual()?.sub(&r)?;
            buffer.push(s, w)?;
        }
        p = q;
    }
    unreachable!("loop returns at k == max_iters")
}
