//! Smooth functions with gradients.

use std::sync::Arc;

use super::{check_gamma, ProxFn, SmoothFn};
use crate::error::{Error, Result};
use crate::fao::{LinearOp, OpDag};
use crate::tensor::{Signal, SignalTuple, Vector};

impl<X, T: SmoothFn<X> + ?Sized> SmoothFn<X> for Arc<T> {
    fn value(&self, x: &X) -> Result<f64> {
        (**self).value(x)
    }

    fn value_and_gradient(&self, x: &X) -> Result<(f64, X)> {
        (**self).value_and_gradient(x)
    }

    fn gradient(&self, x: &X) -> Result<X> {
        (**self).gradient(x)
    }

    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }

    fn is_convex(&self) -> bool {
        (**self).is_convex()
    }

    fn strong_convexity(&self) -> f64 {
        (**self).strong_convexity()
    }

    fn conjugate(&self) -> Option<Arc<dyn SmoothFn<X>>> {
        (**self).conjugate()
    }
}

/// `1/2 |x - c|^2 + offset`.
#[derive(Clone, Debug)]
pub struct SqrDist {
    center: Signal,
    offset: f64,
}

pub fn sqr_dist(center: Signal) -> SqrDist {
    SqrDist {
        center,
        offset: 0.0,
    }
}

impl SqrDist {
    pub fn center(&self) -> &Signal {
        &self.center
    }
}

impl SmoothFn for SqrDist {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(0.5 * x.sub(&self.center)?.norm2_sq() + self.offset)
    }

    fn value_and_gradient(&self, x: &Signal) -> Result<(f64, Signal)> {
        let r = x.sub(&self.center)?;
        Ok((0.5 * r.norm2_sq() + self.offset, r))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn conjugate(&self) -> Option<Arc<dyn SmoothFn>> {
        // sup_x <u, x> - 1/2|x - c|^2 - o = 1/2|u + c|^2 - 1/2|c|^2 - o
        Some(Arc::new(SqrDist {
            center: self.center.scaled(-1.0),
            offset: -0.5 * self.center.norm2_sq() - self.offset,
        }))
    }
}

/// `h(A x)`.
#[derive(Clone, Debug)]
pub struct LinearComposite {
    h: Arc<dyn SmoothFn>,
    op: Arc<dyn LinearOp>,
}

impl LinearComposite {
    pub fn new(h: Arc<dyn SmoothFn>, op: Arc<dyn LinearOp>) -> Result<Self> {
        Ok(LinearComposite { h, op })
    }

    pub fn op(&self) -> &Arc<dyn LinearOp> {
        &self.op
    }
}

impl SmoothFn for LinearComposite {
    fn value(&self, x: &Signal) -> Result<f64> {
        self.h.value(&self.op.forward(x)?)
    }

    fn value_and_gradient(&self, x: &Signal) -> Result<(f64, Signal)> {
        let (v, g) = self.h.value_and_gradient(&self.op.forward(x)?)?;
        Ok((v, self.op.adjoint(&g)?))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.h.lipschitz()? * self.op.tight_frame_mu()?)
    }

    fn is_convex(&self) -> bool {
        self.h.is_convex()
    }
}

/// `1/2 |A x - y|^2`.
pub fn least_squares(op: Arc<dyn LinearOp>, y: Signal) -> Result<LinearComposite> {
    op.codomain().expect(&y.layout())?;
    LinearComposite::new(Arc::new(sqr_dist(y)), op)
}

/// `h(dag(x_1, ..., x_k))` with the gradient from a backward pass.
#[derive(Clone, Debug)]
pub struct DagComposite {
    h: Arc<dyn SmoothFn>,
    dag: OpDag,
}

impl DagComposite {
    pub fn new(h: Arc<dyn SmoothFn>, dag: OpDag) -> Self {
        DagComposite { h, dag }
    }

    pub fn dag(&self) -> &OpDag {
        &self.dag
    }
}

impl SmoothFn<SignalTuple> for DagComposite {
    fn value(&self, x: &SignalTuple) -> Result<f64> {
        self.h.value(&self.dag.eval(x)?)
    }

    fn value_and_gradient(&self, x: &SignalTuple) -> Result<(f64, SignalTuple)> {
        let (y, tape) = self.dag.forward(x)?;
        let (v, g) = self.h.value_and_gradient(&y)?;
        Ok((v, self.dag.backward(&tape, &g)?))
    }

    fn is_convex(&self) -> bool {
        self.h.is_convex() && self.dag.is_linear()
    }
}

/// `1/2 |dag(x) - y|^2`.
pub fn least_squares_dag(dag: OpDag, y: Signal) -> Result<DagComposite> {
    dag.output_layout().expect(&y.layout())?;
    Ok(DagComposite::new(Arc::new(sqr_dist(y)), dag))
}

/// Lower clamp applied to probabilities before taking logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// `-sum(t log y + (1 - t) log(1 - y))` for labels `t` in [0, 1].
#[derive(Clone, Debug)]
pub struct CrossEntropy {
    labels: Signal,
}

pub fn cross_entropy(labels: Signal) -> Result<CrossEntropy> {
    let data = labels
        .real_data()
        .ok_or_else(|| Error::Unsupported("complex labels".into()))?;
    if data.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::param("labels must lie in [0, 1]"));
    }
    Ok(CrossEntropy { labels })
}

impl CrossEntropy {
    fn eval(&self, y: &Signal, with_grad: bool) -> Result<(f64, Option<Signal>)> {
        self.labels.check_layout(y)?;
        let y = y.real_data().expect("layout checked");
        let t = self.labels.real_data().expect("real labels");
        let (lo, hi) = (PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR);
        let mut value = 0.0;
        let mut grad = Vec::with_capacity(if with_grad { y.len() } else { 0 });
        for (&y, &t) in y.iter().zip(t) {
            let p = y.clamp(lo, hi);
            value -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            if with_grad {
                // the clamp is flat outside [lo, hi]
                let active = y > lo && y < hi;
                grad.push(if active {
                    -t / p + (1.0 - t) / (1.0 - p)
                } else {
                    0.0
                });
            }
        }
        let grad = with_grad.then(|| Signal::real(grad, self.labels.shape()).expect("same shape"));
        Ok((value, grad))
    }
}

impl SmoothFn for CrossEntropy {
    fn value(&self, y: &Signal) -> Result<f64> {
        Ok(self.eval(y, false)?.0)
    }

    fn value_and_gradient(&self, y: &Signal) -> Result<(f64, Signal)> {
        let (v, g) = self.eval(y, true)?;
        Ok((v, g.expect("gradient requested")))
    }

    fn is_convex(&self) -> bool {
        true
    }
}

/// `h^beta(x) = min_z h(z) + |z - x|^2 / (2 beta)`.
#[derive(Clone, Debug)]
pub struct MoreauEnvelope<H> {
    h: H,
    beta: f64,
}

pub fn moreau_envelope<H>(h: H, beta: f64) -> Result<MoreauEnvelope<H>> {
    check_gamma(beta)?;
    Ok(MoreauEnvelope { h, beta })
}

impl<H> MoreauEnvelope<H> {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn inner(&self) -> &H {
        &self.h
    }
}

impl<X: Vector, H: ProxFn<X>> SmoothFn<X> for MoreauEnvelope<H> {
    fn value(&self, x: &X) -> Result<f64> {
        self.value_and_gradient(x).map(|(v, _)| v)
    }

    fn value_and_gradient(&self, x: &X) -> Result<(f64, X)> {
        let (p, hp) = self.h.prox_and_value(x, self.beta)?;
        let d = x.sub(&p)?;
        let dist_sq = d.inner(&d)?;
        Ok((hp + dist_sq / (2.0 * self.beta), d.scaled(1.0 / self.beta)))
    }

    fn lipschitz(&self) -> Option<f64> {
        self.h.is_convex().then_some(1.0 / self.beta)
    }

    fn is_convex(&self) -> bool {
        self.h.is_convex()
    }
}

/// `<c, x>`.
#[derive(Clone, Debug)]
pub struct LinearFn {
    slope: Signal,
}

pub fn linear_fn(slope: Signal) -> LinearFn {
    LinearFn { slope }
}

impl SmoothFn for LinearFn {
    fn value(&self, x: &Signal) -> Result<f64> {
        self.slope.inner(x)
    }

    fn value_and_gradient(&self, x: &Signal) -> Result<(f64, Signal)> {
        Ok((self.slope.inner(x)?, self.slope.clone()))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }

    fn is_convex(&self) -> bool {
        true
    }
}

/// `f(x) + beta/2 |x|^2`.
#[derive(Clone, Debug)]
pub struct Regularized<F> {
    f: F,
    beta: f64,
}

pub fn regularized<F>(f: F, beta: f64) -> Result<Regularized<F>> {
    check_gamma(beta)?;
    Ok(Regularized { f, beta })
}

impl<X: Vector, F: SmoothFn<X>> SmoothFn<X> for Regularized<F> {
    fn value(&self, x: &X) -> Result<f64> {
        Ok(self.f.value(x)? + 0.5 * self.beta * x.inner(x)?)
    }

    fn value_and_gradient(&self, x: &X) -> Result<(f64, X)> {
        let (v, g) = self.f.value_and_gradient(x)?;
        Ok((v + 0.5 * self.beta * x.inner(x)?, x.axpy(self.beta, &g)?))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.f.lipschitz()? + self.beta)
    }

    fn is_convex(&self) -> bool {
        self.f.is_convex()
    }

    fn strong_convexity(&self) -> f64 {
        self.f.strong_convexity() + self.beta
    }
}

/// `sum_i f_i(x)`.
#[derive(Clone, Debug)]
pub struct SmoothSum<X> {
    parts: Vec<Arc<dyn SmoothFn<X>>>,
}

pub fn smooth_sum<X>(parts: Vec<Arc<dyn SmoothFn<X>>>) -> Result<SmoothSum<X>> {
    if parts.is_empty() {
        return Err(Error::param("sum of no smooth functions"));
    }
    Ok(SmoothSum { parts })
}

impl<X: Vector> SmoothFn<X> for SmoothSum<X> {
    fn value(&self, x: &X) -> Result<f64> {
        self.parts.iter().map(|f| f.value(x)).sum()
    }

    fn value_and_gradient(&self, x: &X) -> Result<(f64, X)> {
        let (mut total, mut grad) = self.parts[0].value_and_gradient(x)?;
        for f in &self.parts[1..] {
            let (v, g) = f.value_and_gradient(x)?;
            total += v;
            grad = g.axpy(1.0, &grad)?;
        }
        Ok((total, grad))
    }

    fn lipschitz(&self) -> Option<f64> {
        self.parts.iter().map(|f| f.lipschitz()).sum()
    }

    fn is_convex(&self) -> bool {
        self.parts.iter().all(|f| f.is_convex())
    }

    fn strong_convexity(&self) -> f64 {
        self.parts.iter().map(|f| f.strong_convexity()).sum()
    }
}
