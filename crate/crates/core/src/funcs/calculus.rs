//! Prox calculus: new proximable functions from old ones.

use std::sync::Arc;

use super::{check_gamma, check_nonneg, ProxFn};
use crate::error::{Error, Result};
use crate::fao::LinearOp;
use crate::tensor::{Layout, Signal, SignalTuple};

impl<X, T: ProxFn<X> + ?Sized> ProxFn<X> for Arc<T> {
    fn value(&self, x: &X) -> Result<f64> {
        (**self).value(x)
    }

    fn prox(&self, x: &X, gamma: f64) -> Result<X> {
        (**self).prox(x, gamma)
    }

    fn prox_and_value(&self, x: &X, gamma: f64) -> Result<(X, f64)> {
        (**self).prox_and_value(x, gamma)
    }

    fn is_convex(&self) -> bool {
        (**self).is_convex()
    }

    fn is_separable(&self) -> bool {
        (**self).is_separable()
    }

    fn conjugate_value(&self, u: &X) -> Result<f64> {
        (**self).conjugate_value(u)
    }
}

/// `g(x_1, ..., x_k) = sum_j g_j(x_j)` on a tuple.
#[derive(Clone, Debug)]
pub struct SeparableSum {
    parts: Vec<Arc<dyn ProxFn>>,
}

pub fn separable_sum(parts: Vec<Arc<dyn ProxFn>>) -> SeparableSum {
    SeparableSum { parts }
}

impl SeparableSum {
    fn check(&self, x: &SignalTuple) -> Result<()> {
        if x.len() != self.parts.len() {
            return Err(Error::ArityMismatch {
                expected: self.parts.len(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

impl ProxFn<SignalTuple> for SeparableSum {
    fn value(&self, x: &SignalTuple) -> Result<f64> {
        self.check(x)?;
        self.parts
            .iter()
            .zip(x.parts())
            .map(|(g, x)| g.value(x))
            .sum()
    }

    fn prox(&self, x: &SignalTuple, gamma: f64) -> Result<SignalTuple> {
        self.prox_and_value(x, gamma).map(|(z, _)| z)
    }

    fn prox_and_value(&self, x: &SignalTuple, gamma: f64) -> Result<(SignalTuple, f64)> {
        self.check(x)?;
        let mut total = 0.0;
        let mut out = Vec::with_capacity(self.parts.len());
        for (g, x) in self.parts.iter().zip(x.parts()) {
            let (z, v) = g.prox_and_value(x, gamma)?;
            total += v;
            out.push(z);
        }
        Ok((SignalTuple::new(out), total))
    }

    fn is_convex(&self) -> bool {
        self.parts.iter().all(|g| g.is_convex())
    }

    fn is_separable(&self) -> bool {
        self.parts.iter().all(|g| g.is_separable())
    }

    fn conjugate_value(&self, u: &SignalTuple) -> Result<f64> {
        self.check(u)?;
        self.parts
            .iter()
            .zip(u.parts())
            .map(|(g, u)| g.conjugate_value(u))
            .sum()
    }
}

/// `g(x) = sum_j g_j(x[I_j])` over disjoint index sets of one signal.
/// Entries outside every `I_j` are left free.
#[derive(Clone, Debug)]
pub struct IndexedSum {
    layout: Layout,
    parts: Vec<(Vec<usize>, Arc<dyn ProxFn>)>,
}

pub fn indexed_sum(
    layout: &Layout,
    parts: Vec<(Vec<usize>, Arc<dyn ProxFn>)>,
) -> Result<IndexedSum> {
    let n = layout.numel();
    let mut owner = vec![false; n];
    for (indices, _) in &parts {
        for &i in indices {
            if i >= n {
                return Err(Error::param(format!("index {i} out of range for {layout}")));
            }
            if std::mem::replace(&mut owner[i], true) {
                return Err(Error::param(format!("index {i} claimed by two blocks")));
            }
        }
    }
    Ok(IndexedSum {
        layout: layout.clone(),
        parts,
    })
}

impl ProxFn for IndexedSum {
    fn value(&self, x: &Signal) -> Result<f64> {
        self.layout.expect(&x.layout())?;
        self.parts
            .iter()
            .map(|(idx, g)| g.value(&x.gather(idx)))
            .sum()
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        self.prox_and_value(x, gamma).map(|(z, _)| z)
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        self.layout.expect(&x.layout())?;
        let mut z = x.clone();
        let mut total = 0.0;
        for (idx, g) in &self.parts {
            let (block, v) = g.prox_and_value(&x.gather(idx), gamma)?;
            z.scatter(idx, &block)?;
            total += v;
        }
        Ok((z, total))
    }

    fn is_convex(&self) -> bool {
        self.parts.iter().all(|(_, g)| g.is_convex())
    }

    fn is_separable(&self) -> bool {
        self.parts.iter().all(|(_, g)| g.is_separable())
    }
}

/// `h(x + b)`.
#[derive(Clone, Debug)]
pub struct Translate<H> {
    h: H,
    shift: Signal,
}

pub fn translate<H: ProxFn>(h: H, shift: Signal) -> Translate<H> {
    Translate { h, shift }
}

impl<H: ProxFn> ProxFn for Translate<H> {
    fn value(&self, x: &Signal) -> Result<f64> {
        self.h.value(&x.add(&self.shift)?)
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        self.h.prox(&x.add(&self.shift)?, gamma)?.sub(&self.shift)
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        let (z, v) = self.h.prox_and_value(&x.add(&self.shift)?, gamma)?;
        Ok((z.sub(&self.shift)?, v))
    }

    fn is_convex(&self) -> bool {
        self.h.is_convex()
    }

    fn is_separable(&self) -> bool {
        self.h.is_separable()
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        Ok(self.h.conjugate_value(u)? - u.inner(&self.shift)?)
    }
}

/// `h(x) + <a, x>`.
#[derive(Clone, Debug)]
pub struct AffineAddition<H> {
    h: H,
    slope: Signal,
}

pub fn affine_addition<H: ProxFn>(h: H, slope: Signal) -> AffineAddition<H> {
    AffineAddition { h, slope }
}

impl<H: ProxFn> ProxFn for AffineAddition<H> {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(self.h.value(x)? + self.slope.inner(x)?)
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        self.prox_and_value(x, gamma).map(|(z, _)| z)
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        check_gamma(gamma)?;
        let (z, v) = self
            .h
            .prox_and_value(&crate::tensor::axpy(-gamma, &self.slope, x)?, gamma)?;
        let linear = self.slope.inner(&z)?;
        Ok((z, v + linear))
    }

    fn is_convex(&self) -> bool {
        self.h.is_convex()
    }

    fn is_separable(&self) -> bool {
        self.h.is_separable()
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        self.h.conjugate_value(&u.sub(&self.slope)?)
    }
}

/// `a h(x) + b` with `a > 0`.
#[derive(Clone, Debug)]
pub struct Postcompose<H> {
    h: H,
    scale: f64,
    offset: f64,
}

pub fn postcompose<H: ProxFn>(h: H, scale: f64, offset: f64) -> Result<Postcompose<H>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!(
            "postcomposition scale must be positive, got {scale}"
        )));
    }
    Ok(Postcompose { h, scale, offset })
}

impl<H: ProxFn> ProxFn for Postcompose<H> {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(self.scale * self.h.value(x)? + self.offset)
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        self.h.prox(x, self.scale * gamma)
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        check_gamma(gamma)?;
        let (z, v) = self.h.prox_and_value(x, self.scale * gamma)?;
        Ok((z, self.scale * v + self.offset))
    }

    fn is_convex(&self) -> bool {
        self.h.is_convex()
    }

    fn is_separable(&self) -> bool {
        self.h.is_separable()
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        Ok(self.scale * self.h.conjugate_value(&u.scaled(1.0 / self.scale))? - self.offset)
    }
}

/// `h(A x)` for a tight frame `A A* = mu Id`.
#[derive(Clone, Debug)]
pub struct PrecomposeTightFrame<H> {
    h: H,
    op: Arc<dyn LinearOp>,
    mu: f64,
}

pub fn precompose_tight_frame<H: ProxFn>(
    h: H,
    op: Arc<dyn LinearOp>,
) -> Result<PrecomposeTightFrame<H>> {
    match op.tight_frame_mu() {
        Some(mu) if mu > 0.0 => Ok(PrecomposeTightFrame { h, op, mu }),
        _ => Err(Error::MissingTightFrame),
    }
}

impl<H: ProxFn> ProxFn for PrecomposeTightFrame<H> {
    fn value(&self, x: &Signal) -> Result<f64> {
        self.h.value(&self.op.forward(x)?)
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        self.prox_and_value(x, gamma).map(|(z, _)| z)
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        check_gamma(gamma)?;
        let ax = self.op.forward(x)?;
        let (p, v) = self.h.prox_and_value(&ax, self.mu * gamma)?;
        let correction = self.op.adjoint(&p.sub(&ax)?)?;
        Ok((crate::tensor::axpy(1.0 / self.mu, &correction, x)?, v))
    }

    fn is_convex(&self) -> bool {
        self.h.is_convex()
    }
}

/// `h(x) + rho/2 |x - b|^2`.
#[derive(Clone, Debug)]
pub struct Regularize<H> {
    h: H,
    rho: f64,
    center: Signal,
}

pub fn regularize<H: ProxFn>(h: H, rho: f64, center: Signal) -> Result<Regularize<H>> {
    check_nonneg("rho", rho)?;
    Ok(Regularize { h, rho, center })
}

impl<H: ProxFn> ProxFn for Regularize<H> {
    fn value(&self, x: &Signal) -> Result<f64> {
        let d = x.sub(&self.center)?;
        Ok(self.h.value(x)? + 0.5 * self.rho * d.norm2_sq())
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        self.prox_and_value(x, gamma).map(|(z, _)| z)
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        check_gamma(gamma)?;
        let shrink = 1.0 + gamma * self.rho;
        let arg = crate::tensor::axpy(gamma * self.rho, &self.center, x)?.scaled(1.0 / shrink);
        let (z, v) = self.h.prox_and_value(&arg, gamma / shrink)?;
        let d = z.sub(&self.center)?;
        let total = v + 0.5 * self.rho * d.norm2_sq();
        Ok((z, total))
    }

    fn is_convex(&self) -> bool {
        self.h.is_convex()
    }

    fn is_separable(&self) -> bool {
        self.h.is_separable()
    }
}

/// `h*`, with prox from the Moreau decomposition
/// `prox_{gamma h*}(u) = u - gamma prox_{h/gamma}(u/gamma)`.
#[derive(Clone, Debug)]
pub struct ConvexConjugate<H> {
    h: H,
}

pub fn convex_conjugate<X, H: ProxFn<X>>(h: H) -> Result<ConvexConjugate<H>> {
    if !h.is_convex() {
        return Err(Error::NotConvex("convex conjugation"));
    }
    Ok(ConvexConjugate { h })
}

impl<X, H> ProxFn<X> for ConvexConjugate<H>
where
    X: crate::tensor::Vector,
    H: ProxFn<X>,
{
    fn value(&self, u: &X) -> Result<f64> {
        self.h.conjugate_value(u)
    }

    fn prox(&self, u: &X, gamma: f64) -> Result<X> {
        check_gamma(gamma)?;
        let p = self.h.prox(&u.scaled(1.0 / gamma), 1.0 / gamma)?;
        p.axpy(-gamma, u)
    }

    fn prox_and_value(&self, u: &X, gamma: f64) -> Result<(X, f64)> {
        check_gamma(gamma)?;
        let (p, hp) = self.h.prox_and_value(&u.scaled(1.0 / gamma), 1.0 / gamma)?;
        let z = p.axpy(-gamma, u)?;
        // z lies in the subdifferential of h at p, so h*(z) = <z, p> - h(p)
        let value = z.inner(&p)? - hp;
        Ok((z, value))
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn is_separable(&self) -> bool {
        self.h.is_separable()
    }

    fn conjugate_value(&self, x: &X) -> Result<f64> {
        self.h.value(x)
    }
}
