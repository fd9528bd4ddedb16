use std::collections::VecDeque;

use crate::error::Result;
use crate::tensor::Vector;

/// Pairs with `<s, w> <= CURVATURE_TOL |s| |w|` are not stored.
pub const CURVATURE_TOL: f64 = 1e-12;

/// Limited-memory inverse-Jacobian model of the residual map.
///
/// Stores `s = x_{k+1} - x_k`, `w = R(x_{k+1}) - R(x_k)` and `rho = <s, w>`.
#[derive(Clone, Debug)]
pub struct LbfgsBuffer<X> {
    capacity: usize,
    pairs: VecDeque<(X, X, f64)>,
}

impl<X: Vector> LbfgsBuffer<X> {
    pub fn new(capacity: usize) -> Self {
        LbfgsBuffer {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores the pair unless it fails the curvature test. Returns whether it
    /// was kept; the oldest pair is evicted when the buffer is full.
    pub fn push(&mut self, s: X, w: X) -> Result<bool> {
        if self.capacity == 0 {
            return Ok(false);
        }
        let rho = s.inner(&w)?;
        if !(rho > CURVATURE_TOL * s.norm2() * w.norm2()) {
            return Ok(false);
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, w, rho));
        Ok(true)
    }

    /// `d = -H r` by the two-loop recursion, with `H_0 = rho / <w, w>` from
    /// the newest pair. An empty buffer gives `d = -r`.
    pub fn direction(&self, r: &X) -> Result<X> {
        let Some((_, w_new, rho_new)) = self.pairs.back() else {
            return Ok(r.scaled(-1.0));
        };
        let mut q = r.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, w, rho) in self.pairs.iter().rev() {
            let alpha = s.inner(&q)? / rho;
            q = w.axpy(-alpha, &q)?;
            alphas.push(alpha);
        }
        let h0 = rho_new / w_new.inner(w_new)?;
        let mut z = q.scaled(h0);
        for ((s, w, rho), alpha) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let beta = w.inner(&z)? / rho;
            z = s.axpy(alpha - beta, &z)?;
        }
        Ok(z.scaled(-1.0))
    }
}
