//! Forward-adjoint oracles.
//!
//! A [`LinearOp`] never materializes its matrix: it only evaluates `A x` and
//! `A* y`. Nonlinear maps expose their Jacobian adjoint at a linearization
//! point instead. Operators compose into [`Op`] chains and, for several
//! inputs or products of outputs, into an [`OpDag`].

mod dag;
mod ops;

use std::fmt;
use std::sync::Arc;

pub use dag::{hcat, output_mul, DagBuilder, DagTape, NodeId, OpDag};
pub use ops::{
    adjoint_op, broadcast_op, complex_matrix_op, complex_select_op, conv_op, dct_op, dft_op,
    diag_op, idct_op, identity_op, idft_op, matrix_op, real_part_op, scale_op, select_op,
    sigmoid_op, sparse_matrix_op, variation_op,
};

use crate::error::Result;
use crate::tensor::{Layout, Signal};

pub trait LinearOp: Send + Sync + fmt::Debug {
    fn domain(&self) -> Layout;
    fn codomain(&self) -> Layout;
    fn forward(&self, x: &Signal) -> Result<Signal>;
    fn adjoint(&self, y: &Signal) -> Result<Signal>;

    /// `mu` with `A A* = mu Id`, when the operator is known to be a tight frame.
    fn tight_frame_mu(&self) -> Option<f64> {
        None
    }

    /// Domain indices read by a pure row selection. Two selections with
    /// disjoint supports act on separate coordinates of their variable.
    fn selection_support(&self) -> Option<Vec<usize>> {
        None
    }

    /// True only for operators that return their input unchanged.
    fn is_identity(&self) -> bool {
        false
    }
}

pub trait NonlinearOp: Send + Sync + fmt::Debug {
    fn domain(&self) -> Layout;
    fn codomain(&self) -> Layout;
    fn forward(&self, x: &Signal) -> Result<Signal>;
    /// `J*(at) g`: adjoint of the Jacobian at `at`, applied to `g`.
    fn jacobian_adjoint(&self, at: &Signal, g: &Signal) -> Result<Signal>;
}

/// A single-input mapping, linear or not.
#[derive(Clone, Debug)]
pub enum Op {
    Linear(Arc<dyn LinearOp>),
    Nonlinear(Arc<dyn NonlinearOp>),
    /// `outer ∘ inner`, with at least one nonlinear factor.
    Chain(Box<Op>, Box<Op>),
}

impl Op {
    pub fn linear(op: impl LinearOp + 'static) -> Self {
        Op::Linear(Arc::new(op))
    }

    pub fn nonlinear(op: impl NonlinearOp + 'static) -> Self {
        Op::Nonlinear(Arc::new(op))
    }

    pub fn domain(&self) -> Layout {
        match self {
            Op::Linear(a) => a.domain(),
            Op::Nonlinear(a) => a.domain(),
            Op::Chain(_, inner) => inner.domain(),
        }
    }

    pub fn codomain(&self) -> Layout {
        match self {
            Op::Linear(a) => a.codomain(),
            Op::Nonlinear(a) => a.codomain(),
            Op::Chain(outer, _) => outer.codomain(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Op::Linear(_))
    }

    pub fn as_linear(&self) -> Option<&Arc<dyn LinearOp>> {
        match self {
            Op::Linear(a) => Some(a),
            _ => None,
        }
    }

    pub fn forward(&self, x: &Signal) -> Result<Signal> {
        match self {
            Op::Linear(a) => a.forward(x),
            Op::Nonlinear(a) => a.forward(x),
            Op::Chain(outer, inner) => outer.forward(&inner.forward(x)?),
        }
    }

    /// Jacobian adjoint at `at` applied to `g`; the plain adjoint for linear
    /// operators. Chains re-evaluate their inner factor here, so graphs that
    /// need cached linearization points expand chains into separate nodes.
    pub fn jacobian_adjoint(&self, at: &Signal, g: &Signal) -> Result<Signal> {
        match self {
            Op::Linear(a) => a.adjoint(g),
            Op::Nonlinear(a) => a.jacobian_adjoint(at, g),
            Op::Chain(outer, inner) => {
                let mid = inner.forward(at)?;
                let g_mid = outer.jacobian_adjoint(&mid, g)?;
                inner.jacobian_adjoint(at, &g_mid)
            }
        }
    }

    /// Factors in application order (innermost first).
    pub(crate) fn factors(&self) -> Vec<Op> {
        match self {
            Op::Chain(outer, inner) => {
                let mut out = inner.factors();
                out.extend(outer.factors());
                out
            }
            other => vec![other.clone()],
        }
    }
}

impl From<Arc<dyn LinearOp>> for Op {
    fn from(a: Arc<dyn LinearOp>) -> Self {
        Op::Linear(a)
    }
}

impl From<Arc<dyn NonlinearOp>> for Op {
    fn from(a: Arc<dyn NonlinearOp>) -> Self {
        Op::Nonlinear(a)
    }
}

/// `outer ∘ inner` for two linear operators.
#[derive(Debug)]
pub struct Composition {
    outer: Arc<dyn LinearOp>,
    inner: Arc<dyn LinearOp>,
}

impl LinearOp for Composition {
    fn domain(&self) -> Layout {
        self.inner.domain()
    }

    fn codomain(&self) -> Layout {
        self.outer.codomain()
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        self.outer.forward(&self.inner.forward(x)?)
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        self.inner.adjoint(&self.outer.adjoint(y)?)
    }

    fn tight_frame_mu(&self) -> Option<f64> {
        // A B B* A* = mu_B A A* = mu_A mu_B Id
        Some(self.outer.tight_frame_mu()? * self.inner.tight_frame_mu()?)
    }
}

/// Composition of two linear operators; errors when the shapes do not chain.
pub fn compose_linear(
    outer: Arc<dyn LinearOp>,
    inner: Arc<dyn LinearOp>,
) -> Result<Arc<dyn LinearOp>> {
    outer.domain().expect(&inner.codomain())?;
    Ok(Arc::new(Composition { outer, inner }))
}

/// `a ∘ b`. Linear when both factors are.
pub fn compose(a: Op, b: Op) -> Result<Op> {
    a.domain().expect(&b.codomain())?;
    Ok(match (a, b) {
        (Op::Linear(a), Op::Linear(b)) => Op::Linear(Arc::new(Composition { outer: a, inner: b })),
        (a, b) => Op::Chain(Box::new(a), Box::new(b)),
    })
}
