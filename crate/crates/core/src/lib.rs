//! Matrix-free proximal gradient optimization.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense real/complex signals and the [`tensor::Vector`] trait
//!   the solvers are generic over.
//! - [`fao`]: forward-adjoint operators, their composition rules and
//!   operator graphs with reverse-mode gradients.
//! - [`funcs`]: proximable functions, prox calculus and smooth functions.
//! - [`solvers`]: proximal gradient (PG), its accelerated variant (FPG) and
//!   PANOC with L-BFGS directions.
//! - [`model`]: multi-variable problems, automatic smooth/nonsmooth
//!   splitting, duality and smoothing transforms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fao;
pub mod funcs;
pub mod model;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{axpy, Field, Layout, Signal, SignalTuple, Vector};
