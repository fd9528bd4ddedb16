//! Benchmark problems and the harness that solves them and records traces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod problems;
pub mod runner;
