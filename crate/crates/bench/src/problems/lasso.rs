use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use proxkit::fao::{sparse_matrix_op, LinearOp};
use proxkit::funcs::{l1_norm, sqr_dist};
use proxkit::model::{Problem, VarId};
use proxkit::{Result, Signal};

use super::seeded;

/// `1/2 |A x - y|^2 + lambda |x|_1` with a sparse `n/5 x n` matrix `A`.
#[derive(Clone, Debug)]
pub struct Lasso {
    pub a: Arc<dyn LinearOp>,
    pub entries: Vec<(usize, usize, f64)>,
    pub y: Signal,
    pub lambda: f64,
    pub x: VarId,
    pub problem: Problem,
}

/// `n/4` nonzeros at uniformly drawn positions with standard normal values,
/// standard normal `y`, and `lambda = 1e-3 |A^T y|_inf`.
pub fn gen_lasso(n: usize, seed: u64) -> Result<Lasso> {
    if n < 20 {
        return Err(proxkit::Error::InvalidParameter(format!(
            "lasso needs n >= 20, got {n}"
        )));
    }
    let mut rng = seeded(seed);
    let rows = n / 5;
    let nnz = n / 4;
    let entries: Vec<(usize, usize, f64)> = sample(&mut rng, rows * n, nnz)
        .into_vec()
        .into_iter()
        .map(|k| (k % rows, k / rows, rng.sample(StandardNormal)))
        .collect();
    let a = sparse_matrix_op(rows, n, entries.clone())?;
    let y = Signal::from_vec((0..rows).map(|_| rng.sample(StandardNormal)).collect());
    let lambda = 1e-3 * a.adjoint(&y)?.norm_inf();

    let mut problem = Problem::new();
    let x = problem.variable("x", Signal::from_vec(vec![0.0; n]));
    problem.add_smooth(Arc::new(sqr_dist(y.clone())), vec![(x, a.clone())])?;
    problem.add_nonsmooth_on(Arc::new(l1_norm(lambda)?), x)?;
    Ok(Lasso {
        a,
        entries,
        y,
        lambda,
        x,
        problem,
    })
}
