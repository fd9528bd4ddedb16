use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use proxkit::fao::{conv_op, LinearOp};
use proxkit::funcs::{l1_norm, sqr_dist};
use proxkit::model::{Problem, VarId};
use proxkit::{Error, Result, Signal};

use super::{add_noise, seeded};

#[derive(Clone, Debug)]
pub struct DeconvParams {
    /// Sampling frequency; the unknown input has `fs / 2` samples.
    pub fs: usize,
    pub taps: usize,
    pub spikes: usize,
    /// `None` for noiseless data.
    pub snr_db: Option<f64>,
    /// `lambda = lambda_ratio * |h^T y|_inf`.
    pub lambda_ratio: f64,
}

impl Default for DeconvParams {
    fn default() -> Self {
        DeconvParams {
            fs: 4000,
            taps: 64,
            spikes: 20,
            snr_db: Some(20.0),
            lambda_ratio: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SparseDeconv {
    pub h: Vec<f64>,
    pub conv: Arc<dyn LinearOp>,
    pub x_true: Signal,
    pub y: Signal,
    pub noise_std: f64,
    pub lambda: f64,
    pub x: VarId,
    pub problem: Problem,
}

/// `1/2 |h * x - y|^2 + lambda |x|_1` for a random spike train seen through
/// a random decaying FIR filter.
pub fn gen_sparse_deconv(params: &DeconvParams, seed: u64) -> Result<SparseDeconv> {
    let n = params.fs / 2;
    if n == 0 || params.taps == 0 || params.spikes > n {
        return Err(Error::InvalidParameter(format!(
            "bad deconvolution sizes: fs={}, taps={}, spikes={}",
            params.fs, params.taps, params.spikes
        )));
    }
    let mut rng = seeded(seed);
    let h: Vec<f64> = (0..params.taps)
        .map(|k| rng.sample::<f64, _>(StandardNormal) * (-(k as f64) / 8.0).exp())
        .collect();
    let mut x_true = vec![0.0; n];
    for k in rand::seq::index::sample(&mut rng, n, params.spikes) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        x_true[k] = sign * rng.random_range(1.0..2.0);
    }
    let x_true = Signal::from_vec(x_true);
    let conv = conv_op(&h, n)?;
    let clean = conv.forward(&x_true)?;
    let (y, noise_std) = add_noise(&clean, params.snr_db, &mut rng);
    let lambda = params.lambda_ratio * conv.adjoint(&y)?.norm_inf();

    let mut problem = Problem::new();
    let x = problem.variable("x", Signal::from_vec(vec![0.0; n]));
    problem.add_smooth(Arc::new(sqr_dist(y.clone())), vec![(x, conv.clone())])?;
    problem.add_nonsmooth_on(Arc::new(l1_norm(lambda)?), x)?;
    Ok(SparseDeconv {
        h,
        conv,
        x_true,
        y,
        noise_std,
        lambda,
        x,
        problem,
    })
}
