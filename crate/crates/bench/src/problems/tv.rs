use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use proxkit::fao::{variation_op, LinearOp};
use proxkit::funcs::{mixed_l21_norm, sqr_dist, ProxFn, SmoothFn};
use proxkit::model::{fenchel_dual, DualProblem};
use proxkit::{Error, Result, Signal};

use super::seeded;

#[derive(Clone, Debug)]
pub struct TvParams {
    pub rows: usize,
    pub cols: usize,
    pub noise_std: f64,
    pub lambda: f64,
}

impl Default for TvParams {
    fn default() -> Self {
        TvParams {
            rows: 128,
            cols: 128,
            noise_std: 0.1,
            lambda: 0.1,
        }
    }
}

/// `1/2 |X - Y|^2 + lambda |V X|_{2,1}`, solved through its dual
/// `1/2 |-V* U + Y|^2 + g*(U)` (up to a constant).
#[derive(Clone, Debug)]
pub struct TvDenoise {
    pub clean: Signal,
    pub y: Signal,
    pub lambda: f64,
    pub variation: Arc<dyn LinearOp>,
    pub f: Arc<dyn SmoothFn>,
    pub g: Arc<dyn ProxFn>,
    pub dual: DualProblem,
}

impl TvDenoise {
    /// Primal objective `1/2 |X - Y|^2 + lambda |V X|_{2,1}`.
    pub fn primal_objective(&self, x: &Signal) -> Result<f64> {
        Ok(self.f.value(x)? + self.g.value(&self.variation.forward(x)?)?)
    }

    /// `sum_k |(V X)_k|_2`, the isotropic total variation.
    pub fn total_variation(&self, x: &Signal) -> Result<f64> {
        mixed_l21_norm(1.0)?.value(&self.variation.forward(x)?)
    }
}

/// Piecewise-constant image made of random axis-aligned rectangles.
pub fn piecewise_constant(rows: usize, cols: usize, rng: &mut impl Rng) -> Signal {
    let mut img = vec![0.0; rows * cols];
    for _ in 0..6 {
        let (r0, r1) = ordered(rng.random_range(0..rows), rng.random_range(0..rows));
        let (c0, c1) = ordered(rng.random_range(0..cols), rng.random_range(0..cols));
        let level = rng.random_range(-1.0..1.0);
        for c in c0..=c1 {
            for r in r0..=r1 {
                img[r + rows * c] += level;
            }
        }
    }
    Signal::real(img, &[rows, cols]).expect("rows * cols entries")
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

pub fn gen_tv_denoise(params: &TvParams, seed: u64) -> Result<TvDenoise> {
    let TvParams { rows, cols, .. } = *params;
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidParameter(format!(
            "image must be at least 2x2, got {rows}x{cols}"
        )));
    }
    let mut rng = seeded(seed);
    let clean = piecewise_constant(rows, cols, &mut rng);
    let noisy: Vec<f64> = clean
        .real_data()
        .expect("real image")
        .iter()
        .map(|v| v + params.noise_std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let y = Signal::real(noisy, &[rows, cols])?;
    let variation = variation_op(rows, cols);
    let f: Arc<dyn SmoothFn> = Arc::new(sqr_dist(y.clone()));
    let g: Arc<dyn ProxFn> = Arc::new(mixed_l21_norm(params.lambda)?);
    let dual = fenchel_dual(f.clone(), g.clone(), variation.clone())?;
    Ok(TvDenoise {
        clean,
        y,
        lambda: params.lambda,
        variation,
        f,
        g,
        dual,
    })
}
