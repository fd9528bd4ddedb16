use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use proxkit::fao::identity_op;
use proxkit::funcs::{l1_norm, rank_ball, sqr_dist};
use proxkit::model::{Problem, VarId};
use proxkit::{Error, Layout, Result, Signal};

use super::seeded;

#[derive(Clone, Debug)]
pub struct RpcaParams {
    /// Frame height.
    pub n: usize,
    /// Frame width.
    pub m: usize,
    /// Number of frames.
    pub frames: usize,
    /// Side of the square foreground object.
    pub object: usize,
    pub noise_std: f64,
    pub lambda: f64,
}

impl Default for RpcaParams {
    fn default() -> Self {
        RpcaParams {
            n: 64,
            m: 64,
            frames: 30,
            object: 8,
            noise_std: 0.05,
            lambda: 0.02,
        }
    }
}

/// `1/2 |L + S - Y|^2 + lambda |vec S|_1` subject to `rank L <= 1`, where
/// column `k` of `Y` is the vectorized frame `k`.
#[derive(Clone, Debug)]
pub struct RobustPca {
    pub background: Signal,
    pub foreground: Signal,
    pub y: Signal,
    pub lambda: f64,
    pub low_rank: VarId,
    pub sparse: VarId,
    pub problem: Problem,
}

/// Static background (a smooth random image) plus a bright square that
/// moves across the frames.
pub fn gen_robust_pca(params: &RpcaParams, seed: u64) -> Result<RobustPca> {
    let RpcaParams {
        n,
        m,
        frames,
        object,
        ..
    } = *params;
    if n < object || m < object || frames == 0 || object == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad video sizes: {n}x{m}x{frames}, object {object}"
        )));
    }
    let mut rng = seeded(seed);
    let pixels = n * m;
    let (fy, fx) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
    let frame: Vec<f64> = (0..pixels)
        .map(|k| {
            let (i, j) = ((k % n) as f64 / n as f64, (k / n) as f64 / m as f64);
            0.5 + 0.25 * (fy * i * 6.0).sin() * (fx * j * 6.0).cos()
        })
        .collect();
    let mut background = Vec::with_capacity(pixels * frames);
    let mut foreground = vec![0.0; pixels * frames];
    let (mut r, mut c) = (rng.random_range(0..=n - object), 0usize);
    for t in 0..frames {
        background.extend_from_slice(&frame);
        c = (c + (m - object) / frames.max(1)).min(m - object);
        r = (r + rng.random_range(0..3)).min(n - object);
        for dc in 0..object {
            for dr in 0..object {
                foreground[t * pixels + (r + dr) + n * (c + dc)] = 1.0;
            }
        }
    }
    let background = Signal::real(background, &[pixels, frames])?;
    let foreground = Signal::real(foreground, &[pixels, frames])?;
    let noise: Vec<f64> = (0..pixels * frames)
        .map(|_| params.noise_std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let y = background
        .add(&foreground)?
        .add(&Signal::real(noise, &[pixels, frames])?)?;

    let layout = Layout::real(&[pixels, frames]);
    let mut problem = Problem::new();
    let low_rank = problem.variable("L", Signal::zeros(&layout));
    let sparse = problem.variable("S", Signal::zeros(&layout));
    problem.add_smooth(
        Arc::new(sqr_dist(y.clone())),
        vec![
            (low_rank, identity_op(&layout)),
            (sparse, identity_op(&layout)),
        ],
    )?;
    problem.add_nonsmooth_on(Arc::new(l1_norm(params.lambda)?), sparse)?;
    problem.add_nonsmooth_on(Arc::new(rank_ball(1)), low_rank)?;
    Ok(RobustPca {
        background,
        foreground,
        y,
        lambda: params.lambda,
        low_rank,
        sparse,
        problem,
    })
}
