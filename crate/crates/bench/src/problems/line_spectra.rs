use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use proxkit::fao::{
    adjoint_op, complex_select_op, compose_linear, idft_op, real_part_op, select_op, LinearOp,
};
use proxkit::funcs::{ball_l0, l1_norm, sqr_dist};
use proxkit::model::{Problem, VarId};
use proxkit::{Error, Layout, Result, Signal};

use super::{add_noise, seeded};

#[derive(Clone, Debug)]
pub struct LineSpectraParams {
    /// Number of observed samples.
    pub n: usize,
    /// Super-resolution factor; the spectrum has `s * n` bins.
    pub s: usize,
    /// Number of planted sinusoids, also the sparsity budget of problem (b).
    pub sinusoids: usize,
    pub snr_db: Option<f64>,
    pub lambda_ratio: f64,
}

impl Default for LineSpectraParams {
    fn default() -> Self {
        LineSpectraParams {
            n: 256,
            s: 6,
            sinusoids: 4,
            snr_db: Some(20.0),
            lambda_ratio: 0.05,
        }
    }
}

/// Problem (a) is the l1 relaxation, problem (b) the l0-constrained fit.
#[derive(Clone, Debug)]
pub struct LineSpectra {
    /// `S Re(F^{-1} P x)`: first `n` samples of the real part of the inverse
    /// DFT of `x` zero-padded to `s * n` bins.
    pub op: Arc<dyn LinearOp>,
    pub y: Signal,
    /// Planted spectrum on the `s * n / 2` nonnegative-frequency bins; each
    /// sinusoid occupies one bin.
    pub x_true: Signal,
    pub frequencies: Vec<usize>,
    pub lambda: f64,
    pub x: VarId,
    pub relaxed: Problem,
    pub constrained: Problem,
}

impl LineSpectra {
    /// `1/2 |A x - y|^2`.
    pub fn fidelity(&self, x: &Signal) -> Result<f64> {
        Ok(0.5 * self.op.forward(x)?.sub(&self.y)?.norm2_sq())
    }

    /// Problem (b) warm-started at `x`.
    pub fn constrained_from(&self, x: &Signal) -> Result<Problem> {
        let mut p = self.constrained.clone();
        p.set_initial(self.x, x.clone())?;
        Ok(p)
    }
}

/// Sinusoids on the fine frequency grid, two of them one bin apart so the
/// zero-padded DFT cannot separate them.
pub fn gen_line_spectra(params: &LineSpectraParams, seed: u64) -> Result<LineSpectra> {
    let LineSpectraParams {
        n, s, sinusoids, ..
    } = *params;
    let bins = s * n;
    if n < 2 || s == 0 || sinusoids == 0 || 4 * sinusoids > bins / 2 {
        return Err(Error::InvalidParameter(format!(
            "bad line-spectra sizes: n={n}, s={s}, sinusoids={sinusoids}"
        )));
    }
    let mut rng = seeded(seed);
    let mut frequencies: Vec<usize> = Vec::with_capacity(sinusoids);
    while frequencies.len() < sinusoids {
        let f = if frequencies.len() == 1 {
            frequencies[0] + 1
        } else {
            rng.random_range(s..bins / 2 - s)
        };
        if frequencies.iter().all(|&g| g.abs_diff(f) >= 1) && f < bins / 2 {
            frequencies.push(f);
        }
    }
    let scale = (bins as f64).sqrt();
    let half = bins / 2;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); half];
    for &f in &frequencies {
        let amplitude = rng.random_range(1.0..2.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        spectrum[f] = Complex64::from_polar(amplitude * scale, phase);
    }
    let x_true = Signal::from_complex_vec(spectrum);

    let first: Vec<usize> = (0..n).collect();
    let positive: Vec<usize> = (0..half).collect();
    // bins k and s*n - k give the same real sinusoid; keeping one of each
    // pair lets a single entry of x stand for a single sinusoid
    let pad = adjoint_op(complex_select_op(&positive, bins)?);
    let op = compose_linear(
        select_op(&first, bins)?,
        compose_linear(real_part_op(&[bins]), compose_linear(idft_op(bins), pad)?)?,
    )?;
    let clean = op.forward(&x_true)?;
    let (y, _) = add_noise(&clean, params.snr_db, &mut rng);
    let lambda = params.lambda_ratio * op.adjoint(&y)?.norm_inf();

    let x0 = Signal::zeros(&Layout::complex(&[half]));
    let build = |nonsmooth: Arc<dyn proxkit::funcs::ProxFn>| -> Result<(Problem, VarId)> {
        let mut p = Problem::new();
        let x = p.variable("x", x0.clone());
        p.add_smooth(Arc::new(sqr_dist(y.clone())), vec![(x, op.clone())])?;
        p.add_nonsmooth_on(nonsmooth, x)?;
        Ok((p, x))
    };
    let (relaxed, x) = build(Arc::new(l1_norm(lambda)?))?;
    let (constrained, _) = build(Arc::new(ball_l0(sinusoids)))?;
    Ok(LineSpectra {
        op,
        y,
        x_true,
        frequencies,
        lambda,
        x,
        relaxed,
        constrained,
    })
}
