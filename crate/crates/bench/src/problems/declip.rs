use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use proxkit::fao::{idct_op, scale_op, select_op, LinearOp};
use proxkit::funcs::{ball_l0, ball_l2, halfspace_ge, halfspace_le, sqr_dist, translate};
use proxkit::model::{Problem, VarId};
use proxkit::{Error, Layout, Result, Signal};

use super::seeded;

#[derive(Clone, Debug)]
pub struct DeclipParams {
    /// Frame length.
    pub n: usize,
    /// Active DCT components of the clean frame.
    pub components: usize,
    /// Fraction of samples at or beyond the clip level; sets `C`.
    pub clip_fraction: f64,
    /// Explicit clip level, overriding `clip_fraction`.
    pub clip_level: Option<f64>,
    /// Break tolerance; defaults to `1e-5 * n`.
    pub eps: Option<f64>,
    /// Sparsity schedule `step, 2 step, ...` up to `max_active`.
    pub step: usize,
    pub max_active: usize,
}

impl Default for DeclipParams {
    fn default() -> Self {
        DeclipParams {
            n: 1024,
            components: 70,
            clip_fraction: 0.25,
            clip_level: None,
            eps: None,
            step: 30,
            max_active: 256,
        }
    }
}

/// One frame to de-clip and the sparsity-constrained problem family
///
/// `min 1/2 |F x - y|^2` s.t. `|M y - M y~| <= sqrt(eps)`, `M+ y >= C`,
/// `M- y <= -C`, `|x|_0 <= N`, with `F` the inverse DCT.
#[derive(Clone, Debug)]
pub struct Declip {
    pub clean: Signal,
    pub clipped: Signal,
    pub clip_level: f64,
    pub eps: f64,
    /// Samples strictly inside `(-C, C)`.
    pub reliable: Vec<usize>,
    pub clipped_high: Vec<usize>,
    pub clipped_low: Vec<usize>,
    pub idct: Arc<dyn LinearOp>,
    pub schedule: Vec<usize>,
}

impl Declip {
    pub fn n(&self) -> usize {
        self.clean.len()
    }

    /// The problem with sparsity budget `active`, started from `start`
    /// (`x` then `y`), or from `x = 0, y = y~`.
    pub fn problem(
        &self,
        active: usize,
        start: Option<(&Signal, &Signal)>,
    ) -> Result<(Problem, VarId, VarId)> {
        let n = self.n();
        let layout = Layout::real(&[n]);
        let (x0, y0) = match start {
            Some((x, y)) => (x.clone(), y.clone()),
            None => (Signal::zeros(&layout), self.clipped.clone()),
        };
        let mut p = Problem::new();
        let x = p.variable("x", x0);
        let y = p.variable("y", y0);
        p.add_smooth(
            Arc::new(sqr_dist(Signal::zeros(&layout))),
            vec![(x, self.idct.clone()), (y, scale_op(&layout, -1.0))],
        )?;
        let reliable_values = self.clipped.gather(&self.reliable);
        p.add_nonsmooth(
            Arc::new(translate(
                ball_l2(self.eps.sqrt())?,
                reliable_values.scaled(-1.0),
            )),
            vec![(y, select_op(&self.reliable, n)?)],
        )?;
        if !self.clipped_high.is_empty() {
            p.add_nonsmooth(
                Arc::new(halfspace_ge(self.clip_level)?),
                vec![(y, select_op(&self.clipped_high, n)?)],
            )?;
        }
        if !self.clipped_low.is_empty() {
            p.add_nonsmooth(
                Arc::new(halfspace_le(self.clip_level)?),
                vec![(y, select_op(&self.clipped_low, n)?)],
            )?;
        }
        p.add_nonsmooth_on(Arc::new(ball_l0(active)), x)?;
        Ok((p, x, y))
    }

    /// `|F x - y|`, the quantity compared against `eps` to stop.
    pub fn misfit(&self, x: &Signal, y: &Signal) -> Result<f64> {
        Ok(self.idct.forward(x)?.sub(y)?.norm2())
    }

    /// Largest violation of the three sample constraints at `y`.
    pub fn infeasibility(&self, y: &Signal) -> Result<f64> {
        let reliable = y
            .gather(&self.reliable)
            .sub(&self.clipped.gather(&self.reliable))?
            .norm2();
        let mut worst = (reliable - self.eps.sqrt()).max(0.0);
        let v = y.real_data().expect("real frame");
        for &i in &self.clipped_high {
            worst = worst.max(self.clip_level - v[i]);
        }
        for &i in &self.clipped_low {
            worst = worst.max(v[i] + self.clip_level);
        }
        Ok(worst)
    }

    /// `|(y - clean)|` over the clipped samples.
    pub fn clipped_error(&self, y: &Signal) -> Result<f64> {
        let idx: Vec<usize> = self
            .clipped_high
            .iter()
            .chain(&self.clipped_low)
            .copied()
            .collect();
        Ok(y.gather(&idx).sub(&self.clean.gather(&idx))?.norm2())
    }
}

/// Random frame with `components` active low-frequency DCT coefficients,
/// clipped at the level exceeded by `clip_fraction` of its samples.
pub fn gen_declip(params: &DeclipParams, seed: u64) -> Result<Declip> {
    let n = params.n;
    if n < 8 || params.components == 0 || params.components > n / 4 || params.step == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad de-clipping sizes: n={n}, components={}, step={}",
            params.components, params.step
        )));
    }
    let mut rng = seeded(seed);
    let mut coeffs = vec![0.0; n];
    for k in rand::seq::index::sample(&mut rng, n / 4, params.components) {
        coeffs[k] = rng.sample::<f64, _>(StandardNormal);
    }
    let idct = idct_op(n);
    let clean = idct.forward(&Signal::from_vec(coeffs))?;
    let clip_level = match params.clip_level {
        Some(c) if c > 0.0 => c,
        Some(c) => {
            return Err(Error::InvalidParameter(format!(
                "clip level must be positive, got {c}"
            )))
        }
        None => {
            let mut mags = clean.moduli();
            mags.sort_by(f64::total_cmp);
            let keep = ((1.0 - params.clip_fraction) * n as f64).round() as usize;
            mags[keep.min(n - 1)]
        }
    };
    let values = clean.real_data().expect("real frame");
    let mut reliable = Vec::new();
    let mut clipped_high = Vec::new();
    let mut clipped_low = Vec::new();
    let clipped: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= clip_level {
                clipped_high.push(i);
                clip_level
            } else if v <= -clip_level {
                clipped_low.push(i);
                -clip_level
            } else {
                reliable.push(i);
                v
            }
        })
        .collect();
    let schedule = (1..=params.max_active / params.step)
        .map(|k| k * params.step)
        .collect();
    Ok(Declip {
        clipped: Signal::from_vec(clipped),
        clean,
        clip_level,
        eps: params.eps.unwrap_or(1e-5 * n as f64),
        reliable,
        clipped_high,
        clipped_low,
        idct,
        schedule,
    })
}
