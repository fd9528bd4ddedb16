//! Indicator functions of sets; their proxes are projections.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::catalog::{from_svd, indicator, svd, vector_data};
use super::{check_gamma, ProxFn};
use crate::error::{Error, Result};
use crate::tensor::Signal;

/// Relative slack used when testing membership of a projected point.
pub const FEASIBILITY_TOL: f64 = 1e-10;

fn with_zero_value(z: Signal) -> Result<(Signal, f64)> {
    Ok((z, 0.0))
}

#[derive(Clone, Debug)]
pub struct BallL0 {
    m: usize,
}

/// `{x : at most m nonzeros}`. The projection keeps the `m` largest moduli,
/// preferring lower indices among equal moduli.
pub fn ball_l0(m: usize) -> BallL0 {
    BallL0 { m }
}

impl ProxFn for BallL0 {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(indicator(x.count_nonzero() <= self.m))
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        let moduli = x.moduli();
        if self.m >= moduli.len() {
            return Ok(x.clone());
        }
        let mut order: Vec<usize> = (0..moduli.len()).collect();
        // stable sort: equal moduli keep index order
        order.sort_by(|&i, &j| moduli[j].total_cmp(&moduli[i]));
        let mut keep = vec![0.0; moduli.len()];
        order[..self.m].iter().for_each(|&i| keep[i] = 1.0);
        Ok(x.scale_entries(&keep))
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        with_zero_value(self.prox(x, gamma)?)
    }

    fn is_convex(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct BallL2 {
    radius: f64,
}

/// `{x : |x|_2 <= r}`.
pub fn ball_l2(radius: f64) -> Result<BallL2> {
    super::check_nonneg("radius", radius)?;
    Ok(BallL2 { radius })
}

impl ProxFn for BallL2 {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(indicator(
            x.norm2() <= self.radius * (1.0 + FEASIBILITY_TOL) + FEASIBILITY_TOL,
        ))
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        let norm = x.norm2();
        Ok(if norm > self.radius {
            x.scaled(self.radius / norm)
        } else {
            x.clone()
        })
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        with_zero_value(self.prox(x, gamma)?)
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        Ok(self.radius * u.norm2())
    }
}

#[derive(Clone, Debug)]
pub struct BoxSet {
    lower: f64,
    upper: f64,
}

/// `{x : lower <= x_i <= upper}` for real signals. Bounds may be infinite.
pub fn box_set(lower: f64, upper: f64) -> Result<BoxSet> {
    if lower.is_nan() || upper.is_nan() || lower > upper {
        return Err(Error::param(format!("empty box [{lower}, {upper}]")));
    }
    Ok(BoxSet { lower, upper })
}

/// `{x : x_i >= c}`.
pub fn halfspace_ge(c: f64) -> Result<BoxSet> {
    box_set(c, f64::INFINITY)
}

/// `{x : x_i <= -c}`.
pub fn halfspace_le(c: f64) -> Result<BoxSet> {
    box_set(f64::NEG_INFINITY, -c)
}

fn real_entries(x: &Signal) -> Result<&[f64]> {
    x.real_data()
        .ok_or_else(|| Error::Unsupported("box constraints on complex signals".into()))
}

fn slack(bound: f64) -> f64 {
    FEASIBILITY_TOL * (1.0 + bound.abs())
}

impl ProxFn for BoxSet {
    fn value(&self, x: &Signal) -> Result<f64> {
        let inside = real_entries(x)?
            .iter()
            .all(|&v| v >= self.lower - slack(self.lower) && v <= self.upper + slack(self.upper));
        Ok(indicator(inside))
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        real_entries(x)?;
        Ok(x.map_components(|v| v.max(self.lower).min(self.upper)))
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        with_zero_value(self.prox(x, gamma)?)
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        // support function: sum_i max(lower u_i, upper u_i)
        Ok(real_entries(u)?
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    self.upper * v
                } else if v < 0.0 {
                    self.lower * v
                } else {
                    0.0
                }
            })
            .sum())
    }
}

#[derive(Clone, Debug)]
pub struct RankBall {
    m: usize,
}

/// `{X : rank X <= m}` for real matrix signals.
pub fn rank_ball(m: usize) -> RankBall {
    RankBall { m }
}

impl ProxFn for RankBall {
    fn value(&self, x: &Signal) -> Result<f64> {
        let (_, sigma, _) = svd(x)?;
        let largest = sigma.iter().cloned().fold(0.0, f64::max);
        let rank = sigma
            .iter()
            .filter(|&&s| s > FEASIBILITY_TOL * largest.max(1.0))
            .count();
        Ok(indicator(rank <= self.m))
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        let (u, sigma, v_t) = svd(x)?;
        if self.m >= sigma.len() {
            return Ok(x.clone());
        }
        let mut order: Vec<usize> = (0..sigma.len()).collect();
        order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
        let mut kept = DVector::zeros(sigma.len());
        order[..self.m].iter().for_each(|&i| kept[i] = sigma[i]);
        from_svd(&u, &kept, &v_t, x)
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        with_zero_value(self.prox(x, gamma)?)
    }

    fn is_convex(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct AffineSet {
    a: DMatrix<f64>,
    b: DVector<f64>,
    factor: Cholesky<f64, Dyn>,
}

/// `{x : A x = b}` for an explicit real matrix with full row rank.
pub fn affine_set(a: DMatrix<f64>, b: Vec<f64>) -> Result<AffineSet> {
    if a.nrows() != b.len() {
        return Err(Error::param(format!(
            "matrix has {} rows but b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    let singular = || Error::LinAlg("A A^T is singular; A needs full row rank".into());
    let factor = (&a * a.transpose()).cholesky().ok_or_else(singular)?;
    // rounding turns an exact zero pivot into one of order sqrt(eps)
    let pivots = factor.l_dirty().diagonal();
    let largest = pivots.iter().cloned().fold(0.0, f64::max);
    if pivots.iter().any(|&p| !(p > 1e-7 * largest)) {
        return Err(singular());
    }
    Ok(AffineSet {
        a,
        b: DVector::from_vec(b),
        factor,
    })
}

impl ProxFn for AffineSet {
    fn value(&self, x: &Signal) -> Result<f64> {
        let x = DVector::from_column_slice(vector_data(x, self.a.ncols())?);
        let gap = (&self.a * x - &self.b).norm();
        Ok(indicator(gap <= FEASIBILITY_TOL * (1.0 + self.b.norm())))
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        let xv = DVector::from_column_slice(vector_data(x, self.a.ncols())?);
        let gap = &self.b - &self.a * &xv;
        let z = xv + self.a.tr_mul(&self.factor.solve(&gap));
        Ok(Signal::from_vec(z.data.into()))
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        with_zero_value(self.prox(x, gamma)?)
    }

    fn is_convex(&self) -> bool {
        true
    }
}
