//! Norms and quadratic penalties.

use nalgebra::{DMatrix, DVector};

use super::{check_gamma, check_nonneg, ProxFn};
use crate::error::{Error, Result};
use crate::tensor::{Signal, Storage, Vector};

/// The zero function; its prox is the identity.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

pub fn zero_fn() -> Zero {
    Zero
}

impl<X: Vector> ProxFn<X> for Zero {
    fn value(&self, _x: &X) -> Result<f64> {
        Ok(0.0)
    }

    fn prox(&self, x: &X, gamma: f64) -> Result<X> {
        check_gamma(gamma)?;
        Ok(x.clone())
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn conjugate_value(&self, u: &X) -> Result<f64> {
        Ok(if u.norm_inf() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        })
    }
}

/// Shrinks every entry's modulus by `t`, keeping its sign or phase.
fn shrink(x: &Signal, t: f64) -> Signal {
    if t == 0.0 {
        return x.clone();
    }
    let factors: Vec<f64> = x
        .moduli()
        .into_iter()
        .map(|m| if m > t { 1.0 - t / m } else { 0.0 })
        .collect();
    x.scale_entries(&factors)
}

#[derive(Clone, Debug)]
pub struct L1Norm {
    lambda: f64,
}

/// `lambda * sum |x_i|`. Complex entries shrink in modulus.
pub fn l1_norm(lambda: f64) -> Result<L1Norm> {
    check_nonneg("lambda", lambda)?;
    Ok(L1Norm { lambda })
}

impl ProxFn for L1Norm {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(self.lambda * x.norm1())
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        Ok(shrink(x, gamma * self.lambda))
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        Ok(indicator(
            u.norm_inf() <= self.lambda * (1.0 + super::FEASIBILITY_TOL),
        ))
    }
}

pub(crate) fn indicator(inside: bool) -> f64 {
    if inside {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug)]
pub struct L0PseudoNorm {
    lambda: f64,
}

/// `lambda * #{i : x_i != 0}`; the prox is a hard threshold at `sqrt(2 gamma lambda)`.
pub fn l0_pseudo_norm(lambda: f64) -> Result<L0PseudoNorm> {
    check_nonneg("lambda", lambda)?;
    Ok(L0PseudoNorm { lambda })
}

impl ProxFn for L0PseudoNorm {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(self.lambda * x.count_nonzero() as f64)
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        let threshold = (2.0 * gamma * self.lambda).sqrt();
        let keep: Vec<f64> = x
            .moduli()
            .into_iter()
            .map(|m| if m > threshold { 1.0 } else { 0.0 })
            .collect();
        Ok(x.scale_entries(&keep))
    }

    fn is_convex(&self) -> bool {
        false
    }

    fn is_separable(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug)]
pub struct L2Norm {
    lambda: f64,
}

/// `lambda * |x|_2`; the prox is a block soft threshold.
pub fn l2_norm(lambda: f64) -> Result<L2Norm> {
    check_nonneg("lambda", lambda)?;
    Ok(L2Norm { lambda })
}

impl ProxFn for L2Norm {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(self.lambda * x.norm2())
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        let t = gamma * self.lambda;
        let norm = x.norm2();
        Ok(if norm > t {
            x.scaled(1.0 - t / norm)
        } else {
            x.zeros_like()
        })
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        Ok(indicator(
            u.norm2() <= self.lambda * (1.0 + super::FEASIBILITY_TOL),
        ))
    }
}

#[derive(Clone, Debug)]
pub struct MixedL21Norm {
    lambda: f64,
}

/// `lambda * sum_i |X_{i,:}|_2` over the rows of a matrix signal.
pub fn mixed_l21_norm(lambda: f64) -> Result<MixedL21Norm> {
    check_nonneg("lambda", lambda)?;
    Ok(MixedL21Norm { lambda })
}

fn row_norms(x: &Signal) -> Result<Vec<f64>> {
    let (rows, _) = x.matrix_dims()?;
    let mut sq = vec![0.0; rows];
    match x.storage() {
        Storage::Real(v) => {
            for col in v.chunks_exact(rows) {
                sq.iter_mut().zip(col).for_each(|(s, a)| *s += a * a);
            }
        }
        Storage::Complex(v) => {
            for col in v.chunks_exact(rows) {
                sq.iter_mut().zip(col).for_each(|(s, a)| *s += a.norm_sqr());
            }
        }
    }
    Ok(sq.into_iter().map(f64::sqrt).collect())
}

impl ProxFn for MixedL21Norm {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(self.lambda * row_norms(x)?.iter().sum::<f64>())
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        self.prox_and_value(x, gamma).map(|(z, _)| z)
    }

    fn prox_and_value(&self, x: &Signal, gamma: f64) -> Result<(Signal, f64)> {
        check_gamma(gamma)?;
        let t = gamma * self.lambda;
        let norms = row_norms(x)?;
        let factors: Vec<f64> = norms
            .iter()
            .map(|&r| if r > t { 1.0 - t / r } else { 0.0 })
            .collect();
        // each row norm shrinks from r to max(r - t, 0)
        let value = self.lambda * norms.iter().map(|&r| (r - t).max(0.0)).sum::<f64>();
        let rows = factors.len();
        let data = match x.storage() {
            Storage::Real(v) => Storage::Real(
                v.chunks_exact(rows)
                    .flat_map(|col| col.iter().zip(&factors).map(|(a, f)| a * f))
                    .collect(),
            ),
            Storage::Complex(v) => Storage::Complex(
                v.chunks_exact(rows)
                    .flat_map(|col| col.iter().zip(&factors).map(|(a, f)| a * f))
                    .collect(),
            ),
        };
        Ok((Signal::new(data, x.shape())?, value))
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        let largest = row_norms(u)?.into_iter().fold(0.0, f64::max);
        Ok(indicator(
            largest <= self.lambda * (1.0 + super::FEASIBILITY_TOL),
        ))
    }
}

/// Thin SVD of a real matrix signal: `(U, sigma, V^T)`.
pub(crate) fn svd(x: &Signal) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let m = x.to_matrix()?;
    let svd = m.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::LinAlg("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::LinAlg("SVD did not return V^T".into()))?;
    Ok((u, svd.singular_values, v_t))
}

/// `U diag(sigma) V^T` reshaped like `like`.
pub(crate) fn from_svd(
    u: &DMatrix<f64>,
    sigma: &DVector<f64>,
    v_t: &DMatrix<f64>,
    like: &Signal,
) -> Result<Signal> {
    let m = u * DMatrix::from_diagonal(sigma) * v_t;
    Signal::from_matrix(&m).reshape(like.shape())
}

#[derive(Clone, Debug)]
pub struct NuclearNorm {
    lambda: f64,
}

/// `lambda * sum of singular values` of a real matrix signal.
pub fn nuclear_norm(lambda: f64) -> Result<NuclearNorm> {
    check_nonneg("lambda", lambda)?;
    Ok(NuclearNorm { lambda })
}

impl ProxFn for NuclearNorm {
    fn value(&self, x: &Signal) -> Result<f64> {
        let (_, sigma, _) = svd(x)?;
        Ok(self.lambda * sigma.sum())
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        let (u, sigma, v_t) = svd(x)?;
        let t = gamma * self.lambda;
        let shrunk = sigma.map(|s| (s - t).max(0.0));
        from_svd(&u, &shrunk, &v_t, x)
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn conjugate_value(&self, u: &Signal) -> Result<f64> {
        let (_, sigma, _) = svd(u)?;
        let largest = sigma.iter().cloned().fold(0.0, f64::max);
        Ok(indicator(
            largest <= self.lambda * (1.0 + super::FEASIBILITY_TOL),
        ))
    }
}

#[derive(Clone, Debug)]
pub struct LeastSquaresQuadratic {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: DMatrix<f64>,
    atb: DVector<f64>,
}

/// `1/2 |A x - b|^2` for an explicit real matrix, with a closed-form prox.
pub fn least_squares_quadratic(a: DMatrix<f64>, b: Vec<f64>) -> Result<LeastSquaresQuadratic> {
    if a.nrows() != b.len() {
        return Err(Error::param(format!(
            "matrix has {} rows but b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    let b = DVector::from_vec(b);
    let gram = a.tr_mul(&a);
    let atb = a.tr_mul(&b);
    Ok(LeastSquaresQuadratic { a, b, gram, atb })
}

impl ProxFn for LeastSquaresQuadratic {
    fn value(&self, x: &Signal) -> Result<f64> {
        let x = DVector::from_column_slice(vector_data(x, self.a.ncols())?);
        Ok(0.5 * (&self.a * x - &self.b).norm_squared())
    }

    fn prox(&self, x: &Signal, gamma: f64) -> Result<Signal> {
        check_gamma(gamma)?;
        let xv = DVector::from_column_slice(vector_data(x, self.a.ncols())?);
        let n = self.gram.nrows();
        let system = &self.gram + DMatrix::identity(n, n) / gamma;
        let rhs = &self.atb + xv / gamma;
        let z = system
            .cholesky()
            .ok_or_else(|| Error::LinAlg("A^T A + I/gamma not positive definite".into()))?
            .solve(&rhs);
        Ok(Signal::from_vec(z.data.into()))
    }

    fn is_convex(&self) -> bool {
        true
    }
}

pub(crate) fn vector_data(x: &Signal, n: usize) -> Result<&[f64]> {
    match x.real_data() {
        Some(d) if d.len() == n => Ok(d),
        _ => Err(Error::LayoutMismatch {
            expected: crate::tensor::Layout::real(&[n]),
            found: x.layout(),
        }),
    }
}
