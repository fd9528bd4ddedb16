//! Dense real/complex signal containers.
//!
//! A [`Signal`] is a flat buffer of `f64` or `Complex64` scalars plus explicit
//! shape metadata. Matrices are stored column-major, so a `[rows, cols]`
//! signal can be handed to `nalgebra` without copying the layout around.
//!
//! Complex signals are treated as real vector spaces of twice the dimension:
//! the inner product is `Re <a, b> = sum(re(a_i) re(b_i) + im(a_i) im(b_i))`.
//! Every gradient in the crate is taken with respect to that inner product.

use std::fmt;
use std::ops::Index;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

/// Shape and scalar field of a signal; the "type" of a vector space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Layout {
    pub shape: Vec<usize>,
    pub field: Field,
}

impl Layout {
    pub fn new(shape: &[usize], field: Field) -> Self {
        Layout {
            shape: shape.to_vec(),
            field,
        }
    }

    pub fn real(shape: &[usize]) -> Self {
        Self::new(shape, Field::Real)
    }

    pub fn complex(shape: &[usize]) -> Self {
        Self::new(shape, Field::Complex)
    }

    /// Number of stored scalars.
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn with_field(&self, field: Field) -> Self {
        Layout {
            shape: self.shape.clone(),
            field,
        }
    }

    pub(crate) fn expect(&self, found: &Layout) -> Result<()> {
        if self == found {
            Ok(())
        } else {
            Err(Error::LayoutMismatch {
                expected: self.clone(),
                found: found.clone(),
            })
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = match self.field {
            Field::Real => "R",
            Field::Complex => "C",
        };
        write!(f, "{field}{:?}", self.shape)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Storage {
    pub fn len(&self) -> usize {
        match self {
            Storage::Real(v) => v.len(),
            Storage::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn field(&self) -> Field {
        match self {
            Storage::Real(_) => Field::Real,
            Storage::Complex(_) => Field::Complex,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    data: Storage,
    shape: Vec<usize>,
}

impl Signal {
    pub fn new(data: Storage, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::BadShape {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Signal {
            data,
            shape: shape.to_vec(),
        })
    }

    pub fn real(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        Self::new(Storage::Real(data), shape)
    }

    pub fn complex(data: Vec<Complex64>, shape: &[usize]) -> Result<Self> {
        Self::new(Storage::Complex(data), shape)
    }

    /// One-dimensional real signal.
    pub fn from_vec(data: Vec<f64>) -> Self {
        let n = data.len();
        Signal {
            data: Storage::Real(data),
            shape: vec![n],
        }
    }

    /// One-dimensional complex signal.
    pub fn from_complex_vec(data: Vec<Complex64>) -> Self {
        let n = data.len();
        Signal {
            data: Storage::Complex(data),
            shape: vec![n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Signal {
            data: Storage::Real(vec![value]),
            shape: vec![1, 1],
        }
    }

    pub fn zeros(layout: &Layout) -> Self {
        let n = layout.numel();
        let data = match layout.field {
            Field::Real => Storage::Real(vec![0.0; n]),
            Field::Complex => Storage::Complex(vec![Complex64::new(0.0, 0.0); n]),
        };
        Signal {
            data,
            shape: layout.shape.clone(),
        }
    }

    pub fn filled(layout: &Layout, value: f64) -> Self {
        let n = layout.numel();
        let data = match layout.field {
            Field::Real => Storage::Real(vec![value; n]),
            Field::Complex => Storage::Complex(vec![Complex64::new(value, 0.0); n]),
        };
        Signal {
            data,
            shape: layout.shape.clone(),
        }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Signal {
            data: Storage::Real(m.as_slice().to_vec()),
            shape: vec![m.nrows(), m.ncols()],
        }
    }

    pub fn from_complex_matrix(m: &DMatrix<Complex64>) -> Self {
        Signal {
            data: Storage::Complex(m.as_slice().to_vec()),
            shape: vec![m.nrows(), m.ncols()],
        }
    }

    /// `(rows, cols)` when the signal is read as a matrix. Vectors are columns.
    pub fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [n] => Ok((*n, 1)),
            [r, c] => Ok((*r, *c)),
            _ => Err(Error::Unsupported(format!(
                "signal of shape {:?} is not a matrix",
                self.shape
            ))),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let (r, c) = self.matrix_dims()?;
        let data = self.real_data().ok_or_else(|| {
            Error::Unsupported("complex signal where a real matrix was required".into())
        })?;
        Ok(DMatrix::from_column_slice(r, c, data))
    }

    pub fn to_complex_matrix(&self) -> Result<DMatrix<Complex64>> {
        let (r, c) = self.matrix_dims()?;
        let embedded = self.to_complex();
        Ok(DMatrix::from_column_slice(
            r,
            c,
            embedded.complex_data().expect("complex by construction"),
        ))
    }

    pub fn layout(&self) -> Layout {
        Layout {
            shape: self.shape.clone(),
            field: self.field(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn field(&self) -> Field {
        self.data.field()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Dimension of the signal as a real vector space.
    pub fn real_dim(&self) -> usize {
        match self.field() {
            Field::Real => self.len(),
            Field::Complex => 2 * self.len(),
        }
    }

    pub fn storage(&self) -> &Storage {
        &self.data
    }

    pub fn into_storage(self) -> Storage {
        self.data
    }

    pub fn real_data(&self) -> Option<&[f64]> {
        match &self.data {
            Storage::Real(v) => Some(v),
            Storage::Complex(_) => None,
        }
    }

    pub fn real_data_mut(&mut self) -> Option<&mut [f64]> {
        match &mut self.data {
            Storage::Real(v) => Some(v),
            Storage::Complex(_) => None,
        }
    }

    pub fn complex_data(&self) -> Option<&[Complex64]> {
        match &self.data {
            Storage::Complex(v) => Some(v),
            Storage::Real(_) => None,
        }
    }

    pub fn complex_data_mut(&mut self) -> Option<&mut [Complex64]> {
        match &mut self.data {
            Storage::Complex(v) => Some(v),
            Storage::Real(_) => None,
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.len() {
            return Err(Error::BadShape {
                shape: shape.to_vec(),
                len: self.len(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Complex copy of the signal; real data gets zero imaginary parts.
    pub fn to_complex(&self) -> Signal {
        match &self.data {
            Storage::Complex(_) => self.clone(),
            Storage::Real(v) => Signal {
                data: Storage::Complex(v.iter().map(|&r| Complex64::new(r, 0.0)).collect()),
                shape: self.shape.clone(),
            },
        }
    }

    /// Real part of the signal (a no-op copy for real signals).
    pub fn real_part(&self) -> Signal {
        match &self.data {
            Storage::Real(_) => self.clone(),
            Storage::Complex(v) => Signal {
                data: Storage::Real(v.iter().map(|z| z.re).collect()),
                shape: self.shape.clone(),
            },
        }
    }

    /// Moduli of the entries.
    pub fn moduli(&self) -> Vec<f64> {
        match &self.data {
            Storage::Real(v) => v.iter().map(|x| x.abs()).collect(),
            Storage::Complex(v) => v.iter().map(|z| z.norm()).collect(),
        }
    }

    /// Multiplies entry `i` by the real factor `factors[i]`.
    pub fn scale_entries(&self, factors: &[f64]) -> Signal {
        debug_assert_eq!(factors.len(), self.len());
        let data = match &self.data {
            Storage::Real(v) => Storage::Real(v.iter().zip(factors).map(|(x, s)| x * s).collect()),
            Storage::Complex(v) => {
                Storage::Complex(v.iter().zip(factors).map(|(z, s)| z * s).collect())
            }
        };
        Signal {
            data,
            shape: self.shape.clone(),
        }
    }

    /// Applies `f` to real entries, or to real and imaginary parts separately.
    pub fn map_components(&self, f: impl Fn(f64) -> f64) -> Signal {
        let data = match &self.data {
            Storage::Real(v) => Storage::Real(v.iter().map(|&x| f(x)).collect()),
            Storage::Complex(v) => {
                Storage::Complex(v.iter().map(|z| Complex64::new(f(z.re), f(z.im))).collect())
            }
        };
        Signal {
            data,
            shape: self.shape.clone(),
        }
    }

    /// Entries at `indices` of the flattened signal, as a 1-D signal.
    pub fn gather(&self, indices: &[usize]) -> Signal {
        let data = match &self.data {
            Storage::Real(v) => Storage::Real(indices.iter().map(|&i| v[i]).collect()),
            Storage::Complex(v) => Storage::Complex(indices.iter().map(|&i| v[i]).collect()),
        };
        Signal {
            data,
            shape: vec![indices.len()],
        }
    }

    /// Writes `src` into the flattened entries at `indices`.
    pub fn scatter(&mut self, indices: &[usize], src: &Signal) -> Result<()> {
        if src.len() != indices.len() || src.field() != self.field() {
            return Err(Error::LayoutMismatch {
                expected: Layout::new(&[indices.len()], self.field()),
                found: src.layout(),
            });
        }
        match (&mut self.data, &src.data) {
            (Storage::Real(dst), Storage::Real(s)) => {
                indices.iter().zip(s).for_each(|(&i, v)| dst[i] = *v)
            }
            (Storage::Complex(dst), Storage::Complex(s)) => {
                indices.iter().zip(s).for_each(|(&i, v)| dst[i] = *v)
            }
            _ => unreachable!("fields checked above"),
        }
        Ok(())
    }

    pub fn check_layout(&self, other: &Signal) -> Result<()> {
        if self.shape != other.shape || self.field() != other.field() {
            return Err(Error::LayoutMismatch {
                expected: self.layout(),
                found: other.layout(),
            });
        }
        Ok(())
    }

    /// `Re <self, other>`.
    pub fn inner(&self, other: &Signal) -> Result<f64> {
        self.check_layout(other)?;
        Ok(match (&self.data, &other.data) {
            (Storage::Real(a), Storage::Real(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (Storage::Complex(a), Storage::Complex(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| x.re * y.re + x.im * y.im)
                .sum(),
            _ => unreachable!("fields checked above"),
        })
    }

    pub fn norm2_sq(&self) -> f64 {
        match &self.data {
            Storage::Real(v) => v.iter().map(|x| x * x).sum(),
            Storage::Complex(v) => v.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    pub fn norm1(&self) -> f64 {
        match &self.data {
            Storage::Real(v) => v.iter().map(|x| x.abs()).sum(),
            Storage::Complex(v) => v.iter().map(|z| z.norm()).sum(),
        }
    }

    /// Largest entry modulus.
    pub fn norm_inf(&self) -> f64 {
        match &self.data {
            Storage::Real(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Storage::Complex(v) => v.iter().fold(0.0, |m, z| m.max(z.norm())),
        }
    }

    /// Number of nonzero entries.
    pub fn count_nonzero(&self) -> usize {
        match &self.data {
            Storage::Real(v) => v.iter().filter(|x| **x != 0.0).count(),
            Storage::Complex(v) => v.iter().filter(|z| z.re != 0.0 || z.im != 0.0).count(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            Storage::Real(v) => v.iter().all(|x| x.is_finite()),
            Storage::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Signal {
        self.map_components(|x| alpha * x)
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        match &mut self.data {
            Storage::Real(v) => v.iter_mut().for_each(|x| *x *= alpha),
            Storage::Complex(v) => v.iter_mut().for_each(|z| *z *= alpha),
        }
    }

    /// `self += alpha * x`, single-owner in-place update.
    pub fn axpy_in_place(&mut self, alpha: f64, x: &Signal) -> Result<()> {
        self.check_layout(x)?;
        match (&mut self.data, &x.data) {
            (Storage::Real(y), Storage::Real(x)) => {
                y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x)
            }
            (Storage::Complex(y), Storage::Complex(x)) => {
                y.iter_mut().zip(x).for_each(|(y, x)| *y += x * alpha)
            }
            _ => unreachable!("fields checked above"),
        }
        Ok(())
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        axpy(1.0, other, self)
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        axpy(-1.0, other, self)
    }
}

/// `alpha * x + y`.
pub fn axpy(alpha: f64, x: &Signal, y: &Signal) -> Result<Signal> {
    y.check_layout(x)?;
    let data = match (&x.data, &y.data) {
        (Storage::Real(x), Storage::Real(y)) => {
            Storage::Real(x.iter().zip(y).map(|(x, y)| alpha * x + y).collect())
        }
        (Storage::Complex(x), Storage::Complex(y)) => {
            Storage::Complex(x.iter().zip(y).map(|(x, y)| x * alpha + y).collect())
        }
        _ => unreachable!("fields checked above"),
    };
    Ok(Signal {
        data,
        shape: y.shape.clone(),
    })
}

/// Ordered collection of signals: the point of a product space.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalTuple(Vec<Signal>);

impl SignalTuple {
    pub fn new(parts: Vec<Signal>) -> Self {
        SignalTuple(parts)
    }

    pub fn single(part: Signal) -> Self {
        SignalTuple(vec![part])
    }

    pub fn zeros(layouts: &[Layout]) -> Self {
        SignalTuple(layouts.iter().map(Signal::zeros).collect())
    }

    pub fn parts(&self) -> &[Signal] {
        &self.0
    }

    pub fn parts_mut(&mut self) -> &mut [Signal] {
        &mut self.0
    }

    pub fn into_parts(self) -> Vec<Signal> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn layouts(&self) -> Vec<Layout> {
        self.0.iter().map(Signal::layout).collect()
    }

    fn check_arity(&self, other: &SignalTuple) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::ArityMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    /// Sum of the componentwise inner products.
    pub fn inner(&self, other: &SignalTuple) -> Result<f64> {
        self.check_arity(other)?;
        self.0.iter().zip(&other.0).map(|(a, b)| a.inner(b)).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(Signal::norm2_sq).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, s| m.max(s.norm_inf()))
    }
}

impl Index<usize> for SignalTuple {
    type Output = Signal;

    fn index(&self, i: usize) -> &Signal {
        &self.0[i]
    }
}

impl From<Vec<Signal>> for SignalTuple {
    fn from(parts: Vec<Signal>) -> Self {
        SignalTuple(parts)
    }
}

/// The vector-space operations the solvers need from an iterate type.
pub trait Vector: Clone + Send + Sync + fmt::Debug {
    fn inner(&self, other: &Self) -> Result<f64>;
    fn norm2(&self) -> f64;
    fn norm_inf(&self) -> f64;
    /// `alpha * self + y`.
    fn axpy(&self, alpha: f64, y: &Self) -> Result<Self>;
    fn scaled(&self, alpha: f64) -> Self;
    fn zeros_like(&self) -> Self;
    fn is_finite(&self) -> bool;
    /// Dimension as a real vector space.
    fn real_dim(&self) -> usize;
    /// Flattened real coordinates; complex entries contribute `re, im` pairs.
    fn coords(&self) -> Vec<f64>;
    /// A vector with the layout of `self` and the given coordinates.
    fn with_coords(&self, coords: &[f64]) -> Self;

    fn sub(&self, other: &Self) -> Result<Self> {
        other.axpy(-1.0, self)
    }

    fn add(&self, other: &Self) -> Result<Self> {
        other.axpy(1.0, self)
    }
}

impl Vector for Signal {
    fn inner(&self, other: &Self) -> Result<f64> {
        Signal::inner(self, other)
    }

    fn norm2(&self) -> f64 {
        Signal::norm2(self)
    }

    fn norm_inf(&self) -> f64 {
        Signal::norm_inf(self)
    }

    fn axpy(&self, alpha: f64, y: &Self) -> Result<Self> {
        axpy(alpha, self, y)
    }

    fn scaled(&self, alpha: f64) -> Self {
        Signal::scaled(self, alpha)
    }

    fn zeros_like(&self) -> Self {
        Signal::zeros(&self.layout())
    }

    fn is_finite(&self) -> bool {
        Signal::is_finite(self)
    }

    fn real_dim(&self) -> usize {
        Signal::real_dim(self)
    }

    fn coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.real_dim());
        signal_coords(self, &mut out);
        out
    }

    fn with_coords(&self, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), self.real_dim(), "coordinate count");
        signal_from_coords(self, coords)
    }
}

impl Vector for SignalTuple {
    fn inner(&self, other: &Self) -> Result<f64> {
        SignalTuple::inner(self, other)
    }

    fn norm2(&self) -> f64 {
        SignalTuple::norm2(self)
    }

    fn norm_inf(&self) -> f64 {
        SignalTuple::norm_inf(self)
    }

    fn axpy(&self, alpha: f64, y: &Self) -> Result<Self> {
        self.check_arity(y)?;
        self.0
            .iter()
            .zip(&y.0)
            .map(|(x, y)| axpy(alpha, x, y))
            .collect::<Result<Vec<_>>>()
            .map(SignalTuple)
    }

    fn scaled(&self, alpha: f64) -> Self {
        SignalTuple(self.0.iter().map(|s| s.scaled(alpha)).collect())
    }

    fn zeros_like(&self) -> Self {
        SignalTuple(self.0.iter().map(|s| s.zeros_like()).collect())
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(Signal::is_finite)
    }

    fn real_dim(&self) -> usize {
        self.0.iter().map(Signal::real_dim).sum()
    }

    fn coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.real_dim());
        self.0.iter().for_each(|s| signal_coords(s, &mut out));
        out
    }

    fn with_coords(&self, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), self.real_dim(), "coordinate count");
        let mut offset = 0;
        SignalTuple(
            self.0
                .iter()
                .map(|s| {
                    let n = s.real_dim();
                    let part = signal_from_coords(s, &coords[offset..offset + n]);
                    offset += n;
                    part
                })
                .collect(),
        )
    }
}

fn signal_coords(s: &Signal, out: &mut Vec<f64>) {
    match s.storage() {
        Storage::Real(v) => out.extend_from_slice(v),
        Storage::Complex(v) => v.iter().for_each(|z| {
            out.push(z.re);
            out.push(z.im);
        }),
    }
}

fn signal_from_coords(template: &Signal, coords: &[f64]) -> Signal {
    let data = match template.storage() {
        Storage::Real(_) => Storage::Real(coords.to_vec()),
        Storage::Complex(_) => Storage::Complex(
            coords
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        ),
    };
    Signal {
        data,
        shape: template.shape.clone(),
    }
}
