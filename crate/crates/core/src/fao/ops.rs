//! Concrete operators.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{LinearOp, NonlinearOp};
use crate::error::{Error, Result};
use crate::tensor::{Field, Layout, Signal};

fn real_input<'a>(layout: &Layout, x: &'a Signal) -> Result<&'a [f64]> {
    layout.expect(&x.layout())?;
    Ok(x.real_data().expect("layout says real"))
}

fn complex_input<'a>(layout: &Layout, x: &'a Signal) -> Result<&'a [Complex64]> {
    layout.expect(&x.layout())?;
    Ok(x.complex_data().expect("layout says complex"))
}

#[derive(Clone, Debug)]
struct Identity {
    layout: Layout,
    scale: f64,
}

impl LinearOp for Identity {
    fn domain(&self) -> Layout {
        self.layout.clone()
    }

    fn codomain(&self) -> Layout {
        self.layout.clone()
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        self.layout.expect(&x.layout())?;
        Ok(if self.scale == 1.0 {
            x.clone()
        } else {
            x.scaled(self.scale)
        })
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        self.forward(y)
    }

    fn tight_frame_mu(&self) -> Option<f64> {
        Some(self.scale * self.scale)
    }

    fn is_identity(&self) -> bool {
        self.scale == 1.0
    }
}

pub fn identity_op(layout: &Layout) -> Arc<dyn LinearOp> {
    scale_op(layout, 1.0)
}

/// `x -> alpha x`.
pub fn scale_op(layout: &Layout, alpha: f64) -> Arc<dyn LinearOp> {
    Arc::new(Identity {
        layout: layout.clone(),
        scale: alpha,
    })
}

#[derive(Clone, Debug)]
struct Adjoint(Arc<dyn LinearOp>);

impl LinearOp for Adjoint {
    fn domain(&self) -> Layout {
        self.0.codomain()
    }

    fn codomain(&self) -> Layout {
        self.0.domain()
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        self.0.adjoint(x)
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        self.0.forward(y)
    }

    fn tight_frame_mu(&self) -> Option<f64> {
        // A A* = mu Id with A square (in real dimension) also gives A* A = mu Id.
        if real_dim(&self.0.domain()) == real_dim(&self.0.codomain()) {
            self.0.tight_frame_mu()
        } else {
            None
        }
    }
}

fn real_dim(layout: &Layout) -> usize {
    match layout.field {
        Field::Real => layout.numel(),
        Field::Complex => 2 * layout.numel(),
    }
}

/// The adjoint `A*` as an operator in its own right.
pub fn adjoint_op(a: Arc<dyn LinearOp>) -> Arc<dyn LinearOp> {
    Arc::new(Adjoint(a))
}

#[derive(Clone, Debug)]
struct DenseMatrix {
    m: DMatrix<f64>,
}

impl LinearOp for DenseMatrix {
    fn domain(&self) -> Layout {
        Layout::real(&[self.m.ncols()])
    }

    fn codomain(&self) -> Layout {
        Layout::real(&[self.m.nrows()])
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        let x = DVector::from_column_slice(real_input(&self.domain(), x)?);
        Ok(Signal::from_vec((&self.m * x).data.into()))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        let y = DVector::from_column_slice(real_input(&self.codomain(), y)?);
        Ok(Signal::from_vec(self.m.tr_mul(&y).data.into()))
    }
}

/// Explicit dense real matrix acting on vectors.
pub fn matrix_op(m: DMatrix<f64>) -> Arc<dyn LinearOp> {
    Arc::new(DenseMatrix { m })
}

#[derive(Clone, Debug)]
struct DenseComplexMatrix {
    m: DMatrix<Complex64>,
}

impl LinearOp for DenseComplexMatrix {
    fn domain(&self) -> Layout {
        Layout::complex(&[self.m.ncols()])
    }

    fn codomain(&self) -> Layout {
        Layout::complex(&[self.m.nrows()])
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        let x = DVector::from_column_slice(complex_input(&self.domain(), x)?);
        Ok(Signal::from_complex_vec((&self.m * x).data.into()))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        let y = DVector::from_column_slice(complex_input(&self.codomain(), y)?);
        Ok(Signal::from_complex_vec(self.m.ad_mul(&y).data.into()))
    }
}

/// Explicit dense complex matrix; the adjoint is the conjugate transpose.
pub fn complex_matrix_op(m: DMatrix<Complex64>) -> Arc<dyn LinearOp> {
    Arc::new(DenseComplexMatrix { m })
}

#[derive(Clone, Debug)]
struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl LinearOp for SparseMatrix {
    fn domain(&self) -> Layout {
        Layout::real(&[self.cols])
    }

    fn codomain(&self) -> Layout {
        Layout::real(&[self.rows])
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        let x = real_input(&self.domain(), x)?;
        let mut out = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
        }
        Ok(Signal::from_vec(out))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        let y = real_input(&self.codomain(), y)?;
        let mut out = vec![0.0; self.cols];
        for &(i, j, v) in &self.entries {
            out[j] += v * y[i];
        }
        Ok(Signal::from_vec(out))
    }
}

/// Sparse real matrix from `(row, col, value)` triplets; duplicates add up.
pub fn sparse_matrix_op(
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
) -> Result<Arc<dyn LinearOp>> {
    if let Some(&(i, j, _)) = entries.iter().find(|(i, j, _)| *i >= rows || *j >= cols) {
        return Err(Error::param(format!(
            "entry ({i}, {j}) outside a {rows}x{cols} matrix"
        )));
    }
    Ok(Arc::new(SparseMatrix {
        rows,
        cols,
        entries,
    }))
}

struct Convolution {
    n: usize,
    taps: usize,
    spectrum: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Convolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Convolution")
            .field("n", &self.n)
            .field("taps", &self.taps)
            .finish()
    }
}

impl Convolution {
    fn len(&self) -> usize {
        self.n + self.taps - 1
    }

    /// `ifft(fft(pad(v)) * H)` with `H` conjugated for the correlation.
    fn filter(&self, v: &[f64], conjugate: bool) -> Vec<f64> {
        let len = self.len();
        let mut buf: Vec<Complex64> = v
            .iter()
            .map(|&r| Complex64::new(r, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(len)
            .collect();
        self.fft.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&self.spectrum) {
            *b *= if conjugate { h.conj() } else { *h };
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / len as f64;
        buf.iter().map(|z| z.re * scale).collect()
    }
}

impl LinearOp for Convolution {
    fn domain(&self) -> Layout {
        Layout::real(&[self.n])
    }

    fn codomain(&self) -> Layout {
        Layout::real(&[self.len()])
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        let x = real_input(&self.domain(), x)?;
        Ok(Signal::from_vec(self.filter(x, false)))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        let y = real_input(&self.codomain(), y)?;
        let mut out = self.filter(y, true);
        out.truncate(self.n);
        Ok(Signal::from_vec(out))
    }
}

/// Full convolution `h * x` of a length-`n` signal, output length `n + len(h) - 1`.
pub fn conv_op(h: &[f64], n: usize) -> Result<Arc<dyn LinearOp>> {
    if h.is_empty() || n == 0 {
        return Err(Error::param("convolution needs nonempty filter and input"));
    }
    let len = n + h.len() - 1;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(len);
    let ifft = planner.plan_fft_inverse(len);
    let mut spectrum: Vec<Complex64> = h
        .iter()
        .map(|&r| Complex64::new(r, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(len)
        .collect();
    fft.process(&mut spectrum);
    Ok(Arc::new(Convolution {
        n,
        taps: h.len(),
        spectrum,
        fft,
        ifft,
    }))
}

struct UnitaryDft {
    n: usize,
    inverse: bool,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryDft")
            .field("n", &self.n)
            .field("inverse", &self.inverse)
            .finish()
    }
}

impl UnitaryDft {
    fn apply(&self, x: &Signal, inverse: bool) -> Result<Signal> {
        let mut buf = complex_input(&Layout::complex(&[self.n]), x)?.to_vec();
        if inverse {
            self.inv.process(&mut buf);
        } else {
            self.fwd.process(&mut buf);
        }
        let scale = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= scale);
        Ok(Signal::from_complex_vec(buf))
    }
}

impl LinearOp for UnitaryDft {
    fn domain(&self) -> Layout {
        Layout::complex(&[self.n])
    }

    fn codomain(&self) -> Layout {
        Layout::complex(&[self.n])
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        self.apply(x, self.inverse)
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        self.apply(y, !self.inverse)
    }

    fn tight_frame_mu(&self) -> Option<f64> {
        Some(1.0)
    }
}

fn dft(n: usize, inverse: bool) -> Arc<dyn LinearOp> {
    let mut planner = FftPlanner::new();
    Arc::new(UnitaryDft {
        n,
        inverse,
        fwd: planner.plan_fft_forward(n),
        inv: planner.plan_fft_inverse(n),
    })
}

/// Unitary DFT on `C^n`: `X_k = n^{-1/2} sum_j x_j exp(-2 pi i jk/n)`.
pub fn dft_op(n: usize) -> Arc<dyn LinearOp> {
    dft(n, false)
}

/// Inverse of [`dft_op`].
pub fn idft_op(n: usize) -> Arc<dyn LinearOp> {
    dft(n, true)
}

#[derive(Clone, Debug)]
struct RealPart {
    shape: Vec<usize>,
}

impl LinearOp for RealPart {
    fn domain(&self) -> Layout {
        Layout::complex(&self.shape)
    }

    fn codomain(&self) -> Layout {
        Layout::real(&self.shape)
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        self.domain().expect(&x.layout())?;
        Ok(x.real_part())
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        self.codomain().expect(&y.layout())?;
        Ok(y.to_complex())
    }

    fn tight_frame_mu(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `Re: C^shape -> R^shape`; the adjoint embeds real signals.
pub fn real_part_op(shape: &[usize]) -> Arc<dyn LinearOp> {
    Arc::new(RealPart {
        shape: shape.to_vec(),
    })
}

struct Dct {
    n: usize,
    inverse: bool,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `s_k exp(-i pi k / 2n)` for the type-II transform.
    twiddle: Vec<Complex64>,
}

impl fmt::Debug for Dct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dct")
            .field("n", &self.n)
            .field("inverse", &self.inverse)
            .finish()
    }
}

impl Dct {
    /// Orthonormal DCT-II through a length-2n FFT of the even extension.
    fn dct2(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut buf: Vec<Complex64> = x
            .iter()
            .chain(x.iter().rev())
            .map(|&r| Complex64::new(r, 0.0))
            .collect();
        self.fwd.process(&mut buf);
        (0..n)
            .map(|k| 0.5 * (self.twiddle[k] * buf[k]).re)
            .collect()
    }

    /// Orthonormal DCT-III, the transpose of [`Dct::dct2`].
    fn dct3(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for k in 0..n {
            buf[k] = self.twiddle[k].conj() * c[k];
        }
        self.inv.process(&mut buf);
        buf[..n].iter().map(|z| z.re).collect()
    }
}

impl LinearOp for Dct {
    fn domain(&self) -> Layout {
        Layout::real(&[self.n])
    }

    fn codomain(&self) -> Layout {
        Layout::real(&[self.n])
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        let x = real_input(&self.domain(), x)?;
        Ok(Signal::from_vec(if self.inverse {
            self.dct3(x)
        } else {
            self.dct2(x)
        }))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        let y = real_input(&self.codomain(), y)?;
        Ok(Signal::from_vec(if self.inverse {
            self.dct2(y)
        } else {
            self.dct3(y)
        }))
    }

    fn tight_frame_mu(&self) -> Option<f64> {
        Some(1.0)
    }
}

fn dct(n: usize, inverse: bool) -> Arc<dyn LinearOp> {
    let mut planner = FftPlanner::new();
    let twiddle = (0..n)
        .map(|k| {
            let s = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            Complex64::from_polar(s, -PI * k as f64 / (2 * n) as f64)
        })
        .collect();
    Arc::new(Dct {
        n,
        inverse,
        fwd: planner.plan_fft_forward(2 * n),
        inv: planner.plan_fft_inverse(2 * n),
        twiddle,
    })
}

/// Orthonormal DCT-II.
pub fn dct_op(n: usize) -> Arc<dyn LinearOp> {
    dct(n, false)
}

/// Orthonormal DCT-III, the inverse of [`dct_op`].
pub fn idct_op(n: usize) -> Arc<dyn LinearOp> {
    dct(n, true)
}

#[derive(Clone, Debug)]
struct Selection {
    indices: Vec<usize>,
    n: usize,
    field: Field,
}

impl LinearOp for Selection {
    fn domain(&self) -> Layout {
        Layout::new(&[self.n], self.field)
    }

    fn codomain(&self) -> Layout {
        Layout::new(&[self.indices.len()], self.field)
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        self.domain().expect(&x.layout())?;
        Ok(x.gather(&self.indices))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        self.codomain().expect(&y.layout())?;
        let mut out = Signal::zeros(&self.domain());
        out.scatter(&self.indices, y)?;
        Ok(out)
    }

    fn tight_frame_mu(&self) -> Option<f64> {
        Some(1.0)
    }

    fn selection_support(&self) -> Option<Vec<usize>> {
        Some(self.indices.clone())
    }
}

fn selection(indices: &[usize], n: usize, field: Field) -> Result<Arc<dyn LinearOp>> {
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::param(format!(
                "index {i} out of range for length {n}"
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::param(format!("index {i} selected twice")));
        }
    }
    Ok(Arc::new(Selection {
        indices: indices.to_vec(),
        n,
        field,
    }))
}

/// Picks `x[indices]` out of a real length-`n` signal. Indices must be distinct.
pub fn select_op(indices: &[usize], n: usize) -> Result<Arc<dyn LinearOp>> {
    selection(indices, n, Field::Real)
}

/// [`select_op`] on complex signals.
pub fn complex_select_op(indices: &[usize], n: usize) -> Result<Arc<dyn LinearOp>> {
    selection(indices, n, Field::Complex)
}

#[derive(Clone, Debug)]
struct Variation {
    rows: usize,
    cols: usize,
}

impl LinearOp for Variation {
    fn domain(&self) -> Layout {
        Layout::real(&[self.rows, self.cols])
    }

    fn codomain(&self) -> Layout {
        Layout::real(&[self.rows * self.cols, 2])
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        let x = real_input(&self.domain(), x)?;
        let (n, m) = (self.rows, self.cols);
        let mut out = Vec::with_capacity(2 * n * m);
        for col in x.chunks_exact(n) {
            out.extend(col.windows(2).map(|w| w[1] - w[0]));
            out.push(0.0);
        }
        out.extend(x.iter().zip(&x[n..]).map(|(a, b)| b - a));
        out.extend(std::iter::repeat_n(0.0, n));
        Signal::real(out, &[n * m, 2])
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        let y = real_input(&self.codomain(), y)?;
        let (n, m) = (self.rows, self.cols);
        let nm = n * m;
        let (dv, dh) = y.split_at(nm);
        let mut out = Vec::with_capacity(nm);
        for d in dv.chunks_exact(n) {
            // out_i = d_{i-1} - d_i, where d_{-1} and d_{n-1} do not enter
            if n == 1 {
                out.push(0.0);
                continue;
            }
            out.push(-d[0]);
            out.extend(d[..n - 1].windows(2).map(|w| w[0] - w[1]));
            out.push(d[n - 2]);
        }
        for j in 0..m {
            let col = &mut out[j * n..(j + 1) * n];
            if j + 1 < m {
                col.iter_mut().zip(&dh[j * n..]).for_each(|(o, d)| *o -= d);
            }
            if j > 0 {
                col.iter_mut()
                    .zip(&dh[(j - 1) * n..])
                    .for_each(|(o, d)| *o += d);
            }
        }
        Signal::real(out, &[n, m])
    }
}

/// Forward differences of an `n x m` image, stacked as the two columns of an
/// `nm x 2` signal (vertical first). The last row/column difference is zero.
pub fn variation_op(n: usize, m: usize) -> Arc<dyn LinearOp> {
    Arc::new(Variation { rows: n, cols: m })
}

#[derive(Clone, Debug)]
struct Diagonal {
    d: Vec<f64>,
}

impl LinearOp for Diagonal {
    fn domain(&self) -> Layout {
        Layout::real(&[self.d.len()])
    }

    fn codomain(&self) -> Layout {
        self.domain()
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        let x = real_input(&self.domain(), x)?;
        Ok(Signal::from_vec(
            x.iter().zip(&self.d).map(|(x, d)| x * d).collect(),
        ))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        self.forward(y)
    }

    fn tight_frame_mu(&self) -> Option<f64> {
        let first = self.d.first()?.abs();
        self.d
            .iter()
            .all(|v| v.abs() == first)
            .then_some(first * first)
    }
}

/// Elementwise scaling by `d`.
pub fn diag_op(d: Vec<f64>) -> Arc<dyn LinearOp> {
    Arc::new(Diagonal { d })
}

#[derive(Clone, Debug)]
struct Broadcast {
    shape: Vec<usize>,
}

impl LinearOp for Broadcast {
    fn domain(&self) -> Layout {
        Layout::real(&[1, 1])
    }

    fn codomain(&self) -> Layout {
        Layout::real(&self.shape)
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        let x = real_input(&self.domain(), x)?;
        Ok(Signal::filled(&self.codomain(), x[0]))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        let y = real_input(&self.codomain(), y)?;
        Ok(Signal::scalar(y.iter().sum()))
    }
}

/// Spreads a `1 x 1` scalar over every entry of `shape`; the adjoint sums.
pub fn broadcast_op(shape: &[usize]) -> Arc<dyn LinearOp> {
    Arc::new(Broadcast {
        shape: shape.to_vec(),
    })
}

#[derive(Clone, Debug)]
struct Sigmoid {
    layout: Layout,
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl NonlinearOp for Sigmoid {
    fn domain(&self) -> Layout {
        self.layout.clone()
    }

    fn codomain(&self) -> Layout {
        self.layout.clone()
    }

    fn forward(&self, x: &Signal) -> Result<Signal> {
        self.layout.expect(&x.layout())?;
        Ok(x.map_components(logistic))
    }

    fn jacobian_adjoint(&self, at: &Signal, g: &Signal) -> Result<Signal> {
        let at = real_input(&self.layout, at)?;
        let g = real_input(&self.layout, g)?;
        let out = at
            .iter()
            .zip(g)
            .map(|(&a, &g)| {
                let s = logistic(a);
                g * s * (1.0 - s)
            })
            .collect();
        Signal::real(out, &self.layout.shape)
    }
}

/// Elementwise logistic function on real signals.
pub fn sigmoid_op(layout: &Layout) -> Result<Arc<dyn NonlinearOp>> {
    if layout.field != Field::Real {
        return Err(Error::Unsupported("sigmoid of complex signals".into()));
    }
    Ok(Arc::new(Sigmoid {
        layout: layout.clone(),
    }))
}
