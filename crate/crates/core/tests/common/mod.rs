#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use proxkit::funcs::{ProxFn, SmoothFn};
use proxkit::{Field, Layout, Signal, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn rand_signal(rng: &mut impl Rng, layout: &Layout) -> Signal {
    let n = layout.numel();
    match layout.field {
        Field::Real => Signal::real(randn(rng, n), &layout.shape).unwrap(),
        Field::Complex => {
            let data = (0..n)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            Signal::complex(data, &layout.shape).unwrap()
        }
    }
}

pub fn rand_vec(rng: &mut impl Rng, n: usize) -> Signal {
    Signal::from_vec(randn(rng, n))
}

pub fn rand_like<X: Vector>(rng: &mut impl Rng, x: &X) -> X {
    x.with_coords(&randn(rng, x.real_dim()))
}

fn prox_objective<X: Vector, G: ProxFn<X> + ?Sized>(g: &G, z: &X, x: &X, gamma: f64) -> f64 {
    let value = g.value(z).unwrap();
    if !value.is_finite() {
        return f64::INFINITY;
    }
    value + z.sub(x).unwrap().norm2().powi(2) / (2.0 * gamma)
}

/// Smallest `obj(z + d) - obj(z)` over `trials` perturbations of
/// `z = prox(x, gamma)`, with `obj(z) = g(z) + |z - x|^2 / (2 gamma)` and
/// `|d| <= 0.1 |x| + 0.1`. A quarter of the perturbations touch only the
/// nonzero coordinates of `z` and a quarter a single coordinate, so that
/// sparse and low-dimensional feasible sets are probed too.
pub fn prox_margin<X, G>(g: &G, x: &X, gamma: f64, trials: usize, rng: &mut impl Rng) -> f64
where
    X: Vector,
    G: ProxFn<X> + ?Sized,
{
    let z = g.prox(x, gamma).unwrap();
    let base = prox_objective(g, &z, x, gamma);
    assert!(base.is_finite(), "prox point outside the domain: {base}");
    let radius = 0.1 * x.norm2() + 0.1;
    let zc = z.coords();
    let dim = zc.len();
    let support: Vec<usize> = (0..dim).filter(|&i| zc[i] != 0.0).collect();
    let mut worst = f64::INFINITY;
    for t in 0..trials {
        let mut d = randn(rng, dim);
        match t % 4 {
            2 if !support.is_empty() => {
                for (i, di) in d.iter_mut().enumerate() {
                    if zc[i] == 0.0 {
                        *di = 0.0;
                    }
                }
            }
            3 => {
                let keep = rng.random_range(0..dim);
                for (i, di) in d.iter_mut().enumerate() {
                    if i != keep {
                        *di = 0.0;
                    }
                }
            }
            _ => {}
        }
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let scale = radius * rng.random::<f64>() / norm;
        let zd: Vec<f64> = zc.iter().zip(&d).map(|(a, b)| a + scale * b).collect();
        let candidate = prox_objective(g, &z.with_coords(&zd), x, gamma);
        worst = worst.min(candidate - base);
    }
    worst
}

/// Central differences with step `1e-6 (1 + |x|)`.
pub fn fd_gradient<X: Vector>(f: impl Fn(&X) -> f64, x: &X) -> X {
    let h = 1e-6 * (1.0 + x.norm2());
    let c = x.coords();
    let grad: Vec<f64> = (0..c.len())
        .map(|i| {
            let mut plus = c.clone();
            let mut minus = c.clone();
            plus[i] += h;
            minus[i] -= h;
            (f(&x.with_coords(&plus)) - f(&x.with_coords(&minus))) / (2.0 * h)
        })
        .collect();
    x.with_coords(&grad)
}

/// `|g - fd| / max(|fd|, 1)` between an analytic gradient and central
/// differences of `f.value`.
pub fn gradient_error<X: Vector, F: SmoothFn<X> + ?Sized>(f: &F, x: &X) -> f64 {
    let g = f.gradient(x).unwrap();
    let fd = fd_gradient(|y| f.value(y).unwrap(), x);
    g.sub(&fd).unwrap().norm2() / fd.norm2().max(1.0)
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len(), "length mismatch");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!(
            (x - y).abs() <= tol,
            "entry {i}: {x} vs {y} (tol {tol})\n left: {a:?}\nright: {b:?}"
        );
    }
}

pub fn real(s: &Signal) -> Vec<f64> {
    s.real_data().expect("real signal").to_vec()
}
