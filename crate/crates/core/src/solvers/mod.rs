//! Proximal gradient solvers for `minimize f(x) + g(x)`.
//!
//! All solvers stop when `|R_gamma(x)|_inf / gamma <= tol`, where
//! `R_gamma(x) = x - prox_{gamma g}(x - gamma grad f(x))` is the fixed-point
//! residual, and return the last prox point.

mod lbfgs;
mod panoc;
mod pg;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use lbfgs::LbfgsBuffer;
pub use panoc::solve_panoc;
pub use pg::{fpg_theta_next, solve_fpg, solve_pg};

/// Called once per recorded iteration with the record and the candidate
/// whose objective it reports.
pub type Observer<'a, X> = dyn FnMut(&IterRecord, &X) + 'a;

use crate::error::{Error, Result};
use crate::funcs::{ProxFn, SmoothFn};
use crate::tensor::Vector;

/// PANOC uses `gamma = PANOC_STEP_FRACTION / L` so that `gamma L < 1` strictly.
pub const PANOC_STEP_FRACTION: f64 = 0.95;

/// Relative roundoff allowance in the line-search and majorization tests.
pub const DECREASE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LipschitzMode {
    /// Known Lipschitz constant of `grad f`.
    Given(f64),
    /// Power iteration on gradient differences at the starting point.
    PowerIteration,
    /// Start from a local curvature estimate (or the function's hint) and
    /// double it whenever the quadratic upper bound fails.
    Adaptive,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub memory: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub max_backtracks: usize,
    pub lipschitz: LipschitzMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: None,
            sigma: None,
            memory: 5,
            max_iters: 10_000,
            tol: 1e-5,
            max_backtracks: 20,
            lipschitz: LipschitzMode::Adaptive,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_lipschitz(mut self, mode: LipschitzMode) -> Self {
        self.lipschitz = mode;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_memory(mut self, memory: usize) -> Self {
        self.memory = memory;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Pg,
    Fpg,
    Panoc,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Pg, SolverKind::Fpg, SolverKind::Panoc];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Pg => "pg",
            SolverKind::Fpg => "fpg",
            SolverKind::Panoc => "panoc",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pg" => Ok(SolverKind::Pg),
            "fpg" | "fista" => Ok(SolverKind::Fpg),
            "panoc" => Ok(SolverKind::Panoc),
            other => Err(Error::param(format!("unknown solver '{other}'"))),
        }
    }
}

/// One iteration's diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    /// `f + g` at the current candidate: `x^k` for PG and FPG, the prox point
    /// `v^k` for PANOC.
    pub objective: f64,
    /// Forward-backward envelope at `x^k` (not tracked by FPG).
    pub fbe: Option<f64>,
    /// `|R_gamma(x^k)|_inf / gamma`.
    pub residual: f64,
    /// `|v^k - x^k|^2`.
    pub step_sq: f64,
    /// Line-search step accepted after this record (PANOC only); 0 means the
    /// search was exhausted and the plain prox point was taken.
    pub tau: Option<f64>,
    pub gamma: f64,
    pub sigma: Option<f64>,
    pub elapsed: f64,
}

#[derive(Clone, Debug)]
pub struct SolverTrace {
    pub solver: SolverKind,
    pub records: Vec<IterRecord>,
}

impl SolverTrace {
    fn new(solver: SolverKind) -> Self {
        SolverTrace {
            solver,
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct Solution<X> {
    pub x: X,
    pub status: Status,
    /// Index of the last recorded iterate.
    pub iterations: usize,
    pub trace: SolverTrace,
}

impl<X> Solution<X> {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Dispatches on `kind`.
pub fn solve<X, F, G>(
    kind: SolverKind,
    f: &F,
    g: &G,
    x0: &X,
    config: &SolverConfig,
) -> Result<Solution<X>>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    match kind {
        SolverKind::Pg => solve_pg(f, g, x0, config),
        SolverKind::Fpg => solve_fpg(f, g, x0, config),
        SolverKind::Panoc => solve_panoc(f, g, x0, config),
    }
}

/// [`solve`] with a callback on every recorded iteration.
pub fn solve_observed<X, F, G>(
    kind: SolverKind,
    f: &F,
    g: &G,
    x0: &X,
    config: &SolverConfig,
    observer: &mut Observer<'_, X>,
) -> Result<Solution<X>>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    match kind {
        SolverKind::Pg => pg::pg_observed(f, g, x0, config, observer),
        SolverKind::Fpg => pg::fpg_observed(f, g, x0, config, observer),
        SolverKind::Panoc => panoc::panoc_observed(f, g, x0, config, observer),
    }
}

/// `prox_{gamma g}(x - gamma grad f(x))`.
pub fn pg_step<X, F, G>(f: &F, g: &G, x: &X, gamma: f64) -> Result<X>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    Ok(Point::evaluate(f, g, x.clone(), gamma)?.v)
}

/// Fixed-point residual `x - pg_step(x)`.
pub fn residual<X, F, G>(f: &F, g: &G, x: &X, gamma: f64) -> Result<X>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    Point::evaluate(f, g, x.clone(), gamma)?.residual()
}

/// Forward-backward envelope
/// `f(x) + <v - x, grad f(x)> + |v - x|^2 / (2 gamma) + g(v)`, `v = pg_step(x)`.
pub fn fbe<X, F, G>(f: &F, g: &G, x: &X, gamma: f64) -> Result<f64>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    Point::evaluate(f, g, x.clone(), gamma)?.fbe(gamma)
}

/// Everything known about one iterate after a forward-backward step.
#[derive(Clone, Debug)]
pub(crate) struct Point<X> {
    pub x: X,
    pub fx: f64,
    pub grad: X,
    pub v: X,
    pub gv: f64,
}

impl<X: Vector> Point<X> {
    pub fn evaluate<F, G>(f: &F, g: &G, x: X, gamma: f64) -> Result<Self>
    where
        F: SmoothFn<X> + ?Sized,
        G: ProxFn<X> + ?Sized,
    {
        let (fx, grad) = f.value_and_gradient(&x)?;
        let (v, gv) = g.prox_and_value(&grad.axpy(-gamma, &x)?, gamma)?;
        Ok(Point { x, fx, grad, v, gv })
    }

    /// Redo the prox step with a new stepsize; `f` data is reused.
    pub fn restep<G: ProxFn<X> + ?Sized>(&mut self, g: &G, gamma: f64) -> Result<()> {
        let (v, gv) = g.prox_and_value(&self.grad.axpy(-gamma, &self.x)?, gamma)?;
        self.v = v;
        self.gv = gv;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.grad.is_finite() && self.v.is_finite() && !self.gv.is_nan()
    }

    pub fn residual(&self) -> Result<X> {
        self.x.sub(&self.v)
    }

    /// `(<v - x, grad>, |v - x|^2)`.
    fn step_terms(&self) -> Result<(f64, f64)> {
        let d = self.v.sub(&self.x)?;
        Ok((d.inner(&self.grad)?, d.inner(&d)?))
    }

    pub fn step_sq(&self) -> Result<f64> {
        Ok(self.step_terms()?.1)
    }

    pub fn fbe(&self, gamma: f64) -> Result<f64> {
        let (lin, sq) = self.step_terms()?;
        Ok(self.fx + lin + sq / (2.0 * gamma) + self.gv)
    }

    /// `(|x - v|_inf / gamma, |v - x|^2, fbe)` from a single pass.
    pub fn summary(&self, gamma: f64) -> Result<(f64, f64, f64)> {
        let d = self.v.sub(&self.x)?;
        let (lin, sq) = (d.inner(&self.grad)?, d.inner(&d)?);
        let fbe = self.fx + lin + sq / (2.0 * gamma) + self.gv;
        Ok((d.norm_inf() / gamma, sq, fbe))
    }

    /// Does `f(v) <= f(x) + <grad, v - x> + L/2 |v - x|^2` hold?
    pub fn majorized<F: SmoothFn<X> + ?Sized>(&self, f: &F, lipschitz: f64) -> Result<bool> {
        let (lin, sq) = self.step_terms()?;
        let fv = f.value(&self.v)?;
        let bound = self.fx + lin + 0.5 * lipschitz * sq;
        Ok(fv <= bound + DECREASE_SLACK * (1.0 + self.fx.abs()))
    }
}

/// Stepsize bookkeeping shared by the solvers.
#[derive(Clone, Debug)]
pub(crate) struct Stepsize {
    pub lipschitz: f64,
    pub gamma: f64,
    pub adaptive: bool,
    /// `gamma = fraction / L`.
    fraction: f64,
}

impl Stepsize {
    pub fn resolve<X, F>(f: &F, x0: &X, config: &SolverConfig, fraction: f64) -> Result<Self>
    where
        X: Vector,
        F: SmoothFn<X> + ?Sized,
    {
        let adaptive = config.lipschitz == LipschitzMode::Adaptive;
        let lipschitz = match (config.lipschitz, f.lipschitz()) {
            (LipschitzMode::Given(l), _) => l,
            (LipschitzMode::Adaptive, Some(l)) if l > 0.0 => l,
            (mode, _) => estimate_lipschitz(f, x0, mode)?,
        };
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::param(format!(
                "invalid Lipschitz constant {lipschitz}"
            )));
        }
        let gamma = match config.gamma {
            Some(gamma) => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::param(format!(
                        "stepsize must be positive, got {gamma}"
                    )));
                }
                let limit = 1.0 / lipschitz;
                let strict = fraction < 1.0;
                if !adaptive && (gamma > limit || (strict && gamma >= limit)) {
                    return Err(Error::param(format!(
                        "stepsize {gamma} exceeds the admissible bound 1/L = {limit}"
                    )));
                }
                gamma
            }
            None if lipschitz > 0.0 => fraction / lipschitz,
            None => 1.0,
        };
        Ok(Stepsize {
            lipschitz,
            gamma,
            adaptive,
            fraction,
        })
    }

    /// Curvature the current stepsize is safe for.
    pub fn curvature(&self) -> f64 {
        self.fraction / self.gamma
    }

    /// Halves `gamma` after a failed majorization test.
    pub fn tighten(&mut self) {
        self.gamma *= 0.5;
        self.lipschitz = self.lipschitz.max(self.curvature());
    }
}

/// Iteration cap on the majorization loop; `L` grows by 2^60 before giving up.
const MAX_TIGHTENINGS: usize = 60;

/// Enforces the quadratic upper bound at `p` in adaptive mode.
/// Returns whether the stepsize changed.
pub(crate) fn enforce_majorization<X, F, G>(
    f: &F,
    g: &G,
    p: &mut Point<X>,
    step: &mut Stepsize,
) -> Result<bool>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
    G: ProxFn<X> + ?Sized,
{
    if !step.adaptive {
        return Ok(false);
    }
    let mut changed = false;
    for _ in 0..MAX_TIGHTENINGS {
        if p.majorized(f, step.curvature())? {
            return Ok(changed);
        }
        step.tighten();
        p.restep(g, step.gamma)?;
        changed = true;
    }
    Err(Error::param(
        "could not find a stepsize satisfying the quadratic upper bound",
    ))
}

pub(crate) struct Recorder {
    start: Instant,
    pub trace: SolverTrace,
}

impl Recorder {
    pub fn new(solver: SolverKind) -> Self {
        Recorder {
            start: Instant::now(),
            trace: SolverTrace::new(solver),
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn push(&mut self, mut record: IterRecord) {
        record.elapsed = self.elapsed();
        self.trace.records.push(record);
    }

    pub fn push_observed<X>(&mut self, record: IterRecord, x: &X, observer: &mut Observer<'_, X>) {
        self.push(record);
        observer(self.trace.records.last().expect("just pushed"), x);
    }

    pub fn non_finite(self, iteration: usize) -> Error {
        Error::NonFinite {
            iteration,
            trace: Box::new(self.trace),
        }
    }
}

/// Deterministic unit-norm probe direction with the layout of `x`.
fn probe_direction<X: Vector>(x: &X) -> X {
    let n = x.real_dim().max(1);
    // xorshift64 so that solvers stay free of RNG dependencies
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut coords = Vec::with_capacity(n);
    for _ in 0..n {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        coords.push((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
    }
    let d = x.with_coords(&coords);
    let norm = d.norm2();
    d.scaled(1.0 / norm)
}

const POWER_MIN_ITERS: usize = 20;
const POWER_MAX_ITERS: usize = 1000;
const POWER_RTOL: f64 = 1e-12;

/// Estimates the Lipschitz constant of `grad f` near `x0`.
///
/// `PowerIteration` runs power iteration on the map
/// `u -> grad f(x0 + u) - grad f(x0)` (exact for quadratics).
/// `Adaptive` takes a secant curvature estimate and doubles it until the
/// quadratic upper bound holds at the gradient step `x0 - grad f(x0) / L`.
pub fn estimate_lipschitz<X, F>(f: &F, x0: &X, mode: LipschitzMode) -> Result<f64>
where
    X: Vector,
    F: SmoothFn<X> + ?Sized,
{
    match mode {
        LipschitzMode::Given(l) => Ok(l),
        LipschitzMode::PowerIteration => {
            let g0 = f.gradient(x0)?;
            let scale = 1.0 + x0.norm2();
            let mut u = probe_direction(x0);
            let mut estimate = 0.0;
            for it in 0..POWER_MAX_ITERS {
                let hu = f
                    .gradient(&u.axpy(scale, x0)?)?
                    .sub(&g0)?
                    .scaled(1.0 / scale);
                let norm = hu.norm2();
                if norm == 0.0 || !norm.is_finite() {
                    return Ok(if norm == 0.0 { 0.0 } else { f64::INFINITY });
                }
                let previous = estimate;
                estimate = norm;
                u = hu.scaled(1.0 / norm);
                if it + 1 >= POWER_MIN_ITERS && (estimate - previous).abs() <= POWER_RTOL * estimate
                {
                    break;
                }
            }
            Ok(estimate)
        }
        LipschitzMode::Adaptive => {
            let (f0, g0) = f.value_and_gradient(x0)?;
            let scale = 1e-6 * (1.0 + x0.norm2());
            let u = probe_direction(x0);
            let g1 = f.gradient(&u.axpy(scale, x0)?)?;
            let mut l = (g1.sub(&g0)?.norm2() / scale).max(1e-12);
            let gsq = g0.inner(&g0)?;
            for _ in 0..MAX_TIGHTENINGS {
                let trial = g0.axpy(-1.0 / l, x0)?;
                let bound = f0 - gsq / (2.0 * l);
                if f.value(&trial)? <= bound + DECREASE_SLACK * (1.0 + f0.abs()) {
                    return Ok(l);
                }
                l *= 2.0;
            }
            Err(Error::param("Lipschitz backtracking did not terminate"))
        }
    }
}

/// Default line-search constant, strictly inside `(0, (1 - gamma L) / (2 gamma))`.
pub fn default_sigma(gamma: f64, lipschitz: f64) -> f64 {
    0.45 * (1.0 - gamma * lipschitz) / gamma * 0.5
}
