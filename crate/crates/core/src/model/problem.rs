use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fao::{LinearOp, OpDag};
use crate::funcs::{indexed_sum, precompose_tight_frame, ProxFn, SmoothFn};
use crate::solvers::{solve, solve_observed, Observer, Solution, SolverConfig, SolverKind};
use crate::tensor::{axpy, Layout, Signal, SignalTuple};

/// Handle to a variable of a [`Problem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A term function known only through its values, with no prox. Such terms
/// are accepted by the builder but never split.
pub trait ValueFn: Send + Sync + fmt::Debug {
    fn value(&self, x: &Signal) -> Result<f64>;
}

#[derive(Clone, Debug)]
pub enum TermFn {
    Smooth(Arc<dyn SmoothFn>),
    Prox(Arc<dyn ProxFn>),
    Opaque(Arc<dyn ValueFn>),
}

impl TermFn {
    pub fn is_smooth(&self) -> bool {
        matches!(self, TermFn::Smooth(_))
    }

    fn value(&self, x: &Signal) -> Result<f64> {
        match self {
            TermFn::Smooth(h) => h.value(x),
            TermFn::Prox(h) => h.value(x),
            TermFn::Opaque(h) => h.value(x),
        }
    }
}

/// How a term reads the variables: `sum_j A_j x_j` over its nonzero row,
/// or a general operator graph over a list of variables.
#[derive(Clone, Debug)]
pub enum Mapping {
    Linear(Vec<(VarId, Arc<dyn LinearOp>)>),
    Graph { vars: Vec<VarId>, dag: OpDag },
}

impl Mapping {
    pub fn vars(&self) -> Vec<VarId> {
        match self {
            Mapping::Linear(row) => row.iter().map(|(v, _)| *v).collect(),
            Mapping::Graph { vars, .. } => vars.clone(),
        }
    }

    fn is_linear(&self) -> bool {
        match self {
            Mapping::Linear(_) => true,
            Mapping::Graph { dag, .. } => dag.is_linear(),
        }
    }

    fn apply(&self, x: &SignalTuple) -> Result<Signal> {
        match self {
            Mapping::Linear(row) => {
                let mut acc: Option<Signal> = None;
                for (var, op) in row {
                    let ax = op.forward(&x[var.0])?;
                    acc = Some(match acc {
                        None => ax,
                        Some(a) => a.add(&ax)?,
                    });
                }
                Ok(acc.expect("rows are nonempty"))
            }
            Mapping::Graph { vars, dag } => dag.eval(&gather_vars(x, vars)),
        }
    }
}

fn gather_vars(x: &SignalTuple, vars: &[VarId]) -> SignalTuple {
    SignalTuple::new(vars.iter().map(|v| x[v.0].clone()).collect())
}

#[derive(Clone, Debug)]
pub struct Term {
    pub func: TermFn,
    pub mapping: Mapping,
}

#[derive(Clone, Debug)]
struct Variable {
    name: String,
    init: Signal,
}

/// `minimize sum_i h_i(sum_j A_ij x_j)` over named variables.
#[derive(Clone, Debug, Default)]
pub struct Problem {
    vars: Vec<Variable>,
    terms: Vec<Term>,
}

impl Problem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable(&mut self, name: impl Into<String>, init: Signal) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            init,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v.0].name
    }

    pub fn var_layout(&self, v: VarId) -> Layout {
        self.vars[v.0].init.layout()
    }

    pub fn initial(&self) -> SignalTuple {
        SignalTuple::new(self.vars.iter().map(|v| v.init.clone()).collect())
    }

    /// Replaces the starting point of `v`, e.g. for a warm start.
    pub fn set_initial(&mut self, v: VarId, init: Signal) -> Result<()> {
        self.var_layout(v).expect(&init.layout())?;
        self.vars[v.0].init = init;
        Ok(())
    }

    pub fn add_smooth(
        &mut self,
        h: Arc<dyn SmoothFn>,
        row: Vec<(VarId, Arc<dyn LinearOp>)>,
    ) -> Result<usize> {
        self.push_linear(TermFn::Smooth(h), row)
    }

    pub fn add_nonsmooth(
        &mut self,
        h: Arc<dyn ProxFn>,
        row: Vec<(VarId, Arc<dyn LinearOp>)>,
    ) -> Result<usize> {
        self.push_linear(TermFn::Prox(h), row)
    }

    pub fn add_opaque(
        &mut self,
        h: Arc<dyn ValueFn>,
        row: Vec<(VarId, Arc<dyn LinearOp>)>,
    ) -> Result<usize> {
        self.push_linear(TermFn::Opaque(h), row)
    }

    /// `h(x_v)`.
    pub fn add_smooth_on(&mut self, h: Arc<dyn SmoothFn>, v: VarId) -> Result<usize> {
        let id = crate::fao::identity_op(&self.var_layout(v));
        self.add_smooth(h, vec![(v, id)])
    }

    /// `h(x_v)`.
    pub fn add_nonsmooth_on(&mut self, h: Arc<dyn ProxFn>, v: VarId) -> Result<usize> {
        let id = crate::fao::identity_op(&self.var_layout(v));
        self.add_nonsmooth(h, vec![(v, id)])
    }

    /// `h(dag(x_{vars[0]}, x_{vars[1]}, ...))`.
    pub fn add_smooth_graph(
        &mut self,
        h: Arc<dyn SmoothFn>,
        vars: Vec<VarId>,
        dag: OpDag,
    ) -> Result<usize> {
        self.push_graph(TermFn::Smooth(h), vars, dag)
    }

    pub fn add_nonsmooth_graph(
        &mut self,
        h: Arc<dyn ProxFn>,
        vars: Vec<VarId>,
        dag: OpDag,
    ) -> Result<usize> {
        self.push_graph(TermFn::Prox(h), vars, dag)
    }

    fn check_var(&self, v: VarId) -> Result<()> {
        if v.0 < self.vars.len() {
            Ok(())
        } else {
            Err(Error::param(format!("unknown variable {}", v.0)))
        }
    }

    fn check_distinct(vars: impl Iterator<Item = VarId>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in vars {
            if !seen.insert(v) {
                return Err(Error::param(format!(
                    "variable {} appears twice in one term",
                    v.0
                )));
            }
        }
        Ok(())
    }

    fn push_linear(&mut self, func: TermFn, row: Vec<(VarId, Arc<dyn LinearOp>)>) -> Result<usize> {
        let Some((_, first)) = row.first() else {
            return Err(Error::param("a term needs at least one nonzero mapping"));
        };
        let codomain = first.codomain();
        for (v, op) in &row {
            self.check_var(*v)?;
            op.domain().expect(&self.var_layout(*v))?;
            codomain.expect(&op.codomain())?;
        }
        Self::check_distinct(row.iter().map(|(v, _)| *v))?;
        self.terms.push(Term {
            func,
            mapping: Mapping::Linear(row),
        });
        Ok(self.terms.len() - 1)
    }

    fn push_graph(&mut self, func: TermFn, vars: Vec<VarId>, dag: OpDag) -> Result<usize> {
        if vars.len() != dag.input_layouts().len() {
            return Err(Error::ArityMismatch {
                expected: dag.input_layouts().len(),
                found: vars.len(),
            });
        }
        for (v, layout) in vars.iter().zip(dag.input_layouts()) {
            self.check_var(*v)?;
            layout.expect(&self.var_layout(*v))?;
        }
        Self::check_distinct(vars.iter().copied())?;
        self.terms.push(Term {
            func,
            mapping: Mapping::Graph { vars, dag },
        });
        Ok(self.terms.len() - 1)
    }

    fn check_tuple(&self, x: &SignalTuple) -> Result<()> {
        if x.len() != self.vars.len() {
            return Err(Error::ArityMismatch {
                expected: self.vars.len(),
                found: x.len(),
            });
        }
        for (v, part) in self.vars.iter().zip(x.parts()) {
            v.init.layout().expect(&part.layout())?;
        }
        Ok(())
    }

    /// Full cost `sum_i h_i(...)` at `x`.
    pub fn objective(&self, x: &SignalTuple) -> Result<f64> {
        self.check_tuple(x)?;
        self.terms
            .iter()
            .map(|t| t.func.value(&t.mapping.apply(x)?))
            .sum()
    }

    /// Value of term `i` at `x`.
    pub fn term_value(&self, i: usize, x: &SignalTuple) -> Result<f64> {
        self.check_tuple(x)?;
        let t = &self.terms[i];
        t.func.value(&t.mapping.apply(x)?)
    }
}

/// A failed prox-computability rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// The term is nonsmooth and has no proximal mapping.
    NoProx { term: usize },
    /// `A A* = mu Id` is not certified for this mapping of a nonsmooth term.
    NotTightFrame { term: usize, var: usize },
    /// A nonsmooth term reads its variables through a nonlinear graph.
    NonlinearMapping { term: usize },
    /// The variable appears in more than one nonsmooth term.
    SharedVariable { var: usize, terms: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoProx { term } => write!(f, "term {term} has no proximal mapping"),
            Violation::NotTightFrame { term, var } => write!(
                f,
                "term {term}: mapping of variable {var} is not a certified tight frame"
            ),
            Violation::NonlinearMapping { term } => {
                write!(f, "term {term} is nonsmooth and its mapping is nonlinear")
            }
            Violation::SharedVariable { var, terms } => {
                write!(f, "variable {var} appears in nonsmooth terms {terms:?}")
            }
        }
    }
}

/// Outcome of [`check_prox_computable`]; empty when every rule holds.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProxReport {
    pub violations: Vec<Violation>,
}

impl ProxReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, thiserror::Error)]
#[error("problem does not split: {}", list(.violations))]
pub struct SplittingError {
    pub violations: Vec<Violation>,
}

fn list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Nonsmooth terms touching each variable, in term order.
fn nonsmooth_users(problem: &Problem) -> Vec<Vec<usize>> {
    let mut users = vec![Vec::new(); problem.num_vars()];
    for (i, t) in problem.terms.iter().enumerate() {
        if t.func.is_smooth() {
            continue;
        }
        for v in t.mapping.vars() {
            users[v.0].push(i);
        }
    }
    users
}

/// Single-variable selections with pairwise disjoint supports. Returns the
/// supports when the terms qualify for merging into one separable term.
fn disjoint_selections(problem: &Problem, terms: &[usize]) -> Option<Vec<Vec<usize>>> {
    let mut claimed = BTreeSet::new();
    let mut supports = Vec::with_capacity(terms.len());
    for &i in terms {
        let Mapping::Linear(row) = &problem.terms[i].mapping else {
            return None;
        };
        let [(_, op)] = row.as_slice() else {
            return None;
        };
        let support = op.selection_support()?;
        if !support.iter().all(|&k| claimed.insert(k)) {
            return None;
        }
        supports.push(support);
    }
    Some(supports)
}

/// Checks the nonsmooth terms: each has a prox, each nonzero mapping is a
/// tight frame, and each variable is read by at most one nonsmooth term.
/// Disjoint selections of one variable count as a single separable term.
pub fn check_prox_computable(problem: &Problem) -> ProxReport {
    let mut violations = Vec::new();
    for (i, t) in problem.terms.iter().enumerate() {
        match t.func {
            TermFn::Smooth(_) => continue,
            TermFn::Opaque(_) => violations.push(Violation::NoProx { term: i }),
            TermFn::Prox(_) => {}
        }
        match &t.mapping {
            Mapping::Linear(row) => {
                for (v, op) in row {
                    if !op.tight_frame_mu().is_some_and(|mu| mu > 0.0) {
                        violations.push(Violation::NotTightFrame { term: i, var: v.0 });
                    }
                }
            }
            Mapping::Graph { .. } => violations.push(Violation::NonlinearMapping { term: i }),
        }
    }
    for (v, terms) in nonsmooth_users(problem).into_iter().enumerate() {
        if terms.len() > 1 && disjoint_selections(problem, &terms).is_none() {
            violations.push(Violation::SharedVariable { var: v, terms });
        }
    }
    ProxReport { violations }
}

#[derive(Clone, Debug)]
struct SmoothTerm {
    h: Arc<dyn SmoothFn>,
    mapping: Mapping,
}

/// Sum of the smooth terms as a function of all variables.
#[derive(Clone, Debug)]
pub struct SmoothPart {
    layouts: Vec<Layout>,
    terms: Vec<SmoothTerm>,
}

impl SmoothPart {
    fn check(&self, x: &SignalTuple) -> Result<()> {
        if x.len() != self.layouts.len() {
            return Err(Error::ArityMismatch {
                expected: self.layouts.len(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

impl SmoothFn<SignalTuple> for SmoothPart {
    fn value(&self, x: &SignalTuple) -> Result<f64> {
        self.check(x)?;
        self.terms
            .iter()
            .map(|t| t.h.value(&t.mapping.apply(x)?))
            .sum()
    }

    fn value_and_gradient(&self, x: &SignalTuple) -> Result<(f64, SignalTuple)> {
        self.check(x)?;
        let mut grad: Vec<Option<Signal>> = vec![None; self.layouts.len()];
        let mut accumulate = |var: usize, g: Signal| -> Result<()> {
            match &mut grad[var] {
                Some(acc) => acc.axpy_in_place(1.0, &g),
                slot => {
                    *slot = Some(g);
                    Ok(())
                }
            }
        };
        let mut total = 0.0;
        for t in &self.terms {
            match &t.mapping {
                Mapping::Linear(row) => {
                    let (v, g) = t.h.value_and_gradient(&t.mapping.apply(x)?)?;
                    total += v;
                    for (var, op) in row {
                        accumulate(var.0, op.adjoint(&g)?)?;
                    }
                }
                Mapping::Graph { vars, dag } => {
                    let (y, tape) = dag.forward(&gather_vars(x, vars))?;
                    let (v, g) = t.h.value_and_gradient(&y)?;
                    total += v;
                    let back = dag.backward(&tape, &g)?;
                    for (var, gv) in vars.iter().zip(back.into_parts()) {
                        accumulate(var.0, gv)?;
                    }
                }
            }
        }
        let grad = grad
            .into_iter()
            .zip(&self.layouts)
            .map(|(g, layout)| g.unwrap_or_else(|| Signal::zeros(layout)))
            .collect();
        Ok((total, SignalTuple::new(grad)))
    }

    /// `sum_i L_i sum_j mu_ij`, available when every term has a known
    /// Lipschitz constant and tight-frame mappings.
    fn lipschitz(&self) -> Option<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            let Mapping::Linear(row) = &t.mapping else {
                return None;
            };
            let mut mu = 0.0;
            for (_, op) in row {
                mu += op.tight_frame_mu()?;
            }
            total += t.h.lipschitz()? * mu;
        }
        Some(total)
    }

    fn is_convex(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.h.is_convex() && t.mapping.is_linear())
    }
}

#[derive(Clone, Debug)]
enum Block {
    /// A prox directly on one variable.
    Direct { var: usize, g: Arc<dyn ProxFn> },
    /// `h(sum_j A_j x_j)` with `sum_j A_j A_j* = mu Id`.
    Frame {
        h: Arc<dyn ProxFn>,
        row: Vec<(usize, Arc<dyn LinearOp>)>,
        mu: f64,
    },
}

/// Sum of the nonsmooth terms, separable across blocks of variables.
#[derive(Clone, Debug)]
pub struct ProxPart {
    arity: usize,
    blocks: Vec<Block>,
}

impl ProxPart {
    fn check(&self, x: &SignalTuple) -> Result<()> {
        if x.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                found: x.len(),
            });
        }
        Ok(())
    }
}

fn frame_input(row: &[(usize, Arc<dyn LinearOp>)], x: &SignalTuple) -> Result<Signal> {
    let mut acc: Option<Signal> = None;
    for (var, op) in row {
        let ax = op.forward(&x[*var])?;
        acc = Some(match acc {
            None => ax,
            Some(a) => a.add(&ax)?,
        });
    }
    Ok(acc.expect("rows are nonempty"))
}

impl ProxFn<SignalTuple> for ProxPart {
    fn value(&self, x: &SignalTuple) -> Result<f64> {
        self.check(x)?;
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Direct { var, g } => g.value(&x[*var]),
                Block::Frame { h, row, .. } => h.value(&frame_input(row, x)?),
            })
            .sum()
    }

    fn prox(&self, x: &SignalTuple, gamma: f64) -> Result<SignalTuple> {
        self.prox_and_value(x, gamma).map(|(z, _)| z)
    }

    fn prox_and_value(&self, x: &SignalTuple, gamma: f64) -> Result<(SignalTuple, f64)> {
        self.check(x)?;
        let mut z: Vec<Option<Signal>> = vec![None; self.arity];
        let mut total = 0.0;
        for b in &self.blocks {
            match b {
                Block::Direct { var, g } => {
                    let (p, v) = g.prox_and_value(&x[*var], gamma)?;
                    z[*var] = Some(p);
                    total += v;
                }
                Block::Frame { h, row, mu } => {
                    let ax = frame_input(row, x)?;
                    let (p, v) = h.prox_and_value(&ax, mu * gamma)?;
                    let diff = p.sub(&ax)?;
                    for (var, op) in row {
                        z[*var] = Some(axpy(1.0 / mu, &op.adjoint(&diff)?, &x[*var])?);
                    }
                    total += v;
                }
            }
        }
        let z = z
            .into_iter()
            .zip(x.parts())
            .map(|(z, x)| z.unwrap_or_else(|| x.clone()))
            .collect();
        Ok((SignalTuple::new(z), total))
    }

    fn is_convex(&self) -> bool {
        self.blocks.iter().all(|b| match b {
            Block::Direct { g, .. } => g.is_convex(),
            Block::Frame { h, .. } => h.is_convex(),
        })
    }
}

/// A problem split into `f` (smooth terms) and `g` (nonsmooth terms).
#[derive(Clone, Debug)]
pub struct SplitProblem {
    pub i_f: Vec<usize>,
    pub i_g: Vec<usize>,
    f: SmoothPart,
    g: ProxPart,
    x0: SignalTuple,
}

impl SplitProblem {
    pub fn f(&self) -> &SmoothPart {
        &self.f
    }

    pub fn g(&self) -> &ProxPart {
        &self.g
    }

    pub fn initial(&self) -> &SignalTuple {
        &self.x0
    }

    pub fn objective(&self, x: &SignalTuple) -> Result<f64> {
        Ok(self.f.value(x)? + self.g.value(x)?)
    }

    pub fn solve(&self, kind: SolverKind, config: &SolverConfig) -> Result<Solution<SignalTuple>> {
        solve(kind, &self.f, &self.g, &self.x0, config)
    }

    pub fn solve_from(
        &self,
        kind: SolverKind,
        x0: &SignalTuple,
        config: &SolverConfig,
    ) -> Result<Solution<SignalTuple>> {
        solve(kind, &self.f, &self.g, x0, config)
    }

    pub fn solve_observed(
        &self,
        kind: SolverKind,
        x0: &SignalTuple,
        config: &SolverConfig,
        observer: &mut Observer<'_, SignalTuple>,
    ) -> Result<Solution<SignalTuple>> {
        solve_observed(kind, &self.f, &self.g, x0, config, observer)
    }
}

/// Sends smooth terms to `f` and the rest to `g`, then assembles `g`'s prox
/// from the tight-frame and separability structure.
pub fn split(problem: &Problem) -> Result<SplitProblem> {
    let report = check_prox_computable(problem);
    if !report.is_ok() {
        return Err(SplittingError {
            violations: report.violations,
        }
        .into());
    }
    let layouts: Vec<Layout> = problem.vars.iter().map(|v| v.init.layout()).collect();
    let mut i_f = Vec::new();
    let mut i_g = Vec::new();
    let mut smooth = Vec::new();
    for (i, t) in problem.terms.iter().enumerate() {
        if let TermFn::Smooth(h) = &t.func {
            i_f.push(i);
            smooth.push(SmoothTerm {
                h: h.clone(),
                mapping: t.mapping.clone(),
            });
        } else {
            i_g.push(i);
        }
    }

    let users = nonsmooth_users(problem);
    let mut covered = vec![false; problem.num_vars()];
    let mut blocks = Vec::new();
    for v in 0..problem.num_vars() {
        if covered[v] || users[v].is_empty() {
            continue;
        }
        if users[v].len() > 1 {
            let supports =
                disjoint_selections(problem, &users[v]).expect("checked by check_prox_computable");
            let parts = supports
                .into_iter()
                .zip(&users[v])
                .map(|(support, &i)| (support, prox_of(&problem.terms[i])))
                .collect();
            blocks.push(Block::Direct {
                var: v,
                g: Arc::new(indexed_sum(&layouts[v], parts)?),
            });
            covered[v] = true;
            continue;
        }
        let term = &problem.terms[users[v][0]];
        let h = prox_of(term);
        let Mapping::Linear(row) = &term.mapping else {
            unreachable!("nonsmooth graph terms fail the check");
        };
        match row.as_slice() {
            [(_, op)] if op.is_identity() => blocks.push(Block::Direct { var: v, g: h }),
            [(_, op)] => blocks.push(Block::Direct {
                var: v,
                g: Arc::new(precompose_tight_frame(h, op.clone())?),
            }),
            _ => {
                let mu = row.iter().filter_map(|(_, op)| op.tight_frame_mu()).sum();
                for (var, _) in row {
                    covered[var.0] = true;
                }
                blocks.push(Block::Frame {
                    h,
                    row: row.iter().map(|(var, op)| (var.0, op.clone())).collect(),
                    mu,
                });
            }
        }
        covered[v] = true;
    }

    Ok(SplitProblem {
        i_f,
        i_g,
        f: SmoothPart {
            layouts: layouts.clone(),
            terms: smooth,
        },
        g: ProxPart {
            arity: layouts.len(),
            blocks,
        },
        x0: problem.initial(),
    })
}

fn prox_of(term: &Term) -> Arc<dyn ProxFn> {
    match &term.func {
        TermFn::Prox(h) => h.clone(),
        _ => unreachable!("only proximable terms reach g"),
    }
}

/// Gradient of the assembled smooth part: adjoint-propagated term gradients
/// accumulated per variable.
pub fn gradient_general(split: &SplitProblem, x: &SignalTuple) -> Result<SignalTuple> {
    split.f.gradient(x)
}
