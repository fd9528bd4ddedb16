//! Operator graphs with cached forward values and reverse-mode adjoints.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{LinearOp, NonlinearOp, Op};
use crate::error::{Error, Result};
use crate::tensor::{Field, Layout, Signal, SignalTuple};

static NEXT_DAG_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum NodeKind {
    Input(usize),
    Constant(Signal),
    Linear(Arc<dyn LinearOp>, usize),
    Nonlinear(Arc<dyn NonlinearOp>, usize),
    Sum(Vec<usize>),
    /// Matrix product of two real matrix-valued nodes.
    Product(usize, usize),
}

#[derive(Clone, Debug)]
struct Node {
    kind: NodeKind,
    layout: Layout,
}

/// Incremental graph construction. Children always precede their parents,
/// so the node list is a topological order and cycles cannot be expressed.
#[derive(Debug)]
pub struct DagBuilder {
    inputs: Vec<Layout>,
    nodes: Vec<Node>,
}

impl DagBuilder {
    pub fn new(inputs: &[Layout]) -> Self {
        DagBuilder {
            inputs: inputs.to_vec(),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, kind: NodeKind, layout: Layout) -> NodeId {
        self.nodes.push(Node { kind, layout });
        NodeId(self.nodes.len() - 1)
    }

    fn layout_of(&self, id: NodeId) -> Result<&Layout> {
        self.nodes
            .get(id.0)
            .map(|n| &n.layout)
            .ok_or_else(|| Error::param(format!("unknown node {}", id.0)))
    }

    pub fn input(&mut self, index: usize) -> Result<NodeId> {
        let layout = self
            .inputs
            .get(index)
            .cloned()
            .ok_or(Error::ArityMismatch {
                expected: self.inputs.len(),
                found: index + 1,
            })?;
        Ok(self.push(NodeKind::Input(index), layout))
    }

    pub fn constant(&mut self, value: Signal) -> NodeId {
        let layout = value.layout();
        self.push(NodeKind::Constant(value), layout)
    }

    pub fn linear(&mut self, op: Arc<dyn LinearOp>, child: NodeId) -> Result<NodeId> {
        op.domain().expect(self.layout_of(child)?)?;
        let layout = op.codomain();
        Ok(self.push(NodeKind::Linear(op, child.0), layout))
    }

    pub fn nonlinear(&mut self, op: Arc<dyn NonlinearOp>, child: NodeId) -> Result<NodeId> {
        op.domain().expect(self.layout_of(child)?)?;
        let layout = op.codomain();
        Ok(self.push(NodeKind::Nonlinear(op, child.0), layout))
    }

    /// Applies `op`, expanding chains into one node per factor so every
    /// nonlinear factor gets its own cached linearization point.
    pub fn apply(&mut self, op: &Op, child: NodeId) -> Result<NodeId> {
        let mut node = child;
        for factor in op.factors() {
            node = match factor {
                Op::Linear(a) => self.linear(a, node)?,
                Op::Nonlinear(a) => self.nonlinear(a, node)?,
                Op::Chain(..) => unreachable!("factors are flattened"),
            };
        }
        Ok(node)
    }

    pub fn sum(&mut self, children: &[NodeId]) -> Result<NodeId> {
        let first = children
            .first()
            .ok_or_else(|| Error::param("sum of no terms"))?;
        let layout = self.layout_of(*first)?.clone();
        for c in &children[1..] {
            layout.expect(self.layout_of(*c)?)?;
        }
        Ok(self.push(
            NodeKind::Sum(children.iter().map(|c| c.0).collect()),
            layout,
        ))
    }

    pub fn product(&mut self, left: NodeId, right: NodeId) -> Result<NodeId> {
        let (n, l) = matrix_shape(self.layout_of(left)?)?;
        let (l2, m) = matrix_shape(self.layout_of(right)?)?;
        if l != l2 {
            return Err(Error::param(format!(
                "inner dimensions differ in product: {n}x{l} times {l2}x{m}"
            )));
        }
        Ok(self.push(NodeKind::Product(left.0, right.0), Layout::real(&[n, m])))
    }

    pub fn build(self, root: NodeId) -> Result<OpDag> {
        self.layout_of(root)?;
        let mut live = vec![false; self.nodes.len()];
        live[root.0] = true;
        for i in (0..=root.0).rev() {
            if !live[i] {
                continue;
            }
            match &self.nodes[i].kind {
                NodeKind::Linear(_, c) | NodeKind::Nonlinear(_, c) => live[*c] = true,
                NodeKind::Sum(cs) => cs.iter().for_each(|c| live[*c] = true),
                NodeKind::Product(a, b) => {
                    live[*a] = true;
                    live[*b] = true;
                }
                NodeKind::Input(_) | NodeKind::Constant(_) => {}
            }
        }
        let mut nodes = self.nodes;
        nodes.truncate(root.0 + 1);
        live.truncate(root.0 + 1);
        Ok(OpDag {
            id: NEXT_DAG_ID.fetch_add(1, Ordering::Relaxed),
            inputs: self.inputs,
            nodes: Arc::new(nodes),
            live: Arc::new(live),
        })
    }
}

fn matrix_shape(layout: &Layout) -> Result<(usize, usize)> {
    if layout.field != Field::Real {
        return Err(Error::Unsupported(
            "output multiplication of complex signals".into(),
        ));
    }
    match layout.shape.as_slice() {
        [n] => Ok((*n, 1)),
        [r, c] => Ok((*r, *c)),
        other => Err(Error::param(format!("{other:?} is not a matrix shape"))),
    }
}

/// Immutable operator graph over a tuple of inputs. The root is the last node.
#[derive(Clone, Debug)]
pub struct OpDag {
    id: u64,
    inputs: Vec<Layout>,
    nodes: Arc<Vec<Node>>,
    live: Arc<Vec<bool>>,
}

/// Node values from one forward pass; the linearization points of the
/// matching backward pass.
#[derive(Clone, Debug)]
pub struct DagTape {
    dag_id: u64,
    values: Vec<Option<Signal>>,
}

impl DagTape {
    /// The graph output recorded by the forward pass.
    pub fn output(&self) -> &Signal {
        self.values
            .last()
            .and_then(Option::as_ref)
            .expect("root is always evaluated")
    }
}

impl OpDag {
    /// Single-input graph applying `op`.
    pub fn from_op(op: &Op) -> Result<Self> {
        let mut b = DagBuilder::new(&[op.domain()]);
        let x = b.input(0)?;
        let root = b.apply(op, x)?;
        b.build(root)
    }

    pub fn input_layouts(&self) -> &[Layout] {
        &self.inputs
    }

    pub fn output_layout(&self) -> Layout {
        self.nodes.last().expect("nonempty graph").layout.clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// No nonlinear nodes, products or constant offsets.
    pub fn is_linear(&self) -> bool {
        self.nodes.iter().zip(self.live.iter()).all(|(n, &live)| {
            !live
                || matches!(
                    n.kind,
                    NodeKind::Input(_) | NodeKind::Linear(..) | NodeKind::Sum(_)
                )
        })
    }

    fn check_inputs(&self, x: &SignalTuple) -> Result<()> {
        if x.len() != self.inputs.len() {
            return Err(Error::ArityMismatch {
                expected: self.inputs.len(),
                found: x.len(),
            });
        }
        for (layout, part) in self.inputs.iter().zip(x.parts()) {
            layout.expect(&part.layout())?;
        }
        Ok(())
    }

    pub fn forward(&self, x: &SignalTuple) -> Result<(Signal, DagTape)> {
        self.check_inputs(x)?;
        let mut values: Vec<Option<Signal>> = vec![None; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if !self.live[i] {
                continue;
            }
            let get = |c: &usize| values[*c].as_ref().expect("children evaluated first");
            let value = match &node.kind {
                NodeKind::Input(j) => x[*j].clone(),
                NodeKind::Constant(s) => s.clone(),
                NodeKind::Linear(op, c) => op.forward(get(c))?,
                NodeKind::Nonlinear(op, c) => op.forward(get(c))?,
                NodeKind::Sum(cs) => {
                    let mut acc = get(&cs[0]).clone();
                    for c in &cs[1..] {
                        acc.axpy_in_place(1.0, get(c))?;
                    }
                    acc
                }
                NodeKind::Product(a, b) => {
                    let prod = as_matrix(get(a))? * as_matrix(get(b))?;
                    Signal::from_matrix(&prod)
                }
            };
            values[i] = Some(value);
        }
        let tape = DagTape {
            dag_id: self.id,
            values,
        };
        Ok((tape.output().clone(), tape))
    }

    pub fn eval(&self, x: &SignalTuple) -> Result<Signal> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Gradient of `x -> <g, dag(x)>` at the point recorded in `tape`.
    pub fn backward(&self, tape: &DagTape, g: &Signal) -> Result<SignalTuple> {
        if tape.dag_id != self.id || tape.values.len() != self.nodes.len() {
            return Err(Error::StaleTape);
        }
        self.propagate(Some(&tape.values), g)
    }

    /// Adjoint of a linear graph; no forward pass needed.
    pub fn adjoint(&self, y: &Signal) -> Result<SignalTuple> {
        if !self.is_linear() {
            return Err(Error::Unsupported(
                "adjoint of a nonlinear graph; use forward + backward".into(),
            ));
        }
        self.propagate(None, y)
    }

    fn propagate(&self, values: Option<&[Option<Signal>]>, g: &Signal) -> Result<SignalTuple> {
        self.output_layout().expect(&g.layout())?;
        let value = |c: usize| -> &Signal {
            values
                .and_then(|v| v[c].as_ref())
                .expect("forward values present for nonlinear nodes")
        };
        let mut grads: Vec<Option<Signal>> = vec![None; self.nodes.len()];
        let mut out: Vec<Signal> = self.inputs.iter().map(Signal::zeros).collect();
        *grads.last_mut().expect("nonempty graph") = Some(g.clone());

        fn accumulate(slot: &mut Option<Signal>, g: Signal) -> Result<()> {
            match slot {
                Some(acc) => acc.axpy_in_place(1.0, &g),
                None => {
                    *slot = Some(g);
                    Ok(())
                }
            }
        }

        for i in (0..self.nodes.len()).rev() {
            let Some(gi) = grads[i].take() else { continue };
            match &self.nodes[i].kind {
                NodeKind::Input(j) => out[*j].axpy_in_place(1.0, &gi)?,
                NodeKind::Constant(_) => {}
                NodeKind::Linear(op, c) => accumulate(&mut grads[*c], op.adjoint(&gi)?)?,
                NodeKind::Nonlinear(op, c) => {
                    let g_child = op.jacobian_adjoint(value(*c), &gi)?;
                    accumulate(&mut grads[*c], g_child)?
                }
                NodeKind::Sum(cs) => {
                    for c in cs {
                        accumulate(&mut grads[*c], gi.clone())?;
                    }
                }
                NodeKind::Product(a, b) => {
                    let g_mat = as_matrix(&gi)?;
                    let left = as_matrix(value(*a))?;
                    let right = as_matrix(value(*b))?;
                    let ga = reshape_like(&(&g_mat * right.transpose()), &self.nodes[*a].layout)?;
                    let gb = reshape_like(&(left.transpose() * &g_mat), &self.nodes[*b].layout)?;
                    accumulate(&mut grads[*a], ga)?;
                    accumulate(&mut grads[*b], gb)?;
                }
            }
        }
        Ok(SignalTuple::new(out))
    }
}

fn as_matrix(s: &Signal) -> Result<DMatrix<f64>> {
    s.to_matrix()
}

fn reshape_like(m: &DMatrix<f64>, layout: &Layout) -> Result<Signal> {
    Signal::from_matrix(m).reshape(&layout.shape)
}

/// `[A_1, ..., A_k](x_1, ..., x_k) = sum_j A_j x_j`.
pub fn hcat(ops: &[Op]) -> Result<OpDag> {
    let first = ops
        .first()
        .ok_or_else(|| Error::param("horizontal concatenation of no operators"))?;
    let codomain = first.codomain();
    for op in &ops[1..] {
        codomain.expect(&op.codomain())?;
    }
    let domains: Vec<Layout> = ops.iter().map(Op::domain).collect();
    let mut b = DagBuilder::new(&domains);
    let mut terms = Vec::with_capacity(ops.len());
    for (j, op) in ops.iter().enumerate() {
        let x = b.input(j)?;
        terms.push(b.apply(op, x)?);
    }
    let root = if terms.len() == 1 {
        terms[0]
    } else {
        b.sum(&terms)?
    };
    b.build(root)
}

/// `(x_1, x_2) -> a(x_1) b(x_2)` as a matrix product. Real signals only.
pub fn output_mul(a: &Op, b: &Op) -> Result<OpDag> {
    let mut builder = DagBuilder::new(&[a.domain(), b.domain()]);
    let x1 = builder.input(0)?;
    let x2 = builder.input(1)?;
    let left = builder.apply(a, x1)?;
    let right = builder.apply(b, x2)?;
    let root = builder.product(left, right)?;
    builder.build(root)
}
