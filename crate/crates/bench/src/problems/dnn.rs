use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use proxkit::fao::{broadcast_op, sigmoid_op, DagBuilder, NodeId, OpDag};
use proxkit::funcs::{cross_entropy, l1_norm};
use proxkit::model::{Problem, VarId};
use proxkit::{Error, Layout, Result, Signal, SignalTuple};

use super::seeded;

pub const HIDDEN: usize = 7;

#[derive(Clone, Debug)]
pub struct DnnParams {
    /// Training points, split evenly between the two classes.
    pub points: usize,
    /// Weight of the l1 penalty on each weight matrix.
    pub lambda: f64,
}

impl Default for DnnParams {
    fn default() -> Self {
        DnnParams {
            points: 200,
            lambda: 0.01,
        }
    }
}

/// Two-class data: an inner disc and a surrounding ring.
#[derive(Clone, Debug)]
pub struct Dataset {
    /// `2 x N` coordinates.
    pub points: Signal,
    /// `1 x N` labels in {0, 1}; 1 for the ring.
    pub labels: Signal,
}

pub fn gen_rings(points: usize, seed: u64) -> Result<Dataset> {
    if points < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two points, got {points}"
        )));
    }
    let mut rng = seeded(seed);
    let mut xy = vec![0.0; 2 * points];
    let mut labels = vec![0.0; points];
    for i in 0..points {
        let outer = i % 2 == 1;
        let r = if outer {
            rng.random_range(1.4..2.2)
        } else {
            rng.random_range(0.0..1.0)
        };
        let phi = rng.random_range(0.0..TAU);
        xy[i] = r * phi.cos();
        xy[points + i] = r * phi.sin();
        labels[i] = if outer { 1.0 } else { 0.0 };
    }
    Ok(Dataset {
        points: Signal::real(xy, &[2, points])?,
        labels: Signal::real(labels, &[1, points])?,
    })
}

/// Three-layer sigmoid network `s(W3 s(W2 s(W1 D + b1) + b2) + b3)` with
/// scalar biases, trained with cross-entropy and l1 on the weights.
#[derive(Clone, Debug)]
pub struct DnnClassifier {
    pub data: Dataset,
    pub lambda: f64,
    /// Network output as a function of `(W1, W2, W3, b1, b2, b3)`.
    pub net: OpDag,
    pub weights: [VarId; 3],
    pub biases: [VarId; 3],
    pub problem: Problem,
}

pub fn gen_dnn(params: &DnnParams, seed: u64) -> Result<DnnClassifier> {
    let data = gen_rings(params.points, seed)?;
    let shapes = [[HIDDEN, 2], [HIDDEN, HIDDEN], [1, HIDDEN]];
    let mut layouts: Vec<Layout> = shapes.iter().map(|s| Layout::real(s)).collect();
    layouts.extend((0..3).map(|_| Layout::real(&[1, 1])));
    let net = network(&layouts, &data.points)?;

    // first layer scaled to the spread of the data, later ones to fan-in
    let coords = data.points.real_data().expect("real points");
    let mean = coords.iter().sum::<f64>() / coords.len() as f64;
    let spread = (coords.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / coords.len() as f64)
        .sqrt()
        .max(f64::EPSILON);
    let mut rng = seeded(seed.wrapping_add(1));
    let mut problem = Problem::new();
    let weights = shapes.map(|shape| {
        let fan_in = shape[1] as f64;
        let std = if shape[1] == 2 {
            1.0 / (spread * fan_in.sqrt())
        } else {
            1.0 / fan_in.sqrt()
        };
        let normal = Normal::new(0.0, std).expect("finite std");
        let init = (0..shape[0] * shape[1])
            .map(|_| normal.sample(&mut rng))
            .collect();
        let name = format!("W{}x{}", shape[0], shape[1]);
        problem.variable(&name, Signal::real(init, &shape).expect("sized"))
    });
    let biases = ["b1", "b2", "b3"].map(|name| problem.variable(name, Signal::scalar(0.0)));

    let vars: Vec<VarId> = weights.iter().chain(&biases).copied().collect();
    problem.add_smooth_graph(
        Arc::new(cross_entropy(data.labels.clone())?),
        vars,
        net.clone(),
    )?;
    for w in weights {
        problem.add_nonsmooth_on(Arc::new(l1_norm(params.lambda)?), w)?;
    }
    Ok(DnnClassifier {
        data,
        lambda: params.lambda,
        net,
        weights,
        biases,
        problem,
    })
}

fn network(layouts: &[Layout], points: &Signal) -> Result<OpDag> {
    let n = points.shape()[1];
    let mut b = DagBuilder::new(layouts);
    let mut layer: NodeId = b.constant(points.clone());
    for (k, layout) in layouts.iter().take(3).enumerate() {
        let w = b.input(k)?;
        let bias = b.input(3 + k)?;
        let rows = layout.shape[0];
        let pre = b.product(w, layer)?;
        let spread = b.linear(broadcast_op(&[rows, n]), bias)?;
        let z = b.sum(&[pre, spread])?;
        layer = b.nonlinear(sigmoid_op(&Layout::real(&[rows, n]))?, z)?;
    }
    b.build(layer)
}

impl DnnClassifier {
    /// Cross-entropy without the penalty.
    pub fn loss(&self, x: &SignalTuple) -> Result<f64> {
        self.problem.term_value(0, x)
    }

    /// Fraction of training points whose thresholded output matches the label.
    pub fn accuracy(&self, x: &SignalTuple) -> Result<f64> {
        let out = self.net.eval(x)?;
        let out = out.real_data().expect("real output");
        let t = self.data.labels.real_data().expect("real labels");
        let hits = out
            .iter()
            .zip(t)
            .filter(|(y, t)| (**y >= 0.5) == (**t >= 0.5))
            .count();
        Ok(hits as f64 / t.len() as f64)
    }
}
