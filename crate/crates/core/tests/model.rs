mod common;

use std::sync::Arc;

use nalgebra::DMatrix;

use proxkit::fao::{
    dct_op, identity_op, matrix_op, scale_op, select_op, sigmoid_op, variation_op, DagBuilder,
    LinearOp,
};
use proxkit::funcs::{
    affine_addition, box_set, l1_norm, least_squares, linear_fn, mixed_l21_norm, moreau_envelope,
    rank_ball, sqr_dist, translate, zero_fn, ProxFn, SmoothFn,
};
use proxkit::model::{
    check_prox_computable, dual_to_primal, fenchel_dual, gradient_general, regularize_then_dualize,
    smooth_term, smoothing_continuation, split, Problem, ProxReport, ValueFn, Violation,
};
use proxkit::solvers::{solve, SolverConfig, SolverKind};
use proxkit::{Error, Layout, Result, Signal, SignalTuple, Vector};

fn v(data: &[f64]) -> Signal {
    Signal::from_vec(data.to_vec())
}

fn violations(problem: &Problem) -> Vec<Violation> {
    check_prox_computable(problem).violations
}

fn split_violations(problem: &Problem) -> Vec<Violation> {
    match split(problem) {
        Err(Error::Splitting(e)) => e.violations,
        other => panic!("expected a splitting error, got {other:?}"),
    }
}

fn tight() -> SolverConfig {
    SolverConfig::default()
        .with_tol(1e-10)
        .with_max_iters(100_000)
}

fn lasso(seed: u64, m: usize, n: usize) -> (Problem, DMatrix<f64>, Signal, f64) {
    let mut r = common::rng(seed);
    let a = DMatrix::from_vec(m, n, common::randn(&mut r, m * n));
    let y = common::rand_vec(&mut r, m);
    let lambda = 0.3;
    let mut problem = Problem::new();
    let x = problem.variable("x", Signal::zeros(&Layout::real(&[n])));
    problem
        .add_smooth(
            Arc::new(sqr_dist(y.clone())),
            vec![(x, matrix_op(a.clone()))],
        )
        .unwrap();
    problem
        .add_nonsmooth_on(Arc::new(l1_norm(lambda).unwrap()), x)
        .unwrap();
    (problem, a, y, lambda)
}

struct Rpca {
    problem: Problem,
    y: Signal,
}

fn rpca(seed: u64, rows: usize, cols: usize) -> Rpca {
    let mut r = common::rng(seed);
    let layout = Layout::real(&[rows, cols]);
    let y = common::rand_signal(&mut r, &layout);
    let mut problem = Problem::new();
    let low_rank = problem.variable("L", common::rand_signal(&mut r, &layout));
    let sparse = problem.variable("S", common::rand_signal(&mut r, &layout));
    problem
        .add_smooth(
            Arc::new(sqr_dist(y.clone())),
            vec![
                (low_rank, identity_op(&layout)),
                (sparse, identity_op(&layout)),
            ],
        )
        .unwrap();
    problem
        .add_nonsmooth_on(Arc::new(l1_norm(0.1).unwrap()), sparse)
        .unwrap();
    problem
        .add_nonsmooth_on(Arc::new(rank_ball(1)), low_rank)
        .unwrap();
    Rpca { problem, y }
}

#[derive(Debug)]
struct Opaque;

impl ValueFn for Opaque {
    fn value(&self, x: &Signal) -> Result<f64> {
        Ok(x.norm2().sqrt())
    }
}

#[test]
fn lasso_splits_into_smooth_and_nonsmooth_terms() {
    let (problem, ..) = lasso(1, 8, 12);
    let s = split(&problem).unwrap();
    assert_eq!(s.i_f, vec![0]);
    assert_eq!(s.i_g, vec![1]);
}

#[test]
fn split_lasso_matches_direct_solve() {
    let (problem, a, y, lambda) = lasso(2, 10, 15);
    let s = split(&problem).unwrap();
    let from_model = s.solve(SolverKind::Panoc, &tight()).unwrap();
    assert!(from_model.converged());

    let f = least_squares(matrix_op(a), y).unwrap();
    let g = l1_norm(lambda).unwrap();
    let x0 = Signal::zeros(&Layout::real(&[15]));
    let direct = solve(SolverKind::Panoc, &f, &g, &x0, &tight()).unwrap();
    common::assert_close(&from_model.x[0].coords(), &direct.x.coords(), 1e-8);

    let total = f.value(&direct.x).unwrap() + g.value(&direct.x).unwrap();
    assert!((s.objective(&from_model.x).unwrap() - total).abs() < 1e-9);
    assert!((problem.objective(&from_model.x).unwrap() - total).abs() < 1e-9);
}

#[test]
fn robust_pca_splits() {
    let Rpca { problem, .. } = rpca(3, 4, 3);
    let s = split(&problem).unwrap();
    assert_eq!(s.i_f, vec![0]);
    assert_eq!(s.i_g, vec![1, 2]);
}

#[test]
fn robust_pca_with_extra_l1_on_low_rank_violates_cardinality() {
    let Rpca { mut problem, .. } = rpca(4, 4, 3);
    let low_rank = problem.terms()[0].mapping.vars()[0];
    problem
        .add_nonsmooth_on(Arc::new(l1_norm(1.0).unwrap()), low_rank)
        .unwrap();
    assert_eq!(
        split_violations(&problem),
        vec![Violation::SharedVariable {
            var: low_rank.index(),
            terms: vec![2, 3]
        }]
    );
}

#[test]
fn identity_mappings_pass() {
    let mut problem = Problem::new();
    let a = problem.variable("a", v(&[1.0, 2.0]));
    let b = problem.variable("b", v(&[3.0]));
    problem
        .add_nonsmooth_on(Arc::new(l1_norm(1.0).unwrap()), a)
        .unwrap();
    problem
        .add_nonsmooth_on(Arc::new(box_set(-1.0, 1.0).unwrap()), b)
        .unwrap();
    assert_eq!(check_prox_computable(&problem), ProxReport::default());
    assert!(check_prox_computable(&problem).is_ok());
}

#[test]
fn nonsmooth_term_without_prox_is_rejected() {
    let mut problem = Problem::new();
    let x = problem.variable("x", v(&[1.0, 2.0]));
    problem
        .add_opaque(
            Arc::new(Opaque),
            vec![(x, identity_op(&Layout::real(&[2])))],
        )
        .unwrap();
    assert_eq!(violations(&problem), vec![Violation::NoProx { term: 0 }]);
    assert_eq!(
        split_violations(&problem),
        vec![Violation::NoProx { term: 0 }]
    );
}

#[test]
fn non_tight_mapping_is_rejected() {
    let mut problem = Problem::new();
    let x = problem.variable("x", v(&[0.0; 3]));
    let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0]);
    problem
        .add_nonsmooth(Arc::new(l1_norm(1.0).unwrap()), vec![(x, matrix_op(a))])
        .unwrap();
    assert_eq!(
        violations(&problem),
        vec![Violation::NotTightFrame { term: 0, var: 0 }]
    );
}

#[test]
fn nonlinear_mapping_of_nonsmooth_term_is_rejected() {
    let layout = Layout::real(&[3]);
    let mut b = DagBuilder::new(std::slice::from_ref(&layout));
    let input = b.input(0).unwrap();
    let out = b.nonlinear(sigmoid_op(&layout).unwrap(), input).unwrap();
    let dag = b.build(out).unwrap();

    let mut problem = Problem::new();
    let x = problem.variable("x", Signal::zeros(&layout));
    problem
        .add_nonsmooth_graph(Arc::new(l1_norm(1.0).unwrap()), vec![x], dag)
        .unwrap();
    assert_eq!(
        violations(&problem),
        vec![Violation::NonlinearMapping { term: 0 }]
    );
}

#[test]
fn shared_variable_is_rejected() {
    let mut problem = Problem::new();
    let x = problem.variable("x", v(&[0.0; 2]));
    problem
        .add_nonsmooth_on(Arc::new(l1_norm(1.0).unwrap()), x)
        .unwrap();
    problem
        .add_nonsmooth_on(Arc::new(box_set(-1.0, 1.0).unwrap()), x)
        .unwrap();
    assert_eq!(
        violations(&problem),
        vec![Violation::SharedVariable {
            var: 0,
            terms: vec![0, 1]
        }]
    );
}

#[test]
fn violations_name_the_offending_term_and_variable() {
    let mut problem = Problem::new();
    let x = problem.variable("x", v(&[0.0; 2]));
    let y = problem.variable("y", v(&[0.0; 2]));
    problem
        .add_smooth_on(Arc::new(sqr_dist(v(&[1.0, 1.0]))), x)
        .unwrap();
    problem
        .add_opaque(
            Arc::new(Opaque),
            vec![(y, identity_op(&Layout::real(&[2])))],
        )
        .unwrap();
    problem
        .add_nonsmooth(
            Arc::new(l1_norm(1.0).unwrap()),
            vec![(x, matrix_op(DMatrix::from_element(2, 2, 1.0)))],
        )
        .unwrap();
    let found = violations(&problem);
    assert!(found.contains(&Violation::NoProx { term: 1 }));
    assert!(found.contains(&Violation::NotTightFrame { term: 2, var: 0 }));
    assert_eq!(found.len(), 2);
    let message = split(&problem).unwrap_err().to_string();
    assert!(message.contains("term 1"), "{message}");
    assert!(message.contains("term 2"), "{message}");
}

#[test]
fn smooth_terms_may_share_variables() {
    let mut problem = Problem::new();
    let x = problem.variable("x", v(&[0.0; 2]));
    problem
        .add_smooth_on(Arc::new(sqr_dist(v(&[1.0, 0.0]))), x)
        .unwrap();
    problem
        .add_smooth_on(Arc::new(sqr_dist(v(&[0.0, 1.0]))), x)
        .unwrap();
    problem
        .add_nonsmooth_on(Arc::new(l1_norm(1.0).unwrap()), x)
        .unwrap();
    let s = split(&problem).unwrap();
    assert_eq!(s.i_f, vec![0, 1]);
    assert_eq!(s.i_g, vec![2]);
}

/// Box constraints on disjoint index sets of one variable, as in de-clipping.
fn disjoint_selections(supports: &[&[usize]], n: usize) -> Problem {
    let mut problem = Problem::new();
    let y = problem.variable("y", Signal::zeros(&Layout::real(&[n])));
    let bounds = [(-0.5, 0.5), (1.0, 4.0), (-4.0, -1.0)];
    for (k, support) in supports.iter().enumerate() {
        let (lo, hi) = bounds[k % bounds.len()];
        problem
            .add_nonsmooth(
                Arc::new(box_set(lo, hi).unwrap()),
                vec![(y, select_op(support, n).unwrap())],
            )
            .unwrap();
    }
    problem
}

#[test]
fn disjoint_selections_pass_as_one_separable_term() {
    let problem = disjoint_selections(&[&[0, 2, 5], &[1, 4], &[3]], 6);
    assert!(check_prox_computable(&problem).is_ok());
    let s = split(&problem).unwrap();
    assert_eq!(s.i_g, vec![0, 1, 2]);

    let x = SignalTuple::new(vec![v(&[2.0, -3.0, -2.0, 0.0, 5.0, 0.1])]);
    let z = s.g().prox(&x, 1.0).unwrap();
    assert_eq!(common::real(&z[0]), vec![0.5, 1.0, -0.5, -1.0, 4.0, 0.1]);
    assert_eq!(s.g().value(&z).unwrap(), 0.0);
}

#[test]
fn overlapping_selections_are_rejected() {
    let problem = disjoint_selections(&[&[0, 2], &[2, 3]], 4);
    assert_eq!(
        violations(&problem),
        vec![Violation::SharedVariable {
            var: 0,
            terms: vec![0, 1]
        }]
    );
}

#[test]
fn split_is_deterministic() {
    let Rpca { problem, .. } = rpca(5, 3, 3);
    let first = split(&problem).unwrap();
    let x = problem.initial();
    for _ in 0..5 {
        let again = split(&problem).unwrap();
        assert_eq!(again.i_f, first.i_f);
        assert_eq!(again.i_g, first.i_g);
        assert_eq!(
            again.g().prox(&x, 0.7).unwrap(),
            first.g().prox(&x, 0.7).unwrap()
        );
    }
}

#[test]
fn assembled_g_passes_the_perturbation_oracle() {
    let mut r = common::rng(6);
    let mut cases: Vec<Problem> = Vec::new();

    cases.push(rpca(7, 2, 3).problem);
    cases.push(disjoint_selections(&[&[0, 3], &[1, 2], &[4, 5]], 6));

    // h(x1 + x2) over two variables with identity maps, mu = 2
    let mut frame = Problem::new();
    let a = frame.variable("a", v(&[0.0; 3]));
    let b = frame.variable("b", v(&[0.0; 3]));
    let id = identity_op(&Layout::real(&[3]));
    frame
        .add_nonsmooth(
            Arc::new(l1_norm(0.8).unwrap()),
            vec![(a, id.clone()), (b, id)],
        )
        .unwrap();
    cases.push(frame);

    // l1 through an orthogonal transform
    let mut orthogonal = Problem::new();
    let c = orthogonal.variable("c", v(&[0.0; 5]));
    orthogonal
        .add_nonsmooth(Arc::new(l1_norm(0.5).unwrap()), vec![(c, dct_op(5))])
        .unwrap();
    cases.push(orthogonal);

    // scaled identity, mu = 4
    let mut scaled = Problem::new();
    let d = scaled.variable("d", v(&[0.0; 4]));
    scaled
        .add_nonsmooth(
            Arc::new(box_set(-1.0, 2.0).unwrap()),
            vec![(d, scale_op(&Layout::real(&[4]), 2.0))],
        )
        .unwrap();
    cases.push(scaled);

    for (k, problem) in cases.iter().enumerate() {
        let s = split(problem).unwrap();
        for _ in 0..10 {
            let x = common::rand_like(&mut r, &problem.initial()).scaled(2.0);
            let gamma = 0.2 + r_gamma(&mut r);
            let margin = common::prox_margin(s.g(), &x, gamma, 400, &mut r);
            assert!(margin >= -1e-9, "case {k}: margin {margin}");
        }
    }
}

fn r_gamma(r: &mut impl rand::Rng) -> f64 {
    r.random_range(0.0..2.0)
}

#[test]
fn gradient_of_single_identity_term_is_the_term_gradient() {
    let c = v(&[1.0, -2.0, 0.5]);
    let mut problem = Problem::new();
    let x = problem.variable("x", v(&[0.0; 3]));
    problem
        .add_smooth_on(Arc::new(sqr_dist(c.clone())), x)
        .unwrap();
    let s = split(&problem).unwrap();
    let at = SignalTuple::new(vec![v(&[3.0, 1.0, -1.0])]);
    let g = gradient_general(&s, &at).unwrap();
    assert_eq!(g[0], sqr_dist(c).gradient(&at[0]).unwrap());
}

#[test]
fn gradient_of_two_least_squares_terms_is_their_sum() {
    let mut r = common::rng(8);
    let a1 = DMatrix::from_vec(4, 3, common::randn(&mut r, 12));
    let a2 = DMatrix::from_vec(5, 3, common::randn(&mut r, 15));
    let y1 = common::rand_vec(&mut r, 4);
    let y2 = common::rand_vec(&mut r, 5);
    let mut problem = Problem::new();
    let x = problem.variable("x", v(&[0.0; 3]));
    problem
        .add_smooth(
            Arc::new(sqr_dist(y1.clone())),
            vec![(x, matrix_op(a1.clone()))],
        )
        .unwrap();
    problem
        .add_smooth(
            Arc::new(sqr_dist(y2.clone())),
            vec![(x, matrix_op(a2.clone()))],
        )
        .unwrap();
    let s = split(&problem).unwrap();
    let at = SignalTuple::new(vec![common::rand_vec(&mut r, 3)]);

    let g = gradient_general(&s, &at).unwrap();
    let sum = least_squares(matrix_op(a1), y1)
        .unwrap()
        .gradient(&at[0])
        .unwrap()
        .add(
            &least_squares(matrix_op(a2), y2)
                .unwrap()
                .gradient(&at[0])
                .unwrap(),
        )
        .unwrap();
    common::assert_close(&g[0].coords(), &sum.coords(), 1e-12);
    assert!(common::gradient_error(s.f(), &at) < 1e-5);
}

#[test]
fn robust_pca_gradient_is_the_residual_in_both_blocks() {
    let Rpca { problem, y } = rpca(9, 4, 3);
    let s = split(&problem).unwrap();
    let x = problem.initial();
    let residual = x[0].add(&x[1]).unwrap().sub(&y).unwrap();
    let g = gradient_general(&s, &x).unwrap();
    common::assert_close(&g[0].coords(), &residual.coords(), 1e-14);
    common::assert_close(&g[1].coords(), &residual.coords(), 1e-14);
    assert!(common::gradient_error(s.f(), &x) < 1e-5);
}

#[test]
fn gradient_through_a_graph_term_matches_finite_differences() {
    let layout = Layout::real(&[4]);
    let mut r = common::rng(10);
    let w = DMatrix::from_vec(4, 4, common::randn(&mut r, 16));
    let mut b = DagBuilder::new(&[layout.clone(), layout.clone()]);
    let p = b.input(0).unwrap();
    let q = b.input(1).unwrap();
    let wp = b.linear(matrix_op(w), p).unwrap();
    let s = b.sum(&[wp, q]).unwrap();
    let out = b.nonlinear(sigmoid_op(&layout).unwrap(), s).unwrap();
    let dag = b.build(out).unwrap();

    let mut problem = Problem::new();
    let pv = problem.variable("p", common::rand_signal(&mut r, &layout));
    let qv = problem.variable("q", common::rand_signal(&mut r, &layout));
    problem
        .add_smooth_graph(
            Arc::new(sqr_dist(common::rand_signal(&mut r, &layout))),
            vec![pv, qv],
            dag,
        )
        .unwrap();
    problem
        .add_smooth_on(Arc::new(sqr_dist(common::rand_signal(&mut r, &layout))), qv)
        .unwrap();
    let split = split(&problem).unwrap();
    assert!(common::gradient_error(split.f(), &problem.initial()) < 1e-5);
}

#[test]
fn builder_rejects_malformed_terms() {
    let mut problem = Problem::new();
    let x = problem.variable("x", v(&[0.0; 3]));
    let wrong = identity_op(&Layout::real(&[2]));
    assert!(problem
        .add_nonsmooth(Arc::new(l1_norm(1.0).unwrap()), vec![(x, wrong)])
        .is_err());
    assert!(problem
        .add_nonsmooth(Arc::new(l1_norm(1.0).unwrap()), vec![])
        .is_err());
    let id = identity_op(&Layout::real(&[3]));
    assert!(problem
        .add_nonsmooth(
            Arc::new(l1_norm(1.0).unwrap()),
            vec![(x, id.clone()), (x, id)]
        )
        .is_err());
    assert_eq!(problem.num_terms(), 0);
}

#[test]
fn concurrent_solves_agree() {
    let Rpca { problem, .. } = rpca(11, 5, 4);
    let s = split(&problem).unwrap();
    let config = SolverConfig::default().with_tol(1e-8);
    let serial = s.solve(SolverKind::Panoc, &config).unwrap();
    let parallel: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..4)
            .map(|_| scope.spawn(|| s.solve(SolverKind::Panoc, &config).unwrap()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for sol in parallel {
        assert_eq!(sol.x, serial.x);
        assert_eq!(sol.iterations, serial.iterations);
    }
}

struct Tv {
    y: Signal,
    variation: Arc<dyn LinearOp>,
    f: Arc<dyn SmoothFn>,
    g: Arc<dyn ProxFn>,
}

fn tv(seed: u64, rows: usize, cols: usize, lambda: f64) -> Tv {
    let mut r = common::rng(seed);
    let y = common::rand_signal(&mut r, &Layout::real(&[rows, cols]));
    Tv {
        f: Arc::new(sqr_dist(y.clone())),
        y,
        variation: variation_op(rows, cols),
        g: Arc::new(mixed_l21_norm(lambda).unwrap()),
    }
}

/// A dual point with every gradient pair inside the `lambda` ball.
fn feasible_dual(rng: &mut impl rand::Rng, layout: &Layout, lambda: f64) -> Signal {
    let u = common::rand_signal(rng, layout);
    let largest = u.coords().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    u.scaled(0.5 * lambda / largest)
}

#[test]
fn tv_dual_has_the_expected_form() {
    let lambda = 0.3;
    let Tv { y, variation, f, g } = tv(12, 5, 4, lambda);
    let dual = fenchel_dual(f, g, variation.clone()).unwrap();
    assert_eq!(dual.problem().num_vars(), 1);
    assert_eq!(dual.problem().num_terms(), 2);

    // f*(z) = 1/2 |z + Y|^2 - 1/2 |Y|^2 and g* vanishes on the dual ball
    let mut r = common::rng(13);
    let half_y = 0.5 * y.norm2().powi(2);
    for _ in 0..5 {
        let u = feasible_dual(&mut r, &variation.codomain(), lambda);
        let inner = variation.adjoint(&u).unwrap().scaled(-1.0).add(&y).unwrap();
        let expected = 0.5 * inner.norm2().powi(2) - half_y;
        let got = dual
            .problem()
            .objective(&SignalTuple::new(vec![u]))
            .unwrap();
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }
}

#[test]
fn tv_recovery_satisfies_the_optimality_relation() {
    let lambda = 0.3;
    let Tv { y, variation, f, g } = tv(14, 5, 4, lambda);
    let dual = fenchel_dual(f.clone(), g, variation.clone()).unwrap();
    let mut r = common::rng(15);
    let u = feasible_dual(&mut r, &variation.codomain(), lambda);

    let x = dual_to_primal(f.as_ref(), variation.as_ref(), &u).unwrap();
    let direct = y.sub(&variation.adjoint(&u).unwrap()).unwrap();
    common::assert_close(&x.coords(), &direct.coords(), 1e-14);
    assert_eq!(dual.recover(&u).unwrap(), x);

    let grad = f.gradient(&x).unwrap();
    let expected = variation.adjoint(&u).unwrap().scaled(-1.0);
    common::assert_close(&grad.coords(), &expected.coords(), 1e-14);
}

#[test]
fn zero_dual_recovers_the_unconstrained_minimizer() {
    let Tv {
        y, variation, f, ..
    } = tv(16, 4, 4, 0.1);
    let zero = Signal::zeros(&variation.codomain());
    let x = dual_to_primal(f.as_ref(), variation.as_ref(), &zero).unwrap();
    assert_eq!(x, y);
}

#[test]
fn tv_strong_duality_at_small_scale() {
    let lambda = 0.2;
    let Tv {
        variation, f, g, ..
    } = tv(17, 6, 5, lambda);
    let dual = fenchel_dual(f.clone(), g.clone(), variation.clone()).unwrap();
    let s = split(dual.problem()).unwrap();
    let sol = s.solve(SolverKind::Panoc, &tight()).unwrap();
    assert!(sol.converged());
    let x = dual.recover(&sol.x[0]).unwrap();
    let primal = f.value(&x).unwrap() + g.value(&variation.forward(&x).unwrap()).unwrap();
    let dual_value = s.objective(&sol.x).unwrap();
    // min primal = -min dual
    assert!(
        (primal + dual_value).abs() <= 1e-7 * primal.abs().max(1.0),
        "{primal} vs {dual_value}"
    );
}

#[test]
fn zero_set_dual_is_the_conjugate_alone() {
    let c = v(&[1.0, -2.0]);
    let f: Arc<dyn SmoothFn> = Arc::new(sqr_dist(c.clone()));
    let zero_set: Arc<dyn ProxFn> = Arc::new(box_set(0.0, 0.0).unwrap());
    let id = identity_op(&Layout::real(&[2]));
    let dual = fenchel_dual(f, zero_set, id).unwrap();
    let mut r = common::rng(18);
    for _ in 0..5 {
        let u = common::rand_vec(&mut r, 2);
        // f*(-u) = 1/2 |u|^2 - <c, u>
        let expected = 0.5 * u.norm2().powi(2) - c.inner(&u).unwrap();
        let got = dual
            .problem()
            .objective(&SignalTuple::new(vec![u]))
            .unwrap();
        assert!((got - expected).abs() < 1e-12);
    }
    // minimized at u = c, recovering x = 0
    let s = split(dual.problem()).unwrap();
    let sol = s.solve(SolverKind::Pg, &tight()).unwrap();
    common::assert_close(&sol.x[0].coords(), &c.coords(), 1e-9);
    common::assert_close(
        &dual.recover(&sol.x[0]).unwrap().coords(),
        &[0.0, 0.0],
        1e-9,
    );
}

#[test]
fn scalar_strong_duality() {
    // min 1/2 (x - 3)^2 + 0.5 |2 x|: x* = 2, p* = 2.5
    // dual: min 2 u^2 - 3 u over |u| <= 0.5: u* = 0.5, d* = -2.5
    let f: Arc<dyn SmoothFn> = Arc::new(sqr_dist(v(&[3.0])));
    let g: Arc<dyn ProxFn> = Arc::new(l1_norm(0.5).unwrap());
    let op = scale_op(&Layout::real(&[1]), 2.0);
    let dual = fenchel_dual(f.clone(), g.clone(), op.clone()).unwrap();
    let s = split(dual.problem()).unwrap();
    for kind in [SolverKind::Pg, SolverKind::Fpg, SolverKind::Panoc] {
        let sol = s.solve(kind, &tight()).unwrap();
        let u = &sol.x[0];
        assert!((common::real(u)[0] - 0.5).abs() < 1e-8);
        let dual_value = s.objective(&sol.x).unwrap();
        assert!((dual_value + 2.5).abs() < 1e-8, "{dual_value}");

        let x = dual_to_primal(f.as_ref(), op.as_ref(), u).unwrap();
        assert!((common::real(&x)[0] - 2.0).abs() < 1e-8);
        let primal = f.value(&x).unwrap() + g.value(&op.forward(&x).unwrap()).unwrap();
        assert!((primal + dual_value).abs() < 1e-8);
    }
}

#[test]
fn dual_requires_strong_convexity() {
    let g: Arc<dyn ProxFn> = Arc::new(l1_norm(1.0).unwrap());
    let id = identity_op(&Layout::real(&[2]));
    let linear: Arc<dyn SmoothFn> = Arc::new(linear_fn(v(&[1.0, 1.0])));
    assert!(matches!(
        fenchel_dual(linear.clone(), g.clone(), id.clone()),
        Err(Error::NotStronglyConvex(_))
    ));
    let rank_deficient = least_squares(
        matrix_op(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])),
        v(&[0.0]),
    )
    .unwrap();
    assert!(matches!(
        fenchel_dual(Arc::new(rank_deficient), g, id.clone()),
        Err(Error::NotStronglyConvex(_))
    ));
    assert!(matches!(
        dual_to_primal(linear.as_ref(), id.as_ref(), &v(&[0.0, 0.0])),
        Err(Error::NotStronglyConvex(_))
    ));
}

#[test]
fn smooth_term_delegates_to_the_envelope() {
    let h: Arc<dyn ProxFn> = Arc::new(l1_norm(1.5).unwrap());
    let wrapped = smooth_term(h.clone(), 0.4).unwrap();
    let direct = moreau_envelope(h, 0.4).unwrap();
    assert_eq!(wrapped.beta(), 0.4);
    let mut r = common::rng(19);
    for _ in 0..5 {
        let x = common::rand_vec(&mut r, 4);
        assert_eq!(wrapped.value(&x).unwrap(), direct.value(&x).unwrap());
        assert_eq!(wrapped.gradient(&x).unwrap(), direct.gradient(&x).unwrap());
    }
    assert!(smooth_term(Arc::new(zero_fn()), 0.0).is_err());
}

#[test]
fn large_smoothing_of_zero_set_has_gradient_x_over_beta() {
    let zero_set: Arc<dyn ProxFn> = Arc::new(box_set(0.0, 0.0).unwrap());
    let l1: Arc<dyn ProxFn> = Arc::new(l1_norm(1.0).unwrap());
    let x = v(&[0.3, -1.2, 2.0]);
    for beta in [1e2, 1e4, 1e6] {
        let expected = x.scaled(1.0 / beta);
        let g = smooth_term(zero_set.clone(), beta).unwrap();
        common::assert_close(&g.gradient(&x).unwrap().coords(), &expected.coords(), 1e-15);
        // l1 is bounded near 0, so its envelope is quadratic once |x| < beta
        let g = smooth_term(l1.clone(), beta).unwrap();
        common::assert_close(&g.gradient(&x).unwrap().coords(), &expected.coords(), 1e-15);
    }
}

#[test]
fn continuation_approaches_the_soft_threshold() {
    // min 1/2 (x - 0.3)^2 + |x|^beta: x_beta = 0.3 beta / (1 + beta) -> 0
    let l1: Arc<dyn ProxFn> = Arc::new(l1_norm(1.0).unwrap());
    let config = tight();
    let history = smoothing_continuation(1.0, 1e-6, 60, v(&[1.0]), |beta, warm| {
        let mut problem = Problem::new();
        let x = problem.variable("x", warm.clone());
        problem.add_smooth_on(Arc::new(sqr_dist(v(&[0.3]))), x)?;
        problem.add_smooth_on(Arc::new(smooth_term(l1.clone(), beta)?), x)?;
        let s = split(&problem)?;
        Ok(s.solve(SolverKind::Panoc, &config)?.x[0].clone())
    })
    .unwrap();

    assert!(history.len() > 2 && history.len() < 60);
    for (t, step) in history.iter().enumerate() {
        assert_eq!(step.beta, 0.5f64.powi(t as i32));
        let expected = 0.3 * step.beta / (1.0 + step.beta);
        assert!((common::real(&step.x)[0] - expected).abs() < 1e-8);
    }
    let last = history.last().unwrap();
    let before = &history[history.len() - 2];
    assert!(last.x.sub(&before.x).unwrap().norm2() < 1e-6);
    assert!(common::real(&last.x)[0].abs() < 1e-5);
}

#[test]
fn continuation_rejects_nonpositive_start() {
    let out = smoothing_continuation(0.0, 1e-6, 5, v(&[0.0]), |_, x| Ok(x.clone()));
    assert!(out.is_err());
}

#[test]
fn regularized_linear_function_has_a_quadratic_conjugate() {
    // f = <c, .>, f_beta = f + beta/2 |.|^2, f_beta*(y) = |y - c|^2 / (2 beta)
    let c = v(&[1.0, -0.5, 2.0]);
    let beta = 0.25;
    let f: Arc<dyn ProxFn> = Arc::new(affine_addition(zero_fn(), c.clone()));
    let g: Arc<dyn ProxFn> = Arc::new(l1_norm(1.0).unwrap());
    let dual = regularize_then_dualize(f, g, identity_op(&Layout::real(&[3])), beta).unwrap();
    let mut r = common::rng(20);
    for _ in 0..5 {
        let y = common::rand_vec(&mut r, 3);
        let shifted = y.sub(&c).unwrap();
        let expected = shifted.norm2().powi(2) / (2.0 * beta);
        assert!((dual.conjugate().value(&y).unwrap() - expected).abs() < 1e-12);
        common::assert_close(
            &dual.conjugate().gradient(&y).unwrap().coords(),
            &shifted.scaled(1.0 / beta).coords(),
            1e-12,
        );
    }
}

#[test]
fn regularization_weight_must_be_positive() {
    let id = identity_op(&Layout::real(&[1]));
    for beta in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        let out = regularize_then_dualize(
            Arc::new(l1_norm(1.0).unwrap()),
            Arc::new(l1_norm(1.0).unwrap()),
            id.clone(),
            beta,
        );
        assert!(matches!(out, Err(Error::InvalidParameter(_))), "{beta}");
    }
}

#[test]
fn regularized_dual_approaches_the_unregularized_solution() {
    // min |x| + 2 |x - 3| + beta/2 x^2 has x_beta = min(3, 1 / beta)
    let id = identity_op(&Layout::real(&[1]));
    let mut errors = Vec::new();
    for beta in [1.0, 0.5, 0.4, 0.2, 0.01] {
        let f: Arc<dyn ProxFn> = Arc::new(l1_norm(1.0).unwrap());
        let g: Arc<dyn ProxFn> = Arc::new(translate(l1_norm(2.0).unwrap(), v(&[-3.0])));
        let dual = regularize_then_dualize(f, g, id.clone(), beta).unwrap();
        let s = split(dual.problem()).unwrap();
        let sol = s.solve(SolverKind::Panoc, &tight()).unwrap();
        let x = common::real(&dual.recover(&sol.x[0]).unwrap())[0];
        assert!((x - (1.0 / beta).min(3.0)).abs() < 1e-6, "beta {beta}: {x}");
        errors.push((x - 3.0).abs());
    }
    assert!(errors.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    assert!(*errors.last().unwrap() < 1e-6);
}
