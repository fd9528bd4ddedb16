use std::sync::Arc;

use nalgebra::DMatrix;

use proxkit::fao::conv_op;
use proxkit::funcs::{l1_norm, sqr_dist, SmoothFn};
use proxkit::model::{check_prox_computable, split, Problem, SplitProblem};
use proxkit::solvers::{SolverConfig, SolverKind};
use proxkit::{Signal, SignalTuple, Vector};
use proxkit_bench::problems::{
    gen_declip, gen_dnn, gen_lasso, gen_line_spectra, gen_robust_pca, gen_sparse_deconv,
    gen_tv_denoise, DeclipParams, DeconvParams, DnnParams, LineSpectraParams, RpcaParams, TvParams,
};

fn tight() -> SolverConfig {
    SolverConfig::default()
        .with_tol(1e-10)
        .with_max_iters(200_000)
}

/// Central differences of `f` at `x`, relative to `max(|fd|, 1)`.
fn gradient_error<F: SmoothFn<SignalTuple> + ?Sized>(f: &F, x: &SignalTuple) -> f64 {
    let c = x.coords();
    let h = 1e-6 * (1.0 + x.norm2());
    let fd: Vec<f64> = (0..c.len())
        .map(|i| {
            let mut plus = c.clone();
            let mut minus = c.clone();
            plus[i] += h;
            minus[i] -= h;
            let fp = f.value(&x.with_coords(&plus)).unwrap();
            let fm = f.value(&x.with_coords(&minus)).unwrap();
            (fp - fm) / (2.0 * h)
        })
        .collect();
    let g = f.gradient(x).unwrap().coords();
    let err = g
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    err / scale
}

fn perturbed(x: &SignalTuple, seed: u64) -> SignalTuple {
    // deterministic off-origin point so that no term sits on a kink
    let c: Vec<f64> = x
        .coords()
        .iter()
        .enumerate()
        .map(|(i, v)| v + 0.1 * (((i as u64 * 7919 + seed) % 17) as f64 / 17.0 - 0.5))
        .collect();
    x.with_coords(&c)
}

fn dense(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(rows, cols);
    for &(i, j, v) in entries {
        a[(i, j)] += v;
    }
    a
}

#[test]
fn lasso_lambda_follows_the_formula() {
    let n = 200;
    let lasso = gen_lasso(n, 3).unwrap();
    let a = dense(n / 5, n, &lasso.entries);
    let y = nalgebra::DVector::from_column_slice(lasso.y.real_data().unwrap());
    let aty = a.transpose() * y;
    let expected = 1e-3 * aty.amax();
    assert!((lasso.lambda - expected).abs() <= 1e-15 * expected);
}

#[test]
fn lasso_matrix_has_the_stated_sparsity() {
    let n = 400;
    let lasso = gen_lasso(n, 4).unwrap();
    assert_eq!(lasso.entries.len(), n / 4);
    let mut positions: Vec<(usize, usize)> = lasso.entries.iter().map(|e| (e.0, e.1)).collect();
    positions.sort();
    positions.dedup();
    assert_eq!(positions.len(), n / 4);
    assert!(positions.iter().all(|&(i, j)| i < n / 5 && j < n));
    assert_eq!(lasso.a.codomain().shape, vec![n / 5]);
    assert_eq!(lasso.a.domain().shape, vec![n]);
    assert!(gen_lasso(19, 0).is_err());
}

#[test]
fn lasso_is_seed_deterministic() {
    let a = gen_lasso(100, 7).unwrap();
    let b = gen_lasso(100, 7).unwrap();
    assert_eq!(a.entries, b.entries);
    assert_eq!(a.y, b.y);
    assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
    let c = gen_lasso(100, 8).unwrap();
    assert_ne!(a.entries, c.entries);
}

#[test]
fn lasso_solvers_agree() {
    let lasso = gen_lasso(100, 5).unwrap();
    let s = split(&lasso.problem).unwrap();
    let solutions: Vec<Vec<f64>> = [SolverKind::Pg, SolverKind::Fpg, SolverKind::Panoc]
        .into_iter()
        .map(|kind| {
            let sol = s.solve(kind, &tight()).unwrap();
            assert!(sol.converged(), "{kind:?}");
            sol.x.coords()
        })
        .collect();
    for a in &solutions {
        for b in &solutions {
            let d = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
            assert!(d.sqrt() <= 1e-6, "{}", d.sqrt());
        }
    }
}

fn solve_norm(problem: &Problem, iters: usize) -> (Signal, f64) {
    let s = split(problem).unwrap();
    let config = SolverConfig::default().with_tol(1e-9).with_max_iters(iters);
    let x = s.solve(SolverKind::Panoc, &config).unwrap().x[0].clone();
    let norm = x.norm2();
    (x, norm)
}

#[test]
fn unregularized_deconvolution_has_a_larger_solution() {
    let base = DeconvParams {
        fs: 400,
        ..DeconvParams::default()
    };
    let regularized = gen_sparse_deconv(&base, 9).unwrap();
    let plain = gen_sparse_deconv(
        &DeconvParams {
            lambda_ratio: 0.0,
            ..base
        },
        9,
    )
    .unwrap();
    assert_eq!(plain.lambda, 0.0);
    assert_eq!(plain.y, regularized.y);
    let (_, with_l1) = solve_norm(&regularized.problem, 20_000);
    let (_, without) = solve_norm(&plain.problem, 20_000);
    assert!(without > with_l1, "{without} vs {with_l1}");
}

#[test]
fn noiseless_deconvolution_recovers_the_spikes() {
    let params = DeconvParams {
        fs: 400,
        spikes: 5,
        snr_db: None,
        lambda_ratio: 0.01,
        ..DeconvParams::default()
    };
    let d = gen_sparse_deconv(&params, 10).unwrap();
    assert_eq!(d.noise_std, 0.0);
    let (x, _) = solve_norm(&d.problem, 50_000);
    let truth = d.x_true.real_data().unwrap();
    let found = x.real_data().unwrap();
    // planted spikes have magnitude >= 1; half of that is the detection level
    for (i, (&t, &v)) in truth.iter().zip(found).enumerate() {
        assert_eq!(t != 0.0, v.abs() > 0.5, "sample {i}: truth {t}, found {v}");
    }
}

#[test]
fn zero_observation_gives_zero_deconvolution() {
    let n = 50;
    let conv = conv_op(&[1.0, -0.5, 0.25], n).unwrap();
    let mut problem = Problem::new();
    let x = problem.variable("x", Signal::zeros(&conv.domain()));
    problem
        .add_smooth(
            Arc::new(sqr_dist(Signal::zeros(&conv.codomain()))),
            vec![(x, conv)],
        )
        .unwrap();
    problem
        .add_nonsmooth_on(Arc::new(l1_norm(0.1).unwrap()), x)
        .unwrap();
    let sol = split(&problem)
        .unwrap()
        .solve(SolverKind::Panoc, &tight())
        .unwrap();
    assert_eq!(sol.x[0].norm2(), 0.0);
    assert_eq!(sol.iterations, 0);
}

#[test]
fn line_spectra_defaults() {
    let d = LineSpectraParams::default();
    assert_eq!((d.n, d.s), (256, 6));
}

#[test]
fn line_spectra_warm_start_improves_fidelity() {
    let ls = gen_line_spectra(&LineSpectraParams::default(), 11).unwrap();
    let config = SolverConfig::default()
        .with_tol(1e-8)
        .with_max_iters(20_000);
    let relaxed = split(&ls.relaxed)
        .unwrap()
        .solve(SolverKind::Panoc, &config)
        .unwrap();
    let constrained = split(&ls.constrained_from(&relaxed.x[0]).unwrap())
        .unwrap()
        .solve(SolverKind::Panoc, &config)
        .unwrap();
    let (a, b) = (&relaxed.x[0], &constrained.x[0]);
    assert!(b.count_nonzero() <= ls.frequencies.len());
    assert!(ls.fidelity(b).unwrap() <= ls.fidelity(a).unwrap());
}

#[test]
fn tv_without_noise_or_penalty_returns_the_image() {
    let params = TvParams {
        rows: 16,
        cols: 12,
        noise_std: 0.0,
        lambda: 1e-9,
    };
    let tv = gen_tv_denoise(&params, 12).unwrap();
    assert_eq!(tv.y, tv.clean);
    let s = split(tv.dual.problem()).unwrap();
    let sol = s.solve(SolverKind::Panoc, &tight()).unwrap();
    let x = tv.dual.recover(&sol.x[0]).unwrap();
    let err = x.sub(&tv.y).unwrap().norm_inf();
    assert!(err < 1e-7, "{err}");
}

#[test]
fn tv_denoising_lowers_total_variation() {
    let params = TvParams {
        rows: 24,
        cols: 20,
        ..TvParams::default()
    };
    let tv = gen_tv_denoise(&params, 13).unwrap();
    let s = split(tv.dual.problem()).unwrap();
    let sol = s.solve(SolverKind::Panoc, &tight()).unwrap();
    let x = tv.dual.recover(&sol.x[0]).unwrap();
    assert!(tv.total_variation(&x).unwrap() < tv.total_variation(&tv.y).unwrap());

    // strong duality: primal at the recovered image equals minus the dual optimum
    let primal = tv.primal_objective(&x).unwrap();
    let dual = s.objective(&sol.x).unwrap();
    assert!(
        (primal + dual).abs() <= 1e-6 * primal.abs(),
        "{primal} vs {dual}"
    );
}

fn rank(m: &Signal, tol: f64) -> usize {
    let shape = m.shape();
    let a = DMatrix::from_column_slice(shape[0], shape[1], m.real_data().unwrap());
    let sv = a.singular_values();
    let top = sv.max();
    sv.iter().filter(|s| **s > tol * top).count()
}

fn small_rpca(noise_std: f64) -> RpcaParams {
    RpcaParams {
        n: 16,
        m: 16,
        frames: 10,
        object: 4,
        noise_std,
        ..RpcaParams::default()
    }
}

#[test]
fn robust_pca_low_rank_part_has_rank_one() {
    let r = gen_robust_pca(&small_rpca(0.05), 14).unwrap();
    let s = split(&r.problem).unwrap();
    let config = SolverConfig::default().with_tol(1e-6);
    for kind in [SolverKind::Pg, SolverKind::Panoc] {
        let sol = s.solve(kind, &config).unwrap();
        assert!(rank(&sol.x[r.low_rank.index()], 1e-12) <= 1);
    }
}

#[test]
fn robust_pca_panoc_needs_fewer_iterations_than_pg() {
    let r = gen_robust_pca(&small_rpca(0.05), 15).unwrap();
    let s = split(&r.problem).unwrap();
    let config = SolverConfig::default()
        .with_tol(1e-6)
        .with_max_iters(20_000);
    let pg = s.solve(SolverKind::Pg, &config).unwrap();
    let panoc = s.solve(SolverKind::Panoc, &config).unwrap();
    assert!(pg.converged() && panoc.converged());
    assert!(panoc.iterations < pg.iterations);
}

#[test]
fn robust_pca_separates_noiseless_video() {
    let params = RpcaParams {
        lambda: 1e-5,
        ..small_rpca(0.0)
    };
    let r = gen_robust_pca(&params, 16).unwrap();
    let s = split(&r.problem).unwrap();
    let sol = s.solve(SolverKind::Panoc, &tight()).unwrap();
    let rel = |x: &Signal, t: &Signal| x.sub(t).unwrap().norm2() / t.norm2();
    let l_err = rel(&sol.x[r.low_rank.index()], &r.background);
    let s_err = rel(&sol.x[r.sparse.index()], &r.foreground);
    assert!(l_err <= 1e-4 && s_err <= 1e-4, "L {l_err}, S {s_err}");
}

fn small_declip(components: usize, clip_level: Option<f64>) -> DeclipParams {
    DeclipParams {
        n: 256,
        components,
        clip_level,
        step: 10,
        max_active: 64,
        ..DeclipParams::default()
    }
}

#[test]
fn declip_clips_the_stated_fraction() {
    let d = gen_declip(&DeclipParams::default(), 17).unwrap();
    let clipped = d.clipped_high.len() + d.clipped_low.len();
    assert!((clipped as f64 / d.n() as f64 - 0.25).abs() < 0.01);
    assert_eq!(d.eps, 1e-5 * 1024.0);
    assert_eq!(&d.schedule[..3], &[30, 60, 90]);
    assert_eq!(d.reliable.len() + clipped, d.n());
}

#[test]
fn unclipped_frame_stops_at_the_first_budget() {
    let d = gen_declip(&small_declip(5, Some(1e3)), 18).unwrap();
    assert!(d.clipped_high.is_empty() && d.clipped_low.is_empty());
    let (p, x, y) = d.problem(d.schedule[0], None).unwrap();
    let s = split(&p).unwrap();
    let sol = s.solve(SolverKind::Panoc, &tight()).unwrap();
    let (xs, ys) = (&sol.x[x.index()], &sol.x[y.index()]);
    assert!(d.misfit(xs, ys).unwrap() <= d.eps);
    assert!(s.objective(&sol.x).unwrap() < 1e-12);
}

#[test]
fn declip_continuation_stays_feasible_and_improves() {
    let d = gen_declip(&small_declip(12, None), 19).unwrap();
    let config = SolverConfig::default()
        .with_tol(1e-9)
        .with_max_iters(50_000);
    let mut start: Option<SignalTuple> = None;
    let mut errors = Vec::new();
    let mut broke = false;
    for &active in &d.schedule {
        let warm = start.as_ref().map(|s| (&s[0], &s[1]));
        let (p, x, y) = d.problem(active, warm).unwrap();
        let sol = split(&p)
            .unwrap()
            .solve(SolverKind::Panoc, &config)
            .unwrap();
        let (xs, ys) = (&sol.x[x.index()], &sol.x[y.index()]);
        assert!(xs.count_nonzero() <= active);
        assert!(d.infeasibility(ys).unwrap() <= 1e-8);
        errors.push(d.clipped_error(ys).unwrap());
        let done = d.misfit(xs, ys).unwrap() <= d.eps;
        start = Some(sol.x);
        if done {
            broke = true;
            break;
        }
    }
    assert!(broke);
    assert!(
        errors.windows(2).all(|w| w[1] <= w[0]),
        "clipped-sample errors {errors:?}"
    );
}

#[test]
fn dnn_gradient_matches_finite_differences() {
    let dnn = gen_dnn(
        &DnnParams {
            points: 50,
            ..DnnParams::default()
        },
        20,
    )
    .unwrap();
    let s = split(&dnn.problem).unwrap();
    let err = gradient_error(s.f(), &dnn.problem.initial());
    assert!(err < 1e-5, "{err}");
}

#[test]
fn dnn_with_heavy_penalty_outputs_constants() {
    let dnn = gen_dnn(
        &DnnParams {
            points: 40,
            lambda: 100.0,
        },
        21,
    )
    .unwrap();
    let s = split(&dnn.problem).unwrap();
    let sol = s.solve(SolverKind::Panoc, &tight()).unwrap();
    for w in dnn.weights {
        assert_eq!(sol.x[w.index()].norm_inf(), 0.0);
    }
    let b3 = sol.x[dnn.biases[2].index()].real_data().unwrap()[0];
    let expected = 1.0 / (1.0 + (-b3).exp());
    let out = dnn.net.eval(&sol.x).unwrap();
    for v in out.real_data().unwrap() {
        assert!((v - expected).abs() < 1e-15);
    }
}

#[test]
fn dnn_training_decreases_the_envelope() {
    let dnn = gen_dnn(&DnnParams::default(), 22).unwrap();
    let s = split(&dnn.problem).unwrap();
    let config = SolverConfig::default().with_tol(1e-6).with_max_iters(500);
    let sol = s.solve(SolverKind::Panoc, &config).unwrap();
    // a smaller stepsize changes the envelope itself, so compare within one
    let mut compared = 0;
    for w in sol
        .trace
        .records
        .windows(2)
        .filter(|w| w[0].gamma == w[1].gamma)
    {
        assert!(
            w[1].fbe < w[0].fbe,
            "k={}: {:?} -> {:?}",
            w[0].k,
            w[0].fbe,
            w[1].fbe
        );
        compared += 1;
    }
    assert!(compared > sol.trace.records.len() / 2);
    let first = dnn.loss(&dnn.problem.initial()).unwrap();
    assert!(dnn.loss(&sol.x).unwrap() < first);
}

fn reduced_instances() -> Vec<(&'static str, Problem)> {
    let mut out: Vec<(&'static str, Problem)> = vec![
        ("lasso", gen_lasso(40, 1).unwrap().problem),
        (
            "sparse-deconv",
            gen_sparse_deconv(
                &DeconvParams {
                    fs: 60,
                    taps: 8,
                    spikes: 3,
                    ..DeconvParams::default()
                },
                1,
            )
            .unwrap()
            .problem,
        ),
        (
            "tv-denoise",
            gen_tv_denoise(
                &TvParams {
                    rows: 5,
                    cols: 4,
                    ..TvParams::default()
                },
                1,
            )
            .unwrap()
            .dual
            .into_problem(),
        ),
        (
            "robust-pca",
            gen_robust_pca(
                &RpcaParams {
                    n: 4,
                    m: 4,
                    frames: 3,
                    object: 2,
                    ..RpcaParams::default()
                },
                1,
            )
            .unwrap()
            .problem,
        ),
        (
            "dnn",
            gen_dnn(
                &DnnParams {
                    points: 12,
                    ..DnnParams::default()
                },
                1,
            )
            .unwrap()
            .problem,
        ),
    ];
    let ls = gen_line_spectra(
        &LineSpectraParams {
            n: 8,
            s: 2,
            sinusoids: 1,
            ..LineSpectraParams::default()
        },
        1,
    )
    .unwrap();
    out.push(("line-spectra (a)", ls.relaxed));
    out.push(("line-spectra (b)", ls.constrained));
    let d = gen_declip(&small_declip(4, None), 1).unwrap();
    out.push(("declip", d.problem(10, None).unwrap().0));
    out
}

#[test]
fn every_benchmark_splits() {
    for (name, problem) in reduced_instances() {
        assert!(check_prox_computable(&problem).is_ok(), "{name}");
        split(&problem).unwrap();
    }
}

#[test]
fn benchmark_gradients_match_finite_differences() {
    for (k, (name, problem)) in reduced_instances().into_iter().enumerate() {
        let s: SplitProblem = split(&problem).unwrap();
        let x = perturbed(&problem.initial(), k as u64);
        let err = gradient_error(s.f(), &x);
        assert!(err < 1e-5, "{name}: {err}");
    }
}

#[test]
fn generators_are_seed_deterministic() {
    let dnn = |seed| gen_dnn(&DnnParams::default(), seed).unwrap();
    assert_eq!(dnn(3).problem.initial(), dnn(3).problem.initial());
    assert_eq!(dnn(3).data.points, dnn(3).data.points);
    let tv = |seed| gen_tv_denoise(&TvParams::default(), seed).unwrap();
    assert_eq!(tv(3).y, tv(3).y);
    let rpca = |seed| gen_robust_pca(&RpcaParams::default(), seed).unwrap();
    assert_eq!(rpca(3).y, rpca(3).y);
    let declip = |seed| gen_declip(&DeclipParams::default(), seed).unwrap();
    assert_eq!(declip(3).clipped, declip(3).clipped);
    let ls = |seed| gen_line_spectra(&LineSpectraParams::default(), seed).unwrap();
    assert_eq!(ls(3).y, ls(3).y);
    let deconv = |seed| gen_sparse_deconv(&DeconvParams::default(), seed).unwrap();
    assert_eq!(deconv(3).y, deconv(3).y);
    assert_ne!(deconv(3).y, deconv(4).y);
}
