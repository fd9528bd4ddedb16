//! Generates a benchmark instance, solves it stage by stage and records one
//! trace row per iteration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use serde::{Deserialize, Serialize};

use proxkit::model::{split, SplitProblem};
use proxkit::solvers::{SolverConfig, SolverKind, Status};
use proxkit::{SignalTuple, Vector};

use crate::problems::{
    gen_declip, gen_dnn, gen_lasso, gen_line_spectra, gen_robust_pca, gen_sparse_deconv,
    gen_tv_denoise, Declip, DeclipParams, DeconvParams, DnnClassifier, DnnParams, Lasso,
    LineSpectra, LineSpectraParams, RobustPca, RpcaParams, SparseDeconv, TvDenoise, TvParams,
};

/// Tolerance of the high-accuracy reference solves.
pub const REFERENCE_TOL: f64 = 1e-12;
pub const REFERENCE_MAX_ITERS: usize = 1_000_000;

/// Environment variable capping the number of concurrent solves in compare mode.
pub const THREADS_ENV: &str = "PROXKIT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Solver(#[from] proxkit::Error),
    #[error("fpg needs a convex problem but {0} is nonconvex; use pg or panoc")]
    NonconvexFpg(ProblemName),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write trace {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("bad JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    Lasso,
    SparseDeconv,
    LineSpectra,
    TvDenoise,
    RobustPca,
    Declip,
    Dnn,
}

impl ProblemName {
    pub const ALL: [ProblemName; 7] = [
        ProblemName::Lasso,
        ProblemName::SparseDeconv,
        ProblemName::LineSpectra,
        ProblemName::TvDenoise,
        ProblemName::RobustPca,
        ProblemName::Declip,
        ProblemName::Dnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemName::Lasso => "lasso",
            ProblemName::SparseDeconv => "sparse-deconv",
            ProblemName::LineSpectra => "line-spectra",
            ProblemName::TvDenoise => "tv-denoise",
            ProblemName::RobustPca => "robust-pca",
            ProblemName::Declip => "declip",
            ProblemName::Dnn => "dnn",
        }
    }

    /// False when any stage has a nonconvex term.
    pub fn is_convex(self) -> bool {
        matches!(
            self,
            ProblemName::Lasso | ProblemName::SparseDeconv | ProblemName::TvDenoise
        )
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    Pg,
    Fpg,
    Panoc,
}

impl SolverName {
    pub const ALL: [SolverName; 3] = [SolverName::Pg, SolverName::Fpg, SolverName::Panoc];

    pub fn kind(self) -> SolverKind {
        match self {
            SolverName::Pg => SolverKind::Pg,
            SolverName::Fpg => SolverKind::Fpg,
            SolverName::Panoc => SolverKind::Panoc,
        }
    }
}

impl fmt::Display for SolverName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind().name())
    }
}

/// Size flags; unset fields take the generator defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, clap::Args)]
pub struct Sizes {
    /// LASSO columns, line-spectra samples, image rows, video frame rows,
    /// de-clipping frame length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Image columns or video frame columns.
    #[arg(long)]
    pub m: Option<usize>,
    /// Video frames.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Line-spectra oversampling factor.
    #[arg(long)]
    pub s: Option<usize>,
    /// Planted sinusoids, which is also the sparsity budget.
    #[arg(long = "N")]
    pub sinusoids: Option<usize>,
    /// De-clipping level; by default a quarter of the samples clip.
    #[arg(long)]
    pub clip_level: Option<f64>,
    /// Deconvolution sampling frequency.
    #[arg(long)]
    pub fs: Option<usize>,
    /// Classifier training points.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub problem: ProblemName,
    pub sizes: Sizes,
    pub seed: u64,
    pub solver: SolverName,
    pub tol: f64,
    pub max_iters: usize,
    /// Compute (or load the cached) reference solution for the normalized error.
    pub reference: bool,
    pub out: Option<PathBuf>,
}

impl BenchmarkSpec {
    pub fn new(problem: ProblemName, solver: SolverName) -> Self {
        BenchmarkSpec {
            problem,
            sizes: Sizes::default(),
            seed: 0,
            solver,
            tol: 1e-6,
            max_iters: 10_000,
            reference: false,
            out: None,
        }
    }

    pub fn config(&self) -> SolverConfig {
        SolverConfig::default()
            .with_tol(self.tol)
            .with_max_iters(self.max_iters)
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: usize,
    pub iteration: usize,
    pub objective: f64,
    pub fbe: Option<f64>,
    pub residual: f64,
    /// `log10(|x^k - x*| / |x*|)`, present when a reference is available.
    pub normalized_error: Option<f64>,
    /// Seconds since the start of the run.
    pub elapsed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
}

impl From<Status> for RunStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Converged => RunStatus::Converged,
            Status::MaxIters => RunStatus::MaxIters,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub label: String,
    pub iterations: usize,
    pub status: RunStatus,
    pub residual: f64,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub stages: Vec<StageSummary>,
    pub rows: Vec<TraceRow>,
    /// Final iterate of the last stage.
    pub x: SignalTuple,
    /// Problem-specific figures of merit, e.g. the recovered primal objective.
    pub metrics: BTreeMap<String, f64>,
}

impl RunOutcome {
    pub fn iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    pub fn final_residual(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.residual)
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Converged => 0,
            RunStatus::MaxIters => 2,
        }
    }
}

/// A generated benchmark, immutable once built.
#[derive(Clone, Debug)]
pub enum Instance {
    Lasso(Lasso),
    SparseDeconv(SparseDeconv),
    LineSpectra(LineSpectra),
    TvDenoise(TvDenoise),
    RobustPca(RobustPca),
    Declip(Declip),
    Dnn(DnnClassifier),
}

fn or_default<T: Copy>(value: Option<T>, default: T) -> T {
    value.unwrap_or(default)
}

pub fn generate(problem: ProblemName, sizes: &Sizes, seed: u64) -> Result<Instance> {
    Ok(match problem {
        ProblemName::Lasso => Instance::Lasso(gen_lasso(or_default(sizes.n, 1000), seed)?),
        ProblemName::SparseDeconv => {
            let d = DeconvParams::default();
            let params = DeconvParams {
                fs: or_default(sizes.fs, d.fs),
                ..d
            };
            Instance::SparseDeconv(gen_sparse_deconv(&params, seed)?)
        }
        ProblemName::LineSpectra => {
            let d = LineSpectraParams::default();
            let params = LineSpectraParams {
                n: or_default(sizes.n, d.n),
                s: or_default(sizes.s, d.s),
                sinusoids: or_default(sizes.sinusoids, d.sinusoids),
                ..d
            };
            Instance::LineSpectra(gen_line_spectra(&params, seed)?)
        }
        ProblemName::TvDenoise => {
            let d = TvParams::default();
            let params = TvParams {
                rows: or_default(sizes.n, d.rows),
                cols: or_default(sizes.m, d.cols),
                ..d
            };
            Instance::TvDenoise(gen_tv_denoise(&params, seed)?)
        }
        ProblemName::RobustPca => {
            let d = RpcaParams::default();
            let params = RpcaParams {
                n: or_default(sizes.n, d.n),
                m: or_default(sizes.m, d.m),
                frames: or_default(sizes.frames, d.frames),
                ..d
            };
            Instance::RobustPca(gen_robust_pca(&params, seed)?)
        }
        ProblemName::Declip => {
            let d = DeclipParams::default();
            let n = or_default(sizes.n, d.n);
            let params = DeclipParams {
                n,
                components: d.components.min(n / 4).max(1),
                max_active: d.max_active.max(n / 4),
                clip_level: sizes.clip_level,
                ..d
            };
            Instance::Declip(gen_declip(&params, seed)?)
        }
        ProblemName::Dnn => {
            let d = DnnParams::default();
            let params = DnnParams {
                points: or_default(sizes.points, d.points),
                ..d
            };
            Instance::Dnn(gen_dnn(&params, seed)?)
        }
    })
}

/// Runs one stage after another, collecting trace rows and, when asked,
/// reference solutions started from the same point as each stage.
struct Session<'a> {
    kind: SolverKind,
    config: SolverConfig,
    convex: bool,
    references: Option<&'a mut Vec<Vec<f64>>>,
    rows: Vec<TraceRow>,
    stages: Vec<StageSummary>,
    elapsed: f64,
}

impl Session<'_> {
    fn stage(
        &mut self,
        label: impl Into<String>,
        problem: &SplitProblem,
        x0: &SignalTuple,
    ) -> Result<proxkit::solvers::Solution<SignalTuple>> {
        let index = self.stages.len();
        let reference = match self.references.as_deref_mut() {
            Some(refs) => {
                refs.truncate(
                    if refs.get(index).is_some_and(|r| r.len() != x0.real_dim()) {
                        index
                    } else {
                        refs.len()
                    },
                );
                if refs.len() <= index {
                    let kind = if self.convex {
                        SolverKind::Fpg
                    } else {
                        SolverKind::Panoc
                    };
                    let config = self
                        .config
                        .clone()
                        .with_tol(REFERENCE_TOL)
                        .with_max_iters(REFERENCE_MAX_ITERS);
                    refs.push(problem.solve_from(kind, x0, &config)?.x.coords());
                }
                Some(x0.with_coords(&refs[index]))
            }
            None => None,
        };
        let offset = self.elapsed;
        let rows = &mut self.rows;
        let solution = problem.solve_observed(self.kind, x0, &self.config, &mut |rec, x| {
            let normalized_error = reference.as_ref().map(|r| normalized_error(x, r));
            rows.push(TraceRow {
                stage: index,
                iteration: rec.k,
                objective: rec.objective,
                fbe: rec.fbe,
                residual: rec.residual,
                normalized_error,
                elapsed: offset + rec.elapsed,
            });
        })?;
        let last = solution.trace.last().expect("at least one record");
        self.elapsed = offset + last.elapsed;
        self.stages.push(StageSummary {
            label: label.into(),
            iterations: solution.iterations,
            status: solution.status.into(),
            residual: last.residual,
            objective: last.objective,
        });
        Ok(solution)
    }
}

/// `log10(|x - r| / |r|)`, or of the absolute error when `r = 0`.
pub fn normalized_error(x: &SignalTuple, reference: &SignalTuple) -> f64 {
    let err = x.sub(reference).map_or(f64::NAN, |d| d.norm2());
    let scale = reference.norm2();
    if scale > 0.0 {
        (err / scale).log10()
    } else {
        err.log10()
    }
}

/// Solves `instance`; `references` holds the coordinates of per-stage
/// references and is filled in for any stage that lacks one.
pub fn solve_instance(
    instance: &Instance,
    problem: ProblemName,
    solver: SolverName,
    config: &SolverConfig,
    references: Option<&mut Vec<Vec<f64>>>,
) -> Result<RunOutcome> {
    if solver == SolverName::Fpg && !problem.is_convex() {
        return Err(BenchError::NonconvexFpg(problem));
    }
    let mut session = Session {
        kind: solver.kind(),
        config: config.clone(),
        convex: problem.is_convex(),
        references,
        rows: Vec::new(),
        stages: Vec::new(),
        elapsed: 0.0,
    };
    let mut metrics = BTreeMap::new();
    let (x, mut status) = match instance {
        Instance::Lasso(Lasso { problem, .. })
        | Instance::SparseDeconv(SparseDeconv { problem, .. })
        | Instance::RobustPca(RobustPca { problem, .. }) => {
            let sp = split(problem)?;
            let sol = session.stage("main", &sp, sp.initial())?;
            (sol.x, sol.status)
        }
        Instance::Dnn(dnn) => {
            let sp = split(&dnn.problem)?;
            let sol = session.stage("train", &sp, sp.initial())?;
            metrics.insert("loss".into(), dnn.loss(&sol.x)?);
            metrics.insert("accuracy".into(), dnn.accuracy(&sol.x)?);
            (sol.x, sol.status)
        }
        Instance::TvDenoise(tv) => {
            let sp = split(tv.dual.problem())?;
            let sol = session.stage("dual", &sp, sp.initial())?;
            let image = tv.dual.recover(&sol.x[0])?;
            metrics.insert("dual_objective".into(), sp.objective(&sol.x)?);
            metrics.insert("primal_objective".into(), tv.primal_objective(&image)?);
            metrics.insert("total_variation".into(), tv.total_variation(&image)?);
            (sol.x, sol.status)
        }
        Instance::LineSpectra(ls) => {
            let relaxed = split(&ls.relaxed)?;
            let a = session.stage("relaxed", &relaxed, relaxed.initial())?;
            let constrained = split(&ls.constrained_from(&a.x[0])?)?;
            let b = session.stage("constrained", &constrained, constrained.initial())?;
            metrics.insert("fidelity_relaxed".into(), ls.fidelity(&a.x[0])?);
            metrics.insert("fidelity_constrained".into(), ls.fidelity(&b.x[0])?);
            (b.x, b.status)
        }
        Instance::Declip(d) => {
            let mut start: Option<SignalTuple> = None;
            let mut last = None;
            let mut broke = false;
            for &active in &d.schedule {
                let warm = start.as_ref().map(|s| (&s[0], &s[1]));
                let (p, _, _) = d.problem(active, warm)?;
                let sp = split(&p)?;
                let sol = session.stage(format!("N={active}"), &sp, sp.initial())?;
                let misfit = d.misfit(&sol.x[0], &sol.x[1])?;
                metrics.insert("active".into(), active as f64);
                metrics.insert("misfit".into(), misfit);
                metrics.insert("infeasibility".into(), d.infeasibility(&sol.x[1])?);
                metrics.insert("clipped_error".into(), d.clipped_error(&sol.x[1])?);
                start = Some(sol.x.clone());
                last = Some(sol);
                if misfit <= d.eps {
                    broke = true;
                    break;
                }
            }
            let sol = last.ok_or_else(|| BenchError::Usage("empty sparsity schedule".into()))?;
            let status = if broke { sol.status } else { Status::MaxIters };
            (sol.x, status)
        }
    };
    if session
        .stages
        .iter()
        .any(|s| s.status == RunStatus::MaxIters)
    {
        status = Status::MaxIters;
    }
    Ok(RunOutcome {
        status: status.into(),
        stages: session.stages,
        rows: session.rows,
        x,
        metrics,
    })
}

#[derive(Serialize, Deserialize)]
struct ReferenceCache {
    key: String,
    stages: Vec<Vec<f64>>,
}

fn reference_key(spec: &BenchmarkSpec) -> String {
    // nonconvex multi-stage references depend on the solver's own warm starts
    let solver = if spec.problem.is_convex() {
        String::new()
    } else {
        spec.solver.to_string()
    };
    format!("{}|{:?}|{}|{}", spec.problem, spec.sizes, spec.seed, solver)
}

/// `<out>.reference.json` beside the trace.
pub fn reference_path(out: &Path) -> PathBuf {
    out.with_extension("reference.json")
}

fn load_references(path: &Path, key: &str) -> Option<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).ok()?;
    let cache: ReferenceCache = serde_json::from_str(&text).ok()?;
    (cache.key == key).then_some(cache.stages)
}

/// Generates, solves and, with an output path, writes the trace and sidecar.
pub fn run(spec: &BenchmarkSpec) -> Result<RunOutcome> {
    if !(spec.tol > 0.0) {
        return Err(BenchError::Usage(format!(
            "tolerance must be positive, got {}",
            spec.tol
        )));
    }
    if spec.solver == SolverName::Fpg && !spec.problem.is_convex() {
        return Err(BenchError::NonconvexFpg(spec.problem));
    }
    let instance = generate(spec.problem, &spec.sizes, spec.seed)?;
    run_instance(spec, &instance)
}

fn run_instance(spec: &BenchmarkSpec, instance: &Instance) -> Result<RunOutcome> {
    let cache = spec.out.as_deref().map(reference_path);
    run_with_cache(spec, instance, cache.as_deref(), None)
}

/// `shared` holds references computed by the caller; otherwise they are
/// loaded from `cache` or computed here and written back to it.
fn run_with_cache(
    spec: &BenchmarkSpec,
    instance: &Instance,
    cache: Option<&Path>,
    shared: Option<Vec<Vec<f64>>>,
) -> Result<RunOutcome> {
    let config = spec.config();
    let outcome = if spec.reference {
        let key = reference_key(spec);
        let mut refs = shared
            .or_else(|| cache.and_then(|p| load_references(p, &key)))
            .unwrap_or_default();
        let known = refs.len();
        let outcome = solve_instance(
            instance,
            spec.problem,
            spec.solver,
            &config,
            Some(&mut refs),
        )?;
        if let Some(path) = cache.filter(|_| refs.len() > known) {
            write_json(path, &ReferenceCache { key, stages: refs })?;
        }
        outcome
    } else {
        solve_instance(instance, spec.problem, spec.solver, &config, None)?
    };
    if let Some(out) = &spec.out {
        write_outputs(out, spec, &outcome)?;
    }
    Ok(outcome)
}

/// High-accuracy solution of a convex, single-stage instance.
fn convex_reference(instance: &Instance) -> Result<Vec<f64>> {
    let problem = match instance {
        Instance::Lasso(Lasso { problem, .. })
        | Instance::SparseDeconv(SparseDeconv { problem, .. }) => problem,
        Instance::TvDenoise(tv) => tv.dual.problem(),
        _ => {
            return Err(BenchError::Usage(
                "not a convex single-stage problem".into(),
            ))
        }
    };
    let sp = split(problem)?;
    let config = SolverConfig::default()
        .with_tol(REFERENCE_TOL)
        .with_max_iters(REFERENCE_MAX_ITERS);
    Ok(sp.solve(SolverKind::Fpg, &config)?.x.coords())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    spec: &'a BenchmarkSpec,
    status: RunStatus,
    iterations: usize,
    final_residual: f64,
    stages: &'a [StageSummary],
    metrics: &'a BTreeMap<String, f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| BenchError::Json {
        path: path.to_owned(),
        source,
    })?;
    fs::write(path, text).map_err(|source| BenchError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| BenchError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)
}

/// Trace CSV at `out`, status JSON at `out` with a `.json` extension.
pub fn write_outputs(out: &Path, spec: &BenchmarkSpec, outcome: &RunOutcome) -> Result<()> {
    write_trace(out, &outcome.rows)?;
    let sidecar = Sidecar {
        spec,
        status: outcome.status,
        iterations: outcome.iterations(),
        final_residual: outcome.final_residual(),
        stages: &outcome.stages,
        metrics: &outcome.metrics,
    };
    write_json(&out.with_extension("json"), &sidecar)
}

/// `trace.csv` becomes `trace-panoc.csv`.
pub fn solver_path(out: &Path, solver: SolverName) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let ext = out
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}-{solver}.{ext}"))
}

fn thread_limit() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Solves one shared instance with every applicable solver, at most
/// `PROXKIT_THREADS` at a time. FPG is skipped on nonconvex problems.
pub fn run_compare(spec: &BenchmarkSpec) -> Result<Vec<(SolverName, Result<RunOutcome>)>> {
    let instance = generate(spec.problem, &spec.sizes, spec.seed)?;
    let solvers: Vec<SolverName> = SolverName::ALL
        .into_iter()
        .filter(|s| *s != SolverName::Fpg || spec.problem.is_convex())
        .collect();
    let specs: Vec<BenchmarkSpec> = solvers
        .iter()
        .map(|&solver| BenchmarkSpec {
            solver,
            out: spec.out.as_deref().map(|o| solver_path(o, solver)),
            ..spec.clone()
        })
        .collect();
    // convex references do not depend on the solver, so compute one up front
    let shared = if spec.reference && spec.problem.is_convex() {
        let key = reference_key(spec);
        let cache = spec.out.as_deref().map(reference_path);
        match cache.as_deref().and_then(|p| load_references(p, &key)) {
            Some(refs) => Some(refs),
            None => {
                let refs = vec![convex_reference(&instance)?];
                if let Some(path) = &cache {
                    write_json(
                        path,
                        &ReferenceCache {
                            key,
                            stages: refs.clone(),
                        },
                    )?;
                }
                Some(refs)
            }
        }
    } else {
        None
    };
    let mut results = Vec::with_capacity(specs.len());
    for batch in specs.chunks(thread_limit()) {
        let outcomes: Vec<Result<RunOutcome>> = thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|s| {
                    let shared = shared.clone();
                    let instance = &instance;
                    scope.spawn(move || match shared {
                        Some(refs) => run_with_cache(s, instance, None, Some(refs)),
                        None => run_instance(s, instance),
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver thread panicked"))
                .collect()
        });
        results.extend(batch.iter().map(|s| s.solver).zip(outcomes));
    }
    Ok(results)
}
