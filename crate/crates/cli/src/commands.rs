use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use rsp_core::clustering::cluster_rows;
use rsp_core::metrics::SUPPORT_REL_THRESHOLD;
use rsp_core::{
    accuracy, compress, generate, make_sensing, pca_rowspace, projector_snr, score_of_snr, sim_rowspace, solve,
    support_metrics, DenseMatrix, Regime, RowSpaceBasis, RspParams, RspSolution, SensingMatrix, SynConfig,
};

use crate::args::{
    ClusterArgs, CompressArgs, CompressedInput, EvaluateArgs, GlobalArgs, Method, SolveArgs, SolverArgs, SynthArgs,
};
use crate::error::{CliError, Result};
use crate::formats::{create_dir, read_labels, read_matrix, write_json, write_labels, write_matrix, Format};

pub const SYNTH_MANIFEST: &str = "manifest.json";
pub const COMPRESS_MANIFEST: &str = "compress.json";
pub const SOLVE_REPORT: &str = "report.json";
pub const CLUSTER_REPORT: &str = "cluster.json";
pub const EVALUATION: &str = "evaluation.json";
pub const OBJECTIVE_CSV: &str = "objective.csv";
pub const TRUTH_LABELS: &str = "labels.csv";
pub const ASSIGNMENT: &str = "assignment.csv";

/// Milliseconds since `start`, or 0 when timing is disabled.
struct Clock {
    enabled: bool,
}

impl Clock {
    fn ms(&self, start: Instant) -> f64 {
        if self.enabled {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }
}

fn clock(g: &GlobalArgs) -> Clock {
    Clock { enabled: !g.no_timing }
}

#[derive(Debug, Serialize)]
struct MatrixFiles {
    clean: String,
    corruption: String,
    observed: String,
    true_row_space: String,
    labels: String,
}

#[derive(Debug, Serialize)]
struct SynthManifest {
    config: SynConfig,
    n: usize,
    true_rank: usize,
    corruption_count: usize,
    format: Format,
    files: MatrixFiles,
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn synth(g: &GlobalArgs, a: &SynthArgs) -> Result<()> {
    let config = SynConfig {
        m: a.m,
        n_per_class: a.per_class,
        k: a.k,
        subspace_dim: a.dim,
        corruption_size: a.corruption,
        seed: g.seed,
    };
    let inst = generate(&config)?;
    create_dir(&g.out)?;
    let paths = [
        ("clean", &inst.clean),
        ("corruption", &inst.corruption),
        ("observed", &inst.observed),
    ]
    .map(|(stem, m)| (g.format.path(&g.out, stem), m));
    for (path, m) in &paths {
        write_matrix(path, m, g.format)?;
    }
    let v0 = inst.true_row_space()?;
    let v0_path = g.format.path(&g.out, "true_row_space");
    write_matrix(&v0_path, v0.matrix(), g.format)?;
    write_labels(&g.out.join(TRUTH_LABELS), &inst.labels)?;
    let manifest = SynthManifest {
        n: config.n(),
        true_rank: inst.true_rank,
        corruption_count: inst.corruption_count,
        config,
        format: g.format,
        files: MatrixFiles {
            clean: file_name(&paths[0].0),
            corruption: file_name(&paths[1].0),
            observed: file_name(&paths[2].0),
            true_row_space: file_name(&v0_path),
            labels: TRUTH_LABELS.to_string(),
        },
    };
    write_json(&g.out.join(SYNTH_MANIFEST), &manifest)
}

#[derive(Debug, Serialize)]
struct CompressManifest {
    input: String,
    p: usize,
    m: usize,
    n: usize,
    sensing_seed: u64,
    sensing: String,
    compressed: String,
}

pub fn compress_cmd(g: &GlobalArgs, a: &CompressArgs) -> Result<()> {
    let x = read_matrix(&a.input)?;
    let sensing = make_sensing(a.p, x.rows(), g.seed)?;
    let m_mat = compress(&sensing, &x)?;
    create_dir(&g.out)?;
    let r_path = g.format.path(&g.out, "sensing");
    let m_path = g.format.path(&g.out, "compressed");
    write_matrix(&r_path, sensing.matrix(), g.format)?;
    write_matrix(&m_path, &m_mat, g.format)?;
    write_json(
        &g.out.join(COMPRESS_MANIFEST),
        &CompressManifest {
            input: a.input.display().to_string(),
            p: a.p,
            m: x.rows(),
            n: x.cols(),
            sensing_seed: g.seed,
            sensing: file_name(&r_path),
            compressed: file_name(&m_path),
        },
    )
}

/// Loads `(M, R)` from files, or compresses `--observed` with a sensing
/// matrix drawn from the global seed.
fn load_compressed(g: &GlobalArgs, input: &CompressedInput) -> Result<(DenseMatrix, SensingMatrix)> {
    match (&input.compressed, &input.sensing, &input.observed, input.p) {
        (Some(m_path), Some(r_path), None, None) => {
            let m_mat = read_matrix(m_path)?;
            let sensing = SensingMatrix::from_matrix(read_matrix(r_path)?, g.seed, Regime::Unrestricted)?;
            Ok((m_mat, sensing))
        }
        (None, None, Some(x_path), Some(p)) => {
            let x = read_matrix(x_path)?;
            let sensing = make_sensing(p, x.rows(), g.seed)?;
            Ok((compress(&sensing, &x)?, sensing))
        }
        _ => Err(CliError::Usage(
            "give either --compressed and --sensing, or --observed and --p".into(),
        )),
    }
}

fn solver_params(s: &SolverArgs) -> Result<RspParams> {
    let r = s.r.ok_or_else(|| CliError::Usage("--r is required".into()))?;
    let params = RspParams::new(r, s.lambda).with_max_iters(s.max_iters).with_tol(s.tol);
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Serialize)]
struct SolveReport {
    p: usize,
    m: usize,
    n: usize,
    params: RspParams,
    degenerate: bool,
    iterations: usize,
    converged: bool,
    rho: f64,
    final_objective: f64,
    sparse_nonzeros: usize,
    wall_ms: f64,
}

fn write_solution(g: &GlobalArgs, sol: &RspSolution) -> Result<()> {
    write_matrix(&g.format.path(&g.out, "row_space"), sol.row_space.matrix(), g.format)?;
    write_matrix(&g.format.path(&g.out, "sparse"), &sol.sparse, g.format)?;
    let mut trace = String::from("iteration,objective\n");
    for (i, v) in sol.objective_trace.iter().enumerate() {
        trace.push_str(&format!("{},{v:?}\n", i + 1));
    }
    let path = g.out.join(OBJECTIVE_CSV);
    std::fs::write(&path, trace).map_err(|e| CliError::io(&path, e))
}

pub fn solve_cmd(g: &GlobalArgs, a: &SolveArgs) -> Result<()> {
    let params = solver_params(&a.solver)?;
    let (m_mat, sensing) = load_compressed(g, &a.input)?;
    let clock = clock(g);
    let start = Instant::now();
    let sol = solve(&m_mat, &sensing, &params)?;
    let wall_ms = clock.ms(start);
    create_dir(&g.out)?;
    write_solution(g, &sol)?;
    let report = SolveReport {
        p: m_mat.rows(),
        m: sensing.ambient_dim(),
        n: m_mat.cols(),
        params,
        degenerate: params.r >= m_mat.rows(),
        iterations: sol.iterations,
        converged: sol.converged,
        rho: sol.rho,
        final_objective: *sol.objective_trace.last().expect("at least one iteration"),
        sparse_nonzeros: sol.sparse.count_nonzero(),
        wall_ms,
    };
    write_json(&g.out.join(SOLVE_REPORT), &report)
}

#[derive(Debug, Serialize)]
struct StageTimes {
    row_space_ms: f64,
    kmeans_ms: f64,
}

#[derive(Debug, Serialize)]
struct ClusterReport {
    method: Method,
    k: usize,
    n: usize,
    r: usize,
    normalized: bool,
    embedding: String,
    inertia: f64,
    restarts_used: usize,
    solver_iterations: Option<usize>,
    solver_converged: Option<bool>,
    timings: StageTimes,
}

pub fn cluster_cmd(g: &GlobalArgs, a: &ClusterArgs) -> Result<()> {
    let clock = clock(g);
    let start = Instant::now();
    let mut solution = None;
    let basis = if let Some(path) = &a.row_space {
        RowSpaceBasis::new(read_matrix(path)?)?
    } else {
        let (m_mat, sensing) = load_compressed(g, &a.input)?;
        let m_mat = if a.normalize { m_mat.normalize_columns() } else { m_mat };
        match a.method {
            Method::Rsp => {
                let sol = solve(&m_mat, &sensing, &solver_params(&a.solver)?)?;
                let basis = sol.row_space.clone();
                solution = Some(sol);
                basis
            }
            Method::Sim | Method::Pca => {
                let r = a.solver.r.ok_or_else(|| CliError::Usage("--r is required".into()))?;
                if a.method == Method::Sim {
                    sim_rowspace(&m_mat, r)?
                } else {
                    pca_rowspace(&m_mat, r)?
                }
            }
        }
    };
    let row_space_ms = clock.ms(start);

    let start = Instant::now();
    let fit = cluster_rows(&basis, a.k, g.seed, a.embedding.into())?;
    let kmeans_ms = clock.ms(start);

    create_dir(&g.out)?;
    write_labels(&g.out.join(ASSIGNMENT), &fit.labels)?;
    match &solution {
        Some(sol) => write_solution(g, sol)?,
        None if a.row_space.is_none() => {
            write_matrix(&g.format.path(&g.out, "row_space"), basis.matrix(), g.format)?
        }
        None => {}
    }
    let report = ClusterReport {
        method: a.method,
        k: a.k,
        n: basis.len(),
        r: basis.dim(),
        normalized: a.normalize,
        embedding: format!("{:?}", a.embedding).to_lowercase(),
        inertia: fit.inertia,
        restarts_used: fit.restarts_used,
        solver_iterations: solution.as_ref().map(|s| s.iterations),
        solver_converged: solution.as_ref().map(|s| s.converged),
        timings: StageTimes { row_space_ms, kmeans_ms },
    };
    write_json(&g.out.join(CLUSTER_REPORT), &report)
}

#[derive(Debug, Default, Serialize)]
pub struct Evaluation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corruption_size: Option<f64>,
    /// Stage timings copied from the solution directory's reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<serde_json::Value>,
}

/// `dir/stem.bin` or `dir/stem.csv`, whichever exists.
fn find_matrix(dir: &Path, stem: &str) -> Option<PathBuf> {
    [Format::Bin, Format::Csv]
        .into_iter()
        .map(|f| f.path(dir, stem))
        .find(|p| p.exists())
}

fn find_file(dir: &Path, name: &str) -> Option<PathBuf> {
    Some(dir.join(name)).filter(|p| p.exists())
}

fn stage_timings(dir: &Path) -> Result<Option<serde_json::Value>> {
    let mut out = serde_json::Map::new();
    for (name, key, field) in [(SOLVE_REPORT, "solve_ms", "wall_ms"), (CLUSTER_REPORT, "cluster", "timings")] {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::format(&path, e.to_string()))?;
        if let Some(v) = value.get(field) {
            out.insert(key.to_string(), v.clone());
        }
    }
    Ok((!out.is_empty()).then_some(serde_json::Value::Object(out)))
}

pub fn evaluate(a: &EvaluateArgs) -> Result<Evaluation> {
    let inst = a.instance.as_deref();
    let sol = a.solution.as_deref();
    let pick = |explicit: &Option<PathBuf>, dir: Option<&Path>, find: &dyn Fn(&Path) -> Option<PathBuf>| {
        explicit.clone().or_else(|| dir.and_then(find))
    };
    let truth_labels = pick(&a.truth_labels, inst, &|d| find_file(d, TRUTH_LABELS));
    let labels = pick(&a.labels, sol, &|d| find_file(d, ASSIGNMENT));
    let true_v = pick(&a.true_row_space, inst, &|d| find_matrix(d, "true_row_space"));
    let v = pick(&a.row_space, sol, &|d| find_matrix(d, "row_space"));
    let true_s = pick(&a.true_sparse, inst, &|d| find_matrix(d, "corruption"));
    let s = pick(&a.sparse, sol, &|d| find_matrix(d, "sparse"));

    let mut eval = Evaluation::default();
    let mut any = false;
    if let (Some(t), Some(p)) = (&truth_labels, &labels) {
        eval.accuracy = Some(accuracy(&read_labels(p)?, &read_labels(t)?)?);
        any = true;
    }
    if let (Some(tv), Some(v)) = (&true_v, &v) {
        let tv = RowSpaceBasis::new(read_matrix(tv)?)?;
        let v = RowSpaceBasis::new(read_matrix(v)?)?;
        let snr = projector_snr(&tv, &v)?;
        eval.snr_db = Some(snr);
        eval.score = Some(score_of_snr(snr));
        any = true;
    }
    if let (Some(ts), Some(s)) = (&true_s, &s) {
        let (ts, s) = (read_matrix(ts)?, read_matrix(s)?);
        let threshold = SUPPORT_REL_THRESHOLD * s.max_abs();
        let (precision, recall) = support_metrics(&ts, &s, threshold)?;
        let support = s.as_slice().iter().filter(|x| x.abs() > threshold).count();
        eval.support_precision = Some(precision);
        eval.support_recall = Some(recall);
        eval.corruption_size = Some(support as f64 / s.cols() as f64);
        any = true;
    }
    if !any {
        return Err(CliError::Usage(
            "nothing to evaluate: give a truth and an estimate for labels, row space or support".into(),
        ));
    }
    if let Some(dir) = sol {
        eval.timings = stage_timings(dir)?;
    }
    Ok(eval)
}

pub fn evaluate_cmd(g: &GlobalArgs, a: &EvaluateArgs) -> Result<()> {
    let eval = evaluate(a)?;
    create_dir(&g.out)?;
    write_json(&g.out.join(EVALUATION), &eval)?;
    print!("{}", crate::formats::to_json(&eval));
    Ok(())
}
