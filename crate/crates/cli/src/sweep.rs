//! Monte Carlo sweep over (subspace dimension, corruption size) with a
//! resumable checkpoint.
//!
//! Output directory layout:
//!
//! * `manifest.json`: configuration, progress and status, replaced atomically
//!   after every completed trial;
//! * `checkpoint.jsonl`: one [`TrialOutcome`] per line, appended as trials
//!   finish;
//! * `trials.csv`: one row per (cell, trial, method), written at the end;
//! * `cells.csv`, `cells.json`: per (cell, method) means, written at the end.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rsp_core::clustering::cluster_rows;
use rsp_core::{
    accuracy, compress, derive_seed, generate, make_sensing, pca_rowspace, projector_snr, score_of_snr,
    sim_rowspace, solve, RowEmbedding, RspParams, SynConfig,
};

use crate::args::{Method, SweepArgs};
use crate::error::{CliError, Result};
use crate::formats::{create_dir, to_json, write_atomic};

pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT: &str = "checkpoint.jsonl";
pub const TRIALS_CSV: &str = "trials.csv";
pub const CELLS_CSV: &str = "cells.csv";
pub const CELLS_JSON: &str = "cells.json";
const MANIFEST_VERSION: u32 = 1;

/// Seed streams derived from a trial seed.
const STREAM_INSTANCE: u64 = 0;
const STREAM_SENSING: u64 = 1;
const STREAM_KMEANS: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dims: Vec<usize>,
    pub corruptions: Vec<f64>,
    pub p: usize,
    pub m: usize,
    pub k: usize,
    pub per_class: usize,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub lambda: f64,
    /// `None` means r = r₀ in every cell.
    pub r: Option<usize>,
    pub max_iters: usize,
    pub tol: f64,
    pub base_seed: u64,
}

/// One grid point; cells are numbered dimension-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub dim: usize,
    pub rank: usize,
    pub corruption: f64,
}

pub fn default_dims() -> Vec<usize> {
    (1..=20).collect()
}

pub fn default_corruptions() -> Vec<f64> {
    (1..=20).map(|i| (4 * i) as f64 / 10.0).collect()
}

impl SweepConfig {
    pub fn from_args(args: &SweepArgs, base_seed: u64) -> Result<Self> {
        let mut methods = args.methods.clone();
        methods.sort();
        methods.dedup();
        let cfg = Self {
            dims: if args.dims.is_empty() { default_dims() } else { args.dims.clone() },
            corruptions: if args.corruptions.is_empty() {
                default_corruptions()
            } else {
                args.corruptions.clone()
            },
            p: args.p,
            m: args.m,
            k: args.k,
            per_class: args.per_class,
            trials: args.trials,
            methods,
            lambda: args.lambda,
            r: args.r,
            max_iters: args.max_iters,
            tol: args.tol,
            base_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |msg: String| Err(CliError::Usage(msg));
        if self.dims.is_empty() || self.corruptions.is_empty() || self.methods.is_empty() {
            return usage("sweep grids and method list must be non-empty".into());
        }
        if self.trials == 0 {
            return usage("--trials must be at least 1".into());
        }
        if self.p == 0 || self.p >= self.m {
            return usage(format!("need 0 < p < m, got p = {} and m = {}", self.p, self.m));
        }
        for cell in self.cells() {
            self.instance_config(&cell, 0).validate()?;
            let r = self.rank_for(&cell);
            if r == 0 || r > self.k * self.per_class {
                return usage(format!("rank {r} invalid for n = {}", self.k * self.per_class));
            }
            let baseline = self.methods.iter().any(|&m| m != Method::Rsp);
            if baseline && r > self.p {
                return usage(format!("baselines need r <= p, got r = {r} with p = {}", self.p));
            }
        }
        RspParams::new(1, self.lambda)
            .with_max_iters(self.max_iters)
            .with_tol(self.tol)
            .validate()?;
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.dims.len() * self.corruptions.len());
        for &dim in &self.dims {
            for &corruption in &self.corruptions {
                out.push(Cell {
                    index: out.len(),
                    dim,
                    rank: self.k * dim,
                    corruption,
                });
            }
        }
        out
    }

    pub fn total_trials(&self) -> usize {
        self.dims.len() * self.corruptions.len() * self.trials
    }

    pub fn rank_for(&self, cell: &Cell) -> usize {
        self.r.unwrap_or(cell.rank)
    }

    fn instance_config(&self, cell: &Cell, seed: u64) -> SynConfig {
        SynConfig {
            m: self.m,
            n_per_class: self.per_class,
            k: self.k,
            subspace_dim: cell.dim,
            corruption_size: cell.corruption,
            seed,
        }
    }
}

pub fn trial_seed(base: u64, cell: usize, trial: usize) -> u64 {
    derive_seed(base, &[cell as u64, trial as u64])
}

/// Seeds used inside one trial: (instance, sensing, k-means).
pub fn trial_streams(seed: u64) -> (u64, u64, u64) {
    (
        derive_seed(seed, &[STREAM_INSTANCE]),
        derive_seed(seed, &[STREAM_SENSING]),
        derive_seed(seed, &[STREAM_KMEANS]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub dim: usize,
    pub rank: usize,
    pub corruption: f64,
    pub p: usize,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub r: usize,
    pub snr_db: f64,
    pub score: f64,
    pub accuracy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
}

/// All methods of one trial; the unit of checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub records: Vec<TrialRecord>,
}

pub fn run_trial(cfg: &SweepConfig, cell: &Cell, trial: usize, timing: bool) -> Result<TrialOutcome> {
    let seed = trial_seed(cfg.base_seed, cell.index, trial);
    let (instance_seed, sensing_seed, kmeans_seed) = trial_streams(seed);
    let inst = generate(&cfg.instance_config(cell, instance_seed))?;
    let sensing = make_sensing(cfg.p, cfg.m, sensing_seed)?;
    let m_mat = compress(&sensing, &inst.observed)?;
    let v0 = inst.true_row_space()?;
    let r = cfg.rank_for(cell);

    let mut records = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let (basis, iterations, converged) = match method {
            Method::Rsp => {
                let params = RspParams::new(r, cfg.lambda)
                    .with_max_iters(cfg.max_iters)
                    .with_tol(cfg.tol);
                let sol = solve(&m_mat, &sensing, &params)?;
                (sol.row_space, sol.iterations, sol.converged)
            }
            Method::Sim => (sim_rowspace(&m_mat, r)?, 1, true),
            Method::Pca => (pca_rowspace(&m_mat, r)?, 1, true),
        };
        let fit = cluster_rows(&basis, cfg.k, kmeans_seed, RowEmbedding::default())?;
        let wall_ms = if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let snr_db = projector_snr(&v0, &basis)?;
        records.push(TrialRecord {
            cell: cell.index,
            dim: cell.dim,
            rank: cell.rank,
            corruption: cell.corruption,
            p: cfg.p,
            trial,
            seed,
            method,
            r,
            snr_db,
            score: score_of_snr(snr_db),
            accuracy: accuracy(&fit.labels, &inst.labels)?,
            iterations,
            converged,
            wall_ms,
        });
    }
    Ok(TrialOutcome {
        cell: cell.index,
        trial,
        seed,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    /// How per-trial seeds are obtained from `config.base_seed`.
    pub seed_scheme: String,
    pub config: SweepConfig,
    pub total_trials: usize,
    pub completed_trials: usize,
    pub status: Status,
}

impl Manifest {
    fn new(config: SweepConfig) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed_scheme: "trial = derive_seed(base_seed, [cell, trial]); instance, sensing, kmeans = \
                          derive_seed(trial, [0]), [1], [2]"
                .to_string(),
            total_trials: config.total_trials(),
            config,
            completed_trials: 0,
            status: Status::Running,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub dim: usize,
    pub rank: usize,
    pub corruption: f64,
    pub p: usize,
    pub method: Method,
    pub trials: usize,
    pub mean_score: f64,
    pub mean_snr_db: f64,
    pub mean_accuracy: f64,
    pub mean_iterations: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Serialize)]
struct CellsFile<'a> {
    config: &'a SweepConfig,
    cells: &'a [CellSummary],
}

/// Per (cell, method) means over trials, in (cell, method) order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(usize, Method), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.cell, r.method)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|group| {
            let first = group[0];
            let count = group.len() as f64;
            let mean = |f: fn(&TrialRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / count;
            CellSummary {
                cell: first.cell,
                dim: first.dim,
                rank: first.rank,
                corruption: first.corruption,
                p: first.p,
                method: first.method,
                trials: group.len(),
                mean_score: mean(|r| r.score),
                mean_snr_db: mean(|r| r.snr_db),
                mean_accuracy: mean(|r| r.accuracy),
                mean_iterations: mean(|r| r.iterations as f64),
                mean_wall_ms: mean(|r| r.wall_ms),
            }
        })
        .collect()
}

fn checkpoint_error(path: &Path, msg: impl Into<String>) -> CliError {
    CliError::Checkpoint {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| checkpoint_error(&path, e.to_string()))?;
    if manifest.manifest_version != MANIFEST_VERSION {
        return Err(checkpoint_error(
            &path,
            format!("unsupported manifest version {}", manifest.manifest_version),
        ));
    }
    manifest
        .config
        .validate()
        .map_err(|e| checkpoint_error(&path, e.to_string()))?;
    Ok(manifest)
}

/// Reads completed trials from the checkpoint. A final line without its
/// newline is an interrupted append and is dropped (the file is truncated
/// back to the last complete line); any other unreadable or inconsistent
/// line makes the checkpoint corrupt.
pub fn read_checkpoint(dir: &Path, manifest: &Manifest) -> Result<Vec<TrialOutcome>> {
    let path = dir.join(CHECKPOINT);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && manifest.completed_trials == 0 => Vec::new(),
        Err(e) => return Err(CliError::io(&path, e)),
    };
    let cfg = &manifest.config;
    let cells = cfg.cells();
    let mut seen = vec![false; cfg.total_trials()];
    let mut outcomes = Vec::new();
    let mut offset = 0;
    while offset < bytes.len() {
        let Some(len) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            // Interrupted final append.
            let file = OpenOptions::new().write(true).open(&path).map_err(|e| CliError::io(&path, e))?;
            file.set_len(offset as u64).map_err(|e| CliError::io(&path, e))?;
            break;
        };
        let line = &bytes[offset..offset + len];
        let line_no = outcomes.len() + 1;
        offset += len + 1;
        let outcome: TrialOutcome = serde_json::from_slice(line)
            .map_err(|e| checkpoint_error(&path, format!("line {line_no}: {e}")))?;
        let cell = cells
            .get(outcome.cell)
            .ok_or_else(|| checkpoint_error(&path, format!("line {line_no}: unknown cell {}", outcome.cell)))?;
        if outcome.trial >= cfg.trials || outcome.seed != trial_seed(cfg.base_seed, cell.index, outcome.trial) {
            return Err(checkpoint_error(&path, format!("line {line_no}: trial or seed mismatch")));
        }
        let methods: Vec<Method> = outcome.records.iter().map(|r| r.method).collect();
        if methods != cfg.methods {
            return Err(checkpoint_error(&path, format!("line {line_no}: unexpected methods")));
        }
        let slot = &mut seen[cell.index * cfg.trials + outcome.trial];
        if *slot {
            return Err(checkpoint_error(&path, format!("line {line_no}: duplicate trial")));
        }
        *slot = true;
        outcomes.push(outcome);
    }
    if outcomes.len() < manifest.completed_trials {
        return Err(checkpoint_error(
            &path,
            format!(
                "{} trials recorded but the manifest reports {}",
                outcomes.len(),
                manifest.completed_trials
            ),
        ));
    }
    Ok(outcomes)
}

struct Progress {
    checkpoint: File,
    checkpoint_path: PathBuf,
    manifest: Manifest,
    manifest_path: PathBuf,
}

impl Progress {
    fn record(&mut self, outcome: &TrialOutcome) -> Result<()> {
        let mut line = serde_json::to_vec(outcome).expect("plain data serializes");
        line.push(b'\n');
        self.checkpoint
            .write_all(&line)
            .map_err(|e| CliError::io(&self.checkpoint_path, e))?;
        self.manifest.completed_trials += 1;
        write_atomic(&self.manifest_path, to_json(&self.manifest).as_bytes())
    }
}

/// What a sweep invocation did.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub resumed_trials: usize,
    pub new_trials: usize,
    pub complete: bool,
}

pub fn run_sweep(
    out: &Path,
    args: &SweepArgs,
    base_seed: u64,
    threads: Option<usize>,
    timing: bool,
) -> Result<SweepReport> {
    let manifest_path = out.join(MANIFEST);
    let checkpoint_path = out.join(CHECKPOINT);
    let (manifest, done) = if args.resume {
        let manifest = read_manifest(out)?;
        let done = read_checkpoint(out, &manifest)?;
        (manifest, done)
    } else {
        if manifest_path.exists() {
            return Err(CliError::Usage(format!(
                "{} already holds a sweep; pass --resume or choose another --out",
                out.display()
            )));
        }
        let config = SweepConfig::from_args(args, base_seed)?;
        create_dir(out)?;
        File::create(&checkpoint_path).map_err(|e| CliError::io(&checkpoint_path, e))?;
        (Manifest::new(config), Vec::new())
    };
    let cfg = manifest.config.clone();

    let finished: Vec<bool> = {
        let mut f = vec![false; cfg.total_trials()];
        for o in &done {
            f[o.cell * cfg.trials + o.trial] = true;
        }
        f
    };
    let cells = cfg.cells();
    let mut pending: Vec<(Cell, usize)> = cells
        .iter()
        .flat_map(|c| (0..cfg.trials).map(move |t| (*c, t)))
        .filter(|(c, t)| !finished[c.index * cfg.trials + t])
        .collect();
    if let Some(limit) = args.limit {
        pending.truncate(limit);
    }

    let checkpoint = OpenOptions::new()
        .append(true)
        .create(true)
        .open(&checkpoint_path)
        .map_err(|e| CliError::io(&checkpoint_path, e))?;
    let mut manifest = manifest;
    manifest.completed_trials = done.len();
    write_atomic(&manifest_path, to_json(&manifest).as_bytes())?;
    let progress = Mutex::new(Progress {
        checkpoint,
        checkpoint_path,
        manifest,
        manifest_path: manifest_path.clone(),
    });

    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            builder = builder.num_threads(t);
        }
        builder
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?
    };
    let fresh: Vec<TrialOutcome> = pool.install(|| {
        pending
            .par_iter()
            .map(|(cell, trial)| {
                let outcome = run_trial(&cfg, cell, *trial, timing)?;
                progress.lock().expect("writer lock").record(&outcome)?;
                Ok(outcome)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let new_trials = fresh.len();
    let resumed_trials = done.len();
    let mut all = done;
    all.extend(fresh);
    let mut progress = progress.into_inner().expect("writer lock");
    let complete = all.len() == cfg.total_trials();
    if complete {
        all.sort_by_key(|o| (o.cell, o.trial));
        let records: Vec<TrialRecord> = all.into_iter().flat_map(|o| o.records).collect();
        write_results(out, &cfg, &records)?;
        progress.manifest.status = Status::Complete;
        write_atomic(&manifest_path, to_json(&progress.manifest).as_bytes())?;
    }
    Ok(SweepReport {
        resumed_trials,
        new_trials,
        complete,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::format(path, e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_results(out: &Path, cfg: &SweepConfig, records: &[TrialRecord]) -> Result<()> {
    write_csv(&out.join(TRIALS_CSV), records)?;
    let cells = aggregate(records);
    write_csv(&out.join(CELLS_CSV), &cells)?;
    let path = out.join(CELLS_JSON);
    fs::write(&path, to_json(&CellsFile { config: cfg, cells: &cells })).map_err(|e| CliError::io(&path, e))
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e.to_string()))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| CliError::format(path, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_20_by_20() {
        let dims = default_dims();
        let cs = default_corruptions();
        assert_eq!(dims.len() * cs.len() * 20, 8000);
        assert_eq!(cs[0], 0.4);
        assert_eq!(cs[2], 1.2);
        assert_eq!(*cs.last().unwrap(), 8.0);
    }

    #[test]
    fn seeds_are_distinct_over_the_full_grid() {
        let mut seeds: Vec<u64> = (0..400)
            .flat_map(|c| (0..20).map(move |t| trial_seed(42, c, t)))
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 8000);
    }

    #[test]
    fn aggregate_means() {
        let rec = |trial, score, method| TrialRecord {
            cell: 0,
            dim: 1,
            rank: 2,
            corruption: 0.4,
            p: 50,
            trial,
            seed: 0,
            method,
            r: 2,
            snr_db: 10.0 * score,
            score,
            accuracy: 1.0,
            iterations: 3,
            converged: true,
            wall_ms: 0.0,
        };
        let records = vec![
            rec(0, 1.0, Method::Rsp),
            rec(0, 0.0, Method::Sim),
            rec(1, 0.5, Method::Rsp),
            rec(1, 0.2, Method::Sim),
        ];
        let cells = aggregate(&records);
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].method, Method::Rsp);
        assert_eq!(cells[0].mean_score, 0.75);
        assert_eq!(cells[1].mean_score, 0.1);
        assert_eq!(cells[0].trials, 2);
    }
}
