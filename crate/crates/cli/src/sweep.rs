//! Sweep execution: load or synthesize the data once, compute (or fetch
//! from cache) the reference eigenpairs, then run every (m, schedule, seed)
//! cell sequentially and deterministically, writing one trace CSV per cell
//! and a single summary JSON at the end.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use localpower_core::data::{
    load_libsvm, measured_eta, synthetic_spectrum, DataMatrix, Partition, SpectrumSpec,
};
use localpower_core::diagnostics::{error_floor_scale, NoiseSettings};
use localpower_core::engine::{run, ConvergenceTrace, GroundTruth, RunConfig};
use localpower_core::linalg::{condition_from_eigenvalues, Mat, SubspaceIterate};
use localpower_core::schedules::SyncSchedule;

use crate::config::{ExperimentConfig, Source};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("input: {0}")]
    Input(String),
    #[error("io: {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}")]
    Runtime(String),
}

/// The exact header every trace file starts with.
pub const TRACE_HEADER: &str = "t,comms,words_sent,dist,H_norm,W_norm,G_norm,eps0,noise_ok";

/// One row of the emitted summary array. Numeric results are `None` (JSON
/// `null`) when the cell failed; `error` then carries the reason.
#[derive(Debug, Serialize, Deserialize)]
pub struct CellSummary {
    pub dataset: String,
    pub m: usize,
    pub schedule: String,
    pub seed: u64,
    pub k: usize,
    pub r: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub gap: usize,
    pub eta: Option<f64>,
    pub final_dist: Option<f64>,
    pub comms_total: Option<u64>,
    pub comms_to_eps: BTreeMap<String, Option<u64>>,
    pub floor_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace_file: Option<String>,
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SweepError> {
    let tmp = path.with_extension("tmp");
    let io = |e| SweepError::Io(path.to_path_buf(), e);
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Load the configured data source. Fails *before* any output is created so
/// a bad path leaves no partial files behind.
pub fn load_source(cfg: &ExperimentConfig) -> Result<DataMatrix, SweepError> {
    match &cfg.source {
        Source::Libsvm { path, expected_dim } => load_libsvm(path, *expected_dim)
            .map_err(|e| SweepError::Input(format!("{}: {e}", path.display()))),
        Source::Synthetic { n, sigmas, seed } => {
            let spec = SpectrumSpec::new(sigmas.clone(), *n, *seed)
                .map_err(|e| SweepError::Input(e.to_string()))?;
            synthetic_spectrum(&spec).map_err(|e| SweepError::Input(e.to_string()))
        }
    }
}

// ---------------------------------------------------------------------------
// Ground-truth cache.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CachedTruth {
    d: usize,
    k: usize,
    sigmas: Vec<f64>,
    /// Row-major d x k basis of the reference eigenspace.
    basis: Vec<f64>,
}

/// Content hash of (matrix bytes, k): the cache key.
fn truth_key(a: &DataMatrix, k: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(a.rows().to_le_bytes());
    hasher.update(a.dim().to_le_bytes());
    hasher.update(k.to_le_bytes());
    for &x in a.mat().as_slice() {
        hasher.update(x.to_le_bytes());
    }
    hex::encode(&hasher.finalize()[..16])
}

/// Reference eigenpairs for the global Gram matrix, cached under
/// `<output_dir>/cache/` keyed by a content hash of the matrix and `k`.
pub fn ground_truth_cached(
    a: &DataMatrix,
    k: usize,
    out_dir: &Path,
) -> Result<GroundTruth, SweepError> {
    let cache_dir = out_dir.join("cache");
    fs::create_dir_all(&cache_dir).map_err(|e| SweepError::Io(cache_dir.clone(), e))?;
    let path = cache_dir.join(format!("truth-{}.json", truth_key(a, k)));

    if let Ok(bytes) = fs::read(&path) {
        if let Ok(cached) = serde_json::from_slice::<CachedTruth>(&bytes) {
            if cached.d == a.dim() && cached.k == k && cached.basis.len() == cached.d * cached.k {
                let mat = Mat::from_row_major(cached.d, cached.k, cached.basis);
                if let Ok(u_k) = SubspaceIterate::new(mat) {
                    if let Ok(truth) = GroundTruth::from_parts(u_k, cached.sigmas) {
                        return Ok(truth);
                    }
                }
            }
        }
        // A stale or corrupt entry is not fatal; recompute and overwrite.
    }

    let truth = GroundTruth::compute(&a.gram(), k, 1e-13)
        .map_err(|e| SweepError::Runtime(format!("reference eigensolve failed: {e}")))?;
    let cached = CachedTruth {
        d: a.dim(),
        k,
        sigmas: truth.sigmas().to_vec(),
        basis: truth.u_k().mat().as_slice().to_vec(),
    };
    let bytes = serde_json::to_vec(&cached).expect("serializable");
    write_atomic(&path, &bytes)?;
    Ok(truth)
}

// ---------------------------------------------------------------------------
// Trace and summary emission.
// ---------------------------------------------------------------------------

fn render_trace_csv(trace: &ConvergenceTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for rec in &trace.records {
        out.push_str(&format!(
            "{},{},{},{}",
            rec.t, rec.comms, rec.words_sent, rec.dist
        ));
        match &rec.noise {
            Some(n) => out.push_str(&format!(
                ",{},{},{},{},{}",
                n.h_norm, n.w_norm, n.g_norm, n.epsilon0, n.satisfied
            )),
            None => out.push_str(",,,,,"),
        }
        out.push('\n');
    }
    out
}

/// File-system-safe rendering of a schedule descriptor.
fn sanitize(descriptor: &str) -> String {
    descriptor
        .chars()
        .map(|c| match c {
            ':' => '_',
            ',' => '-',
            c if c.is_ascii_alphanumeric() || c == '_' || c == '-' => c,
            _ => '-',
        })
        .collect()
}

/// Shortest round-trip text for an accuracy target, used as a JSON map key.
fn eps_key(eps: f64) -> String {
    format!("{eps}")
}

/// Run every cell of the sweep. Returns the summary rows and whether every
/// cell completed.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(Vec<CellSummary>, bool), SweepError> {
    let a = load_source(cfg)?;
    if cfg.r > a.dim() {
        return Err(SweepError::Input(format!(
            "r = {} exceeds the data dimension {}",
            cfg.r,
            a.dim()
        )));
    }
    // Build every schedule up front: a bad descriptor/horizon combination is
    // a configuration error, not a mid-sweep surprise.
    let mut schedules: Vec<(String, SyncSchedule)> = Vec::new();
    for spec in &cfg.schedules {
        let sched = spec
            .build(cfg.horizon)
            .map_err(|e| SweepError::Input(format!("schedule `{spec}`: {e}")))?;
        schedules.push((spec.to_string(), sched));
    }

    fs::create_dir_all(&cfg.output_dir).map_err(|e| SweepError::Io(cfg.output_dir.clone(), e))?;
    let truth = ground_truth_cached(&a, cfg.k, &cfg.output_dir)?;
    let kappa = condition_from_eigenvalues(truth.sigmas())
        .map_err(|e| SweepError::Runtime(format!("degenerate spectrum: {e}")))?;
    let dataset = cfg.source.label();

    let mut rows = Vec::new();
    let mut all_ok = true;
    for &m in &cfg.m_values {
        for &seed in &cfg.seeds {
            let partition = match Partition::uniform(&a, m, seed) {
                Ok(p) => p,
                Err(e) => {
                    all_ok = false;
                    for (name, sched) in &schedules {
                        rows.push(failed_cell(cfg, &dataset, m, name, sched, seed, &e));
                    }
                    continue;
                }
            };
            let eta = measured_eta(&partition)
                .map_err(|e| SweepError::Runtime(format!("eta measurement failed: {e}")))?;
            for (name, sched) in &schedules {
                let run_cfg = RunConfig {
                    noise: cfg.diagnostics.then_some(NoiseSettings {
                        tau: cfg.noise_tau,
                        eps: cfg.noise_eps,
                    }),
                    ..RunConfig::new(cfg.k, cfg.r, sched.clone(), seed)
                };
                match run(&partition, &run_cfg, &truth) {
                    Ok(trace) => {
                        let file = format!("trace-m{m}-{}-seed{seed}.csv", sanitize(name));
                        let path = cfg.output_dir.join(&file);
                        write_atomic(&path, render_trace_csv(&trace).as_bytes())?;
                        let comms_to_eps = cfg
                            .eps_targets
                            .iter()
                            .map(|&eps| (eps_key(eps), trace.comm_rounds_to_reach(eps)))
                            .collect();
                        eprintln!(
                            "cell m={m} schedule={name} seed={seed}: dist {:.3e} after {} comms",
                            trace.final_dist(),
                            trace.total_comms()
                        );
                        rows.push(CellSummary {
                            dataset: dataset.clone(),
                            m,
                            schedule: name.clone(),
                            seed,
                            k: cfg.k,
                            r: cfg.r,
                            horizon: cfg.horizon,
                            gap: sched.gap(),
                            eta: Some(eta),
                            final_dist: Some(trace.final_dist()),
                            comms_total: Some(trace.total_comms()),
                            comms_to_eps,
                            floor_scale: Some(error_floor_scale(sched.gap(), kappa, eta)),
                            error: None,
                            trace_file: Some(file),
                        });
                    }
                    Err(e) => {
                        all_ok = false;
                        eprintln!("cell m={m} schedule={name} seed={seed}: FAILED: {e}");
                        rows.push(failed_cell(cfg, &dataset, m, name, sched, seed, &e));
                    }
                }
            }
        }
    }

    let summary_path = cfg.output_dir.join("summary.json");
    let bytes = serde_json::to_vec_pretty(&rows).expect("serializable");
    write_atomic(&summary_path, &bytes)?;
    Ok((rows, all_ok))
}

fn failed_cell(
    cfg: &ExperimentConfig,
    dataset: &str,
    m: usize,
    schedule: &str,
    sched: &SyncSchedule,
    seed: u64,
    error: &dyn std::fmt::Display,
) -> CellSummary {
    CellSummary {
        dataset: dataset.to_string(),
        m,
        schedule: schedule.to_string(),
        seed,
        k: cfg.k,
        r: cfg.r,
        horizon: cfg.horizon,
        gap: sched.gap(),
        eta: None,
        final_dist: None,
        comms_total: None,
        comms_to_eps: BTreeMap::new(),
        floor_scale: None,
        error: Some(error.to_string()),
        trace_file: None,
    }
}
