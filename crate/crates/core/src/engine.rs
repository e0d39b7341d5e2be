//! The multi-worker iteration loop.
//!
//! Every worker advances its own iterate by one power step per iteration;
//! at the steps named by the schedule the iterates are averaged (weighted by
//! shard size, in worker-index order) and the average is broadcast back.
//! Every worker re-orthonormalizes after every step, synchronized or not.
//!
//! The loop is sequential and fully seeded: identical inputs produce
//! bit-identical traces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Partition;
use crate::diagnostics::{
    noise_decomposition, reference_r, DiagnosticsError, NoiseContext, NoiseRecord, NoiseSettings,
};
use crate::linalg::{
    gram_multiply, qr_orthonormalize, sin_theta_k, LinalgError, Mat, SubspaceIterate, SymmetricPsd,
    UpperTriangular,
};
use crate::schedules::SyncSchedule;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("configuration: {0}")]
    BadConfig(String),
    #[error("worker {worker} produced a rank-deficient iterate at step {step}: {source}")]
    RankDeficient {
        worker: usize,
        step: usize,
        source: LinalgError,
    },
    #[error("noise diagnostics failed at step {step}: {source}")]
    Diagnostics {
        step: usize,
        source: DiagnosticsError,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Ground-truth eigenpairs of the global Gram matrix: the target subspace
/// plus the full descending spectrum.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    u_k: SubspaceIterate,
    sigmas: Vec<f64>,
}

impl GroundTruth {
    /// Compute from the global Gram matrix via the Jacobi reference solver.
    pub fn compute(m: &SymmetricPsd, k: usize, tol: f64) -> Result<Self, EngineError> {
        let (u_k, sigmas) = crate::linalg::reference_topk(m, k, tol)?;
        Ok(GroundTruth { u_k, sigmas })
    }

    /// Wrap precomputed eigenpairs (e.g. loaded from a cache).
    pub fn from_parts(u_k: SubspaceIterate, sigmas: Vec<f64>) -> Result<Self, EngineError> {
        if sigmas.len() != u_k.dim() {
            return Err(EngineError::BadConfig(format!(
                "{} eigenvalues for dimension {}",
                sigmas.len(),
                u_k.dim()
            )));
        }
        if sigmas.windows(2).any(|w| w[1] > w[0]) {
            return Err(EngineError::BadConfig(
                "eigenvalues must be non-increasing".into(),
            ));
        }
        Ok(GroundTruth { u_k, sigmas })
    }

    pub fn u_k(&self) -> &SubspaceIterate {
        &self.u_k
    }

    /// Full spectrum, descending.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn target_rank(&self) -> usize {
        self.u_k.rank()
    }
}

/// Configuration of one simulated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Rank k of the target eigenspace.
    pub target_rank: usize,
    /// Number of iterate columns r (k <= r <= d).
    pub iter_rank: usize,
    pub schedule: SyncSchedule,
    /// Seed for the shared Gaussian initialization.
    pub seed: u64,
    /// Record the trace at every step, not only at synchronizations
    /// (off-schedule rows measure worker 0's local iterate).
    pub record_every_step: bool,
    /// When set, compute the per-step noise decomposition.
    pub noise: Option<NoiseSettings>,
    /// Apply shards on the fly as `(1/s_i) A_i^T (A_i Z)` instead of the
    /// precomputed Gram matrix. Algebraically identical; rounding differs.
    pub on_the_fly_gram: bool,
}

impl RunConfig {
    /// Plain run: no per-step records, no diagnostics, precomputed Grams.
    pub fn new(target_rank: usize, iter_rank: usize, schedule: SyncSchedule, seed: u64) -> Self {
        RunConfig {
            target_rank,
            iter_rank,
            schedule,
            seed,
            record_every_step: false,
            noise: None,
            on_the_fly_gram: false,
        }
    }
}

/// One worker: its index into the partition, its current orthonormal
/// iterate, and the triangular factor from its latest orthonormalization.
#[derive(Debug, Clone)]
pub struct WorkerState {
    pub index: usize,
    pub z: SubspaceIterate,
    pub last_r: UpperTriangular,
}

/// One trace row.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    /// Iteration index (1-based).
    pub t: usize,
    /// Communication rounds completed so far.
    pub comms: u64,
    /// Cumulative message words: each sync moves d*r words per worker.
    pub words_sent: u64,
    /// Projection distance of worker 0's iterate from the target subspace.
    pub dist: f64,
    pub noise: Option<NoiseRecord>,
}

/// Full record of a run. The schedule always contains the horizon, so the
/// records are never empty and the last one reflects the synchronized final
/// iterate.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    pub final_z: SubspaceIterate,
}

impl ConvergenceTrace {
    /// Cumulative communication count at the first record with
    /// `dist <= eps`, or `None` if the run never got there.
    pub fn comm_rounds_to_reach(&self, eps: f64) -> Option<u64> {
        self.records.iter().find(|r| r.dist <= eps).map(|r| r.comms)
    }

    pub fn final_dist(&self) -> f64 {
        self.records.last().map(|r| r.dist).unwrap_or(f64::NAN)
    }

    pub fn total_comms(&self) -> u64 {
        self.records.last().map(|r| r.comms).unwrap_or(0)
    }
}

/// Everything an observer may inspect after one iteration. Borrows are only
/// valid during the callback.
pub struct StepView<'a> {
    pub t: usize,
    pub is_sync: bool,
    /// Worker iterates entering this step.
    pub prev: &'a [SubspaceIterate],
    /// Worker states after the step (fresh Z and R factors).
    pub workers: &'a [WorkerState],
    /// Shard weights, aligned with `workers`.
    pub weights: &'a [f64],
    /// Reference triangular factor (present when diagnostics are on).
    pub reference_r: Option<&'a UpperTriangular>,
    pub noise: Option<&'a NoiseRecord>,
}

/// Shared random orthonormal initializer: a seeded Gaussian d-by-r draw,
/// orthonormalized. A rank-deficient draw (probability zero, but cheap to
/// guard) retries once with `seed + 1`.
pub fn init_subspace(d: usize, r: usize, seed: u64) -> Result<SubspaceIterate, EngineError> {
    if r == 0 || r > d {
        return Err(EngineError::BadConfig(format!(
            "iterate shape {d}x{r} is invalid"
        )));
    }
    let mut last_err = None;
    for attempt in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let g = Mat::from_fn(d, r, |_, _| StandardNormal.sample(&mut rng));
        match qr_orthonormalize(&g) {
            Ok((q, _)) => return Ok(q),
            Err(e @ LinalgError::RankDeficient { .. }) => last_err = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(EngineError::Linalg(last_err.expect("loop ran")))
}

/// Run the iteration and collect the convergence trace.
pub fn run(
    p: &Partition,
    cfg: &RunConfig,
    truth: &GroundTruth,
) -> Result<ConvergenceTrace, EngineError> {
    run_with_observer(p, cfg, truth, |_| {})
}

/// [`run`] with a per-step observer callback (used by the deeper test
/// harnesses; the callback sees every step, recorded or not).
pub fn run_with_observer(
    p: &Partition,
    cfg: &RunConfig,
    truth: &GroundTruth,
    mut observer: impl FnMut(StepView<'_>),
) -> Result<ConvergenceTrace, EngineError> {
    let d = p.dim();
    let m = p.num_shards();
    let k = cfg.target_rank;
    let r = cfg.iter_rank;
    if k == 0 || k > r {
        return Err(EngineError::BadConfig(format!(
            "target rank {k} must lie in 1..=r (r = {r})"
        )));
    }
    if r > d {
        return Err(EngineError::BadConfig(format!(
            "iterate rank {r} exceeds dimension {d}"
        )));
    }
    if truth.u_k.dim() != d {
        return Err(EngineError::BadConfig(format!(
            "ground truth lives in R^{}, data in R^{}",
            truth.u_k.dim(),
            d
        )));
    }
    if truth.target_rank() != k {
        return Err(EngineError::BadConfig(format!(
            "ground truth has rank {}, config asks for {k}",
            truth.target_rank()
        )));
    }
    let noise_ctx = match &cfg.noise {
        Some(settings) => Some(
            NoiseContext::new(truth.sigmas(), k, r, *settings)
                .map_err(|source| EngineError::Diagnostics { step: 0, source })?,
        ),
        None => None,
    };

    let horizon = cfg.schedule.horizon();
    let z0 = init_subspace(d, r, cfg.seed)?;
    let mut workers: Vec<WorkerState> = (0..m)
        .map(|index| WorkerState {
            index,
            z: z0.clone(),
            last_r: UpperTriangular::identity(r),
        })
        .collect();
    // Step 0 counts as synchronized: all workers share Z_0.
    let mut z_at_sync = z0;
    let mut last_sync_t = 0usize;
    let mut comms = 0u64;
    let mut words_sent = 0u64;
    let mut records = Vec::new();

    for t in 1..=horizon {
        let is_sync = cfg.schedule.contains(t);
        let prev: Vec<SubspaceIterate> = workers.iter().map(|w| w.z.clone()).collect();

        let mut ys: Vec<Mat> = Vec::with_capacity(m);
        for (i, w) in workers.iter().enumerate() {
            let y = if cfg.on_the_fly_gram {
                let shard = p.shards()[i].mat();
                let az = shard.matmul(w.z.mat());
                shard.transpose_matmul(&az).scale(1.0 / shard.rows() as f64)
            } else {
                gram_multiply(&p.local_grams()[i], &w.z)?
            };
            ys.push(y);
        }

        if is_sync {
            let mut agg = Mat::zeros(d, r);
            for (weight, y) in p.weights().iter().zip(&ys) {
                agg.add_scaled(*weight, y);
            }
            for y in ys.iter_mut() {
                *y = agg.clone();
            }
            comms += 1;
            words_sent += (d * r * m) as u64;
        }

        for (i, w) in workers.iter_mut().enumerate() {
            let (z, rfac) = qr_orthonormalize(&ys[i]).map_err(|source| match source {
                LinalgError::RankDeficient { .. } => EngineError::RankDeficient {
                    worker: i,
                    step: t,
                    source,
                },
                other => EngineError::Linalg(other),
            })?;
            w.z = z;
            w.last_r = rfac;
        }

        let mut ref_r = None;
        let mut noise_rec = None;
        if let Some(ctx) = &noise_ctx {
            // At a sync step every worker factors the same aggregate, so the
            // common factor *is* the reference; otherwise rebuild it from
            // the exact chain restarted at the last synchronization.
            let rr = if is_sync {
                workers[0].last_r.clone()
            } else {
                reference_r(p, &z_at_sync, t - last_sync_t)
                    .map_err(|source| EngineError::Diagnostics { step: t, source })?
            };
            let rec = noise_decomposition(p, &prev, &workers, &rr, t, ctx)
                .map_err(|source| EngineError::Diagnostics { step: t, source })?;
            ref_r = Some(rr);
            noise_rec = Some(rec);
        }

        if is_sync {
            z_at_sync = workers[0].z.clone();
            last_sync_t = t;
        }

        if is_sync || cfg.record_every_step {
            let dist = sin_theta_k(&truth.u_k, &workers[0].z)?;
            records.push(TraceRecord {
                t,
                comms,
                words_sent,
                dist,
                noise: noise_rec.clone(),
            });
        }

        observer(StepView {
            t,
            is_sync,
            prev: &prev,
            workers: &workers,
            weights: p.weights(),
            reference_r: ref_r.as_ref(),
            noise: noise_rec.as_ref(),
        });
    }

    Ok(ConvergenceTrace {
        records,
        final_z: workers[0].z.clone(),
    })
}
