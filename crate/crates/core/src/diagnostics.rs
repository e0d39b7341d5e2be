//! Noise diagnostics and theoretical bound calculators.
//!
//! Between synchronizations the averaged ("virtual") iterate
//! `Zbar_t = sum_i p_i Z_t^{(i)}` evolves like a noisy power iteration:
//!
//! ```text
//! Zbar_t = (M Zbar_{t-1} + G_t) R_t^{-1},   G_t = H_t + W_t
//! ```
//!
//! where `H_t = sum_i p_i (M_i - M) Z_{t-1}^{(i)}` carries the shard
//! deviation and `W_t = sum_i p_i M_i Z_{t-1}^{(i)} (R_t^{(i)})^{-1}
//! [R_t - R_t^{(i)}]` the drift between each worker's triangular factor and
//! a common reference `R_t`. The reference factor is defined by restarting a
//! QR chain from the last synchronized iterate: `P_0 = Zbar_{tau(t)}`,
//! `M P_{l-1} = P_l L_l`, and `R_t = L_{t - tau(t)}`.
//!
//! The calculators at the bottom evaluate the admissibility and iteration
//! bounds that the convergence theory attaches to these quantities.

use serde::Serialize;
use thiserror::Error;

use crate::data::Partition;
use crate::engine::WorkerState;
use crate::linalg::{
    condition_from_eigenvalues, gram_multiply, qr_orthonormalize, spectral_norm, LinalgError, Mat,
    SubspaceIterate, UpperTriangular,
};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("a worker triangular factor is singular")]
    SingularR,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tuning knobs for the per-step noise check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSettings {
    /// Initial-tangent confidence constant (the `tau` in the tangent bound).
    pub tau: f64,
    /// Target accuracy constant used inside the admissibility threshold.
    pub eps: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings { tau: 6.0, eps: 0.1 }
    }
}

/// Spectrum-dependent context for evaluating the noise threshold.
#[derive(Debug, Clone)]
pub struct NoiseContext {
    sigma_k: f64,
    sigma_k1: f64,
    k: usize,
    r: usize,
    d: usize,
    settings: NoiseSettings,
}

impl NoiseContext {
    /// `sigmas` is the full descending spectrum; requires `k < d` so that
    /// the eigengap `sigma_k - sigma_{k+1}` exists.
    pub fn new(
        sigmas: &[f64],
        k: usize,
        r: usize,
        settings: NoiseSettings,
    ) -> Result<Self, DiagnosticsError> {
        let d = sigmas.len();
        if k == 0 || k >= d {
            return Err(DiagnosticsError::InvalidParameter(format!(
                "need 1 <= k < d for the eigengap, got k = {k}, d = {d}"
            )));
        }
        if r < k || r > d {
            return Err(DiagnosticsError::InvalidParameter(format!(
                "iteration rank r = {r} outside {k}..={d}"
            )));
        }
        if !(settings.tau > 0.0) || !(settings.eps > 0.0) {
            return Err(DiagnosticsError::InvalidParameter(
                "tau and eps must be positive".into(),
            ));
        }
        Ok(NoiseContext {
            sigma_k: sigmas[k - 1],
            sigma_k1: sigmas[k],
            k,
            r,
            d,
            settings,
        })
    }

    /// Admissible per-step noise magnitude:
    /// `((sigma_k - sigma_{k+1}) / 5) * min((sqrt(r) - sqrt(k-1)) / (tau * sqrt(d)), eps)`.
    pub fn epsilon0(&self) -> f64 {
        let gap = self.sigma_k - self.sigma_k1;
        let spread = ((self.r as f64).sqrt() - ((self.k - 1) as f64).sqrt())
            / (self.settings.tau * (self.d as f64).sqrt());
        (gap / 5.0) * spread.min(self.settings.eps)
    }
}

/// Per-step record of the decomposition norms.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseRecord {
    pub t: usize,
    pub h_norm: f64,
    pub w_norm: f64,
    pub g_norm: f64,
    pub epsilon0: f64,
    /// Whether `||G_t|| <= epsilon0`, i.e. the step stayed inside the noise
    /// budget the convergence theory asks for.
    pub satisfied: bool,
}

/// Weighted average of worker iterates: `Zbar = sum_i p_i Z^{(i)}`,
/// accumulated in worker-index order.
pub fn virtual_iterate(states: &[WorkerState], weights: &[f64]) -> Mat {
    let zs: Vec<&SubspaceIterate> = states.iter().map(|w| &w.z).collect();
    weighted_subspace_sum(&zs, weights)
}

/// [`virtual_iterate`] over bare subspace iterates.
pub fn weighted_subspace_sum(zs: &[&SubspaceIterate], weights: &[f64]) -> Mat {
    assert_eq!(zs.len(), weights.len());
    assert!(!zs.is_empty());
    let mut acc = Mat::zeros(zs[0].dim(), zs[0].rank());
    for (z, &w) in zs.iter().zip(weights) {
        acc.add_scaled(w, z.mat());
    }
    acc
}

/// Reference triangular factor for a step `steps_since_sync >= 1` past the
/// last synchronization: run the exact power-QR chain `M P_{l-1} = P_l L_l`
/// from `P_0 = Zbar_{tau(t)}` and return the final factor.
///
/// Cost is `O(d^2 r)` per chain link, so diagnosing a step that is `delta`
/// past the sync point costs `O(d^2 r delta)`.
pub fn reference_r(
    p: &Partition,
    z_at_sync: &SubspaceIterate,
    steps_since_sync: usize,
) -> Result<UpperTriangular, DiagnosticsError> {
    if steps_since_sync == 0 {
        return Err(DiagnosticsError::InvalidParameter(
            "the reference chain needs at least one step past the sync point".into(),
        ));
    }
    let m = p.global_gram();
    let mut basis = z_at_sync.clone();
    let mut factor = None;
    for _ in 0..steps_since_sync {
        let y = gram_multiply(m, &basis)?;
        let (q, l) = qr_orthonormalize(&y)?;
        basis = q;
        factor = Some(l);
    }
    Ok(factor.expect("at least one chain step"))
}

/// The two components of the aggregation noise at one step, as matrices:
///
/// * `H = sum_i p_i (M_i - M) Z_{t-1}^{(i)}` — shard deviation;
/// * `W = sum_i p_i [M_i Z_{t-1}^{(i)} (R_t^{(i)})^{-1}] (R_t - R_t^{(i)})`
///   — orthonormalization drift, with the inverse applied by
///   back-substitution against the stored factor, never formed explicitly.
///
/// `prev` are the iterates entering the step, `now` the states after it
/// (carrying each worker's fresh `R_t^{(i)}`), and `r_ref` the common
/// reference factor.
pub fn noise_matrices(
    p: &Partition,
    prev: &[SubspaceIterate],
    now: &[WorkerState],
    r_ref: &UpperTriangular,
) -> Result<(Mat, Mat), DiagnosticsError> {
    let m = p.num_shards();
    if prev.len() != m || now.len() != m {
        return Err(DiagnosticsError::ShapeMismatch(format!(
            "partition has {m} shards but {} previous / {} current states",
            prev.len(),
            now.len()
        )));
    }
    let d = p.dim();
    let r = prev[0].rank();
    let global = p.global_gram();
    let mut h = Mat::zeros(d, r);
    let mut w = Mat::zeros(d, r);
    for i in 0..m {
        let weight = p.weights()[i];
        let local = &p.local_grams()[i];
        // H contribution: (M_i - M) Z_{t-1}^{(i)}.
        let diff = local.mat().sub(global.mat());
        h.add_scaled(weight, &diff.matmul(prev[i].mat()));
        // W contribution: skip the solve entirely when the factors already
        // agree (exact at synchronization steps).
        let bracket = r_ref.mat().sub(now[i].last_r.mat());
        if bracket.max_abs() == 0.0 {
            continue;
        }
        let y = gram_multiply(local, &prev[i])?;
        let w_core = now[i].last_r.solve_right(&y).map_err(|e| match e {
            LinalgError::SingularFactor => DiagnosticsError::SingularR,
            other => DiagnosticsError::Linalg(other),
        })?;
        w.add_scaled(weight, &w_core.matmul(&bracket));
    }
    Ok((h, w))
}

/// Spectral-norm summary of the noise at step `t`, checked against the
/// admissible threshold.
pub fn noise_decomposition(
    p: &Partition,
    prev: &[SubspaceIterate],
    now: &[WorkerState],
    r_ref: &UpperTriangular,
    t: usize,
    ctx: &NoiseContext,
) -> Result<NoiseRecord, DiagnosticsError> {
    let (h, w) = noise_matrices(p, prev, now, r_ref)?;
    let g = h.add(&w);
    let epsilon0 = ctx.epsilon0();
    let g_norm = spectral_norm(&g);
    Ok(NoiseRecord {
        t,
        h_norm: spectral_norm(&h),
        w_norm: spectral_norm(&w),
        g_norm,
        epsilon0,
        satisfied: g_norm <= epsilon0,
    })
}

// ---------------------------------------------------------------------------
// Theoretical bound calculators.
// ---------------------------------------------------------------------------

/// Largest shard deviation `eta` under which convergence to accuracy `eps`
/// is guaranteed for a schedule with maximal local stretch `delta`:
///
/// ```text
/// (ln 2 / (80 sqrt(2))) * 1/(delta - 1) * 1/(k kappa^delta)
///   * (sigma_k - sigma_{k+1})/sigma_1
///   * min((sqrt(r) - sqrt(k-1)) / (tau sqrt(d)), eps)
/// ```
///
/// Full synchronization (`delta = 1`) needs no deviation bound at all and
/// returns `+inf`.
#[allow(clippy::too_many_arguments)]
pub fn admissible_eta(
    sigmas: &[f64],
    k: usize,
    r: usize,
    delta: usize,
    kappa: f64,
    eps: f64,
    tau: f64,
) -> Result<f64, DiagnosticsError> {
    let d = sigmas.len();
    if k == 0 || k >= d {
        return Err(DiagnosticsError::InvalidParameter(format!(
            "need 1 <= k < d, got k = {k}, d = {d}"
        )));
    }
    if r < k || r > d {
        return Err(DiagnosticsError::InvalidParameter(format!(
            "iteration rank r = {r} outside {k}..={d}"
        )));
    }
    if delta == 0 {
        return Err(DiagnosticsError::InvalidParameter(
            "schedule gap must be at least 1".into(),
        ));
    }
    if !(kappa >= 1.0) {
        return Err(DiagnosticsError::InvalidParameter(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    if !(eps > 0.0) || !(tau > 0.0) {
        return Err(DiagnosticsError::InvalidParameter(
            "eps and tau must be positive".into(),
        ));
    }
    let sigma1 = sigmas[0];
    let gap = sigmas[k - 1] - sigmas[k];
    if !(sigma1 > 0.0) || !(gap > 0.0) {
        return Err(DiagnosticsError::InvalidParameter(
            "need sigma_1 > 0 and sigma_k > sigma_{k+1}".into(),
        ));
    }
    if delta == 1 {
        return Ok(f64::INFINITY);
    }
    let lead = 2.0f64.ln() / (80.0 * 2.0f64.sqrt());
    let spread = ((r as f64).sqrt() - ((k - 1) as f64).sqrt()) / (tau * (d as f64).sqrt());
    Ok(
        lead / (delta - 1) as f64 / (k as f64 * kappa.powi(delta as i32))
            * (gap / sigma1)
            * spread.min(eps),
    )
}

/// Iterations sufficient to reach tangent accuracy `eps` from a random
/// start: `ceil(4 * sigma_k/(sigma_k - sigma_{k+1}) * ln(tau * d / eps))`,
/// at least 1. Requires `0 < eps <= 1/2`.
pub fn required_iterations(
    sigmas: &[f64],
    k: usize,
    eps: f64,
    tau: f64,
    d: usize,
) -> Result<u64, DiagnosticsError> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(DiagnosticsError::InvalidParameter(format!(
            "eps must lie in (0, 1/2], got {eps}"
        )));
    }
    if !(tau > 0.0) || d == 0 {
        return Err(DiagnosticsError::InvalidParameter(
            "tau and d must be positive".into(),
        ));
    }
    let ratio = gap_ratio(sigmas, k)?;
    let value = 4.0 * ratio * (tau * d as f64 / eps).ln();
    Ok((value.ceil() as u64).max(1))
}

/// Communication rounds used by the fully synchronized baseline to reach
/// `eps`: `ceil(4 * sigma_k/(sigma_k - sigma_{k+1}) * ln(d / eps))`, at
/// least 1.
pub fn baseline_comm_bound(
    sigmas: &[f64],
    k: usize,
    eps: f64,
    d: usize,
) -> Result<u64, DiagnosticsError> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(DiagnosticsError::InvalidParameter(format!(
            "eps must lie in (0, 1/2], got {eps}"
        )));
    }
    if d == 0 {
        return Err(DiagnosticsError::InvalidParameter(
            "d must be positive".into(),
        ));
    }
    let ratio = gap_ratio(sigmas, k)?;
    let value = 4.0 * ratio * (d as f64 / eps).ln();
    Ok((value.ceil() as u64).max(1))
}

/// Scale of the residual error floor left by local stretches of length
/// `delta`: `(delta - 1) * kappa^delta * eta`. Full synchronization gives 0.
pub fn error_floor_scale(delta: usize, kappa: f64, eta: f64) -> f64 {
    (delta.saturating_sub(1)) as f64 * kappa.powi(delta as i32) * eta
}

/// High-probability bound on the tangent of a random Gaussian start against
/// any fixed k-dimensional target: `tau * sqrt(d) / (sqrt(r) - sqrt(k-1))`.
pub fn initial_tangent_bound(d: usize, r: usize, k: usize, tau: f64) -> f64 {
    tau * (d as f64).sqrt() / ((r as f64).sqrt() - ((k - 1) as f64).sqrt())
}

fn gap_ratio(sigmas: &[f64], k: usize) -> Result<f64, DiagnosticsError> {
    if k == 0 || k >= sigmas.len() {
        return Err(DiagnosticsError::InvalidParameter(format!(
            "need 1 <= k < d, got k = {k}, d = {}",
            sigmas.len()
        )));
    }
    let gap = sigmas[k - 1] - sigmas[k];
    if !(gap > 0.0) {
        return Err(DiagnosticsError::InvalidParameter(
            "sigma_k must strictly exceed sigma_{k+1}".into(),
        ));
    }
    Ok(sigmas[k - 1] / gap)
}

/// Bundle of the quantities the theory attaches to one experiment cell.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub kappa: f64,
    pub sigmas: Vec<f64>,
    pub gap_ratio: f64,
    pub delta: usize,
    pub eta_measured: f64,
    pub eta_admissible: f64,
    pub t_required: u64,
    pub error_floor_scale: f64,
}

/// Assemble a [`TheoryReport`] from a measured spectrum and shard deviation.
#[allow(clippy::too_many_arguments)]
pub fn theory_report(
    sigmas: &[f64],
    k: usize,
    r: usize,
    delta: usize,
    eta_measured: f64,
    eps: f64,
    tau: f64,
) -> Result<TheoryReport, DiagnosticsError> {
    let kappa = condition_from_eigenvalues(sigmas)?;
    Ok(TheoryReport {
        kappa,
        sigmas: sigmas.to_vec(),
        gap_ratio: gap_ratio(sigmas, k)?,
        delta,
        eta_measured,
        eta_admissible: admissible_eta(sigmas, k, r, delta, kappa, eps, tau)?,
        t_required: required_iterations(sigmas, k, eps, tau, sigmas.len())?,
        error_floor_scale: error_floor_scale(delta, kappa, eta_measured),
    })
}
