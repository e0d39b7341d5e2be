use super::{LinalgError, Mat, SubspaceIterate, SymmetricPsd};

/// Sweep cap for the cyclic Jacobi iteration. Jacobi converges
/// quadratically once the off-diagonal mass is small; on well-posed inputs
/// it finishes in well under ten sweeps, so hitting this cap signals a
/// malformed input rather than a hard spectrum.
pub const DEFAULT_SWEEP_CAP: usize = 100;

/// Sum of squares of the off-diagonal entries (upper triangle, doubled).
fn off_diagonal_mass(a: &Mat) -> f64 {
    let d = a.rows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            acc += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations sweep the upper triangle row by row until the off-diagonal
/// Frobenius mass drops to `tol` times the Frobenius norm of the input.
/// Returns all eigenvalues in descending order together with the matching
/// eigenvector columns. This is the crate's ground-truth route: it shares no
/// code with the power-iteration paths it is used to validate.
pub(crate) fn jacobi_eigen(
    m: &Mat,
    tol: f64,
    sweep_cap: usize,
) -> Result<(Vec<f64>, Mat), LinalgError> {
    assert_eq!(m.rows(), m.cols(), "jacobi_eigen needs a square matrix");
    let d = m.rows();
    let scale = m.frobenius_norm();
    let mut a = m.clone();
    let mut v = Mat::identity(d);
    let threshold = tol * scale;

    let mut converged = off_diagonal_mass(&a) <= threshold;
    let mut sweeps_done = 0;
    while !converged && sweeps_done < sweep_cap {
        for p in 0..d.saturating_sub(1) {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Stable rotation parameters (Golub & Van Loan §8.5).
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    // Avoid overflow in theta^2; the limit is 1/(2 theta).
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for i in 0..d {
                    if i == p || i == q {
                        continue;
                    }
                    let g = a[(i, p)];
                    let h = a[(i, q)];
                    let new_g = g - s * (h + g * tau);
                    let new_h = h + s * (g - h * tau);
                    a[(i, p)] = new_g;
                    a[(p, i)] = new_g;
                    a[(i, q)] = new_h;
                    a[(q, i)] = new_h;
                }
                for i in 0..d {
                    let g = v[(i, p)];
                    let h = v[(i, q)];
                    v[(i, p)] = g - s * (h + g * tau);
                    v[(i, q)] = h + s * (g - h * tau);
                }
            }
        }
        sweeps_done += 1;
        converged = off_diagonal_mass(&a) <= threshold;
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            sweeps: sweeps_done,
            off: off_diagonal_mass(&a),
        });
    }

    // Stable sort by descending eigenvalue; ties keep index order, which
    // makes degenerate spectra deterministic.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Mat::from_fn(d, d, |i, j| v[(i, order[j])]);
    Ok((eigenvalues, vectors))
}

/// Ground-truth top-k eigenpairs of a Gram matrix, via cyclic Jacobi with
/// the default sweep cap. Returns the orthonormal basis of the dominant
/// k-dimensional eigenspace and **all** d eigenvalues in descending order.
pub fn reference_topk(
    m: &SymmetricPsd,
    k: usize,
    tol: f64,
) -> Result<(SubspaceIterate, Vec<f64>), LinalgError> {
    reference_topk_capped(m, k, tol, DEFAULT_SWEEP_CAP)
}

/// [`reference_topk`] with an explicit sweep cap.
pub fn reference_topk_capped(
    m: &SymmetricPsd,
    k: usize,
    tol: f64,
    sweep_cap: usize,
) -> Result<(SubspaceIterate, Vec<f64>), LinalgError> {
    let d = m.dim();
    if k == 0 || k > d {
        return Err(LinalgError::InvalidParameter(format!(
            "target rank k = {k} outside 1..={d}"
        )));
    }
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidParameter(format!(
            "eigensolver tolerance must be positive, got {tol}"
        )));
    }
    let (eigenvalues, vectors) = jacobi_eigen(m.mat(), tol, sweep_cap)?;
    let u_k = SubspaceIterate::new(vectors.columns(0, k))?;
    Ok((u_k, eigenvalues))
}
