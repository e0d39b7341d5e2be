use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::qr::orthonormal_complement;
use super::{
    jacobi_eigen, LinalgError, Mat, SubspaceIterate, SymmetricPsd, DEFAULT_EIGEN_TOL,
    EIGEN_RANK_TOL,
};

/// Fixed seed for the spectral-norm power iteration; any fixed value works,
/// it only has to make repeated calls bit-identical.
const SPECTRAL_NORM_SEED: u64 = 0x5EED_CAFE;
/// Relative tolerance on successive singular-value estimates.
const SPECTRAL_NORM_TOL: f64 = 1e-10;
const SPECTRAL_NORM_MAX_ITERS: usize = 10_000;
/// Smallest singular value of `U^T Z` below which the tangent is reported as
/// the +infinity sentinel.
const TAN_SINGULAR_TOL: f64 = 1e-12;

/// Largest singular value of a rectangular matrix, via power iteration on
/// `B^T B` (applied implicitly as `B^T (B v)`), deterministically seeded.
///
/// Converges when consecutive estimates agree to `1e-10` relative; the
/// Rayleigh quotient of a PSD operator is non-decreasing along power
/// iterations, so the estimate approaches the top singular value from below.
/// The zero matrix returns exactly 0.
pub fn spectral_norm(b: &Mat) -> f64 {
    if b.max_abs() == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SPECTRAL_NORM_SEED);
    let cols = b.cols();
    for _attempt in 0..4 {
        let mut v = Mat::from_fn(cols, 1, |_, _| StandardNormal.sample(&mut rng));
        let norm = v.frobenius_norm();
        if norm == 0.0 {
            continue;
        }
        v = v.scale(1.0 / norm);
        let mut sigma = 0.0f64;
        for _ in 0..SPECTRAL_NORM_MAX_ITERS {
            let w = b.matmul(&v); // B v
            let sigma_new = w.frobenius_norm();
            if sigma_new == 0.0 {
                // v landed in the null space; redraw the start vector.
                sigma = -1.0;
                break;
            }
            let u = b.transpose_matmul(&w); // B^T (B v)
            let u_norm = u.frobenius_norm();
            if u_norm == 0.0 {
                sigma = -1.0;
                break;
            }
            v = u.scale(1.0 / u_norm);
            if (sigma_new - sigma).abs() <= SPECTRAL_NORM_TOL * sigma_new {
                return sigma_new;
            }
            sigma = sigma_new;
        }
        if sigma > 0.0 {
            return sigma;
        }
    }
    // Only reachable when every seeded start vector fell in the null space
    // of a nonzero matrix, which cannot happen with Gaussian draws.
    0.0
}

/// Projection distance `||(I - Z Z^T) U_k|| = sin(theta_k)`: the sine of the
/// largest principal angle between the target subspace and the iterate.
/// Computed as the spectral norm of `U_k - Z (Z^T U_k)` and clamped to
/// `[0, 1]` against floating-point overshoot.
pub fn sin_theta_k(u_k: &SubspaceIterate, z: &SubspaceIterate) -> Result<f64, LinalgError> {
    if u_k.dim() != z.dim() {
        return Err(LinalgError::DimMismatch {
            op: "sin_theta_k",
            detail: format!("U_k lives in R^{}, Z in R^{}", u_k.dim(), z.dim()),
        });
    }
    if z.rank() < u_k.rank() {
        return Err(LinalgError::DimMismatch {
            op: "sin_theta_k",
            detail: format!(
                "iterate rank {} is below target rank {}",
                z.rank(),
                u_k.rank()
            ),
        });
    }
    let zt_u = z.mat().transpose_matmul(u_k.mat()); // r x k
    let proj = z.mat().matmul(&zt_u); // d x k
    let resid = u_k.mat().sub(&proj);
    Ok(spectral_norm(&resid).clamp(0.0, 1.0))
}

/// Tangent of the largest principal angle:
/// `tan(theta_k) = || [(U^perp)^T Z] (U^T Z)^+ ||`.
///
/// The pseudo-inverse is taken through the Jacobi eigensolver on
/// `(U^T Z)^T (U^T Z)`; if the smallest singular value of `U^T Z` falls
/// below `1e-12` the angle is reported as `+inf`.
pub fn tan_theta_k(u: &SubspaceIterate, z: &SubspaceIterate) -> Result<f64, LinalgError> {
    if u.dim() != z.dim() {
        return Err(LinalgError::DimMismatch {
            op: "tan_theta_k",
            detail: format!("U lives in R^{}, Z in R^{}", u.dim(), z.dim()),
        });
    }
    let d = u.dim();
    let k = u.rank();
    let r = z.rank();
    let b = u.mat().transpose_matmul(z.mat()); // k x r
    let btb = b.transpose_matmul(&b); // r x r, PSD
    let (lambdas, vecs) = jacobi_eigen(&btb, DEFAULT_EIGEN_TOL, super::DEFAULT_SWEEP_CAP)?;
    let nsv = k.min(r);
    let sigma_min = lambdas[nsv - 1].max(0.0).sqrt();
    if sigma_min < TAN_SINGULAR_TOL {
        return Ok(f64::INFINITY);
    }
    if k == d {
        // No complement: the subspace fills the space and the angle is zero.
        return Ok(0.0);
    }
    // Pseudo-inverse B^+ = (sum_j lambda_j^{-1} v_j v_j^T) B^T over the
    // leading nsv eigenpairs.
    let mut pinv_core = Mat::zeros(r, r);
    for j in 0..nsv {
        let inv_l = 1.0 / lambdas[j];
        for a in 0..r {
            let va = vecs[(a, j)];
            if va == 0.0 {
                continue;
            }
            for c in 0..r {
                pinv_core[(a, c)] += inv_l * va * vecs[(c, j)];
            }
        }
    }
    let b_pinv = pinv_core.matmul(&b.transpose()); // r x k
    let perp = orthonormal_complement(u)?; // d x (d - k)
    let top = perp.transpose_matmul(z.mat()); // (d-k) x r
    Ok(spectral_norm(&top.matmul(&b_pinv)))
}

/// Effective condition number `sigma_1 / sigma_rho` where `rho` is the
/// numerical rank, counting eigenvalues above `1e-12 * sigma_1`.
pub fn condition_number(m: &SymmetricPsd) -> Result<f64, LinalgError> {
    let (lambdas, _) = jacobi_eigen(m.mat(), DEFAULT_EIGEN_TOL, super::DEFAULT_SWEEP_CAP)?;
    condition_from_eigenvalues(&lambdas)
}

/// [`condition_number`] on an already-computed descending spectrum.
pub fn condition_from_eigenvalues(lambdas: &[f64]) -> Result<f64, LinalgError> {
    let sigma1 = lambdas.first().copied().unwrap_or(0.0);
    if sigma1 <= 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let rho = lambdas
        .iter()
        .take_while(|&&l| l > EIGEN_RANK_TOL * sigma1)
        .count();
    Ok(sigma1 / lambdas[rho - 1])
}

/// Row coherence `mu(A) = (n / rho) * max_j ||u_j||^2`, where the `u_j` are
/// the rows of an orthonormal basis of the column space of `A` and `rho` is
/// the numerical rank. Ranges from 1 (perfectly incoherent) to `n / rho`
/// (a single row carries an entire direction).
///
/// The basis is obtained from the eigenvectors of `A^T A`: with
/// `A^T A = V diag(lambda) V^T`, the matrix `A V diag(lambda^{-1/2})` is
/// column-orthonormal and spans `range(A)`. Rank counts eigenvalues above
/// `1e-12 * lambda_1`.
pub fn row_coherence(a: &Mat) -> Result<f64, LinalgError> {
    let n = a.rows();
    let gram = a.transpose_matmul(a);
    let (lambdas, vecs) = jacobi_eigen(&gram, DEFAULT_EIGEN_TOL, super::DEFAULT_SWEEP_CAP)?;
    let lambda1 = lambdas.first().copied().unwrap_or(0.0);
    if lambda1 <= 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let rho = lambdas
        .iter()
        .take_while(|&&l| l > EIGEN_RANK_TOL * lambda1)
        .count();
    let v_rho = vecs.columns(0, rho);
    let w = a.matmul(&v_rho); // n x rho, column j has norm sqrt(lambda_j)
    let mut max_row = 0.0f64;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..rho {
            acc += w[(i, j)] * w[(i, j)] / lambdas[j];
        }
        max_row = max_row.max(acc);
    }
    Ok((n as f64 / rho as f64) * max_row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qr_orthonormalize;

    fn unit_column(entries: &[f64]) -> SubspaceIterate {
        let m = Mat::from_fn(entries.len(), 1, |i, _| entries[i]);
        SubspaceIterate::new(m).unwrap()
    }

    fn pseudo_random_mat(rows: usize, cols: usize, salt: u64) -> Mat {
        let mut state = salt.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        Mat::from_fn(rows, cols, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        assert!((spectral_norm(&m) - 3.0).abs() <= 1e-9);
    }

    #[test]
    fn spectral_norm_of_zero_is_exact_zero() {
        assert_eq!(spectral_norm(&Mat::zeros(4, 3)), 0.0);
    }

    #[test]
    fn spectral_norm_matches_jacobi_oracle_on_random_rectangles() {
        // Oracle: sqrt of the top eigenvalue of B^T B via the Jacobi solver.
        for salt in 0..10u64 {
            let b = pseudo_random_mat(6, 4, salt + 1);
            let btb = b.transpose_matmul(&b);
            let (lambdas, _) = jacobi_eigen(&btb, 1e-14, 100).unwrap();
            let want = lambdas[0].max(0.0).sqrt();
            let got = spectral_norm(&b);
            assert!(
                (got - want).abs() <= 1e-8 * want.max(1e-30),
                "salt {salt}: got {got}, oracle {want}"
            );
        }
    }

    #[test]
    fn spectral_norm_is_transpose_invariant() {
        for salt in 0..10u64 {
            let b = pseudo_random_mat(7, 3, salt + 11);
            let a = spectral_norm(&b);
            let bt = spectral_norm(&b.transpose());
            assert!((a - bt).abs() <= 1e-8 * a.max(1e-30));
        }
    }

    #[test]
    fn spectral_norm_is_deterministic() {
        let b = pseudo_random_mat(5, 5, 99);
        assert_eq!(spectral_norm(&b).to_bits(), spectral_norm(&b).to_bits());
    }

    #[test]
    fn sine_of_a_plane_rotation_is_the_rotation_angle() {
        // U = e1, Z = (cos a, sin a): the principal angle is exactly a.
        let alpha = std::f64::consts::FRAC_PI_6;
        let u = unit_column(&[1.0, 0.0]);
        let z = unit_column(&[alpha.cos(), alpha.sin()]);
        let s = sin_theta_k(&u, &z).unwrap();
        assert!((s - 0.5).abs() <= 1e-12, "sin = {s}");
    }

    #[test]
    fn sine_of_identical_subspace_is_near_zero_and_clamped() {
        let u = unit_column(&[0.6, 0.8]);
        let s = sin_theta_k(&u, &u).unwrap();
        assert!((0.0..=1e-7).contains(&s));
    }

    #[test]
    fn sine_of_orthogonal_subspaces_is_one() {
        let u = unit_column(&[1.0, 0.0]);
        let z = unit_column(&[0.0, 1.0]);
        let s = sin_theta_k(&u, &z).unwrap();
        assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sine_is_invariant_under_right_rotation() {
        // Rotating the iterate's columns leaves the subspace unchanged.
        for salt in 0..10u64 {
            let (z, _) = qr_orthonormalize(&pseudo_random_mat(8, 3, salt + 21)).unwrap();
            let (u, _) = qr_orthonormalize(&pseudo_random_mat(8, 2, salt + 51)).unwrap();
            let (o, _) = qr_orthonormalize(&pseudo_random_mat(3, 3, salt + 81)).unwrap();
            let rotated = SubspaceIterate::new(z.mat().matmul(o.mat())).unwrap();
            let a = sin_theta_k(&u, &z).unwrap();
            let b = sin_theta_k(&u, &rotated).unwrap();
            assert!((a - b).abs() <= 1e-10, "salt {salt}: {a} vs {b}");
        }
    }

    #[test]
    fn sine_squared_plus_cosine_squared_for_equal_ranks() {
        // For r = k the smallest singular value of U^T Z is cos(theta_k).
        for salt in 0..10u64 {
            let (u, _) = qr_orthonormalize(&pseudo_random_mat(7, 3, salt + 31)).unwrap();
            let (z, _) = qr_orthonormalize(&pseudo_random_mat(7, 3, salt + 61)).unwrap();
            let s = sin_theta_k(&u, &z).unwrap();
            let b = u.mat().transpose_matmul(z.mat());
            let btb = b.transpose_matmul(&b);
            let (lambdas, _) = jacobi_eigen(&btb, 1e-14, 100).unwrap();
            let cos = lambdas[2].max(0.0).sqrt();
            assert!(
                (s * s + cos * cos - 1.0).abs() <= 1e-8,
                "salt {salt}: sin {s}, cos {cos}"
            );
        }
    }

    #[test]
    fn tangent_of_quarter_turn_is_one() {
        let alpha = std::f64::consts::FRAC_PI_4;
        let u = unit_column(&[1.0, 0.0]);
        let z = unit_column(&[alpha.cos(), alpha.sin()]);
        let t = tan_theta_k(&u, &z).unwrap();
        assert!((t - 1.0).abs() <= 1e-12, "tan = {t}");
    }

    #[test]
    fn tangent_of_orthogonal_subspace_is_infinite() {
        let u = unit_column(&[1.0, 0.0]);
        let z = unit_column(&[0.0, 1.0]);
        assert!(tan_theta_k(&u, &z).unwrap().is_infinite());
    }

    #[test]
    fn tangent_matches_sine_over_cosine_for_equal_ranks() {
        for salt in 0..10u64 {
            let (u, _) = qr_orthonormalize(&pseudo_random_mat(6, 2, salt + 41)).unwrap();
            let (z, _) = qr_orthonormalize(&pseudo_random_mat(6, 2, salt + 71)).unwrap();
            let s = sin_theta_k(&u, &z).unwrap();
            let t = tan_theta_k(&u, &z).unwrap();
            if s < 0.999 {
                let want = s / (1.0 - s * s).sqrt();
                assert!(
                    (t - want).abs() <= 1e-8 * want.max(1.0),
                    "salt {salt}: tan {t} vs sin/cos {want}"
                );
            }
        }
    }

    #[test]
    fn tangent_is_invariant_under_right_invertible_multiply() {
        // tan only sees span(Z): Z -> Z R for invertible R changes nothing.
        // We rotate (orthogonal is invertible) plus rescale columns.
        for salt in 0..10u64 {
            let (u, _) = qr_orthonormalize(&pseudo_random_mat(8, 2, salt + 1)).unwrap();
            let (z, _) = qr_orthonormalize(&pseudo_random_mat(8, 3, salt + 2)).unwrap();
            let (o, _) = qr_orthonormalize(&pseudo_random_mat(3, 3, salt + 3)).unwrap();
            let a = tan_theta_k(&u, &z).unwrap();
            let rotated = SubspaceIterate::new(z.mat().matmul(o.mat())).unwrap();
            let b = tan_theta_k(&u, &rotated).unwrap();
            if a.is_finite() {
                assert!(
                    (a - b).abs() <= 1e-8 * a.max(1.0),
                    "salt {salt}: {a} vs {b}"
                );
            } else {
                assert!(b.is_infinite());
            }
        }
    }

    #[test]
    fn condition_number_of_known_diagonal() {
        let m = SymmetricPsd::new(Mat::from_rows(&[
            vec![8.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ]))
        .unwrap();
        assert!((condition_number(&m).unwrap() - 16.0).abs() <= 1e-12);
    }

    #[test]
    fn condition_number_ignores_numerically_zero_tail() {
        let m = SymmetricPsd::new(Mat::from_rows(&[
            vec![4.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 1e-30],
        ]))
        .unwrap();
        assert!((condition_number(&m).unwrap() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn condition_number_of_zero_matrix_errors() {
        let m = SymmetricPsd::new(Mat::zeros(2, 2)).unwrap();
        assert!(matches!(condition_number(&m), Err(LinalgError::ZeroMatrix)));
    }

    #[test]
    fn coherence_of_identity_is_one() {
        assert!((row_coherence(&Mat::identity(6)).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn coherence_of_single_spike_is_n() {
        // One nonzero row: that row carries the whole (1-dim) column space.
        let mut a = Mat::zeros(5, 1);
        a[(2, 0)] = 3.0;
        assert!((row_coherence(&a).unwrap() - 5.0).abs() <= 1e-10);
    }

    #[test]
    fn coherence_of_zero_matrix_errors() {
        assert!(matches!(
            row_coherence(&Mat::zeros(4, 2)),
            Err(LinalgError::ZeroMatrix)
        ));
    }

    #[test]
    fn coherence_matches_brute_force_left_basis() {
        // Oracle route: eigenvectors of A A^T restricted to the numerical
        // rank give the left singular basis directly.
        let a = pseudo_random_mat(40, 5, 7);
        let got = row_coherence(&a).unwrap();
        assert!((1.0 - 1e-9..=40.0 / 5.0 + 1e-9).contains(&got));

        let aat = a.matmul(&a.transpose());
        let (lambdas, vecs) = jacobi_eigen(&aat, 1e-14, 200).unwrap();
        let lambda1 = lambdas[0];
        let rho = lambdas
            .iter()
            .take_while(|&&l| l > EIGEN_RANK_TOL * lambda1)
            .count();
        assert_eq!(rho, 5);
        let mut max_row = 0.0f64;
        for i in 0..40 {
            let mut acc = 0.0;
            for j in 0..rho {
                acc += vecs[(i, j)] * vecs[(i, j)];
            }
            max_row = max_row.max(acc);
        }
        let want = (40.0 / rho as f64) * max_row;
        assert!(
            (got - want).abs() <= 1e-8 * want,
            "coherence {got} vs oracle {want}"
        );
    }
}
