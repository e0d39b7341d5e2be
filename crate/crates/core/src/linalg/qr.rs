use super::{LinalgError, Mat, SubspaceIterate, UpperTriangular, RANK_TOL};

/// Householder reflectors for a d-by-r matrix, stored compactly.
struct Reflectors {
    /// Reflector j lives in rows j..d; leading entries are implicit zeros.
    vs: Vec<Vec<f64>>,
    betas: Vec<f64>,
    rows: usize,
}

impl Reflectors {
    /// Apply `Q = H_0 H_1 … H_{r-1}` to the first `cols` columns of the
    /// identity, producing an explicit d-by-`cols` orthonormal block.
    fn build_q(&self, cols: usize) -> Mat {
        let d = self.rows;
        let mut q = Mat::from_fn(d, cols, |i, j| if i == j { 1.0 } else { 0.0 });
        for j in (0..self.vs.len()).rev() {
            let v = &self.vs[j];
            let beta = self.betas[j];
            if beta == 0.0 {
                continue;
            }
            // q[j.., :] -= beta * v (v^T q[j.., :])
            for c in 0..cols {
                let mut dot = 0.0;
                for (off, vi) in v.iter().enumerate() {
                    dot += vi * q[(j + off, c)];
                }
                let s = beta * dot;
                for (off, vi) in v.iter().enumerate() {
                    q[(j + off, c)] -= s * vi;
                }
            }
        }
        q
    }
}

/// Factor the rectangular matrix into reflectors plus the r-by-r upper
/// triangle, reporting rank deficiency when a pivot falls below
/// `RANK_TOL * ||Y||_F`.
fn householder(y: &Mat) -> Result<(Reflectors, Mat), LinalgError> {
    let d = y.rows();
    let r = y.cols();
    let tol = RANK_TOL * y.frobenius_norm();
    let mut work = y.clone();
    let mut refl = Reflectors {
        vs: Vec::with_capacity(r),
        betas: Vec::with_capacity(r),
        rows: d,
    };
    for j in 0..r {
        // Norm of the trailing part of column j.
        let mut norm2 = 0.0;
        for i in j..d {
            norm2 += work[(i, j)] * work[(i, j)];
        }
        let norm = norm2.sqrt();
        if norm <= tol {
            return Err(LinalgError::RankDeficient {
                col: j,
                pivot: norm,
                tol,
            });
        }
        let x0 = work[(j, j)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; d - j];
        v[0] = x0 - alpha;
        for i in (j + 1)..d {
            v[i - j] = work[(i, j)];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        let beta = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
        // Apply the reflector to the trailing block.
        for c in j..r {
            let mut dot = 0.0;
            for (off, vi) in v.iter().enumerate() {
                dot += vi * work[(j + off, c)];
            }
            let s = beta * dot;
            for (off, vi) in v.iter().enumerate() {
                work[(j + off, c)] -= s * vi;
            }
        }
        work[(j, j)] = alpha;
        refl.vs.push(v);
        refl.betas.push(beta);
    }
    // Extract the upper triangle with exact zeros below the diagonal.
    let mut rmat = Mat::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            rmat[(i, j)] = work[(i, j)];
        }
    }
    Ok((refl, rmat))
}

/// Thin QR with a deterministic sign convention: `Y = Q R` with orthonormal
/// `Q` and upper-triangular `R` whose diagonal is strictly positive. Any
/// diagonal sign ambiguity is resolved by flipping the corresponding column
/// of `Q` and row of `R`, so identical inputs always produce identical
/// factors.
pub fn qr_orthonormalize(y: &Mat) -> Result<(SubspaceIterate, UpperTriangular), LinalgError> {
    if y.rows() < y.cols() {
        return Err(LinalgError::DimMismatch {
            op: "qr_orthonormalize",
            detail: format!("{}x{} has more columns than rows", y.rows(), y.cols()),
        });
    }
    let (refl, mut rmat) = householder(y)?;
    let mut q = refl.build_q(y.cols());
    for j in 0..rmat.rows() {
        if rmat[(j, j)] < 0.0 {
            for c in j..rmat.cols() {
                rmat[(j, c)] = -rmat[(j, c)];
            }
            for i in 0..q.rows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok((SubspaceIterate::from_qr(q), UpperTriangular::from_qr(rmat)))
}

/// Orthonormal basis of the complement of `span(U)`: the trailing `d - k`
/// columns of a full Householder Q built from `U`. Requires `k < d`.
pub fn orthonormal_complement(u: &SubspaceIterate) -> Result<Mat, LinalgError> {
    let d = u.dim();
    let k = u.rank();
    if k >= d {
        return Err(LinalgError::DimMismatch {
            op: "orthonormal_complement",
            detail: format!("subspace of rank {k} already fills dimension {d}"),
        });
    }
    let (refl, _) = householder(u.mat())?;
    let q_full = refl.build_q(d);
    Ok(q_full.columns(k, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
        a.sub(b).max_abs()
    }

    fn check_factorization(y: &Mat) {
        let (q, r) = qr_orthonormalize(y).expect("QR should succeed");
        assert_eq!(q.dim(), y.rows());
        assert_eq!(q.rank(), y.cols());
        // Reconstruction: ||QR - Y||_F <= 1e-10 ||Y||_F.
        let recon = q.mat().matmul(r.mat());
        assert!(recon.sub(y).frobenius_norm() <= 1e-10 * y.frobenius_norm().max(1e-300));
        // Orthonormality: ||Q^T Q - I||_max <= 1e-10.
        let gram = q.mat().transpose_matmul(q.mat());
        let mut dev = 0.0f64;
        for i in 0..gram.rows() {
            for j in 0..gram.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram[(i, j)] - target).abs());
            }
        }
        assert!(dev <= 1e-10, "orthonormality deviation {dev}");
        // Positive diagonal.
        for i in 0..r.dim() {
            assert!(r.mat()[(i, i)] > 0.0);
        }
    }

    #[test]
    fn small_example_reconstructs() {
        let y = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        check_factorization(&y);
        let (q, r) = qr_orthonormalize(&y).unwrap();
        let recon = q.mat().matmul(r.mat());
        assert!(max_abs_diff(&recon, &y) <= 1e-12);
    }

    #[test]
    fn pseudo_random_family_reconstructs() {
        // Deterministic pseudo-random entries; 100 shapes with d >= r.
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for trial in 0..100 {
            let d = 2 + trial % 9;
            let r = 1 + trial % d;
            let y = Mat::from_fn(d, r, |_, _| next());
            check_factorization(&y);
        }
    }

    #[test]
    fn rank_deficient_duplicate_column_is_rejected() {
        let y = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]);
        match qr_orthonormalize(&y) {
            Err(LinalgError::RankDeficient { col, .. }) => assert_eq!(col, 1),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn zero_matrix_is_rank_deficient_at_first_column() {
        let y = Mat::zeros(3, 2);
        match qr_orthonormalize(&y) {
            Err(LinalgError::RankDeficient { col, .. }) => assert_eq!(col, 0),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn wide_matrix_is_rejected() {
        let y = Mat::zeros(2, 3);
        assert!(matches!(
            qr_orthonormalize(&y),
            Err(LinalgError::DimMismatch { .. })
        ));
    }

    #[test]
    fn factorization_is_bitwise_deterministic() {
        // Vandermonde columns over distinct nodes: full rank by construction.
        let y = Mat::from_fn(6, 3, |i, j| (0.3 + i as f64).powi(j as i32));
        let (q1, r1) = qr_orthonormalize(&y).unwrap();
        let (q2, r2) = qr_orthonormalize(&y).unwrap();
        assert_eq!(q1.mat().as_slice(), q2.mat().as_slice());
        assert_eq!(r1.mat().as_slice(), r2.mat().as_slice());
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal_to_u() {
        let y = Mat::from_fn(6, 2, |i, j| ((i * 3 + j) as f64).cos() + 0.1);
        let (u, _) = qr_orthonormalize(&y).unwrap();
        let perp = orthonormal_complement(&u).unwrap();
        assert_eq!(perp.rows(), 6);
        assert_eq!(perp.cols(), 4);
        let gram = perp.transpose_matmul(&perp);
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() <= 1e-12);
            }
        }
        let cross = u.mat().transpose_matmul(&perp);
        assert!(cross.max_abs() <= 1e-12);
    }

    #[test]
    fn complement_of_full_space_is_an_error() {
        let (u, _) = qr_orthonormalize(&Mat::identity(3)).unwrap();
        assert!(orthonormal_complement(&u).is_err());
    }
}
