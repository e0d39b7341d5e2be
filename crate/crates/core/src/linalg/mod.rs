//! Dense linear-algebra kernels for the simulator.
//!
//! Everything here is hand-rolled on a small row-major [`Mat`] type rather
//! than delegated to an external solver, for two reasons: the iteration loop
//! needs bit-reproducible sequential accumulation, and the ground-truth
//! eigensolver ([`reference_topk`]) must stay independent of the power-
//! iteration code paths it validates.

mod eigen;
mod mat;
mod metrics;
mod qr;

pub use eigen::{reference_topk, reference_topk_capped, DEFAULT_SWEEP_CAP};
pub use mat::Mat;
pub use metrics::{
    condition_from_eigenvalues, condition_number, row_coherence, sin_theta_k, spectral_norm,
    tan_theta_k,
};
pub use qr::{orthonormal_complement, qr_orthonormalize};

pub(crate) use eigen::jacobi_eigen;

use thiserror::Error;

/// Relative tolerance for the symmetry check on [`SymmetricPsd`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Max-norm tolerance for the orthonormality check on [`SubspaceIterate`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Relative pivot tolerance below which a QR factorization is reported as
/// rank deficient (scaled by the Frobenius norm of the input).
pub const RANK_TOL: f64 = 1e-12;
/// Relative eigenvalue threshold used when counting numerical rank.
pub const EIGEN_RANK_TOL: f64 = 1e-12;
/// Default off-diagonal tolerance for the Jacobi eigensolver (relative to
/// the Frobenius norm of the input).
pub const DEFAULT_EIGEN_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {detail}")]
    DimMismatch { op: &'static str, detail: String },
    #[error("rank deficient input: column {col} pivot {pivot:.3e} below tolerance {tol:.3e}")]
    RankDeficient { col: usize, pivot: f64, tol: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("matrix is numerically zero")]
    ZeroMatrix,
    #[error("matrix is not symmetric (max asymmetry {max_asym:.3e})")]
    NotSymmetric { max_asym: f64 },
    #[error("iterate is not orthonormal (max deviation {dev:.3e})")]
    NotOrthonormal { dev: f64 },
    #[error("matrix is not upper triangular with positive diagonal")]
    NotUpperTriangular,
    #[error("triangular factor has a zero diagonal entry")]
    SingularFactor,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Symmetric positive semidefinite matrix (a Gram matrix or a shard Gram).
///
/// Symmetry is enforced at construction; positive semidefiniteness (up to a
/// `-1e-10 * ||M||` eigenvalue tolerance) is the producer's obligation and is
/// exercised by the eigensolver tests rather than re-checked on every build.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricPsd {
    mat: Mat,
}

impl SymmetricPsd {
    /// Validate symmetry within [`SYMMETRY_TOL`] (relative to the largest
    /// entry) and symmetrize exactly.
    pub fn new(mat: Mat) -> Result<Self, LinalgError> {
        if mat.rows() != mat.cols() {
            return Err(LinalgError::DimMismatch {
                op: "SymmetricPsd::new",
                detail: format!("{}x{} is not square", mat.rows(), mat.cols()),
            });
        }
        let scale = mat.max_abs().max(f64::MIN_POSITIVE);
        let mut max_asym = 0.0f64;
        for i in 0..mat.rows() {
            for j in (i + 1)..mat.cols() {
                max_asym = max_asym.max((mat[(i, j)] - mat[(j, i)]).abs());
            }
        }
        if max_asym > SYMMETRY_TOL * scale {
            return Err(LinalgError::NotSymmetric { max_asym });
        }
        Ok(Self::new_symmetrized(mat))
    }

    /// Symmetrize `(M + M^T) / 2` without a tolerance check. Used by
    /// producers whose output is symmetric by construction.
    pub(crate) fn new_symmetrized(mut mat: Mat) -> Self {
        for i in 0..mat.rows() {
            for j in (i + 1)..mat.cols() {
                let avg = 0.5 * (mat[(i, j)] + mat[(j, i)]);
                mat[(i, j)] = avg;
                mat[(j, i)] = avg;
            }
        }
        SymmetricPsd { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }
}

/// Orthonormal d-by-r iterate: the current estimate of the dominant
/// eigenspace held by a worker (or the ground-truth basis itself).
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceIterate {
    mat: Mat,
}

impl SubspaceIterate {
    /// Validate `||Z^T Z - I||_max <=` [`ORTHONORMALITY_TOL`].
    pub fn new(mat: Mat) -> Result<Self, LinalgError> {
        if mat.rows() < mat.cols() {
            return Err(LinalgError::DimMismatch {
                op: "SubspaceIterate::new",
                detail: format!("{}x{} has more columns than rows", mat.rows(), mat.cols()),
            });
        }
        let gram = mat.transpose_matmul(&mat);
        let mut dev = 0.0f64;
        for i in 0..gram.rows() {
            for j in 0..gram.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram[(i, j)] - target).abs());
            }
        }
        if dev > ORTHONORMALITY_TOL {
            return Err(LinalgError::NotOrthonormal { dev });
        }
        Ok(SubspaceIterate { mat })
    }

    /// Wrap a matrix that is orthonormal by construction (fresh QR output).
    pub(crate) fn from_qr(mat: Mat) -> Self {
        SubspaceIterate { mat }
    }

    /// Ambient dimension d.
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    /// Number of columns r.
    pub fn rank(&self) -> usize {
        self.mat.cols()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }
}

/// Upper-triangular factor with strictly positive diagonal, as produced by
/// [`qr_orthonormalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct UpperTriangular {
    mat: Mat,
}

impl UpperTriangular {
    pub fn new(mat: Mat) -> Result<Self, LinalgError> {
        if mat.rows() != mat.cols() {
            return Err(LinalgError::DimMismatch {
                op: "UpperTriangular::new",
                detail: format!("{}x{} is not square", mat.rows(), mat.cols()),
            });
        }
        for i in 0..mat.rows() {
            if !(mat[(i, i)] > 0.0) {
                return Err(LinalgError::NotUpperTriangular);
            }
            for j in 0..i {
                if mat[(i, j)] != 0.0 {
                    return Err(LinalgError::NotUpperTriangular);
                }
            }
        }
        Ok(UpperTriangular { mat })
    }

    pub(crate) fn from_qr(mat: Mat) -> Self {
        UpperTriangular { mat }
    }

    /// Identity factor, the natural "no orthonormalization yet" placeholder.
    pub fn identity(n: usize) -> Self {
        UpperTriangular {
            mat: Mat::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    /// Right-division `X * R^{-1}` by back-substitution over columns; the
    /// inverse is never formed explicitly.
    ///
    /// Solves `W R = X` column by column: the j-th column of `W` only depends
    /// on columns before it, so a forward pass suffices.
    pub fn solve_right(&self, x: &Mat) -> Result<Mat, LinalgError> {
        let r = self.dim();
        if x.cols() != r {
            return Err(LinalgError::DimMismatch {
                op: "UpperTriangular::solve_right",
                detail: format!("X has {} columns, R is {r}x{r}", x.cols()),
            });
        }
        for j in 0..r {
            if self.mat[(j, j)] == 0.0 || !self.mat[(j, j)].is_finite() {
                return Err(LinalgError::SingularFactor);
            }
        }
        let mut w = Mat::zeros(x.rows(), r);
        for j in 0..r {
            let diag = self.mat[(j, j)];
            for i in 0..x.rows() {
                let mut acc = x[(i, j)];
                for l in 0..j {
                    acc -= w[(i, l)] * self.mat[(l, j)];
                }
                w[(i, j)] = acc / diag;
            }
        }
        Ok(w)
    }
}

/// Gram matrix `(1/n) A^T A` of an n-by-d matrix, accumulated row by row and
/// symmetrized explicitly.
pub fn gram(a: &Mat) -> SymmetricPsd {
    let n = a.rows();
    let d = a.cols();
    let mut m = Mat::zeros(d, d);
    for k in 0..n {
        let row = a.row(k);
        for i in 0..d {
            let aki = row[i];
            if aki == 0.0 {
                continue;
            }
            for j in i..d {
                m[(i, j)] += aki * row[j];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for i in 0..d {
        for j in i..d {
            let v = m[(i, j)] * inv_n;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymmetricPsd { mat: m }
}

/// `Y = M Z`: one local power step.
pub fn gram_multiply(m: &SymmetricPsd, z: &SubspaceIterate) -> Result<Mat, LinalgError> {
    if m.dim() != z.dim() {
        return Err(LinalgError::DimMismatch {
            op: "gram_multiply",
            detail: format!("M is {0}x{0}, Z is {1}x{2}", m.dim(), z.dim(), z.rank()),
        });
    }
    Ok(m.mat().matmul(z.mat()))
}
