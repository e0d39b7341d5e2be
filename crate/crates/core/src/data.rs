//! Data handling: LIBSVM parsing, synthetic matrices with a prescribed
//! spectrum, seeded row partitioning into worker shards, and measurement of
//! how far shard Gram matrices stray from the global one.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{
    gram, qr_orthonormalize, row_coherence, spectral_norm, LinalgError, Mat, SymmetricPsd,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: malformed token {token:?}")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: feature indices must be strictly increasing (index {index})")]
    NonIncreasingIndex { line: usize, index: usize },
    #[error("line {line}: feature index {index} exceeds the declared dimension {expected_dim}")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        expected_dim: usize,
    },
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("cannot split {n} rows into {m} shards")]
    TooManyShards { m: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Dense n-by-d data matrix with finite entries; rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    mat: Mat,
}

impl DataMatrix {
    pub fn new(mat: Mat) -> Result<Self, DataError> {
        if !mat.is_finite() {
            return Err(DataError::InvalidParameter(
                "data matrix contains non-finite entries".into(),
            ));
        }
        Ok(DataMatrix { mat })
    }

    pub fn rows(&self) -> usize {
        self.mat.rows()
    }

    pub fn dim(&self) -> usize {
        self.mat.cols()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    /// Gram matrix `(1/n) A^T A`.
    pub fn gram(&self) -> SymmetricPsd {
        gram(&self.mat)
    }

    /// Row coherence of the column space; see [`row_coherence`].
    pub fn row_coherence(&self) -> Result<f64, DataError> {
        Ok(row_coherence(&self.mat)?)
    }
}

/// Parse LIBSVM-format text: one sample per non-empty line,
/// `<label> <index>:<value> …` with 1-based, strictly increasing indices.
/// Labels are parsed (they must at least be numbers) and discarded. The
/// resulting dense dimension is the largest feature index seen, or
/// `expected_dim` when that is larger; indices beyond a provided
/// `expected_dim` are an error.
pub fn parse_libsvm(
    reader: impl BufRead,
    expected_dim: Option<usize>,
) -> Result<DataMatrix, DataError> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_no + 1;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue; // blank line
        };
        if label.parse::<f64>().is_err() {
            return Err(DataError::MalformedToken {
                line: line_no,
                token: label.into(),
            });
        }
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let Some((idx_str, val_str)) = tok.split_once(':') else {
                return Err(DataError::MalformedToken {
                    line: line_no,
                    token: tok.into(),
                });
            };
            let index: usize = idx_str.parse().map_err(|_| DataError::MalformedToken {
                line: line_no,
                token: tok.into(),
            })?;
            let value: f64 = val_str.parse().map_err(|_| DataError::MalformedToken {
                line: line_no,
                token: tok.into(),
            })?;
            if index == 0 {
                return Err(DataError::MalformedToken {
                    line: line_no,
                    token: tok.into(),
                });
            }
            if !value.is_finite() {
                return Err(DataError::MalformedToken {
                    line: line_no,
                    token: tok.into(),
                });
            }
            if index <= prev_index {
                return Err(DataError::NonIncreasingIndex {
                    line: line_no,
                    index,
                });
            }
            if let Some(ed) = expected_dim {
                if index > ed {
                    return Err(DataError::IndexOutOfRange {
                        line: line_no,
                        index,
                        expected_dim: ed,
                    });
                }
            }
            prev_index = index;
            row.push((index, value));
        }
        max_index = max_index.max(prev_index);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let d = max_index.max(expected_dim.unwrap_or(0));
    if d == 0 {
        return Err(DataError::EmptyInput);
    }
    let mut mat = Mat::zeros(rows.len(), d);
    for (i, row) in rows.iter().enumerate() {
        for &(index, value) in row {
            mat[(i, index - 1)] = value;
        }
    }
    DataMatrix::new(mat)
}

/// Load a LIBSVM file, transparently decompressing gzip input (detected by
/// the `1f 8b` magic bytes, not the file extension).
pub fn load_libsvm(path: &Path, expected_dim: Option<usize>) -> Result<DataMatrix, DataError> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut decoded = Vec::new();
        flate2::read::GzDecoder::new(&raw[..]).read_to_end(&mut decoded)?;
        parse_libsvm(&decoded[..], expected_dim)
    } else {
        parse_libsvm(&raw[..], expected_dim)
    }
}

/// Serialize a dense matrix back to LIBSVM text (label 0, nonzero entries
/// only, shortest round-trip float formatting). Together with
/// [`parse_libsvm`] and an explicit `expected_dim` this is an exact
/// round trip.
pub fn write_libsvm(a: &DataMatrix, mut w: impl Write) -> Result<(), DataError> {
    for i in 0..a.rows() {
        write!(w, "0")?;
        for (j, &v) in a.mat().row(i).iter().enumerate() {
            if v != 0.0 {
                write!(w, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Recipe for a synthetic matrix whose Gram spectrum is prescribed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    /// Target eigenvalues of `(1/n) A^T A`, descending and non-negative.
    pub sigmas: Vec<f64>,
    /// Number of rows; must be at least the number of eigenvalues.
    pub n: usize,
    pub seed: u64,
}

impl SpectrumSpec {
    pub fn new(sigmas: Vec<f64>, n: usize, seed: u64) -> Result<Self, DataError> {
        if sigmas.is_empty() {
            return Err(DataError::InvalidParameter("empty spectrum".into()));
        }
        if n < sigmas.len() {
            return Err(DataError::InvalidParameter(format!(
                "n = {} rows cannot carry {} spectrum entries",
                n,
                sigmas.len()
            )));
        }
        for w in sigmas.windows(2) {
            if w[1] > w[0] {
                return Err(DataError::InvalidParameter(
                    "spectrum must be non-increasing".into(),
                ));
            }
        }
        if sigmas.last().copied().unwrap_or(0.0) < 0.0 {
            return Err(DataError::InvalidParameter(
                "spectrum entries must be non-negative".into(),
            ));
        }
        Ok(SpectrumSpec { sigmas, n, seed })
    }

    /// Geometric spectrum `sigma_j = ratio^j` (j = 0..d-1), leading value 1.
    pub fn geometric(d: usize, ratio: f64, n: usize, seed: u64) -> Result<Self, DataError> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(DataError::InvalidParameter(format!(
                "geometric ratio must lie in (0, 1], got {ratio}"
            )));
        }
        let sigmas = (0..d).map(|j| ratio.powi(j as i32)).collect();
        Self::new(sigmas, n, seed)
    }
}

/// Build `A = U diag(sqrt(n * sigma_j)) V^T` from seeded Gaussian draws:
/// `U` (n-by-d) and `V` (d-by-d) are QR-orthonormalized Gaussian matrices
/// drawn in that order from one ChaCha stream, so the construction is fully
/// reproducible. The Gram matrix `(1/n) A^T A = V diag(sigma) V^T` then has
/// exactly the requested spectrum (up to rounding).
pub fn synthetic_spectrum(spec: &SpectrumSpec) -> Result<DataMatrix, DataError> {
    let d = spec.sigmas.len();
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gu = Mat::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let gv = Mat::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let (u, _) = qr_orthonormalize(&gu)?;
    let (v, _) = qr_orthonormalize(&gv)?;
    let scales: Vec<f64> = spec.sigmas.iter().map(|s| (n as f64 * s).sqrt()).collect();
    // A[i][j] = sum_l U[i][l] * scale_l * V[j][l]
    let mut a = Mat::zeros(n, d);
    for i in 0..n {
        for (l, &scale) in scales.iter().enumerate() {
            let f = u.mat()[(i, l)] * scale;
            if f == 0.0 {
                continue;
            }
            for j in 0..d {
                a[(i, j)] += f * v.mat()[(j, l)];
            }
        }
    }
    DataMatrix::new(a)
}

/// Row-wise split of a data matrix across `m` workers, with shard Gram
/// matrices, shard weights `p_i = s_i / n`, and the partition-independent
/// global Gram.
#[derive(Debug, Clone)]
pub struct Partition {
    shards: Vec<DataMatrix>,
    sizes: Vec<usize>,
    weights: Vec<f64>,
    local_grams: Vec<SymmetricPsd>,
    global_gram: SymmetricPsd,
}

impl Partition {
    /// Shuffle rows with a seeded Fisher–Yates permutation, then split
    /// contiguously: the first `n mod m` shards receive `ceil(n/m)` rows,
    /// the rest `floor(n/m)`. The global Gram is computed from `A` in its
    /// original row order, so it is identical across all partitions of the
    /// same matrix.
    pub fn uniform(a: &DataMatrix, m: usize, seed: u64) -> Result<Self, DataError> {
        let n = a.rows();
        if m == 0 {
            return Err(DataError::InvalidParameter(
                "partition needs at least one shard".into(),
            ));
        }
        if m > n {
            return Err(DataError::TooManyShards { m, n });
        }
        let global_gram = a.gram();

        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let base = n / m;
        let extra = n % m;
        let mut shards = Vec::with_capacity(m);
        let mut sizes = Vec::with_capacity(m);
        let mut cursor = 0usize;
        for i in 0..m {
            let size = base + usize::from(i < extra);
            let mut shard = Mat::zeros(size, a.dim());
            for (local, &row_idx) in order[cursor..cursor + size].iter().enumerate() {
                shard.row_mut(local).copy_from_slice(a.mat().row(row_idx));
            }
            cursor += size;
            shards.push(DataMatrix::new(shard)?);
            sizes.push(size);
        }
        // A single shard holds the whole matrix, so its Gram *is* the global
        // one; reusing it keeps the m = 1 case exact to the bit.
        let local_grams = if m == 1 {
            vec![global_gram.clone()]
        } else {
            shards.iter().map(|s| s.gram()).collect()
        };
        let weights = sizes.iter().map(|&s| s as f64 / n as f64).collect();
        Ok(Partition {
            shards,
            sizes,
            weights,
            local_grams,
            global_gram,
        })
    }

    /// Assemble a partition from explicit shards (test scaffolding and
    /// deliberately skewed splits). The global Gram comes from the row
    /// concatenation of the shards in the given order.
    pub fn from_shards(shards: Vec<DataMatrix>) -> Result<Self, DataError> {
        if shards.is_empty() {
            return Err(DataError::InvalidParameter(
                "partition needs at least one shard".into(),
            ));
        }
        let d = shards[0].dim();
        if shards.iter().any(|s| s.dim() != d) {
            return Err(DataError::InvalidParameter(
                "shards disagree on dimension".into(),
            ));
        }
        let n: usize = shards.iter().map(|s| s.rows()).sum();
        let mut all = Mat::zeros(n, d);
        let mut cursor = 0usize;
        for s in &shards {
            for i in 0..s.rows() {
                all.row_mut(cursor + i).copy_from_slice(s.mat().row(i));
            }
            cursor += s.rows();
        }
        let global_gram = gram(&all);
        let local_grams: Vec<SymmetricPsd> = if shards.len() == 1 {
            vec![global_gram.clone()]
        } else {
            shards.iter().map(|s| s.gram()).collect()
        };
        let sizes: Vec<usize> = shards.iter().map(|s| s.rows()).collect();
        let weights = sizes.iter().map(|&s| s as f64 / n as f64).collect();
        Ok(Partition {
            shards,
            sizes,
            weights,
            local_grams,
            global_gram,
        })
    }

    pub fn num_shards(&self) -> usize {
        self.shards.len()
    }

    pub fn total_rows(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.global_gram.dim()
    }

    pub fn shards(&self) -> &[DataMatrix] {
        &self.shards
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Shard weights `p_i = s_i / n`, summing to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn local_grams(&self) -> &[SymmetricPsd] {
        &self.local_grams
    }

    pub fn global_gram(&self) -> &SymmetricPsd {
        &self.global_gram
    }
}

/// Largest relative shard deviation
/// `eta = max_i ||M - M_i|| / ||M||` (spectral norms).
pub fn measured_eta(p: &Partition) -> Result<f64, DataError> {
    let m_norm = spectral_norm(p.global_gram().mat());
    if m_norm == 0.0 {
        return Err(DataError::Linalg(LinalgError::ZeroMatrix));
    }
    let mut eta = 0.0f64;
    for local in p.local_grams() {
        let diff = p.global_gram().mat().sub(local.mat());
        eta = eta.max(spectral_norm(&diff) / m_norm);
    }
    Ok(eta)
}

/// Shard size sufficient for the deviation bound to hold with probability
/// `1 - delta` under uniform row sampling:
/// `ceil((3 * mu * rank / eta^2) * ln(rank * m / delta))`.
pub fn required_local_size(
    eta: f64,
    delta: f64,
    rank: usize,
    mu: f64,
    m: usize,
) -> Result<u64, DataError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(DataError::InvalidParameter(format!(
            "eta must lie in (0, 1), got {eta}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(DataError::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if rank == 0 || m == 0 {
        return Err(DataError::InvalidParameter(
            "rank and shard count must be positive".into(),
        ));
    }
    if mu < 1.0 {
        return Err(DataError::InvalidParameter(format!(
            "coherence is at least 1, got {mu}"
        )));
    }
    let value = (3.0 * mu * rank as f64 / (eta * eta)) * ((rank as f64 * m as f64) / delta).ln();
    Ok(value.ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_small_libsvm_block() {
        let text = "+1 1:0.5 3:2.0\n-1 2:1.5\n";
        let a = parse_libsvm(text.as_bytes(), None).unwrap();
        assert_eq!(a.rows(), 2);
        assert_eq!(a.dim(), 3);
        assert_eq!(a.mat()[(0, 0)], 0.5);
        assert_eq!(a.mat()[(0, 1)], 0.0);
        assert_eq!(a.mat()[(0, 2)], 2.0);
        assert_eq!(a.mat()[(1, 1)], 1.5);
    }

    #[test]
    fn parse_skips_blank_lines_and_honors_expected_dim() {
        let text = "1 1:1\n\n  \n0 2:3\n";
        let a = parse_libsvm(text.as_bytes(), Some(5)).unwrap();
        assert_eq!(a.rows(), 2);
        assert_eq!(a.dim(), 5);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_token = "1 1:0.5\nx 2:1\n";
        match parse_libsvm(bad_token.as_bytes(), None) {
            Err(DataError::MalformedToken { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected: {other:?}"),
        }
        let non_increasing = "1 2:1 2:2\n";
        match parse_libsvm(non_increasing.as_bytes(), None) {
            Err(DataError::NonIncreasingIndex { line, index }) => {
                assert_eq!((line, index), (1, 2));
            }
            other => panic!("unexpected: {other:?}"),
        }
        let out_of_range = "1 1:1\n1 7:1\n";
        match parse_libsvm(out_of_range.as_bytes(), Some(5)) {
            Err(DataError::IndexOutOfRange { line, index, .. }) => {
                assert_eq!((line, index), (2, 7));
            }
            other => panic!("unexpected: {other:?}"),
        }
        let zero_index = "1 0:1\n";
        assert!(matches!(
            parse_libsvm(zero_index.as_bytes(), None),
            Err(DataError::MalformedToken { .. })
        ));
        let missing_colon = "1 1\n";
        assert!(matches!(
            parse_libsvm(missing_colon.as_bytes(), None),
            Err(DataError::MalformedToken { .. })
        ));
        assert!(matches!(
            parse_libsvm("".as_bytes(), None),
            Err(DataError::EmptyInput)
        ));
    }

    #[test]
    fn libsvm_round_trip_is_identity() {
        let text = "1 1:0.25 2:-3.5 4:1e-3\n2 3:7\n3 1:0.1\n";
        let a = parse_libsvm(text.as_bytes(), Some(4)).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&a, &mut buf).unwrap();
        let b = parse_libsvm(&buf[..], Some(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gzip_magic_is_detected() {
        use std::io::Write as _;
        let text = "1 1:2 2:3\n1 2:5\n";
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(text.as_bytes()).unwrap();
        let gz = enc.finish().unwrap();

        let dir = std::env::temp_dir().join(format!("lp-gz-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let gz_path = dir.join("tiny.gz");
        let plain_path = dir.join("tiny.txt");
        std::fs::write(&gz_path, &gz).unwrap();
        std::fs::write(&plain_path, text).unwrap();

        let a = load_libsvm(&gz_path, None).unwrap();
        let b = load_libsvm(&plain_path, None).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn synthetic_spectrum_reproduces_requested_eigenvalues() {
        // Isotropic case: all-ones spectrum.
        let spec = SpectrumSpec::new(vec![1.0; 6], 40, 3).unwrap();
        let a = synthetic_spectrum(&spec).unwrap();
        let (_, sig) = crate::linalg::reference_topk(&a.gram(), 1, 1e-13).unwrap();
        for (j, &s) in sig.iter().enumerate() {
            assert!((s - 1.0).abs() <= 1e-8, "sigma_{j} = {s}");
        }
        // Two-point spectrum (4, 1).
        let spec = SpectrumSpec::new(vec![4.0, 1.0], 30, 7).unwrap();
        let a = synthetic_spectrum(&spec).unwrap();
        let (_, sig) = crate::linalg::reference_topk(&a.gram(), 1, 1e-13).unwrap();
        assert!((sig[0] - 4.0).abs() <= 1e-8 * 4.0);
        assert!((sig[1] - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn synthetic_spectrum_is_seed_deterministic() {
        let spec = SpectrumSpec::geometric(5, 0.8, 20, 11).unwrap();
        let a = synthetic_spectrum(&spec).unwrap();
        let b = synthetic_spectrum(&spec).unwrap();
        assert_eq!(a.mat().as_slice(), b.mat().as_slice());
        let other = synthetic_spectrum(&SpectrumSpec::geometric(5, 0.8, 20, 12).unwrap()).unwrap();
        assert_ne!(a.mat().as_slice(), other.mat().as_slice());
    }

    #[test]
    fn spectrum_spec_validates_shape() {
        assert!(SpectrumSpec::new(vec![], 10, 0).is_err());
        assert!(SpectrumSpec::new(vec![1.0, 2.0], 10, 0).is_err()); // increasing
        assert!(SpectrumSpec::new(vec![1.0, -0.1], 10, 0).is_err());
        assert!(SpectrumSpec::new(vec![1.0; 11], 10, 0).is_err()); // n < d
        assert!(SpectrumSpec::new(vec![1.0, 0.0], 2, 0).is_ok()); // zeros allowed
    }

    fn small_matrix(n: usize, d: usize, salt: u64) -> DataMatrix {
        let spec = SpectrumSpec::geometric(d, 0.9, n, salt).unwrap();
        synthetic_spectrum(&spec).unwrap()
    }

    #[test]
    fn uniform_partition_sizes_and_weights() {
        let a = small_matrix(11, 3, 1);
        let p = Partition::uniform(&a, 4, 0).unwrap();
        assert_eq!(p.sizes(), &[3, 3, 3, 2]); // 11 = 3+3+3+2
        let total: f64 = p.weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert_eq!(p.total_rows(), 11);
    }

    #[test]
    fn uniform_partition_is_deterministic_and_seed_sensitive() {
        let a = small_matrix(20, 3, 2);
        let p1 = Partition::uniform(&a, 3, 5).unwrap();
        let p2 = Partition::uniform(&a, 3, 5).unwrap();
        for (s1, s2) in p1.shards().iter().zip(p2.shards()) {
            assert_eq!(s1.mat().as_slice(), s2.mat().as_slice());
        }
        let p3 = Partition::uniform(&a, 3, 6).unwrap();
        let same = p1
            .shards()
            .iter()
            .zip(p3.shards())
            .all(|(a, b)| a.mat().as_slice() == b.mat().as_slice());
        assert!(!same, "different seeds should shuffle differently");
    }

    #[test]
    fn single_shard_gram_is_bitwise_global() {
        let a = small_matrix(16, 4, 3);
        let p = Partition::uniform(&a, 1, 9).unwrap();
        assert_eq!(
            p.local_grams()[0].mat().as_slice(),
            p.global_gram().mat().as_slice()
        );
    }

    #[test]
    fn too_many_shards_is_an_error() {
        let a = small_matrix(5, 2, 4);
        assert!(matches!(
            Partition::uniform(&a, 6, 0),
            Err(DataError::TooManyShards { m: 6, n: 5 })
        ));
        assert!(Partition::uniform(&a, 0, 0).is_err());
    }

    #[test]
    fn weighted_shard_grams_mix_back_to_global() {
        let a = small_matrix(23, 4, 5);
        let p = Partition::uniform(&a, 5, 1).unwrap();
        let mut mix = Mat::zeros(4, 4);
        for (w, local) in p.weights().iter().zip(p.local_grams()) {
            mix.add_scaled(*w, local.mat());
        }
        let diff = mix.sub(p.global_gram().mat()).max_abs();
        let scale = p.global_gram().mat().max_abs();
        assert!(diff <= 1e-10 * scale, "mixture deviation {diff}");
    }

    #[test]
    fn concatenated_shards_reproduce_global_gram() {
        let a = small_matrix(17, 3, 6);
        let p = Partition::uniform(&a, 4, 2).unwrap();
        let rebuilt = Partition::from_shards(p.shards().to_vec()).unwrap();
        let diff = rebuilt
            .global_gram()
            .mat()
            .sub(p.global_gram().mat())
            .max_abs();
        assert!(diff <= 1e-12 * p.global_gram().mat().max_abs().max(1e-300));
    }

    #[test]
    fn identical_shards_have_zero_eta() {
        // Stack the same block m times and split along the block boundary:
        // every local Gram equals the global one exactly.
        let block = small_matrix(8, 3, 7);
        let p = Partition::from_shards(vec![block.clone(), block.clone(), block]).unwrap();
        let eta = measured_eta(&p).unwrap();
        assert!(eta <= 1e-12, "eta = {eta}");
    }

    #[test]
    fn eta_of_zero_matrix_errors() {
        let a = DataMatrix::new(Mat::zeros(4, 2)).unwrap();
        let p = Partition::uniform(&a, 2, 0).unwrap();
        assert!(measured_eta(&p).is_err());
    }

    #[test]
    fn eta_shrinks_with_larger_shards() {
        // Mean over seeds: quartering the shard count must cut the max
        // deviation. n = 2000 keeps this quick but statistically safe.
        let mut mean_small_shards = 0.0;
        let mut mean_large_shards = 0.0;
        let seeds = 10;
        for seed in 0..seeds {
            let a = small_matrix(2000, 10, 100 + seed);
            let p64 = Partition::uniform(&a, 40, seed).unwrap();
            let p4 = Partition::uniform(&a, 4, seed).unwrap();
            mean_small_shards += measured_eta(&p64).unwrap();
            mean_large_shards += measured_eta(&p4).unwrap();
        }
        mean_small_shards /= seeds as f64;
        mean_large_shards /= seeds as f64;
        assert!(
            mean_large_shards < mean_small_shards,
            "eta means: m=4 {mean_large_shards} vs m=40 {mean_small_shards}"
        );
    }

    #[test]
    fn required_local_size_golden_value() {
        // (3 * 2 * 5 / 0.25) * ln(5 * 4 / 0.1) = 120 * ln(200) = 635.798…
        assert_eq!(required_local_size(0.5, 0.1, 5, 2.0, 4).unwrap(), 636);
    }

    #[test]
    fn required_local_size_validates_inputs() {
        assert!(required_local_size(0.0, 0.1, 5, 2.0, 4).is_err());
        assert!(required_local_size(1.0, 0.1, 5, 2.0, 4).is_err());
        assert!(required_local_size(0.5, 0.0, 5, 2.0, 4).is_err());
        assert!(required_local_size(0.5, 0.1, 0, 2.0, 4).is_err());
        assert!(required_local_size(0.5, 0.1, 5, 0.5, 4).is_err());
        assert!(required_local_size(0.5, 0.1, 5, 2.0, 0).is_err());
    }

    #[test]
    fn required_local_size_monotone_in_eta_and_delta() {
        let base = required_local_size(0.5, 0.1, 5, 2.0, 4).unwrap();
        assert!(required_local_size(0.25, 0.1, 5, 2.0, 4).unwrap() > base);
        assert!(required_local_size(0.5, 0.01, 5, 2.0, 4).unwrap() > base);
    }
}
