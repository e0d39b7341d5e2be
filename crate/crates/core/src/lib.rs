//! Simulator for distributed truncated eigendecomposition via local power
//! iterations with periodic aggregation.
//!
//! A data matrix `A` (n rows, d columns) is split row-wise across `m` workers.
//! Each worker holds the Gram matrix of its shard and runs power iterations on
//! a shared d-by-r iterate; at the steps of a synchronization schedule the
//! server averages the worker iterates (weighted by shard size) and broadcasts
//! the result. The crate provides:
//!
//! * [`linalg`] — dense kernels: Gram products, Householder QR with a fixed
//!   sign convention, a cyclic Jacobi eigensolver used as ground truth,
//!   spectral norms and principal-angle metrics;
//! * [`data`] — LIBSVM parsing, synthetic matrices with a prescribed
//!   spectrum, seeded row partitioning, shard-deviation measurement;
//! * [`schedules`] — synchronization schedules (fixed period, decaying
//!   period, one-shot, explicit steps) and their gap statistic;
//! * [`engine`] — the deterministic multi-worker iteration loop and its
//!   convergence trace;
//! * [`diagnostics`] — the residual decomposition of the aggregation noise
//!   and calculators for the theoretical admissibility bounds.
//!
//! Everything is seeded and sequential by default: the same inputs produce
//! bit-identical traces.

// Float validation throughout uses the negated form `!(x > 0.0)` on purpose:
// unlike `x <= 0.0`, it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod engine;
pub mod linalg;
pub mod schedules;

pub use data::{DataMatrix, Partition, SpectrumSpec};
pub use engine::{ConvergenceTrace, GroundTruth, RunConfig, TraceRecord};
pub use linalg::{Mat, SubspaceIterate, SymmetricPsd, UpperTriangular};
pub use schedules::SyncSchedule;
