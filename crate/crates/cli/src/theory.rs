//! `theory` subcommand: evaluate the bound calculators for a given spectrum
//! without running anything.

use serde::Serialize;

use localpower_core::diagnostics::{
    baseline_comm_bound, initial_tangent_bound, theory_report, DiagnosticsError, TheoryReport,
};

#[derive(Debug, Serialize)]
pub struct TheoryOutput {
    #[serde(flatten)]
    pub report: TheoryReport,
    pub baseline_comms: u64,
    pub initial_tangent: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    sigmas: &[f64],
    k: usize,
    r: usize,
    delta: usize,
    eta: f64,
    eps: f64,
    tau: f64,
) -> Result<TheoryOutput, DiagnosticsError> {
    let report = theory_report(sigmas, k, r, delta, eta, eps, tau)?;
    Ok(TheoryOutput {
        baseline_comms: baseline_comm_bound(sigmas, k, eps, sigmas.len())?,
        initial_tangent: initial_tangent_bound(sigmas.len(), r, k, tau),
        report,
    })
}
