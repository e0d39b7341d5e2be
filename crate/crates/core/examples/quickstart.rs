//! Minimal end-to-end use of the library: build a synthetic matrix with a
//! known Gram spectrum, shard it across four workers, run the iteration with
//! periodic averaging, and print the convergence trace.

use localpower_core::data::{synthetic_spectrum, Partition, SpectrumSpec};
use localpower_core::engine::{run, GroundTruth, RunConfig};
use localpower_core::schedules::SyncSchedule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SpectrumSpec::new(vec![4.0, 1.0, 0.25, 0.0625], 500, 7)?;
    let a = synthetic_spectrum(&spec)?;
    let truth = GroundTruth::compute(&a.gram(), 2, 1e-12)?;

    let parts = Partition::uniform(&a, 4, 0)?;
    let schedule = SyncSchedule::every_p(20, 4)?;
    let trace = run(&parts, &RunConfig::new(2, 3, schedule, 42), &truth)?;

    for rec in &trace.records {
        println!(
            "t = {:3}  comms = {:2}  dist = {:.3e}",
            rec.t, rec.comms, rec.dist
        );
    }
    Ok(())
}
