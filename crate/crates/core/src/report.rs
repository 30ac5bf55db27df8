use std::time::Duration;

use crate::error::{Error, Result};
use crate::geometry::{objective_of, CenterTuple, ChromaticPartition, Instance, ObjectiveKind};

/// Outcome of one solver invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub algorithm: String,
    pub kind: ObjectiveKind,
    pub centers: CenterTuple,
    pub partition: ChromaticPartition,
    /// Normalized objective (divided by the number of groups).
    pub objective: f64,
    pub elapsed: Duration,
    pub seed: u64,
    /// Number of complete center tuples that were evaluated.
    pub candidates: u64,
    /// Set when pruning voided the approximation guarantee.
    pub heuristic: bool,
}

impl SolveReport {
    /// Recomputes the objective from the report's own centers and partition.
    pub fn recompute(&self, inst: &Instance) -> Result<f64> {
        objective_of(self.kind, inst, &self.centers, &self.partition)
    }

    /// Checks the partition and that the stored objective matches a
    /// recomputation to 1e-9 relative.
    pub fn check(&self, inst: &Instance) -> Result<()> {
        self.partition.validate(inst)?;
        let re = self.recompute(inst)?;
        if (re - self.objective).abs() > 1e-9 * re.abs().max(self.objective.abs()) {
            return Err(Error::InvalidPartition(format!(
                "reported objective {} but recomputed {}",
                self.objective, re
            )));
        }
        Ok(())
    }
}
