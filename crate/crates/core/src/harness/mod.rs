//! Instance generation, file formats, solver dispatch and benchmarking.

pub mod bench;
pub mod generate;
pub mod io;

use std::fmt;
use std::str::FromStr;

use crate::constant_approx::{constant_with, ConstantOptions};
use crate::error::{Error, Result};
use crate::geometry::{Instance, ObjectiveKind};
use crate::oracle::exact_chromatic;
use crate::peeling::{peeling_baseline, solve_full_kcmeans_sampling, solve_peeling, PeelingConfig};
use crate::report::SolveReport;

/// Weiszfeld tolerance used by the exhaustive oracles.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    ConstantMeans,
    ConstantMedians,
    PeelMeans,
    PeelMedians,
    FullSampling,
    OracleMeans,
    OracleMedians,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::ConstantMeans,
        Algorithm::ConstantMedians,
        Algorithm::PeelMeans,
        Algorithm::PeelMedians,
        Algorithm::FullSampling,
        Algorithm::OracleMeans,
        Algorithm::OracleMedians,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ConstantMeans => "constant-means",
            Algorithm::ConstantMedians => "constant-medians",
            Algorithm::PeelMeans => "peel-means",
            Algorithm::PeelMedians => "peel-medians",
            Algorithm::FullSampling => "full-sampling",
            Algorithm::OracleMeans => "oracle-means",
            Algorithm::OracleMedians => "oracle-medians",
        }
    }

    pub fn kind(self) -> ObjectiveKind {
        match self {
            Algorithm::ConstantMedians | Algorithm::PeelMedians | Algorithm::OracleMedians => {
                ObjectiveKind::Medians
            }
            _ => ObjectiveKind::Means,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

/// Runs one solver. Randomized solvers draw every stream from `cfg.seed`.
pub fn run_solver(inst: &Instance, algo: Algorithm, cfg: &PeelingConfig) -> Result<SolveReport> {
    let kind = algo.kind();
    match algo {
        Algorithm::ConstantMeans | Algorithm::ConstantMedians => {
            cfg.validate()?;
            let baseline = peeling_baseline(inst, kind, cfg)?;
            let mut rep = constant_with(inst, &baseline, kind, &ConstantOptions::default())?;
            rep.seed = cfg.seed;
            Ok(rep)
        }
        Algorithm::PeelMeans | Algorithm::PeelMedians => solve_peeling(inst, kind, cfg),
        Algorithm::FullSampling => solve_full_kcmeans_sampling(inst, cfg),
        Algorithm::OracleMeans | Algorithm::OracleMedians => exact_chromatic(inst, kind, ORACLE_TOL),
    }
}

/// Process exit code for an error: 1 for I/O, 2 for invalid input, 3 for
/// solver failures and 4 for budget refusals.
pub fn exit_code(err: &Error) -> i32 {
    if matches!(err, Error::Io(_)) {
        1
    } else if err.is_validation() {
        2
    } else if err.is_budget() {
        4
    } else {
        3
    }
}
