//! Verification harness: instances, generators, check suites, reports and search.

pub mod checks;
pub mod gen;
pub mod instance;
pub mod report;
pub mod search;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Caps, Error};

pub use checks::check_instance;
pub use gen::{generate, GenSpec};
pub use instance::{Certificate, DominanceKind, Instance, Params};
pub use report::{CheckRecord, Regime, Relation, Report, ReportMeta, Verdict};
pub use search::{search_hart_reny, Counterexample, SearchConfig, SearchOutcome, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Theorem1,
    Theorem2,
    Theorem3,
    Lemmas,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
            Suite::Theorem3 => "theorem3",
            Suite::Lemmas => "lemmas",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        [Suite::Theorem1, Suite::Theorem2, Suite::Theorem3, Suite::Lemmas, Suite::All]
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }
}

/// Checks every named instance; records are merged in input order whatever the
/// evaluation order was.
pub fn run_suite(suite: Suite, instances: &[(String, Instance)], caps: &Caps, seed: u64, timings: bool) -> Report {
    let records: Vec<Vec<CheckRecord>> =
        instances.par_iter().map(|(name, inst)| check_instance(suite, name, inst, caps, timings)).collect();
    Report::new(seed, suite.name(), records.into_iter().flatten().collect())
}
