//! Independent reference implementations used to check the scheduler and
//! simulator. Nothing here shares code with the implementation under test
//! beyond the data types; each oracle is the slow, obvious version.

pub mod brute;
pub mod replay;
pub mod reservation;
pub mod scenarios;
pub mod transitions;

use std::collections::BTreeMap;

use hybridsched_core::model::{JobId, JobSpec};
use hybridsched_core::sim::SubmissionTrace;

/// Job specs keyed by the id the simulator assigns (trace index + 1).
pub fn specs_of(trace: &SubmissionTrace) -> BTreeMap<JobId, JobSpec> {
    trace
        .jobs
        .iter()
        .enumerate()
        .map(|(i, j)| (JobId(i as u64 + 1), j.spec.clone()))
        .collect()
}
