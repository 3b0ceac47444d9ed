//! Hand-enumerated lifecycle table, written out as a literal.

use hybridsched_core::model::{JobState, LifecycleEvent};

/// Rows follow `JobState::ALL`, columns follow `LifecycleEvent::ALL`:
/// Validated, Scheduled, Started, Finished, Errored, CancelRequested,
/// WalltimeExceeded, NodeLost.
///
/// `.` is an invalid pair; `*` is NodeLost, which requeues when retries
/// remain and fails otherwise.
const TABLE: [&str; 8] = [
    // Va Sc St Fi Er Ca Wa No
    "Q  .  .  .  .  X  .  .", // Submitted
    ".  D  .  .  F  X  .  .", // Queued
    ".  .  R  .  .  X  .  .", // Dispatched
    ".  .  .  C  F  X  T  *", // Running
    ".  .  .  .  .  .  .  .", // Completed
    ".  .  .  .  .  .  .  .", // Failed
    ".  .  .  .  .  .  .  .", // Cancelled
    ".  .  .  .  .  .  .  .", // TimedOut
];

/// Expected verdict for a pair: `None` for an invalid transition.
pub fn expected(state: JobState, event: LifecycleEvent, retries_left: u32) -> Option<JobState> {
    let row = JobState::ALL.iter().position(|&s| s == state).expect("known state");
    let col = LifecycleEvent::ALL.iter().position(|&e| e == event).expect("known event");
    let cell = TABLE[row].split_whitespace().nth(col).expect("8 columns");
    match cell {
        "." => None,
        "Q" => Some(JobState::Queued),
        "D" => Some(JobState::Dispatched),
        "R" => Some(JobState::Running),
        "C" => Some(JobState::Completed),
        "F" => Some(JobState::Failed),
        "X" => Some(JobState::Cancelled),
        "T" => Some(JobState::TimedOut),
        "*" if retries_left > 0 => Some(JobState::Queued),
        "*" => Some(JobState::Failed),
        other => panic!("bad table cell {other}"),
    }
}
