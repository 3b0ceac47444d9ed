use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{JobId, ResourceKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub job_id: JobId,
    pub priority: i64,
    pub submit_seq: u64,
    /// Kinds this job may still be placed on, in the user's order of
    /// preference, after policy filtering.
    pub remaining_kind_preferences: Vec<ResourceKind>,
}

type QueueKey = (Reverse<i64>, u64, JobId);

fn key_of(e: &QueueEntry) -> QueueKey {
    (Reverse(e.priority), e.submit_seq, e.job_id)
}

/// Pending jobs in strict total order: higher priority first, then
/// submission sequence, then job id.
#[derive(Debug, Clone, Default)]
pub struct JobQueue {
    entries: BTreeMap<QueueKey, QueueEntry>,
    keys: HashMap<JobId, QueueKey>,
    next_seq: u64,
}

impl JobQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, job: JobId) -> bool {
        self.keys.contains_key(&job)
    }

    /// Inserts a job with the next submission sequence number. The caller
    /// guarantees the job is not already present.
    pub(crate) fn push(
        &mut self,
        job_id: JobId,
        priority: i64,
        remaining_kind_preferences: Vec<ResourceKind>,
    ) -> QueueEntry {
        debug_assert!(!self.contains(job_id));
        let entry = QueueEntry {
            job_id,
            priority,
            submit_seq: self.next_seq,
            remaining_kind_preferences,
        };
        self.next_seq += 1;
        let key = key_of(&entry);
        self.keys.insert(job_id, key);
        self.entries.insert(key, entry.clone());
        entry
    }

    pub(crate) fn remove(&mut self, job: JobId) -> Option<QueueEntry> {
        let key = self.keys.remove(&job)?;
        self.entries.remove(&key)
    }

    pub fn get(&self, job: JobId) -> Option<&QueueEntry> {
        self.keys.get(&job).and_then(|k| self.entries.get(k))
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueueEntry> {
        self.entries.values()
    }

    pub fn head(&self) -> Option<&QueueEntry> {
        self.entries.values().next()
    }

    pub fn job_ids(&self) -> Vec<JobId> {
        self.iter().map(|e| e.job_id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_priority_is_fifo() {
        let mut q = JobQueue::new();
        q.push(JobId(1), 0, vec![]);
        q.push(JobId(2), 0, vec![]);
        assert_eq!(q.job_ids(), vec![JobId(1), JobId(2)]);
    }

    #[test]
    fn priority_dominates_submission_order() {
        let mut q = JobQueue::new();
        q.push(JobId(1), 0, vec![]);
        q.push(JobId(2), 5, vec![]);
        assert_eq!(q.job_ids(), vec![JobId(2), JobId(1)]);
        assert_eq!(q.head().unwrap().job_id, JobId(2));
    }

    #[test]
    fn sequence_numbers_increase_across_removals() {
        let mut q = JobQueue::new();
        let a = q.push(JobId(1), 0, vec![]);
        q.remove(JobId(1));
        let b = q.push(JobId(1), 0, vec![]);
        assert!(b.submit_seq > a.submit_seq);
        assert!(q.remove(JobId(9)).is_none());
    }

    proptest! {
        #[test]
        fn order_matches_reference_sort(prios in proptest::collection::vec(-3i64..4, 1..100)) {
            let mut q = JobQueue::new();
            // ids deliberately not aligned with submission order
            let n = prios.len() as u64;
            let mut expected = Vec::new();
            for (i, p) in prios.iter().enumerate() {
                let id = JobId(n - i as u64);
                let e = q.push(id, *p, vec![]);
                expected.push((-p, e.submit_seq, id));
            }
            expected.sort();
            let want: Vec<JobId> = expected.into_iter().map(|(_, _, id)| id).collect();
            prop_assert_eq!(q.job_ids(), want);
        }
    }
}
