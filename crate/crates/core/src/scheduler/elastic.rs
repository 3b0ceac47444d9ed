//! Fair-share rescaling of running elastic jobs on a cloud pool.

use crate::model::{JobId, JobShape, JobState, Millis, WorkerSample};

use super::{NodeHolder, RescaleChange, SchedError, Scheduler};

/// Splits `pool` nodes among jobs given as `(min, max)` bounds in queue
/// order. Each job's share is `pool / n`, with the remainder handed out one
/// node at a time to the earliest jobs, then clamped to its bounds. If the
/// lower clamps overshoot the pool, the latest jobs give back down to their
/// minimum.
pub fn fair_shares(pool: u32, bounds: &[(u32, u32)]) -> Vec<u32> {
    let n = bounds.len() as u32;
    if n == 0 {
        return Vec::new();
    }
    let base = pool / n;
    let rem = pool % n;
    let mut shares: Vec<u32> = bounds
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| (base + u32::from((i as u32) < rem)).clamp(lo, hi))
        .collect();
    let mut total: u32 = shares.iter().sum();
    for (share, &(lo, _)) in shares.iter_mut().zip(bounds).rev() {
        if total <= pool {
            break;
        }
        let give = (*share - lo).min(total - pool);
        *share -= give;
        total -= give;
    }
    shares
}

impl Scheduler {
    /// Rebalances every running elastic job on cluster `ci`. Nodes reserved
    /// for a blocked head are never handed out.
    pub fn rescale_cluster(&mut self, ci: usize, now: Millis) -> Vec<RescaleChange> {
        let mut elastic: Vec<(u64, JobId)> = self
            .live
            .iter()
            .filter(|(j, l)| l.cluster == ci && self.jobs[j].spec.shape.is_elastic())
            .map(|(j, l)| (l.submit_seq, *j))
            .collect();
        if elastic.is_empty() {
            return Vec::new();
        }
        elastic.sort_unstable();

        let cluster_id = self.clusters[ci].id().to_string();
        let reserved: &[u32] = match &self.reservation {
            Some(r) if r.cluster_id == cluster_id => &r.node_indices,
            _ => &[],
        };
        let grantable: Vec<u32> = self.clusters[ci]
            .free_nodes()
            .filter(|n| reserved.binary_search(n).is_err())
            .collect();
        let held: u32 = elastic.iter().map(|(_, j)| self.live[j].workers).sum();
        let bounds: Vec<(u32, u32)> = elastic
            .iter()
            .map(|(_, j)| {
                let rec = &self.jobs[j];
                let JobShape::Elastic { min_workers, .. } = rec.spec.shape else {
                    unreachable!()
                };
                (min_workers, rec.max_workers().max(min_workers))
            })
            .collect();
        let targets = fair_shares(held + grantable.len() as u32, &bounds);

        let mut shrunk = Vec::new();
        let mut grown = Vec::new();
        // shrink first so growth can use the released nodes
        for (&(_, job), &target) in elastic.iter().zip(&targets) {
            let live = &self.live[&job];
            if target < live.workers {
                let drop: Vec<u32> = live.allocation.node_indices[target as usize..].to_vec();
                self.credit(job, now);
                let live = self.live.get_mut(&job).expect("live");
                live.allocation.node_indices.truncate(target as usize);
                live.workers = target;
                for n in drop {
                    self.clusters[ci].clear(n);
                }
                shrunk.push(job);
            }
        }
        for (&(_, job), &target) in elastic.iter().zip(&targets) {
            let workers = self.live[&job].workers;
            if target > workers {
                let reserved: Vec<u32> = match &self.reservation {
                    Some(r) if r.cluster_id == cluster_id => r.node_indices.clone(),
                    _ => Vec::new(),
                };
                let add: Vec<u32> = self.clusters[ci]
                    .free_nodes()
                    .filter(|n| reserved.binary_search(n).is_err())
                    .take((target - workers) as usize)
                    .collect();
                if add.is_empty() {
                    continue;
                }
                self.credit(job, now);
                for &n in &add {
                    self.clusters[ci].assign(n, NodeHolder::Job(job));
                }
                let live = self.live.get_mut(&job).expect("live");
                live.allocation.node_indices.extend(add);
                live.allocation.node_indices.sort_unstable();
                live.workers = live.allocation.node_indices.len() as u32;
                grown.push(job);
            }
        }

        // Shrinks are reported before grows so a sequential reader never
        // sees a node handed over before its previous holder lets go.
        shrunk.sort_unstable();
        grown.sort_unstable();
        shrunk
            .into_iter()
            .chain(grown)
            .map(|job| {
                let live = &self.live[&job];
                let change = RescaleChange {
                    job_id: job,
                    cluster_id: cluster_id.clone(),
                    workers: live.workers,
                    node_indices: live.allocation.node_indices.clone(),
                };
                let rec = self.jobs.get_mut(&job).expect("live job is registered");
                rec.allocation = Some(live.allocation.clone());
                rec.worker_history.push(WorkerSample {
                    time_ms: now,
                    worker_count: live.workers,
                });
                change
            })
            .collect()
    }

    /// Rescales the cluster hosting `job_id` and returns the job's new
    /// worker count.
    pub fn rescale_elastic(&mut self, job_id: JobId, now: Millis) -> Result<u32, SchedError> {
        let rec = self.jobs.get(&job_id).ok_or(SchedError::UnknownJob(job_id))?;
        if !rec.spec.shape.is_elastic() {
            return Err(SchedError::NotElastic(job_id));
        }
        if rec.state != JobState::Running {
            return Err(SchedError::NotRunning(job_id));
        }
        let ci = self.live[&job_id].cluster;
        self.rescale_cluster(ci, now);
        Ok(self.live[&job_id].workers)
    }

    /// Rescales every cluster that hosts elastic work.
    pub fn rescale_all(&mut self, now: Millis) -> Vec<RescaleChange> {
        let mut clusters: Vec<usize> = self
            .live
            .iter()
            .filter(|(j, _)| self.jobs[j].spec.shape.is_elastic())
            .map(|(_, l)| l.cluster)
            .collect();
        clusters.sort_unstable();
        clusters.dedup();
        clusters
            .into_iter()
            .flat_map(|ci| self.rescale_cluster(ci, now))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference split: integer division, remainder to the earliest jobs.
    fn reference(pool: u32, n: u32) -> Vec<u32> {
        (0..n).map(|i| pool / n + u32::from(i < pool % n)).collect()
    }

    #[test]
    fn single_job_takes_pool_up_to_max() {
        assert_eq!(fair_shares(4, &[(1, 8)]), vec![4]);
        assert_eq!(fair_shares(10, &[(1, 8)]), vec![8]);
    }

    #[test]
    fn equal_split_and_remainder_to_earliest() {
        assert_eq!(fair_shares(4, &[(1, 8), (1, 8)]), vec![2, 2]);
        assert_eq!(fair_shares(4, &[(1, 8); 3]), vec![2, 1, 1]);
        assert_eq!(fair_shares(4, &[(1, 8); 3]), reference(4, 3));
    }

    #[test]
    fn lower_clamp_overshoot_is_returned_by_latest_jobs() {
        assert_eq!(fair_shares(4, &[(3, 8), (1, 8)]), vec![3, 1]);
        assert_eq!(fair_shares(5, &[(1, 8), (1, 8), (3, 3)]), vec![1, 1, 3]);
    }

    proptest! {
        #[test]
        fn shares_respect_bounds_and_pool(
            raw in proptest::collection::vec((1u32..4, 0u32..6), 1..8),
            extra in 0u32..20,
        ) {
            let bounds: Vec<(u32, u32)> = raw.iter().map(|&(lo, d)| (lo, lo + d)).collect();
            let min_total: u32 = bounds.iter().map(|b| b.0).sum();
            let pool = min_total + extra;
            let shares = fair_shares(pool, &bounds);
            prop_assert!(shares.iter().sum::<u32>() <= pool);
            for (s, (lo, hi)) in shares.iter().zip(&bounds) {
                prop_assert!(lo <= s && s <= hi);
            }
            // unconstrained bounds reproduce the reference split
            let wide = vec![(0u32, u32::MAX); bounds.len()];
            prop_assert_eq!(fair_shares(pool, &wide), reference(pool, bounds.len() as u32));
        }
    }
}
