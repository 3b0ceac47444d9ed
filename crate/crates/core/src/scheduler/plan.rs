//! One planning pass: FIFO/priority order, a single reservation for the
//! blocked head, conservative backfilling behind it.

use crate::model::{Allocation, JobId, JobShape, Millis};

use super::{DispatchDecision, NodeHolder, Reclaim, Reservation, Scheduler};

/// Planning-time view of one cluster.
struct Pool {
    /// Free and usable right now.
    free: Vec<bool>,
    free_count: u32,
    /// Earliest instant each node can be handed to a new job; `None` for
    /// nodes that never return to batch use (virtual-cluster carve-outs).
    avail: Vec<Option<Millis>>,
    /// Elastic surplus that may be taken back, in victim order (latest
    /// submitted job first, highest node index first).
    surplus: Vec<(JobId, u32)>,
}

impl Pool {
    fn surplus_count(&self) -> u32 {
        self.surplus.len() as u32
    }
}

enum NodeFilter<'a> {
    Any,
    Exclude(&'a [u32]),
}

impl NodeFilter<'_> {
    fn allows(&self, node: u32) -> bool {
        match self {
            NodeFilter::Any => true,
            NodeFilter::Exclude(reserved) => reserved.binary_search(&node).is_err(),
        }
    }
}

impl Scheduler {
    fn snapshot_pools(&self, now: Millis) -> Vec<Pool> {
        let mut pools: Vec<Pool> = self
            .clusters
            .iter()
            .map(|c| {
                let n = c.node_count() as usize;
                let mut free = vec![false; n];
                let mut avail = vec![None; n];
                for (i, slot) in c.slots().iter().enumerate() {
                    match (slot.holder, slot.down_until) {
                        (NodeHolder::Free, None) => {
                            free[i] = true;
                            avail[i] = Some(now);
                        }
                        (NodeHolder::Free, Some(up)) => avail[i] = Some(up.max(now)),
                        (NodeHolder::Job(j), _) => {
                            avail[i] = self.live.get(&j).map(|l| l.expected_end_ms.max(now))
                        }
                        (NodeHolder::VCluster(_), _) => {}
                    }
                }
                Pool {
                    free,
                    free_count: c.free_count(),
                    avail,
                    surplus: Vec::new(),
                }
            })
            .collect();

        let mut elastic: Vec<(u64, JobId)> = self
            .live
            .iter()
            .filter(|(j, _)| self.jobs[j].spec.shape.is_elastic())
            .map(|(j, l)| (l.submit_seq, *j))
            .collect();
        elastic.sort_unstable_by(|a, b| b.cmp(a));
        for (_, job) in elastic {
            let live = &self.live[&job];
            let JobShape::Elastic { min_workers, .. } = self.jobs[&job].spec.shape else {
                unreachable!()
            };
            let excess = live.workers.saturating_sub(min_workers) as usize;
            let pool = &mut pools[live.cluster];
            for &n in live.allocation.node_indices.iter().rev().take(excess) {
                pool.surplus.push((job, n));
                pool.avail[n as usize] = Some(now);
            }
        }
        pools
    }

    /// Computes what to start now. Pure: the scheduler is not modified.
    pub fn plan(&self, now: Millis) -> DispatchDecision {
        let mut pools = self.snapshot_pools(now);
        let mut decision = DispatchDecision::default();
        let mut reclaimed: Vec<Reclaim> = Vec::new();

        for entry in self.queue.iter() {
            let rec = &self.jobs[&entry.job_id];
            let need = rec.spec.shape.nodes_to_start();
            let candidates = self.acceptable_clusters(&entry.remaining_kind_preferences);
            if !candidates
                .iter()
                .any(|&c| self.clusters[c].node_count() >= need)
            {
                decision.unsatisfiable.push(entry.job_id);
                continue;
            }

            match &decision.reservation {
                None => {
                    let placed = candidates.iter().find_map(|&c| {
                        take_nodes(&mut pools[c], need, &NodeFilter::Any, &mut reclaimed)
                            .map(|nodes| (c, nodes))
                    });
                    if let Some((c, nodes)) = placed {
                        let end = now.saturating_add(rec.spec.walltime_limit_ms);
                        for &n in &nodes {
                            pools[c].avail[n as usize] = Some(end);
                        }
                        decision.starts.push((
                            entry.job_id,
                            Allocation {
                                job_id: entry.job_id,
                                cluster_id: self.clusters[c].id().to_string(),
                                node_indices: nodes,
                                start_ms: now,
                            },
                        ));
                        continue;
                    }
                    decision.reservation =
                        self.reserve(entry.job_id, need, &candidates, &pools, rec.spec.walltime_limit_ms);
                    if !self.policy.backfill {
                        break;
                    }
                }
                Some(res) => {
                    let end = now.saturating_add(rec.spec.walltime_limit_ms);
                    let placed = candidates.iter().find_map(|&c| {
                        let filter = if self.clusters[c].id() == res.cluster_id && end > res.start_ms
                        {
                            NodeFilter::Exclude(&res.node_indices)
                        } else {
                            NodeFilter::Any
                        };
                        take_nodes(&mut pools[c], need, &filter, &mut reclaimed)
                            .map(|nodes| (c, nodes))
                    });
                    if let Some((c, nodes)) = placed {
                        for &n in &nodes {
                            pools[c].avail[n as usize] = Some(end);
                        }
                        decision.starts.push((
                            entry.job_id,
                            Allocation {
                                job_id: entry.job_id,
                                cluster_id: self.clusters[c].id().to_string(),
                                node_indices: nodes,
                                start_ms: now,
                            },
                        ));
                    }
                }
            }

            if decision.reservation.is_some()
                && pools.iter().all(|p| p.free_count == 0 && p.surplus.is_empty())
            {
                break;
            }
        }
        decision.reclaims = reclaimed;
        decision
    }

    /// Earliest start for a blocked job across its acceptable clusters,
    /// judged from walltime-bounded release times. Ties keep scan order.
    fn reserve(
        &self,
        job_id: JobId,
        need: u32,
        candidates: &[usize],
        pools: &[Pool],
        walltime: Millis,
    ) -> Option<Reservation> {
        let mut best: Option<(Millis, usize)> = None;
        for &c in candidates {
            let mut times: Vec<Millis> = pools[c].avail.iter().flatten().copied().collect();
            if (times.len() as u32) < need {
                continue;
            }
            let k = need as usize - 1;
            let (_, t, _) = times.select_nth_unstable(k);
            let t = *t;
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, c));
            }
        }
        let (start, c) = best?;
        let node_indices: Vec<u32> = pools[c]
            .avail
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_some_and(|a| a <= start))
            .map(|(i, _)| i as u32)
            .take(need as usize)
            .collect();
        Some(Reservation {
            job_id,
            cluster_id: self.clusters[c].id().to_string(),
            node_indices,
            start_ms: start,
            expected_end_ms: start.saturating_add(walltime),
        })
    }
}

/// First-fit selection of `need` nodes allowed by `filter`, reclaiming
/// elastic surplus if free nodes alone do not suffice. Commits the choice to
/// `pool` and returns the nodes in ascending order.
fn take_nodes(
    pool: &mut Pool,
    need: u32,
    filter: &NodeFilter<'_>,
    reclaimed: &mut Vec<Reclaim>,
) -> Option<Vec<u32>> {
    if pool.free_count + pool.surplus_count() < need {
        return None;
    }
    let usable_free = match filter {
        NodeFilter::Any => pool.free_count,
        NodeFilter::Exclude(_) => pool
            .free
            .iter()
            .enumerate()
            .filter(|&(i, &f)| f && filter.allows(i as u32))
            .count() as u32,
    };
    if usable_free < need {
        let usable_surplus = pool
            .surplus
            .iter()
            .filter(|(_, n)| filter.allows(*n))
            .count() as u32;
        if usable_free + usable_surplus < need {
            return None;
        }
        let mut missing = need - usable_free;
        let mut kept = Vec::with_capacity(pool.surplus.len());
        for (job, node) in std::mem::take(&mut pool.surplus) {
            if missing > 0 && filter.allows(node) {
                missing -= 1;
                pool.free[node as usize] = true;
                pool.free_count += 1;
                match reclaimed.iter_mut().find(|r| r.job_id == job) {
                    Some(r) => r.node_indices.push(node),
                    None => reclaimed.push(Reclaim {
                        job_id: job,
                        node_indices: vec![node],
                    }),
                }
            } else {
                kept.push((job, node));
            }
        }
        pool.surplus = kept;
    }
    let nodes: Vec<u32> = pool
        .free
        .iter()
        .enumerate()
        .filter(|&(i, &f)| f && filter.allows(i as u32))
        .map(|(i, _)| i as u32)
        .take(need as usize)
        .collect();
    debug_assert_eq!(nodes.len() as u32, need);
    for &n in &nodes {
        pool.free[n as usize] = false;
    }
    pool.free_count -= need;
    Some(nodes)
}
