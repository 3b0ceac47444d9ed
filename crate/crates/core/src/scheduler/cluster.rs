use serde::{Deserialize, Serialize};

use crate::model::{ClusterSpec, JobId, Millis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VClusterId(pub u64);

/// Who, if anyone, holds a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeHolder {
    Free,
    Job(JobId),
    VCluster(VClusterId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeSlot {
    pub holder: NodeHolder,
    /// Set while the node is down; the value is when it is expected back.
    pub down_until: Option<Millis>,
}

impl NodeSlot {
    pub fn is_available(&self) -> bool {
        self.holder == NodeHolder::Free && self.down_until.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub free: u32,
    pub busy: u32,
    pub down: u32,
    pub carved: u32,
}

#[derive(Debug, Clone)]
pub struct ClusterState {
    pub spec: ClusterSpec,
    nodes: Vec<NodeSlot>,
    free: u32,
}

impl ClusterState {
    pub fn new(spec: ClusterSpec) -> Self {
        let n = spec.node_count;
        ClusterState {
            spec,
            nodes: vec![
                NodeSlot {
                    holder: NodeHolder::Free,
                    down_until: None,
                };
                n as usize
            ],
            free: n,
        }
    }

    pub fn id(&self) -> &str {
        &self.spec.cluster_id
    }

    pub fn node_count(&self) -> u32 {
        self.spec.node_count
    }

    pub fn free_count(&self) -> u32 {
        self.free
    }

    pub fn slot(&self, index: u32) -> Option<&NodeSlot> {
        self.nodes.get(index as usize)
    }

    pub fn slots(&self) -> &[NodeSlot] {
        &self.nodes
    }

    pub fn free_nodes(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_available())
            .map(|(i, _)| i as u32)
    }

    pub fn nodes_held_by(&self, holder: NodeHolder) -> Vec<u32> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, s)| s.holder == holder)
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Hands an available node to `holder`.
    pub(crate) fn assign(&mut self, index: u32, holder: NodeHolder) {
        let slot = &mut self.nodes[index as usize];
        assert!(
            slot.is_available(),
            "node {}/{} assigned while unavailable",
            self.spec.cluster_id,
            index
        );
        slot.holder = holder;
        self.free -= 1;
    }

    /// Returns a held node to the free set (or to the down set if it failed).
    pub(crate) fn clear(&mut self, index: u32) {
        let slot = &mut self.nodes[index as usize];
        debug_assert!(slot.holder != NodeHolder::Free);
        slot.holder = NodeHolder::Free;
        if slot.down_until.is_none() {
            self.free += 1;
        }
    }

    pub(crate) fn set_down(&mut self, index: u32, until: Millis) {
        let slot = &mut self.nodes[index as usize];
        if slot.is_available() {
            self.free -= 1;
        }
        // overlapping outages keep the node down until the latest one ends
        slot.down_until = Some(slot.down_until.map_or(until, |u| u.max(until)));
    }

    /// Brings a node back if its outage has ended by `now`.
    pub(crate) fn set_up(&mut self, index: u32, now: Millis) -> bool {
        let slot = &mut self.nodes[index as usize];
        match slot.down_until {
            Some(until) if until <= now => {
                slot.down_until = None;
                if slot.holder == NodeHolder::Free {
                    self.free += 1;
                }
                true
            }
            _ => false,
        }
    }

    pub fn counts(&self) -> NodeCounts {
        let mut c = NodeCounts::default();
        for s in &self.nodes {
            match (s.holder, s.down_until) {
                (NodeHolder::Job(_), _) => c.busy += 1,
                (NodeHolder::VCluster(_), _) => c.carved += 1,
                (NodeHolder::Free, Some(_)) => c.down += 1,
                (NodeHolder::Free, None) => c.free += 1,
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ResourceKind;

    fn cluster(n: u32) -> ClusterState {
        ClusterState::new(ClusterSpec {
            cluster_id: "c".into(),
            kind: ResourceKind::Cpu,
            node_count: n,
            cores_per_node: 4,
            speed_factor: 1,
            staging_bandwidth_bytes_per_s: None,
        })
    }

    #[test]
    fn counts_track_assignment_and_faults() {
        let mut c = cluster(4);
        c.assign(0, NodeHolder::Job(JobId(1)));
        c.assign(1, NodeHolder::VCluster(VClusterId(1)));
        c.set_down(2, 100);
        assert_eq!(c.free_count(), 1);
        assert_eq!(
            c.counts(),
            NodeCounts {
                free: 1,
                busy: 1,
                down: 1,
                carved: 1
            }
        );
        assert_eq!(c.free_nodes().collect::<Vec<_>>(), vec![3]);
        assert!(c.set_up(2, 100));
        c.clear(0);
        assert_eq!(c.free_count(), 3);
        assert_eq!(c.free_nodes().collect::<Vec<_>>(), vec![0, 2, 3]);
    }

    #[test]
    fn held_node_that_fails_stays_unavailable_after_release() {
        let mut c = cluster(2);
        c.assign(1, NodeHolder::Job(JobId(7)));
        c.set_down(1, 50);
        c.clear(1);
        assert_eq!(c.free_count(), 1);
        assert!(!c.set_up(1, 49));
        assert!(c.set_up(1, 50));
        assert_eq!(c.free_count(), 2);
    }
}
