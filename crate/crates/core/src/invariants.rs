//! Checks of the protocol's structural laws on states and transitions.

use std::fmt;

use crate::explorer::StateGraph;
use crate::protocol::{NetworkState, SlotRecord, StepEvent};
use crate::types::{MessageType, NodeId, ProtocolConfig, Role, Variant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

fn violation(out: &mut Vec<Violation>, rule: &'static str, detail: String) {
    out.push(Violation { rule, detail });
}

/// Tier consistency, parent/child duality and acyclic parent pointers.
pub fn check_state(ns: &NetworkState) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = ns.nodes.len();
    for node in &ns.nodes {
        if node.id.is_root() || !node.role.is_joined() {
            continue;
        }
        if node.pid.is_none() || node.pid.index() >= n {
            violation(&mut out, "tier", format!("joined node {} has no parent", node.id));
            continue;
        }
        let parent = ns.node(node.pid);
        if node.tier != parent.tier + 1 {
            violation(
                &mut out,
                "tier",
                format!("node {} has tier {}, parent {} has tier {}", node.id, node.tier, parent.id, parent.tier),
            );
        }
    }
    for p in &ns.nodes {
        for &(c, _) in &p.children {
            if c.is_none() || c.index() >= n || ns.node(c).pid != p.id {
                violation(&mut out, "duality", format!("node {} lists child {} whose parent differs", p.id, c));
            }
        }
    }
    for start in &ns.nodes {
        if !start.role.is_joined() {
            continue;
        }
        let mut cur = start.id;
        let mut hops = 0;
        while !cur.is_root() {
            let next = ns.node(cur).pid;
            if next.is_none() || !ns.node(next).role.is_joined() {
                break;
            }
            cur = next;
            hops += 1;
            if hops > n {
                violation(&mut out, "forest", format!("parent pointers from {} form a cycle", start.id));
                break;
            }
        }
    }
    out
}

/// Laws relating two consecutive states through one slot.
pub fn check_transition(
    from: &NetworkState,
    record: &SlotRecord,
    events: &[StepEvent],
    to: &NetworkState,
    cfg: &ProtocolConfig,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for (a, b) in from.nodes.iter().zip(&to.nodes) {
        if !a.role.can_become(b.role) {
            violation(&mut out, "monotonicity", format!("node {} went {} -> {}", a.id, a.role, b.role));
        }
    }
    let increases = events.iter().filter(|e| matches!(e, StepEvent::Increase { .. })).count();
    let (before, after) = (from.joined_count(), to.joined_count());
    if after < before || after - before != increases {
        violation(
            &mut out,
            "increase-count",
            format!("joined {before} -> {after} with {increases} increase events"),
        );
    }
    for m in record.primary.sent.iter().filter(|m| m.mtype == MessageType::Beacon) {
        let head = from.node(m.src);
        if head.role != Role::ClusterHead || head.tier % 2 != u32::from(from.parity) {
            violation(
                &mut out,
                "parity",
                format!("node {} (tier {}) beaconed in a slot of parity {}", m.src, head.tier, from.parity),
            );
        }
    }
    if cfg.variant == Variant::NoAcks {
        for m in record.all_sent() {
            if matches!(m.mtype, MessageType::BeaconAck | MessageType::AckResponse) {
                violation(&mut out, "confinement", format!("{m} sent under no-acks"));
            }
        }
    }
    if to.parity == from.parity {
        violation(&mut out, "parity", "slot parity did not flip".to_string());
    }
    out
}

/// Every state and edge law over a whole explored graph.
pub fn audit_graph(g: &StateGraph) -> Vec<Violation> {
    let mut out: Vec<Violation> = g.states.iter().flat_map(check_state).collect();
    for e in &g.edges {
        out.extend(check_transition(&g.states[e.from], &e.record, &e.events, &g.states[e.to], &g.cfg));
    }
    out
}

/// Joined nodes other than the root; equals the number of Increase events so far.
pub fn increase_count(ns: &NetworkState) -> usize {
    ns.nodes
        .iter()
        .filter(|n| n.role.is_joined() && n.id != NodeId::ROOT)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::explore;
    use crate::topology::Topology;
    use crate::types::Channel;

    #[test]
    fn explored_graphs_satisfy_all_laws() {
        let t = Topology::new(3, &[], &[(1, 2), (1, 3)]).unwrap();
        for variant in [Variant::WithAcks, Variant::NoAcks] {
            let cfg = ProtocolConfig::new(3, 3, variant);
            let g = explore(&t, &[Channel(1), Channel(1), Channel(3)], &cfg, 64).unwrap();
            assert_eq!(audit_graph(&g), vec![]);
        }
    }

    #[test]
    fn detects_broken_duality_and_tier() {
        let cfg = ProtocolConfig::new(2, 3, Variant::NoAcks);
        let mut ns = NetworkState::initial(&[Channel(1), Channel(1)], &cfg).unwrap();
        ns.nodes[0].children.push((NodeId(2), Channel(2)));
        ns.nodes[1].role = Role::ClusterSlave;
        ns.nodes[1].pid = NodeId(1);
        ns.nodes[1].tier = 3;
        let rules: Vec<_> = check_state(&ns).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec!["tier"]);
        ns.nodes[1].pid = NodeId::NONE;
        assert!(check_state(&ns).iter().any(|v| v.rule == "duality"));
    }

    #[test]
    fn increase_count_excludes_root() {
        let cfg = ProtocolConfig::new(2, 3, Variant::NoAcks);
        let ns = NetworkState::initial(&[Channel(1), Channel(1)], &cfg).unwrap();
        assert_eq!(increase_count(&ns), 0);
    }
}
