//! Exhaustive explicit-state exploration of the formation protocol.
//!
//! Every resolution of every choice point is branched, states are
//! deduplicated by value, and goal states are absorbing. The formation
//! property then reduces to a graph question: since the network never
//! deadlocks, formation is inevitable exactly when no cycle of non-goal
//! states is reachable.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::protocol::{enumerate_resolutions, network_step, slot_choices, NetworkState, Resolution, SlotRecord, StepEvent};
use crate::topology::Topology;
use crate::types::{Channel, MessageType, ProtocolConfig, Role, ROLE_CODE_HEAD, ROLE_CODE_SLAVE};

/// Depth bound used when none is given.
pub const DEFAULT_DEPTH: usize = 64;
/// State budget used when none is given.
pub const DEFAULT_MAX_STATES: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub resolutions: Vec<Resolution>,
    pub record: SlotRecord,
    pub events: Vec<StepEvent>,
}

impl Edge {
    pub fn increases(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, StepEvent::Increase { .. }))
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct StateGraph {
    pub topology: Topology,
    pub cfg: ProtocolConfig,
    pub init_channels: Vec<Channel>,
    pub states: Vec<NetworkState>,
    pub edges: Vec<Edge>,
    /// Outgoing edge ids per state, in resolution order.
    pub out: Vec<Vec<usize>>,
    /// BFS depth of each state.
    pub depth: Vec<usize>,
    /// Edge through which each state was first discovered.
    pub parent: Vec<Option<usize>>,
    pub initial: usize,
    /// States left unexpanded because they sit at the depth bound.
    pub truncated: Vec<usize>,
    pub depth_bound: usize,
    /// Set when exploration stopped on the state budget.
    pub budget_hit: bool,
}

impl StateGraph {
    pub fn is_goal(&self, s: usize) -> bool {
        self.states[s].is_goal()
    }

    pub fn is_complete(&self) -> bool {
        self.truncated.is_empty() && !self.budget_hit
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Edges from the initial state to `s` along discovery parents.
    pub fn path_to(&self, s: usize) -> Vec<Edge> {
        let mut path = Vec::new();
        let mut cur = s;
        while let Some(e) = self.parent[cur] {
            path.push(self.edges[e].clone());
            cur = self.edges[e].from;
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FailureClass {
    AckCollision,
    AssociateCollision,
    NarrowBridge,
    Other,
}

impl FailureClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::AckCollision => "AckCollision",
            FailureClass::AssociateCollision => "AssociateCollision",
            FailureClass::NarrowBridge => "NarrowBridge",
            FailureClass::Other => "Other",
        }
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A stem from the initial state and a loop that never joins anyone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub stem: Vec<Edge>,
    pub cycle: Vec<Edge>,
    pub class: FailureClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    FailsWithLasso(Lasso),
    Inconclusive { bound: usize },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn failure_class(&self) -> Option<FailureClass> {
        match self {
            Verdict::FailsWithLasso(l) => Some(l.class),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Holds => "holds".to_string(),
            Verdict::FailsWithLasso(l) => format!("fails ({})", l.class),
            Verdict::Inconclusive { bound } => format!("inconclusive (depth {bound})"),
        }
    }
}

/// State budget, overridable through `TSCH_CLUSTER_MAX_STATES`.
pub fn max_states_from_env() -> usize {
    std::env::var("TSCH_CLUSTER_MAX_STATES")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MAX_STATES)
}

/// Explores like [`explore`] but returns the partial graph when the budget runs out.
pub fn explore_bounded(
    t: &Topology,
    init_channels: &[Channel],
    cfg: &ProtocolConfig,
    depth_bound: usize,
    max_states: usize,
) -> Result<StateGraph> {
    if depth_bound == 0 {
        return Err(Error::Config("depth bound must be at least 1".into()));
    }
    cfg.validate()?;
    if t.node_count() != cfg.max_id {
        return Err(Error::Config(format!(
            "topology has {} nodes but max_id is {}",
            t.node_count(),
            cfg.max_id
        )));
    }
    let init = NetworkState::initial(init_channels, cfg)?;
    let mut g = StateGraph {
        topology: t.clone(),
        cfg: cfg.clone(),
        init_channels: init_channels.to_vec(),
        states: vec![init.clone()],
        edges: Vec::new(),
        out: vec![Vec::new()],
        depth: vec![0],
        parent: vec![None],
        initial: 0,
        truncated: Vec::new(),
        depth_bound,
        budget_hit: false,
    };
    let mut index: HashMap<NetworkState, usize> = HashMap::from([(init, 0)]);
    let mut queue = VecDeque::from([0usize]);

    while let Some(s) = queue.pop_front() {
        if g.states[s].is_goal() {
            continue;
        }
        if g.depth[s] >= depth_bound {
            g.truncated.push(s);
            continue;
        }
        let state = g.states[s].clone();
        let choices = slot_choices(&state, t, cfg)?;
        for res in enumerate_resolutions(&choices) {
            let step = network_step(&state, t, cfg, &res)?;
            let to = match index.get(&step.state) {
                Some(&i) => i,
                None => {
                    if g.states.len() >= max_states {
                        g.budget_hit = true;
                        return Ok(g);
                    }
                    let i = g.states.len();
                    index.insert(step.state.clone(), i);
                    g.states.push(step.state);
                    g.out.push(Vec::new());
                    g.depth.push(g.depth[s] + 1);
                    g.parent.push(Some(g.edges.len()));
                    queue.push_back(i);
                    i
                }
            };
            g.out[s].push(g.edges.len());
            g.edges.push(Edge {
                from: s,
                to,
                resolutions: res,
                record: step.record,
                events: step.events,
            });
        }
    }
    Ok(g)
}

/// Breadth-first exploration of every execution up to `depth_bound` slots.
pub fn explore(t: &Topology, init_channels: &[Channel], cfg: &ProtocolConfig, depth_bound: usize) -> Result<StateGraph> {
    let g = explore_bounded(t, init_channels, cfg, depth_bound, max_states_from_env())?;
    if g.budget_hit {
        return Err(Error::Budget { states: g.states.len() });
    }
    Ok(g)
}

/// Strongly connected components of the non-goal subgraph, iteratively (Tarjan).
fn non_goal_sccs(g: &StateGraph) -> Vec<Vec<usize>> {
    let n = g.states.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut sccs = Vec::new();
    let mut next = 0;

    for root in 0..n {
        if index[root] != usize::MAX || g.is_goal(root) {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = work.last_mut() {
            if *i < g.out[v].len() {
                let w = g.edges[g.out[v][*i]].to;
                *i += 1;
                if g.is_goal(w) {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(p, _)) = work.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    sccs.push(comp);
                }
            }
        }
    }
    sccs
}

/// Shortest cycle through `entry` using only edges inside `members`.
fn cycle_through(g: &StateGraph, entry: usize, members: &[bool]) -> Vec<Edge> {
    let mut via: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::from([entry]);
    while let Some(v) = queue.pop_front() {
        for &e in &g.out[v] {
            let w = g.edges[e].to;
            if !members[w] {
                continue;
            }
            if w == entry {
                let mut cycle = vec![g.edges[e].clone()];
                let mut cur = v;
                while cur != entry {
                    let pe = via[&cur];
                    cycle.push(g.edges[pe].clone());
                    cur = g.edges[pe].from;
                }
                cycle.reverse();
                return cycle;
            }
            if let std::collections::hash_map::Entry::Vacant(slot) = via.entry(w) {
                slot.insert(e);
                queue.push_back(w);
            }
        }
    }
    unreachable!("a nontrivial component always has a cycle through each member")
}

/// Finds the failing lasso whose loop is entered earliest, if any.
fn find_lasso(g: &StateGraph) -> Option<(Vec<Edge>, Vec<Edge>)> {
    let mut best: Option<(usize, usize, Vec<usize>)> = None;
    for comp in non_goal_sccs(g) {
        let nontrivial = comp.len() > 1 || g.out[comp[0]].iter().any(|&e| g.edges[e].to == comp[0]);
        if !nontrivial {
            continue;
        }
        let entry = *comp.iter().min_by_key(|&&s| (g.depth[s], s)).expect("component is non-empty");
        let key = (g.depth[entry], entry);
        if best.as_ref().is_none_or(|(d, s, _)| key < (*d, *s)) {
            best = Some((key.0, key.1, comp));
        }
    }
    let (_, entry, comp) = best?;
    let mut members = vec![false; g.states.len()];
    for &s in &comp {
        members[s] = true;
    }
    Some((g.path_to(entry), cycle_through(g, entry, &members)))
}

/// Decides whether every execution eventually joins every node.
pub fn check_formation(g: &StateGraph) -> Verdict {
    if let Some((stem, cycle)) = find_lasso(g) {
        let class = classify_lasso(g, &stem, &cycle);
        return Verdict::FailsWithLasso(Lasso { stem, cycle, class });
    }
    if g.is_complete() {
        Verdict::Holds
    } else {
        Verdict::Inconclusive { bound: g.depth_bound }
    }
}

fn coinciding(record: &SlotRecord, pred: impl Fn(&crate::types::Message) -> bool) -> bool {
    let rounds = std::iter::once(&record.primary).chain(record.response.as_ref());
    for outcome in rounds {
        let mut per_channel: HashMap<Channel, usize> = HashMap::new();
        for m in outcome.sent.iter().filter(|m| pred(m)) {
            *per_channel.entry(m.channel).or_default() += 1;
        }
        if per_channel.values().any(|&k| k >= 2) {
            return true;
        }
    }
    false
}

/// True when some stranded group of nodes borders the tree only through slaves.
fn narrow_bridge(t: &Topology, ns: &NetworkState) -> bool {
    let n = ns.nodes.len();
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] || ns.nodes[start].role.is_joined() {
            continue;
        }
        let mut border = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for (nb, _) in t.neighbours(ns.nodes[v].id) {
                let w = nb.index();
                if ns.nodes[w].role.is_joined() {
                    border.push(ns.nodes[w].role);
                } else if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if !border.is_empty() && border.iter().all(|&r| r == Role::ClusterSlave) {
            return true;
        }
    }
    false
}

fn classify_lasso(g: &StateGraph, stem: &[Edge], cycle: &[Edge]) -> FailureClass {
    let loop_state = &g.states[cycle[0].from];
    if narrow_bridge(&g.topology, loop_state) {
        return FailureClass::NarrowBridge;
    }
    let head_assoc = |m: &crate::types::Message| m.mtype == MessageType::Associate && m.payload[0] == ROLE_CODE_HEAD;
    let ack_like = |m: &crate::types::Message| {
        m.mtype == MessageType::BeaconAck || (m.mtype == MessageType::Associate && m.payload[0] == ROLE_CODE_SLAVE)
    };
    for part in [cycle, stem] {
        if part.iter().any(|e| coinciding(&e.record, head_assoc)) {
            return FailureClass::AssociateCollision;
        }
        if part.iter().any(|e| coinciding(&e.record, ack_like)) {
            return FailureClass::AckCollision;
        }
    }
    FailureClass::Other
}

/// Failure class of a failing verdict on `g`.
pub fn classify_failure(g: &StateGraph, v: &Verdict) -> Result<FailureClass> {
    match v {
        Verdict::FailsWithLasso(l) => Ok(classify_lasso(g, &l.stem, &l.cycle)),
        other => Err(Error::Contract(format!("cannot classify a verdict that {}", other.label()))),
    }
}

/// A minimum-slot path from the initial state to a goal state.
pub fn shortest_witness(g: &StateGraph) -> Result<Vec<Edge>> {
    let goal = (0..g.states.len())
        .filter(|&s| g.is_goal(s))
        .min_by_key(|&s| (g.depth[s], s))
        .ok_or(Error::WitnessAbsent)?;
    Ok(g.path_to(goal))
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    /// Full initial channel vector, root first.
    pub init_channels: Vec<Channel>,
    pub verdict: Verdict,
    pub witness_len: Option<usize>,
    pub states: usize,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub entries: Vec<SweepEntry>,
}

impl Sweep {
    /// Shortest witness over the configurations where formation is inevitable.
    pub fn min_witness(&self) -> Option<(usize, &SweepEntry)> {
        self.entries
            .iter()
            .filter(|e| e.verdict.holds())
            .filter_map(|e| e.witness_len.map(|w| (w, e)))
            .min_by_key(|(w, _)| *w)
    }
}

/// Limit on the number of initial configurations one sweep may visit.
pub const SWEEP_LIMIT: u64 = 1 << 16;

/// Every assignment of initial channels to non-root nodes, lexicographic, root on channel 1.
pub fn initial_configs(cfg: &ProtocolConfig) -> Result<Vec<Vec<Channel>>> {
    let free = cfg.max_id.saturating_sub(1);
    let total = u64::from(cfg.num_channels)
        .checked_pow(free)
        .filter(|&k| k <= SWEEP_LIMIT)
        .ok_or_else(|| Error::Limit(format!("{}^{} initial configurations", cfg.num_channels, free)))?;
    Ok((0..total)
        .map(|mut k| {
            let mut chans = vec![Channel(1); cfg.max_id as usize];
            for slot in chans.iter_mut().skip(1).rev() {
                *slot = Channel((k % u64::from(cfg.num_channels)) as u32 + 1);
                k /= u64::from(cfg.num_channels);
            }
            chans
        })
        .collect())
}

/// Explores every initial channel assignment and records its verdict.
pub fn sweep_initial_configs(t: &Topology, cfg: &ProtocolConfig, depth_bound: usize) -> Result<Sweep> {
    let mut entries = Vec::new();
    for chans in initial_configs(cfg)? {
        let g = explore(t, &chans, cfg, depth_bound)?;
        let verdict = check_formation(&g);
        let witness_len = shortest_witness(&g).ok().map(|w| w.len());
        entries.push(SweepEntry {
            init_channels: chans,
            verdict,
            witness_len,
            states: g.states.len(),
        });
    }
    Ok(Sweep { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Variant;

    fn cfg(n: u32, variant: Variant) -> ProtocolConfig {
        ProtocolConfig::new(n, 3, variant)
    }

    fn chans(v: &[u32]) -> Vec<Channel> {
        v.iter().copied().map(Channel).collect()
    }

    #[test]
    fn single_node_is_goal() {
        let t = Topology::new(1, &[], &[]).unwrap();
        let c = cfg(1, Variant::NoAcks);
        let g = explore(&t, &chans(&[1]), &c, 8).unwrap();
        assert_eq!(g.states.len(), 1);
        assert_eq!(check_formation(&g), Verdict::Holds);
        assert!(shortest_witness(&g).unwrap().is_empty());
    }

    #[test]
    fn narrow_bridge_fails_everywhere() {
        let t = Topology::new(3, &[(1, 2)], &[(2, 3)]).unwrap();
        for variant in [Variant::WithAcks, Variant::NoAcks] {
            let c = cfg(3, variant);
            let g = explore(&t, &chans(&[1, 1, 2]), &c, 64).unwrap();
            assert!(g.is_complete());
            assert!(!(0..g.states.len()).any(|s| g.is_goal(s)));
            let v = check_formation(&g);
            assert_eq!(v.failure_class(), Some(FailureClass::NarrowBridge));
            assert_eq!(shortest_witness(&g), Err(Error::WitnessAbsent));
        }
    }

    #[test]
    fn lasso_loop_is_increase_free_and_closed() {
        let t = Topology::new(3, &[], &[(1, 2), (1, 3)]).unwrap();
        let g = explore(&t, &chans(&[1, 1, 1]), &cfg(3, Variant::WithAcks), 64).unwrap();
        let Verdict::FailsWithLasso(l) = check_formation(&g) else {
            panic!("expected a failure")
        };
        assert_eq!(l.class, FailureClass::AckCollision);
        assert!(l.cycle.iter().all(|e| e.increases() == 0));
        assert_eq!(l.cycle.first().unwrap().from, l.cycle.last().unwrap().to);
        let stem_end = l.stem.last().map_or(g.initial, |e| e.to);
        assert_eq!(stem_end, l.cycle[0].from);
    }

    #[test]
    fn classify_rejects_non_failures() {
        let t = Topology::new(1, &[], &[]).unwrap();
        let g = explore(&t, &chans(&[1]), &cfg(1, Variant::NoAcks), 4).unwrap();
        assert!(classify_failure(&g, &Verdict::Holds).is_err());
    }

    #[test]
    fn truncated_graph_without_cycle_is_inconclusive() {
        let t = Topology::new(2, &[], &[(1, 2)]).unwrap();
        let g = explore(&t, &chans(&[1, 3]), &cfg(2, Variant::NoAcks), 1).unwrap();
        assert!(!g.is_complete());
        assert_eq!(check_formation(&g), Verdict::Inconclusive { bound: 1 });
    }

    #[test]
    fn initial_configs_enumerate_non_root_channels() {
        let all = initial_configs(&cfg(3, Variant::NoAcks)).unwrap();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], chans(&[1, 1, 1]));
        assert_eq!(all[1], chans(&[1, 1, 2]));
        assert_eq!(all[8], chans(&[1, 3, 3]));
    }

    #[test]
    fn budget_is_enforced() {
        let t = Topology::new(3, &[], &[(1, 2), (1, 3)]).unwrap();
        let g = explore_bounded(&t, &chans(&[1, 1, 1]), &cfg(3, Variant::NoAcks), 64, 5).unwrap();
        assert!(g.budget_hit);
        assert!(!check_formation(&g).holds());
    }
}
