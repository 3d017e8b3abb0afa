//! Per-node cluster-tree formation state machine and the network step.
//!
//! A node acts once per reserved slot: [`emit`] picks the frame it submits,
//! the slot engine resolves the air, and [`deliver`] advances the node on
//! what it heard. Nondeterminism (random waits, scan order, channel grants)
//! is surfaced as [`ChoicePoint`]s and fed back as [`Resolution`]s, so the
//! same code drives exhaustive exploration and seeded simulation.
//!
//! Association with the original cluster head completes inside one slot:
//! the root answers an uncollided ASSOCIATE in the slot's response round.
//! Every other hop of an association costs one slot.

use std::fmt;

use crate::error::{Error, Result};
use crate::mac::{step_slot, SlotOutcome};
use crate::topology::{SignalClass, Topology};
use crate::types::{
    Channel, Message, MessageType, NodeId, ProtocolConfig, Role, Variant, ROLE_CODE_HEAD, ROLE_CODE_SLAVE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    /// Joined slave; nothing left to do.
    Idle,
    /// Free node hopping channels, waiting for a BEACON.
    Listening,
    /// Free or tentative node holding back its slave ASSOCIATE.
    Backoff,
    AwaitAckResponse,
    Scanning,
    ReturnedToParent,
    AwaitAssociateAck,
    /// Tentative waiting a random time before retrying its ASSOCIATE.
    RetryBackoff,
    Advertising,
    ForwardingUp,
    /// Head waiting a random time before re-sending a lost relayed ASSOCIATE.
    RelayBackoff,
    ForwardingDown,
}

impl Phase {
    pub fn short(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Listening => "listen",
            Phase::Backoff => "backoff",
            Phase::AwaitAckResponse => "await-resp",
            Phase::Scanning => "scan",
            Phase::ReturnedToParent => "returned",
            Phase::AwaitAssociateAck => "await-assoc",
            Phase::RetryBackoff => "retry",
            Phase::Advertising => "adv",
            Phase::ForwardingUp => "fwd-up",
            Phase::RelayBackoff => "relay-retry",
            Phase::ForwardingDown => "fwd-down",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Timers {
    pub wait_remaining: u32,
    pub dwell_remaining: u32,
    /// Bitmask of channels visited in the current scan (bit `c - 1`).
    pub visited: u32,
    pub remembered_tier: Option<u32>,
    pub pending: Vec<Message>,
    /// Requester whose association this head is relaying.
    pub relay_target: NodeId,
    /// Neighbour the relayed ASSOCIATE came from.
    pub relay_hop: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeState {
    pub id: NodeId,
    /// Channel the node currently listens or transmits on.
    pub ch: Channel,
    pub role: Role,
    pub pid: NodeId,
    pub pc: Channel,
    /// Channel granted to a cluster head for its own cluster.
    pub assigned: Channel,
    /// Sorted by child id.
    pub children: Vec<(NodeId, Channel)>,
    pub tier: u32,
    pub phase: Phase,
    pub timers: Timers,
    /// Root only: granted channels, least recently granted first.
    pub grants: Vec<Channel>,
}

impl NodeState {
    fn clear_timers(&mut self) {
        self.timers = Timers::default();
    }

    fn add_child(&mut self, child: NodeId, ch: Channel) {
        match self.children.binary_search_by_key(&child, |(c, _)| *c) {
            Ok(pos) => self.children[pos].1 = ch,
            Err(pos) => self.children.insert(pos, (child, ch)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChoiceTag {
    Wait,
    Scan,
    Assign,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ChoiceKind {
    /// Uniform draw in `lo..=hi`.
    RandomWaitDraw { lo: u32, hi: u32 },
    ScanChannelPick { candidates: Vec<Channel> },
    /// `ranked` lists the candidates never granted (ascending), then the
    /// granted ones from least to most recently granted.
    ChannelAssignment {
        candidates: Vec<Channel>,
        ranked: Vec<Channel>,
        requester: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChoicePoint {
    pub node: NodeId,
    pub kind: ChoiceKind,
}

impl ChoicePoint {
    pub fn tag(&self) -> ChoiceTag {
        match self.kind {
            ChoiceKind::RandomWaitDraw { .. } => ChoiceTag::Wait,
            ChoiceKind::ScanChannelPick { .. } => ChoiceTag::Scan,
            ChoiceKind::ChannelAssignment { .. } => ChoiceTag::Assign,
        }
    }

    /// Deterministic default: the lowest option, or the top-ranked channel of a grant.
    pub fn default_value(&self) -> u32 {
        match &self.kind {
            ChoiceKind::ChannelAssignment { ranked, .. } => ranked[0].0,
            _ => self.options()[0],
        }
    }

    pub fn resolve_with(&self, value: u32) -> Resolution {
        Resolution {
            node: self.node,
            tag: self.tag(),
            value,
        }
    }

    /// All admissible values, ascending.
    pub fn options(&self) -> Vec<u32> {
        match &self.kind {
            ChoiceKind::RandomWaitDraw { lo, hi } => (*lo..=*hi).collect(),
            ChoiceKind::ScanChannelPick { candidates } | ChoiceKind::ChannelAssignment { candidates, .. } => {
                candidates.iter().map(|c| c.0).collect()
            }
        }
    }
}

/// One resolved choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Resolution {
    pub node: NodeId,
    pub tag: ChoiceTag,
    pub value: u32,
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.tag {
            ChoiceTag::Wait => "wait",
            ChoiceTag::Scan => "scan",
            ChoiceTag::Assign => "assign",
        };
        write!(f, "{}:{}={}", self.node, tag, self.value)
    }
}

impl Resolution {
    pub fn parse(s: &str) -> Option<Resolution> {
        let (node, rest) = s.split_once(':')?;
        let (tag, value) = rest.split_once('=')?;
        let tag = match tag {
            "wait" => ChoiceTag::Wait,
            "scan" => ChoiceTag::Scan,
            "assign" => ChoiceTag::Assign,
            _ => return None,
        };
        Some(Resolution {
            node: NodeId(node.parse().ok()?),
            tag,
            value: value.parse().ok()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimerKind {
    TentativeWait,
    Dwell,
    Backoff,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StepEvent {
    Increase { node: NodeId, role: Role },
    RoleChange { node: NodeId, from: Role, to: Role },
    MessageSent(Message),
    MessageDelivered { node: NodeId, message: Message },
    TimerExpired { node: NodeId, timer: TimerKind },
}

impl fmt::Display for StepEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepEvent::Increase { node, role } => write!(f, "increase({node},{role})"),
            StepEvent::RoleChange { node, from, to } => write!(f, "role({node},{from}->{to})"),
            StepEvent::MessageSent(m) => write!(f, "sent({m})"),
            StepEvent::MessageDelivered { node, message } => write!(f, "recv({node},{message})"),
            StepEvent::TimerExpired { node, timer } => {
                let t = match timer {
                    TimerKind::TentativeWait => "wait",
                    TimerKind::Dwell => "dwell",
                    TimerKind::Backoff => "backoff",
                };
                write!(f, "timeout({node},{t})")
            }
        }
    }
}

/// Supplies values for choice points while a node is being advanced.
pub trait Resolver {
    fn resolve(&mut self, cp: &ChoicePoint) -> Result<u32>;
}

/// Resolver backed by an explicit list.
pub struct ListResolver<'a>(pub &'a [Resolution]);

impl Resolver for ListResolver<'_> {
    fn resolve(&mut self, cp: &ChoicePoint) -> Result<u32> {
        let tag = cp.tag();
        let r = self
            .0
            .iter()
            .find(|r| r.node == cp.node && r.tag == tag)
            .ok_or_else(|| Error::MissingResolution(format!("{:?} of node {}", tag, cp.node)))?;
        if !cp.options().contains(&r.value) {
            return Err(Error::MissingResolution(format!(
                "value {} is not admissible for {:?} of node {}",
                r.value, tag, cp.node
            )));
        }
        Ok(r.value)
    }
}

/// Records every choice point and answers with its first option.
#[derive(Default)]
struct Recorder(Vec<ChoicePoint>);

impl Resolver for Recorder {
    fn resolve(&mut self, cp: &ChoicePoint) -> Result<u32> {
        let v = cp.options()[0];
        self.0.push(cp.clone());
        Ok(v)
    }
}

pub fn node_init(id: NodeId, initial_channel: Channel, cfg: &ProtocolConfig) -> NodeState {
    if id.is_root() {
        NodeState {
            id,
            ch: Channel(1),
            role: Role::ClusterHead,
            pid: NodeId::NONE,
            pc: Channel::NONE,
            assigned: Channel(1),
            children: Vec::new(),
            tier: 0,
            phase: Phase::Advertising,
            timers: Timers::default(),
            grants: Vec::new(),
        }
    } else {
        NodeState {
            id,
            ch: initial_channel,
            role: Role::Free,
            pid: NodeId::NONE,
            pc: Channel::NONE,
            assigned: Channel::NONE,
            children: Vec::new(),
            tier: 0,
            phase: Phase::Listening,
            timers: Timers {
                dwell_remaining: cfg.scan_dwell_slots,
                ..Timers::default()
            },
            grants: Vec::new(),
        }
    }
}

/// The single frame a node submits in a slot of the given parity.
pub fn emit(s: &NodeState, parity: u8, _cfg: &ProtocolConfig) -> Message {
    if let Some(m) = s.timers.pending.first() {
        return m.clone();
    }
    if s.role == Role::ClusterHead && s.phase == Phase::Advertising && s.tier % 2 == u32::from(parity) {
        return Message::beacon(s.id, s.assigned, s.tier);
    }
    Message::empty(s.id, s.ch)
}

/// Result of advancing one node for one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub state: NodeState,
    pub events: Vec<StepEvent>,
    /// Frame to send in the slot's response round.
    pub response: Option<Message>,
}

struct Ctx<'a> {
    cfg: &'a ProtocolConfig,
    resolver: &'a mut dyn Resolver,
    events: Vec<StepEvent>,
    response: Option<Message>,
}

impl Ctx<'_> {
    fn set_role(&mut self, n: &mut NodeState, to: Role) {
        let from = n.role;
        if from == to {
            return;
        }
        n.role = to;
        self.events.push(StepEvent::RoleChange { node: n.id, from, to });
        if to.is_joined() {
            self.events.push(StepEvent::Increase { node: n.id, role: to });
        }
    }

    fn choose(&mut self, node: NodeId, kind: ChoiceKind) -> Result<u32> {
        self.resolver.resolve(&ChoicePoint { node, kind })
    }
}

fn beacon_tier(m: &Message) -> u32 {
    m.payload.first().copied().unwrap_or(0)
}

fn bit(c: Channel) -> u32 {
    1u32 << (c.0 - 1)
}

/// Picks the next channel to scan: unvisited channels other than the parent's.
fn next_scan_channel(n: &mut NodeState, cx: &mut Ctx<'_>) -> Result<Channel> {
    let num = cx.cfg.num_channels;
    let others: Vec<Channel> = (1..=num).map(Channel).filter(|&c| c != n.pc).collect();
    if others.is_empty() {
        return Ok(n.pc);
    }
    let mut candidates: Vec<Channel> = others
        .iter()
        .copied()
        .filter(|&c| n.timers.visited & bit(c) == 0)
        .collect();
    if candidates.is_empty() {
        n.timers.visited = 0;
        candidates = others;
    }
    let picked = if candidates.len() == 1 {
        candidates[0]
    } else {
        Channel(cx.choose(n.id, ChoiceKind::ScanChannelPick { candidates })?)
    };
    n.timers.visited |= bit(picked);
    Ok(picked)
}

fn become_tentative(n: &mut NodeState, wait: u32, cx: &mut Ctx<'_>) -> Result<()> {
    cx.set_role(n, Role::Tentative);
    let remembered = n.timers.remembered_tier;
    n.clear_timers();
    n.timers.remembered_tier = remembered;
    n.timers.wait_remaining = wait;
    n.phase = Phase::Scanning;
    n.ch = next_scan_channel(n, cx)?;
    n.timers.dwell_remaining = cx.cfg.scan_dwell_slots;
    Ok(())
}

fn become_head(n: &mut NodeState, assigned: Channel, cx: &mut Ctx<'_>) {
    let tier = n.timers.remembered_tier.unwrap_or(0) + 1;
    n.clear_timers();
    n.tier = tier;
    n.assigned = assigned;
    n.ch = assigned;
    n.phase = Phase::Advertising;
    cx.set_role(n, Role::ClusterHead);
}

fn become_slave(n: &mut NodeState, cx: &mut Ctx<'_>) {
    let tier = n.timers.remembered_tier.unwrap_or(0) + 1;
    n.clear_timers();
    n.tier = tier;
    n.ch = n.pc;
    n.phase = Phase::Idle;
    cx.set_role(n, Role::ClusterSlave);
}

/// A free node reacting to a BEACON it heard.
fn free_hears_beacon(n: &mut NodeState, m: &Message, sig: SignalClass, cx: &mut Ctx<'_>) -> Result<()> {
    n.clear_timers();
    n.pid = m.src;
    n.pc = m.channel;
    n.ch = m.channel;
    n.timers.remembered_tier = Some(beacon_tier(m));
    let cfg = cx.cfg;
    match (sig, cfg.variant) {
        (SignalClass::Close, Variant::WithAcks) => {
            n.timers.pending.push(Message::associate(n.id, n.pc, ROLE_CODE_SLAVE, n.id));
            n.phase = Phase::Backoff;
        }
        (SignalClass::Close, Variant::NoAcks) => {
            let d = cx.choose(
                n.id,
                ChoiceKind::RandomWaitDraw {
                    lo: 1,
                    hi: cfg.max_random_wait,
                },
            )?;
            if d <= 1 {
                n.timers.pending.push(Message::associate(n.id, n.pc, ROLE_CODE_SLAVE, n.id));
            } else {
                n.timers.wait_remaining = d - 1;
            }
            n.phase = Phase::Backoff;
        }
        (SignalClass::Far, Variant::WithAcks) => {
            n.timers.pending.push(Message::beacon_ack(n.id, n.pc));
            n.phase = Phase::AwaitAckResponse;
        }
        (SignalClass::Far, Variant::NoAcks) => become_tentative(n, cfg.min_tentative_slots, cx)?,
        (SignalClass::OutOfRange, _) => unreachable!("out-of-range frames are filtered before dispatch"),
    }
    Ok(())
}

fn back_to_listening(n: &mut NodeState, cfg: &ProtocolConfig) {
    n.clear_timers();
    n.pid = NodeId::NONE;
    n.pc = Channel::NONE;
    n.phase = Phase::Listening;
    n.timers.dwell_remaining = cfg.scan_dwell_slots;
}

fn hop_tick(n: &mut NodeState, cfg: &ProtocolConfig) {
    n.timers.dwell_remaining = n.timers.dwell_remaining.saturating_sub(1);
    if n.timers.dwell_remaining == 0 {
        n.ch = n.ch.next(cfg.num_channels);
        n.timers.dwell_remaining = cfg.scan_dwell_slots;
    }
}

/// Effects of having transmitted `out` this slot.
fn after_send(n: &mut NodeState, out: &Message, cx: &mut Ctx<'_>) {
    match out.mtype {
        MessageType::Associate if out.payload[0] == ROLE_CODE_SLAVE => become_slave(n, cx),
        MessageType::Associate if out.requester() == Some(n.id) => n.phase = Phase::AwaitAssociateAck,
        MessageType::Associate => {
            // relayed upward: wait for the answer on the parent's channel
            n.ch = n.pc;
        }
        MessageType::AssociateAck if n.phase == Phase::ForwardingDown => {
            n.timers.relay_target = NodeId::NONE;
            n.timers.relay_hop = NodeId::NONE;
            n.ch = n.assigned;
            n.phase = Phase::Advertising;
        }
        _ => {}
    }
}

/// Handles an ASSOCIATE_ACK; shared by both rounds of a slot.
fn on_associate_ack(n: &mut NodeState, m: &Message, cx: &mut Ctx<'_>) -> bool {
    let Some(target) = m.target() else { return false };
    let granted = Channel(m.payload[0]);
    match (n.role, n.phase) {
        (Role::Tentative, Phase::ReturnedToParent | Phase::AwaitAssociateAck | Phase::RetryBackoff) if target == n.id && m.src == n.pid => {
            become_head(n, granted, cx);
            true
        }
        (Role::ClusterHead, Phase::ForwardingUp | Phase::RelayBackoff)
            if target == n.timers.relay_target && m.src == n.pid && !has_pending(n, MessageType::Associate) =>
        {
            if n.timers.relay_hop == target {
                n.add_child(target, granted);
            }
            n.timers
                .pending
                .push(Message::associate_ack(n.id, n.assigned, granted, target));
            n.ch = n.assigned;
            n.phase = Phase::ForwardingDown;
            true
        }
        _ => false,
    }
}

fn has_pending(n: &NodeState, t: MessageType) -> bool {
    n.timers.pending.iter().any(|m| m.mtype == t)
}

fn root_grant(n: &mut NodeState, requester: NodeId, cx: &mut Ctx<'_>) -> Result<Channel> {
    let num = cx.cfg.num_channels;
    let own = n.assigned;
    let mut candidates: Vec<Channel> = (1..=num).map(Channel).filter(|&c| c != own).collect();
    if candidates.is_empty() {
        candidates.push(own);
    }
    let mut ranked: Vec<Channel> = candidates.iter().copied().filter(|c| !n.grants.contains(c)).collect();
    ranked.extend(n.grants.iter().copied().filter(|c| candidates.contains(c)));
    let kind = ChoiceKind::ChannelAssignment {
        candidates,
        ranked,
        requester,
    };
    let c = Channel(cx.choose(n.id, kind)?);
    n.grants.retain(|&g| g != c);
    n.grants.push(c);
    Ok(c)
}

fn head_hears(n: &mut NodeState, m: &Message, cx: &mut Ctx<'_>) -> Result<()> {
    match m.mtype {
        MessageType::BeaconAck if cx.cfg.variant == Variant::WithAcks => {
            n.timers
                .pending
                .push(Message::ack_response(n.id, n.assigned, cx.cfg.ack_wait_slots, m.src));
        }
        MessageType::Associate if m.payload[0] == ROLE_CODE_SLAVE => {
            if m.requester() == Some(m.src) {
                n.add_child(m.src, n.assigned);
            }
        }
        MessageType::Associate => {
            let req = m.requester().unwrap_or(m.src);
            if n.id.is_root() {
                let c = root_grant(n, req, cx)?;
                if req == m.src {
                    n.add_child(req, c);
                }
                cx.response = Some(Message::associate_ack(n.id, m.channel, c, req));
            } else if !req.is_none() {
                n.timers.relay_target = req;
                n.timers.relay_hop = m.src;
                n.timers
                    .pending
                    .push(Message::associate(n.id, n.pc, ROLE_CODE_HEAD, req));
                n.phase = Phase::ForwardingUp;
            }
        }
        _ => {}
    }
    Ok(())
}

fn listen(n: &mut NodeState, heard: Option<(&Message, SignalClass)>, parity: u8, cx: &mut Ctx<'_>) -> Result<()> {
    let cfg = cx.cfg;
    match (n.role, n.phase) {
        (Role::Free, Phase::Listening) => match heard {
            Some((m, sig)) if m.mtype == MessageType::Beacon => free_hears_beacon(n, m, sig, cx)?,
            _ => hop_tick(n, cfg),
        },
        (Role::Free | Role::Tentative, Phase::Backoff) => {
            if n.timers.pending.is_empty() && n.timers.wait_remaining > 0 {
                n.timers.wait_remaining -= 1;
                if n.timers.wait_remaining == 0 {
                    cx.events.push(StepEvent::TimerExpired {
                        node: n.id,
                        timer: TimerKind::Backoff,
                    });
                    n.timers
                        .pending
                        .push(Message::associate(n.id, n.pc, ROLE_CODE_SLAVE, n.id));
                }
            }
        }
        (Role::Free, Phase::AwaitAckResponse) => match heard {
            Some((m, _)) if m.mtype == MessageType::AckResponse && m.target() == Some(n.id) && m.src == n.pid => {
                become_tentative(n, m.payload[0], cx)?;
            }
            Some((m, sig)) if m.mtype == MessageType::Beacon => free_hears_beacon(n, m, sig, cx)?,
            _ => back_to_listening(n, cfg),
        },
        (Role::Tentative, Phase::Scanning) => match heard {
            Some((m, SignalClass::Close))
                if m.mtype == MessageType::Beacon && Some(beacon_tier(m)) == n.timers.remembered_tier =>
            {
                let remembered = n.timers.remembered_tier;
                n.clear_timers();
                n.timers.remembered_tier = remembered;
                n.pid = m.src;
                n.pc = m.channel;
                n.timers
                    .pending
                    .push(Message::associate(n.id, n.pc, ROLE_CODE_SLAVE, n.id));
                n.phase = Phase::Backoff;
            }
            _ => {
                n.timers.wait_remaining = n.timers.wait_remaining.saturating_sub(1);
                n.timers.dwell_remaining = n.timers.dwell_remaining.saturating_sub(1);
                if n.timers.wait_remaining == 0 {
                    cx.events.push(StepEvent::TimerExpired {
                        node: n.id,
                        timer: TimerKind::TentativeWait,
                    });
                    let remembered = n.timers.remembered_tier;
                    n.clear_timers();
                    n.timers.remembered_tier = remembered;
                    n.ch = n.pc;
                    n.phase = Phase::ReturnedToParent;
                } else if n.timers.dwell_remaining == 0 {
                    cx.events.push(StepEvent::TimerExpired {
                        node: n.id,
                        timer: TimerKind::Dwell,
                    });
                    n.ch = next_scan_channel(n, cx)?;
                    n.timers.dwell_remaining = cfg.scan_dwell_slots;
                }
            }
        },
        (Role::Tentative, Phase::ReturnedToParent) => {
            if let Some((m, _)) = heard {
                if !on_associate_ack(n, m, cx) && m.mtype == MessageType::Beacon && m.src == n.pid {
                    n.timers
                        .pending
                        .push(Message::associate(n.id, n.pc, ROLE_CODE_HEAD, n.id));
                }
            }
        }
        (Role::Tentative, Phase::AwaitAssociateAck) => {
            if let Some((m, _)) = heard {
                // a fresh BEACON from the parent means the request was lost
                if !on_associate_ack(n, m, cx) && m.mtype == MessageType::Beacon && m.src == n.pid {
                    n.timers.wait_remaining = cx.choose(
                        n.id,
                        ChoiceKind::RandomWaitDraw {
                            lo: 1,
                            hi: cfg.max_random_wait,
                        },
                    )?;
                    n.phase = Phase::RetryBackoff;
                }
            }
        }
        (Role::Tentative, Phase::RetryBackoff) => {
            let acked = matches!(heard, Some((m, _)) if on_associate_ack(n, m, cx));
            if !acked {
                n.timers.wait_remaining = n.timers.wait_remaining.saturating_sub(1);
                if n.timers.wait_remaining == 0 {
                    cx.events.push(StepEvent::TimerExpired {
                        node: n.id,
                        timer: TimerKind::Backoff,
                    });
                    n.phase = Phase::ReturnedToParent;
                }
            }
        }
        (Role::ClusterHead, Phase::Advertising) => {
            if let Some((m, _)) = heard {
                head_hears(n, m, cx)?;
            }
        }
        (Role::ClusterHead, Phase::ForwardingUp) => {
            if let Some((m, _)) = heard {
                let relay_sent = !has_pending(n, MessageType::Associate);
                if !on_associate_ack(n, m, cx) && relay_sent && m.mtype == MessageType::Beacon && m.src == n.pid {
                    // the relayed request was lost: the parent is idle again
                    n.timers.wait_remaining = cx.choose(
                        n.id,
                        ChoiceKind::RandomWaitDraw {
                            lo: 1,
                            hi: cfg.max_random_wait,
                        },
                    )?;
                    n.phase = Phase::RelayBackoff;
                }
            }
        }
        (Role::ClusterHead, Phase::RelayBackoff) => {
            let acked = matches!(heard, Some((m, _)) if on_associate_ack(n, m, cx));
            if !acked {
                n.timers.wait_remaining = n.timers.wait_remaining.saturating_sub(1);
                // re-send only into a slot where the parent is not beaconing
                let next_parity = 1 - u32::from(parity);
                if n.timers.wait_remaining == 0 && next_parity == n.tier % 2 {
                    cx.events.push(StepEvent::TimerExpired {
                        node: n.id,
                        timer: TimerKind::Backoff,
                    });
                    let target = n.timers.relay_target;
                    n.timers
                        .pending
                        .push(Message::associate(n.id, n.pc, ROLE_CODE_HEAD, target));
                    n.phase = Phase::ForwardingUp;
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Advances `s` by one slot given the frame `m` it observed.
///
/// A node that transmitted this slot ignores `m`. `sig` classifies the
/// sender; OutOfRange and EMPTY both count as silence.
pub fn deliver(
    s: &NodeState,
    m: &Message,
    sig: SignalClass,
    parity: u8,
    cfg: &ProtocolConfig,
    resolver: &mut dyn Resolver,
) -> Result<Delivery> {
    let out = emit(s, parity, cfg);
    let mut n = s.clone();
    let mut cx = Ctx {
        cfg,
        resolver,
        events: Vec::new(),
        response: None,
    };
    if !out.is_empty() {
        if !n.timers.pending.is_empty() {
            n.timers.pending.remove(0);
        }
        after_send(&mut n, &out, &mut cx);
    } else {
        let heard = if m.is_empty() || sig == SignalClass::OutOfRange || m.channel != s.ch {
            None
        } else {
            Some((m, sig))
        };
        listen(&mut n, heard, parity, &mut cx)?;
    }
    Ok(Delivery {
        state: n,
        events: cx.events,
        response: cx.response,
    })
}

/// [`deliver`] with resolutions supplied as a list.
pub fn deliver_with(
    s: &NodeState,
    m: &Message,
    sig: SignalClass,
    parity: u8,
    cfg: &ProtocolConfig,
    resolutions: &[Resolution],
) -> Result<Delivery> {
    deliver(s, m, sig, parity, cfg, &mut ListResolver(resolutions))
}

/// Advances a node on a frame heard in the response round.
pub fn deliver_response(s: &NodeState, m: &Message, sig: SignalClass, cfg: &ProtocolConfig) -> (NodeState, Vec<StepEvent>) {
    let mut n = s.clone();
    let mut recorder = Recorder::default();
    let mut cx = Ctx {
        cfg,
        resolver: &mut recorder,
        events: Vec::new(),
        response: None,
    };
    if !m.is_empty() && sig != SignalClass::OutOfRange && m.mtype == MessageType::AssociateAck {
        on_associate_ack(&mut n, m, &mut cx);
    }
    (n, cx.events)
}

/// The choice points [`deliver`] will ask for on these inputs.
pub fn choice_points(
    s: &NodeState,
    m: &Message,
    sig: SignalClass,
    parity: u8,
    cfg: &ProtocolConfig,
) -> Vec<ChoicePoint> {
    let mut rec = Recorder::default();
    // the recorder never fails, so neither does deliver
    let _ = deliver(s, m, sig, parity, cfg, &mut rec);
    rec.0
}

/// Whole-network state: nodes in id order plus the reserved-slot parity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetworkState {
    pub nodes: Vec<NodeState>,
    pub parity: u8,
}

impl NetworkState {
    /// `init_channels[i]` is the starting channel of node `i + 1`; the root's entry is ignored.
    pub fn initial(init_channels: &[Channel], cfg: &ProtocolConfig) -> Result<NetworkState> {
        if init_channels.len() != cfg.max_id as usize {
            return Err(Error::Config(format!(
                "expected {} initial channels, got {}",
                cfg.max_id,
                init_channels.len()
            )));
        }
        for (i, c) in init_channels.iter().enumerate().skip(1) {
            if c.is_none() || c.0 > cfg.num_channels {
                return Err(Error::Config(format!(
                    "initial channel {} of node {} is outside 1..={}",
                    c,
                    i + 1,
                    cfg.num_channels
                )));
            }
        }
        Ok(NetworkState {
            nodes: init_channels
                .iter()
                .enumerate()
                .map(|(i, &c)| node_init(NodeId::from_index(i), c, cfg))
                .collect(),
            parity: 0,
        })
    }

    pub fn is_goal(&self) -> bool {
        self.nodes.iter().all(|n| n.role.is_joined())
    }

    pub fn joined_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.role.is_joined()).count()
    }

    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[id.index()]
    }
}

/// Both rounds of one slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotRecord {
    pub primary: SlotOutcome,
    pub response: Option<SlotOutcome>,
}

impl SlotRecord {
    /// Every frame submitted in the slot, both rounds.
    pub fn all_sent(&self) -> impl Iterator<Item = &Message> {
        self.primary
            .sent
            .iter()
            .chain(self.response.iter().flat_map(|r| r.sent.iter()))
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: NetworkState,
    pub record: SlotRecord,
    pub events: Vec<StepEvent>,
}

fn signal(t: &Topology, m: &Message, receiver: NodeId) -> SignalClass {
    if m.is_empty() || m.src.is_none() || m.src == receiver {
        SignalClass::OutOfRange
    } else {
        t.class_of(m.src, receiver)
    }
}

fn primary_round(ns: &NetworkState, t: &Topology, cfg: &ProtocolConfig) -> Result<SlotOutcome> {
    let subs: Vec<Message> = ns.nodes.iter().map(|n| emit(n, ns.parity, cfg)).collect();
    step_slot(t, &subs, cfg)
}

/// Choice points of the coming slot, ordered by node id.
pub fn slot_choices(ns: &NetworkState, t: &Topology, cfg: &ProtocolConfig) -> Result<Vec<ChoicePoint>> {
    let outcome = primary_round(ns, t, cfg)?;
    Ok(ns
        .nodes
        .iter()
        .zip(&outcome.delivered)
        .flat_map(|(n, m)| choice_points(n, m, signal(t, m, n.id), ns.parity, cfg))
        .collect())
}

/// Every full resolution of `choices`, in lexicographic order of values.
pub fn enumerate_resolutions(choices: &[ChoicePoint]) -> Vec<Vec<Resolution>> {
    let mut out = vec![Vec::new()];
    for cp in choices {
        let tag = cp.tag();
        let opts = cp.options();
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for prefix in &out {
            for &value in &opts {
                let mut r = prefix.clone();
                r.push(Resolution {
                    node: cp.node,
                    tag,
                    value,
                });
                next.push(r);
            }
        }
        out = next;
    }
    out
}

/// One reserved slot for the whole network.
///
/// All nodes emit in id order, the engine resolves the air, every node is
/// advanced in id order; if the root answered an association, a response
/// round follows. Parity flips afterwards.
pub fn network_step(
    ns: &NetworkState,
    t: &Topology,
    cfg: &ProtocolConfig,
    resolutions: &[Resolution],
) -> Result<StepResult> {
    network_step_with(ns, t, cfg, &mut ListResolver(resolutions))
}

/// [`network_step`] with choices answered on demand by `resolver`.
pub fn network_step_with(
    ns: &NetworkState,
    t: &Topology,
    cfg: &ProtocolConfig,
    resolver: &mut dyn Resolver,
) -> Result<StepResult> {
    let primary = primary_round(ns, t, cfg)?;
    let mut events: Vec<StepEvent> = primary
        .sent
        .iter()
        .filter(|m| !m.is_empty())
        .map(|m| StepEvent::MessageSent(m.clone()))
        .collect();
    let mut nodes = Vec::with_capacity(ns.nodes.len());
    let mut responses = Vec::new();
    for (n, m) in ns.nodes.iter().zip(&primary.delivered) {
        if !m.is_empty() {
            events.push(StepEvent::MessageDelivered {
                node: n.id,
                message: m.clone(),
            });
        }
        let d = deliver(n, m, signal(t, m, n.id), ns.parity, cfg, resolver)?;
        events.extend(d.events);
        if let Some(r) = d.response {
            responses.push(r);
        }
        nodes.push(d.state);
    }

    let response = if responses.is_empty() {
        None
    } else {
        let subs: Vec<Message> = primary
            .sent
            .iter()
            .map(|own| {
                responses
                    .iter()
                    .find(|r| r.src == own.src)
                    .cloned()
                    .unwrap_or_else(|| Message::empty(own.src, own.channel))
            })
            .collect();
        let outcome = step_slot(t, &subs, cfg)?;
        events.extend(
            outcome
                .sent
                .iter()
                .filter(|m| !m.is_empty())
                .map(|m| StepEvent::MessageSent(m.clone())),
        );
        for (n, m) in nodes.iter_mut().zip(&outcome.delivered) {
            if m.is_empty() {
                continue;
            }
            events.push(StepEvent::MessageDelivered {
                node: n.id,
                message: m.clone(),
            });
            let (next, ev) = deliver_response(n, m, signal(t, m, n.id), cfg);
            *n = next;
            events.extend(ev);
        }
        Some(outcome)
    };

    Ok(StepResult {
        state: NetworkState {
            nodes,
            parity: 1 - ns.parity,
        },
        record: SlotRecord { primary, response },
        events,
    })
}
