//! Shared vocabulary: identifiers, channels, frames, roles and protocol configuration.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node identifier. `1` is the original cluster head; `0` is the "no node" sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const NONE: NodeId = NodeId(0);
    pub const ROOT: NodeId = NodeId(1);

    pub fn is_none(self) -> bool {
        self.0 == 0
    }

    pub fn is_root(self) -> bool {
        self.0 == 1
    }

    /// Zero-based position in id-ordered vectors.
    pub fn index(self) -> usize {
        debug_assert!(self.0 >= 1);
        (self.0 - 1) as usize
    }

    pub fn from_index(i: usize) -> NodeId {
        NodeId(i as u32 + 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Radio channel, `1..=num_channels`; `0` is the "no channel" sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Channel(pub u32);

impl Channel {
    pub const NONE: Channel = Channel(0);

    pub fn is_none(self) -> bool {
        self.0 == 0
    }

    /// Next channel in ascending cyclic order over `1..=num_channels`.
    pub fn next(self, num_channels: u32) -> Channel {
        Channel(self.0 % num_channels + 1)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageType {
    Empty,
    Beacon,
    BeaconAck,
    AckResponse,
    Associate,
    AssociateAck,
}

impl MessageType {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::Empty => "EMPTY",
            MessageType::Beacon => "BEACON",
            MessageType::BeaconAck => "BEACON_ACK",
            MessageType::AckResponse => "ACK_RESPONSE",
            MessageType::Associate => "ASSOCIATE",
            MessageType::AssociateAck => "ASSOCIATE_ACK",
        }
    }

    pub fn parse(s: &str) -> Option<MessageType> {
        Some(match s {
            "EMPTY" => MessageType::Empty,
            "BEACON" => MessageType::Beacon,
            "BEACON_ACK" => MessageType::BeaconAck,
            "ACK_RESPONSE" => MessageType::AckResponse,
            "ASSOCIATE" => MessageType::Associate,
            "ASSOCIATE_ACK" => MessageType::AssociateAck,
            _ => return None,
        })
    }

    /// Number of payload fields the type carries.
    pub fn arity(self) -> usize {
        match self {
            MessageType::Empty | MessageType::BeaconAck => 0,
            MessageType::Beacon => 1,
            MessageType::AckResponse | MessageType::Associate | MessageType::AssociateAck => 2,
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Requested-role code carried by ASSOCIATE.
pub const ROLE_CODE_SLAVE: u32 = 0;
pub const ROLE_CODE_HEAD: u32 = 1;

/// Builds the canonical payload for `mtype`.
///
/// Layouts are positional: BEACON `[tier]`, ACK_RESPONSE `[wait_time, target]`,
/// ASSOCIATE `[role_code, requester]`, ASSOCIATE_ACK `[channel, target]`;
/// EMPTY and BEACON_ACK carry nothing.
pub fn payload_of(mtype: MessageType, args: &[u32]) -> Result<Vec<u32>> {
    if args.len() != mtype.arity() {
        return Err(Error::Schema {
            mtype,
            expected: mtype.arity(),
            got: args.len(),
        });
    }
    if mtype == MessageType::Associate && args[0] > ROLE_CODE_HEAD {
        return Err(Error::Schema {
            mtype,
            expected: 2,
            got: args.len(),
        });
    }
    Ok(args.to_vec())
}

/// A frame on the air in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Message {
    pub src: NodeId,
    pub channel: Channel,
    pub mtype: MessageType,
    pub payload: Vec<u32>,
}

impl Message {
    /// Validating constructor.
    pub fn new(src: NodeId, channel: Channel, mtype: MessageType, args: &[u32]) -> Result<Message> {
        Ok(Message {
            src,
            channel,
            mtype,
            payload: payload_of(mtype, args)?,
        })
    }

    pub fn empty(src: NodeId, channel: Channel) -> Message {
        Message {
            src,
            channel,
            mtype: MessageType::Empty,
            payload: Vec::new(),
        }
    }

    pub fn beacon(src: NodeId, channel: Channel, tier: u32) -> Message {
        Message {
            src,
            channel,
            mtype: MessageType::Beacon,
            payload: vec![tier],
        }
    }

    pub fn beacon_ack(src: NodeId, channel: Channel) -> Message {
        Message {
            src,
            channel,
            mtype: MessageType::BeaconAck,
            payload: Vec::new(),
        }
    }

    pub fn ack_response(src: NodeId, channel: Channel, wait_time: u32, target: NodeId) -> Message {
        Message {
            src,
            channel,
            mtype: MessageType::AckResponse,
            payload: vec![wait_time, target.0],
        }
    }

    pub fn associate(src: NodeId, channel: Channel, role_code: u32, requester: NodeId) -> Message {
        Message {
            src,
            channel,
            mtype: MessageType::Associate,
            payload: vec![role_code, requester.0],
        }
    }

    pub fn associate_ack(src: NodeId, channel: Channel, assigned: Channel, target: NodeId) -> Message {
        Message {
            src,
            channel,
            mtype: MessageType::AssociateAck,
            payload: vec![assigned.0, target.0],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mtype == MessageType::Empty
    }

    /// Payload schema check; every constructor above satisfies it.
    pub fn is_well_formed(&self) -> bool {
        payload_of(self.mtype, &self.payload).is_ok()
    }

    /// Target node of addressed frames (ACK_RESPONSE, ASSOCIATE_ACK).
    pub fn target(&self) -> Option<NodeId> {
        match self.mtype {
            MessageType::AckResponse | MessageType::AssociateAck => self.payload.get(1).map(|&v| NodeId(v)),
            _ => None,
        }
    }

    /// Requester carried by ASSOCIATE.
    pub fn requester(&self) -> Option<NodeId> {
        match self.mtype {
            MessageType::Associate => self.payload.get(1).map(|&v| NodeId(v)),
            _ => None,
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}:{}", self.src, self.channel, self.mtype)?;
        if !self.payload.is_empty() {
            let parts: Vec<String> = self.payload.iter().map(u32::to_string).collect();
            write!(f, "({})", parts.join(","))?;
        }
        Ok(())
    }
}

pub type Traffic = Vec<Message>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    ClusterHead,
    Tentative,
    ClusterSlave,
    Free,
}

impl Role {
    pub fn is_joined(self) -> bool {
        matches!(self, Role::ClusterHead | Role::ClusterSlave)
    }

    /// Whether a node may move from `self` to `to` in one step (identity allowed).
    pub fn can_become(self, to: Role) -> bool {
        use Role::*;
        self == to
            || matches!(
                (self, to),
                (Free, Tentative) | (Free, ClusterSlave) | (Tentative, ClusterSlave) | (Tentative, ClusterHead)
            )
    }

    pub fn short(self) -> &'static str {
        match self {
            Role::ClusterHead => "CH",
            Role::Tentative => "T",
            Role::ClusterSlave => "CS",
            Role::Free => "F",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    WithAcks,
    NoAcks,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::WithAcks => "with-acks",
            Variant::NoAcks => "no-acks",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "with-acks" => Some(Variant::WithAcks),
            "no-acks" => Some(Variant::NoAcks),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CollisionScope {
    /// Two non-empty frames on one channel anywhere destroy each other.
    Global,
    /// Collisions counted per receiver among transmitters it can hear.
    PerReceiver,
}

impl CollisionScope {
    pub fn as_str(self) -> &'static str {
        match self {
            CollisionScope::Global => "global",
            CollisionScope::PerReceiver => "per-receiver",
        }
    }

    pub fn parse(s: &str) -> Option<CollisionScope> {
        match s {
            "global" => Some(CollisionScope::Global),
            "per-receiver" => Some(CollisionScope::PerReceiver),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub max_id: u32,
    pub num_channels: u32,
    pub variant: Variant,
    /// Tentative period a NoAcks node starts with after a far BEACON.
    pub min_tentative_slots: u32,
    /// Slots spent per channel while scanning (tentative) or hopping (free).
    pub scan_dwell_slots: u32,
    /// Upper end of every random wait (close-node backoff, ASSOCIATE retries).
    pub max_random_wait: u32,
    /// wait_time carried by ACK_RESPONSE.
    pub ack_wait_slots: u32,
    pub collision_scope: CollisionScope,
    pub slot_ms: u32,
    pub slots_per_frame: u32,
    pub reserved_per_frame: u32,
}

impl ProtocolConfig {
    pub fn new(max_id: u32, num_channels: u32, variant: Variant) -> ProtocolConfig {
        ProtocolConfig {
            max_id,
            num_channels,
            variant,
            ..ProtocolConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_id < 1 {
            return Err(Error::Config("max_id must be at least 1".into()));
        }
        if self.num_channels < 1 || self.num_channels > 32 {
            return Err(Error::Config("num_channels must be in 1..=32".into()));
        }
        if self.min_tentative_slots < 1 {
            return Err(Error::Config("min_tentative_slots must be at least 1".into()));
        }
        if self.scan_dwell_slots < 1 {
            return Err(Error::Config("scan_dwell_slots must be at least 1".into()));
        }
        if self.max_random_wait < 1 {
            return Err(Error::Config("max_random_wait must be at least 1".into()));
        }
        if self.ack_wait_slots < 1 {
            return Err(Error::Config("ack_wait_slots must be at least 1".into()));
        }
        if self.reserved_per_frame < 1 || self.reserved_per_frame > self.slots_per_frame {
            return Err(Error::Config("reserved_per_frame must be in 1..=slots_per_frame".into()));
        }
        Ok(())
    }
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            max_id: 3,
            num_channels: 3,
            variant: Variant::WithAcks,
            min_tentative_slots: 2,
            scan_dwell_slots: 2,
            max_random_wait: 3,
            ack_wait_slots: 2,
            collision_scope: CollisionScope::Global,
            slot_ms: 120,
            slots_per_frame: 12,
            reserved_per_frame: 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_examples() {
        assert_eq!(payload_of(MessageType::Beacon, &[2]).unwrap(), vec![2]);
        assert_eq!(payload_of(MessageType::Empty, &[]).unwrap(), Vec::<u32>::new());
        assert_eq!(payload_of(MessageType::AssociateAck, &[3, 5]).unwrap(), vec![3, 5]);
    }

    #[test]
    fn payload_wrong_arity() {
        assert!(matches!(
            payload_of(MessageType::Beacon, &[]),
            Err(Error::Schema { expected: 1, got: 0, .. })
        ));
        assert!(payload_of(MessageType::Associate, &[7, 2]).is_err());
    }

    #[test]
    fn constructors_are_well_formed() {
        let msgs = [
            Message::empty(NodeId(1), Channel(1)),
            Message::beacon(NodeId(1), Channel(1), 0),
            Message::beacon_ack(NodeId(2), Channel(1)),
            Message::ack_response(NodeId(1), Channel(1), 2, NodeId(2)),
            Message::associate(NodeId(2), Channel(1), ROLE_CODE_HEAD, NodeId(2)),
            Message::associate_ack(NodeId(1), Channel(1), Channel(2), NodeId(2)),
        ];
        for m in &msgs {
            assert!(m.is_well_formed(), "{m}");
        }
    }

    #[test]
    fn role_transitions_never_reenter_free_or_leave_joined() {
        use Role::*;
        let all = [ClusterHead, Tentative, ClusterSlave, Free];
        for &a in &all {
            for &b in &all {
                if a != b && a.can_become(b) {
                    assert_ne!(b, Free);
                    assert!(!a.is_joined());
                }
            }
        }
    }

    #[test]
    fn channel_next_wraps() {
        assert_eq!(Channel(3).next(3), Channel(1));
        assert_eq!(Channel(1).next(3), Channel(2));
        assert_eq!(Channel(1).next(1), Channel(1));
    }
}
