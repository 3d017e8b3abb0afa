//! Synchronous slot engine for dedicated TSCH time-slots.
//!
//! Each slot every node submits exactly one frame (EMPTY when listening).
//! Non-empty frames sharing a channel destroy each other; each node then
//! observes the surviving frame on its own channel, provided the sender is
//! within radio reach and is not the node itself.

use crate::error::{Error, Result};
use crate::topology::Topology;
use crate::types::{Channel, CollisionScope, Message, NodeId, ProtocolConfig, Traffic};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotOutcome {
    /// Raw submissions, one per node in id order.
    pub sent: Traffic,
    /// Post-collision air, one entry per channel in channel order.
    pub on_air: Traffic,
    /// What each node observed on its operating channel, indexed by id − 1.
    pub delivered: Vec<Message>,
}

impl SlotOutcome {
    pub fn delivered_to(&self, id: NodeId) -> &Message {
        &self.delivered[id.index()]
    }
}

/// First message in `tr` whose source is `i`.
pub fn find_id(i: NodeId, tr: &[Message]) -> Result<&Message> {
    tr.iter().find(|m| m.src == i).ok_or(Error::Lookup(i))
}

/// Messages on channel `c`, order preserved.
pub fn find_channel(c: Channel, tr: &[Message]) -> Traffic {
    tr.iter().filter(|m| m.channel == c).cloned().collect()
}

/// Keeps, for each channel `1..=num_channels`, the single frame sent on it;
/// silent or collided channels carry `message(0, c, EMPTY, [])`.
///
/// Callers strip EMPTY submissions first: a listener's EMPTY only announces
/// its channel and never occupies the air.
pub fn remove_collision(tr: &[Message], num_channels: u32) -> Traffic {
    (1..=num_channels)
        .map(|c| {
            let c = Channel(c);
            let mut on_c = tr.iter().filter(|m| m.channel == c);
            match (on_c.next(), on_c.next()) {
                (Some(m), None) => m.clone(),
                _ => Message::empty(NodeId::NONE, c),
            }
        })
        .collect()
}

fn validate(t: &Topology, submissions: &[Message], cfg: &ProtocolConfig) -> Result<()> {
    if submissions.len() != t.node_count() as usize || submissions.len() != cfg.max_id as usize {
        return Err(Error::Contract(format!(
            "expected {} submissions, got {}",
            cfg.max_id,
            submissions.len()
        )));
    }
    for (i, m) in submissions.iter().enumerate() {
        if m.src != NodeId::from_index(i) {
            return Err(Error::Contract(format!(
                "submission {} has source {}, expected {}",
                i,
                m.src,
                i + 1
            )));
        }
        if m.channel.is_none() || m.channel.0 > cfg.num_channels {
            return Err(Error::Contract(format!(
                "node {} submitted on channel {} outside 1..={}",
                m.src, m.channel, cfg.num_channels
            )));
        }
    }
    Ok(())
}

/// Runs one slot: collect, resolve collisions, deliver.
pub fn step_slot(t: &Topology, submissions: &[Message], cfg: &ProtocolConfig) -> Result<SlotOutcome> {
    validate(t, submissions, cfg)?;
    let transmitting: Traffic = submissions.iter().filter(|m| !m.is_empty()).cloned().collect();
    let on_air = remove_collision(&transmitting, cfg.num_channels);

    let delivered = submissions
        .iter()
        .map(|own| {
            let id = own.src;
            let c = own.channel;
            let silence = Message::empty(NodeId::NONE, c);
            if !own.is_empty() {
                return silence;
            }
            match cfg.collision_scope {
                CollisionScope::Global => {
                    let air = &on_air[(c.0 - 1) as usize];
                    if !air.is_empty() && t.reachable(air.src, id) {
                        air.clone()
                    } else {
                        silence
                    }
                }
                CollisionScope::PerReceiver => {
                    let mut heard = t
                        .neighbours(id)
                        .iter()
                        .map(|(nb, _)| &submissions[nb.index()])
                        .filter(|m| !m.is_empty() && m.channel == c);
                    match (heard.next(), heard.next()) {
                        (Some(m), None) => m.clone(),
                        _ => silence,
                    }
                }
            }
        })
        .collect();

    Ok(SlotOutcome {
        sent: submissions.to_vec(),
        on_air,
        delivered,
    })
}
