#![allow(dead_code)]

use proptest::prelude::*;

use tsch_cluster::mac::step_slot;
use tsch_cluster::{Channel, CollisionScope, Message, NodeId, ProtocolConfig, Topology, Variant};

#[derive(Debug, Clone)]
pub struct Instance {
    pub n: u32,
    pub channels: u32,
    pub close: Vec<(u32, u32)>,
    pub range: Vec<(u32, u32)>,
    /// Per node: channel and whether it transmits.
    pub frames: Vec<(u32, bool)>,
}

fn pairs(n: u32) -> Vec<(u32, u32)> {
    (1..=n).flat_map(|a| (a + 1..=n).map(move |b| (a, b))).collect()
}

/// Up to four nodes on up to three channels; every pair is close, far or out of range.
pub fn instance() -> impl Strategy<Value = Instance> {
    (1u32..=4, 1u32..=3).prop_flat_map(|(n, channels)| {
        let pairs = pairs(n);
        let links = proptest::collection::vec(0u8..3, pairs.len());
        let frames = proptest::collection::vec((1..=channels, any::<bool>()), n as usize);
        (links, frames).prop_map(move |(links, frames)| {
            let mut close = Vec::new();
            let mut range = Vec::new();
            for (p, l) in pairs.iter().zip(links) {
                match l {
                    1 => close.push(*p),
                    2 => range.push(*p),
                    _ => {}
                }
            }
            Instance {
                n,
                channels,
                close,
                range,
                frames,
            }
        })
    })
}

/// The same instance with every pair linked; bit k of `close_mask` makes pair k close.
pub fn completed(inst: &Instance, close_mask: u8) -> Instance {
    let mut out = inst.clone();
    out.close.clear();
    out.range.clear();
    for (k, p) in pairs(inst.n).into_iter().enumerate() {
        if close_mask >> k & 1 == 1 {
            out.close.push(p);
        } else {
            out.range.push(p);
        }
    }
    out
}

fn linked(inst: &Instance, a: u32, b: u32) -> bool {
    let key = (a.min(b), a.max(b));
    a != b && (inst.close.contains(&key) || inst.range.contains(&key))
}

pub fn submissions(inst: &Instance) -> Vec<Message> {
    inst.frames
        .iter()
        .enumerate()
        .map(|(i, &(ch, tx))| {
            let id = NodeId(i as u32 + 1);
            if tx {
                Message::beacon(id, Channel(ch), i as u32)
            } else {
                Message::empty(id, Channel(ch))
            }
        })
        .collect()
}

/// The sender receiver `r` hears, found by counting transmitters on its channel.
pub fn oracle_delivery(inst: &Instance, r: u32, scope: CollisionScope) -> Option<u32> {
    let (ch, tx) = inst.frames[(r - 1) as usize];
    if tx {
        return None;
    }
    let senders: Vec<u32> = (1..=inst.n)
        .filter(|&s| {
            let (sc, stx) = inst.frames[(s - 1) as usize];
            stx && sc == ch && (scope == CollisionScope::Global || linked(inst, s, r))
        })
        .collect();
    match senders.as_slice() {
        [s] if linked(inst, *s, r) => Some(*s),
        _ => None,
    }
}

pub fn delivered(inst: &Instance, scope: CollisionScope) -> Vec<Message> {
    let t = Topology::new(inst.n, &inst.close, &inst.range).unwrap();
    let mut cfg = ProtocolConfig::new(inst.n, inst.channels, Variant::WithAcks);
    cfg.collision_scope = scope;
    step_slot(&t, &submissions(inst), &cfg).unwrap().delivered
}

/// Compares the engine with the oracle on one instance, both scopes, plus the per-channel air.
pub fn check_engine(inst: &Instance) -> Result<(), String> {
    let subs = submissions(inst);
    for scope in [CollisionScope::Global, CollisionScope::PerReceiver] {
        let got = delivered(inst, scope);
        for r in 1..=inst.n {
            let m = &got[(r - 1) as usize];
            let ok = match oracle_delivery(inst, r, scope) {
                Some(s) => *m == subs[(s - 1) as usize],
                None => m.is_empty(),
            };
            if !ok || m.channel != Channel(inst.frames[(r - 1) as usize].0) {
                return Err(format!("node {r} under {scope:?} heard {m} in {inst:?}"));
            }
        }
    }
    let t = Topology::new(inst.n, &inst.close, &inst.range).unwrap();
    let cfg = ProtocolConfig::new(inst.n, inst.channels, Variant::WithAcks);
    let out = step_slot(&t, &subs, &cfg).unwrap();
    if out.on_air.len() != inst.channels as usize {
        return Err(format!("{} air entries for {} channels", out.on_air.len(), inst.channels));
    }
    for c in 1..=inst.channels {
        let on_c: Vec<&Message> = subs.iter().filter(|m| !m.is_empty() && m.channel == Channel(c)).collect();
        let air = &out.on_air[(c - 1) as usize];
        let ok = if on_c.len() == 1 { air == on_c[0] } else { air.is_empty() };
        if !ok {
            return Err(format!("channel {c} air {air} in {inst:?}"));
        }
    }
    Ok(())
}

/// Lower-bound formula summed term by term, powers of two built by repeated doubling.
pub fn brute_force_bound(h: u32) -> u128 {
    let mut total: u128 = 5 + 2 * h as u128;
    for i in 1..h {
        let mut pow: u128 = 1;
        for _ in 0..i {
            pow += pow;
        }
        total += 7 + pow * i as u128;
    }
    total
}
