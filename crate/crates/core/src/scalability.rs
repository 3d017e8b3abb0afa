//! Closed-form lower bound on formation time for balanced binary trees.
//!
//! For a tree of height `h` the bound on reserved slots is
//! `5 + 2h + sum_{i=1}^{h-1} (7 + 2^i * i)`, which grows like `n log n`
//! in the node count `n = 2^(h+1) - 1`. Everything is exact integer
//! arithmetic; only the ratio column is a float.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::types::ProtocolConfig;

/// Time conversion used in every report.
pub const CONVENTION: &str =
    "reserved slots; slotframes = ceil(slots / reserved_per_frame); ms = slotframes * slots_per_frame * slot_ms";

/// Published figures for the 3-node network, reported verbatim next to the derived ones.
pub const PUBLISHED_THREE_NODE_SLOTFRAMES: u64 = 3;
pub const PUBLISHED_THREE_NODE_MS: u64 = 5760;
/// Published formation time, in minutes, for a tree of height 8.
pub const PUBLISHED_H8_MINUTES: u64 = 27;

/// Lower floor on `slots / (n log2 n)` used by [`superlinearity_check`].
pub const RATIO_FLOOR: f64 = 0.25;

/// Largest height accepted by the closed forms.
pub const MAX_HEIGHT: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSchedule {
    /// Heads of a level associate one after another.
    Sequential,
    /// The root serves the two subtrees in parallel.
    RootParallel,
}

/// Slots for a tier-`t` node to associate: one up and one down per hop.
pub fn association_latency(t: u64) -> Result<u64> {
    if t == 0 {
        return Err(Error::Domain("the root does not associate (tier 0)".into()));
    }
    t.checked_mul(2)
        .ok_or_else(|| Error::Domain(format!("tier {t} is too large")))
}

fn pow2(i: u32) -> BigUint {
    BigUint::one() << i as usize
}

fn check_height(h: u32) -> Result<()> {
    if h == 0 {
        return Err(Error::Domain("height 0 is outside the formula (no non-root level)".into()));
    }
    if h > MAX_HEIGHT {
        return Err(Error::Domain(format!("height {h} exceeds {MAX_HEIGHT}")));
    }
    Ok(())
}

/// Slots needed to complete level `i` of the tree.
pub fn per_level_time(i: u32, schedule: LevelSchedule) -> Result<BigUint> {
    check_height(i)?;
    let i_big = BigUint::from(i);
    Ok(match schedule {
        LevelSchedule::Sequential => BigUint::from(5u32) + pow2(i + 1) * i_big,
        LevelSchedule::RootParallel => BigUint::from(7u32) + pow2(i) * i_big,
    })
}

/// Lower bound on reserved slots to form a balanced binary tree of height `h`.
pub fn lower_bound_slots(h: u32) -> Result<BigUint> {
    check_height(h)?;
    let mut total = BigUint::from(5u32) + BigUint::from(2 * h);
    for i in 1..h {
        total += per_level_time(i, LevelSchedule::RootParallel)?;
    }
    Ok(total)
}

/// Nodes in a balanced binary tree of height `h`.
pub fn node_count(h: u32) -> BigUint {
    pow2(h + 1) - BigUint::one()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub slotframes: BigUint,
    pub milliseconds: BigUint,
}

/// Converts reserved slots into whole slotframes and milliseconds.
pub fn convert(slots: &BigUint, cfg: &ProtocolConfig) -> Conversion {
    let reserved = BigUint::from(cfg.reserved_per_frame.max(1));
    let slotframes = (slots + &reserved - BigUint::one()) / &reserved;
    let milliseconds = &slotframes * BigUint::from(cfg.slots_per_frame) * BigUint::from(cfg.slot_ms);
    Conversion {
        slotframes,
        milliseconds,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub h: u32,
    pub nodes: BigUint,
    pub slots: BigUint,
    pub slotframes: BigUint,
    pub milliseconds: BigUint,
    /// `slots / (nodes * log2(nodes))`.
    pub ratio: f64,
}

fn ratio(slots: &BigUint, nodes: &BigUint) -> f64 {
    let n = nodes.to_f64().unwrap_or(f64::INFINITY);
    let s = slots.to_f64().unwrap_or(f64::INFINITY);
    if n <= 1.0 {
        return 0.0;
    }
    s / (n * n.log2())
}

pub fn report(h_values: &[u32], cfg: &ProtocolConfig) -> Result<Vec<BoundReport>> {
    h_values
        .iter()
        .map(|&h| {
            let slots = lower_bound_slots(h)?;
            let nodes = node_count(h);
            let conv = convert(&slots, cfg);
            Ok(BoundReport {
                h,
                ratio: ratio(&slots, &nodes),
                nodes,
                slots,
                slotframes: conv.slotframes,
                milliseconds: conv.milliseconds,
            })
        })
        .collect()
}

/// Whether the slot bound stays above `RATIO_FLOOR * n log2 n` for every height in range.
pub fn superlinearity_check(h_min: u32, h_max: u32) -> Result<bool> {
    if h_min < 2 || h_max <= h_min {
        return Err(Error::Domain(format!(
            "need 2 <= h_min < h_max, got h_min={h_min}, h_max={h_max}"
        )));
    }
    for h in h_min..=h_max {
        let slots = lower_bound_slots(h)?;
        if ratio(&slots, &node_count(h)) < RATIO_FLOOR {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Milliseconds rendered as minutes with one decimal.
pub fn minutes(ms: &BigUint) -> String {
    if ms.is_zero() {
        return "0.0".into();
    }
    let tenths = (ms + BigUint::from(3000u32)) / BigUint::from(6000u32);
    let ten = BigUint::from(10u32);
    format!("{}.{}", &tenths / &ten, &tenths % &ten)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn association_latency_examples() {
        assert_eq!(association_latency(1).unwrap(), 2);
        assert_eq!(association_latency(4).unwrap(), 8);
        assert_eq!(association_latency(8).unwrap(), 16);
        assert!(association_latency(0).is_err());
    }

    #[test]
    fn per_level_examples() {
        assert_eq!(per_level_time(1, LevelSchedule::Sequential).unwrap(), big(9));
        assert_eq!(per_level_time(1, LevelSchedule::RootParallel).unwrap(), big(9));
        assert_eq!(per_level_time(3, LevelSchedule::RootParallel).unwrap(), big(31));
    }

    #[test]
    fn bound_domain() {
        assert!(lower_bound_slots(0).is_err());
        assert!(lower_bound_slots(MAX_HEIGHT).is_ok());
        assert!(lower_bound_slots(MAX_HEIGHT + 1).is_err());
    }

    #[test]
    fn conversions() {
        let cfg = ProtocolConfig::default();
        let c = convert(&big(1608), &cfg);
        assert_eq!(c.slotframes, big(804));
        assert_eq!(c.milliseconds, big(1_157_760));
        assert_eq!(convert(&big(7), &cfg).slotframes, big(4));
        assert_eq!(convert(&big(8), &cfg).milliseconds, big(5760));
        assert_eq!(minutes(&big(1_157_760)), "19.3");
    }

    #[test]
    fn superlinearity_preconditions() {
        assert!(superlinearity_check(2, 2).is_err());
        assert!(superlinearity_check(1, 3).is_err());
        assert!(superlinearity_check(2, 3).unwrap());
    }
}
