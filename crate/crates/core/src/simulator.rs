//! Seeded randomized execution for networks too large to explore.
//!
//! Random waits are drawn from ChaCha8 (`rand_chacha::ChaCha8Rng`, seeded
//! with `seed_from_u64(seed)`) through `random_range(lo..=hi)`; scanning goes
//! through channels in ascending order and the root grants the best-ranked
//! channel other than the requester's parent channel. Random initial channels, when requested, are drawn from the
//! same stream before the first slot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::protocol::{
    network_step_with, ChoiceKind, ChoicePoint, NetworkState, Resolution, Resolver, SlotRecord,
};
use crate::topology::Topology;
use crate::types::{Channel, ProtocolConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub formed: bool,
    /// Reserved slots until the goal, or the bound.
    pub slots_used: u64,
    pub slotframes: u64,
    pub milliseconds: u64,
    pub seed: u64,
    pub init_channels: Vec<Channel>,
    /// Resolutions taken in each slot; enough to replay the run.
    pub resolutions: Vec<Vec<Resolution>>,
    pub trace: Option<Vec<SlotRecord>>,
}

impl RunResult {
    pub fn csv_header() -> &'static str {
        "seed,formed,slots,slotframes,milliseconds"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.seed, self.formed, self.slots_used, self.slotframes, self.milliseconds
        )
    }
}

/// Whole slotframes and milliseconds spent on `slots` reserved slots.
pub fn slot_time(slots: u64, cfg: &ProtocolConfig) -> (u64, u64) {
    let reserved = u64::from(cfg.reserved_per_frame.max(1));
    let frames = slots.div_ceil(reserved);
    (frames, frames * u64::from(cfg.slots_per_frame) * u64::from(cfg.slot_ms))
}

struct SimResolver<'a> {
    rng: &'a mut ChaCha8Rng,
    state: &'a NetworkState,
    forced: &'a [Resolution],
    taken: Vec<Resolution>,
}

impl Resolver for SimResolver<'_> {
    fn resolve(&mut self, cp: &ChoicePoint) -> Result<u32> {
        let tag = cp.tag();
        let forced = self
            .forced
            .iter()
            .find(|r| r.node == cp.node && r.tag == tag)
            .map(|r| r.value)
            .filter(|v| cp.options().contains(v));
        let value = match (forced, &cp.kind) {
            (Some(v), _) => v,
            (None, ChoiceKind::RandomWaitDraw { lo, hi }) => self.rng.random_range(*lo..=*hi),
            (None, ChoiceKind::ChannelAssignment { ranked, requester, .. }) => {
                // never hand a head its parent's channel: the parent could no
                // longer hear its other children over the new head's beacons
                let parent_channel = self.state.nodes.get(requester.index()).map(|r| r.pc);
                ranked
                    .iter()
                    .find(|&&c| Some(c) != parent_channel)
                    .unwrap_or(&ranked[0])
                    .0
            }
            (None, _) => cp.default_value(),
        };
        self.taken.push(cp.resolve_with(value));
        Ok(value)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep every slot's record in the result.
    pub record_trace: bool,
    /// Resolutions to impose per slot; later slots fall back to the seeded policy.
    pub forced: Vec<Vec<Resolution>>,
}

fn check_run(t: &Topology, cfg: &ProtocolConfig, slot_bound: u64) -> Result<()> {
    cfg.validate()?;
    if slot_bound == 0 {
        return Err(Error::Config("slot bound must be at least 1".into()));
    }
    if t.node_count() != cfg.max_id {
        return Err(Error::Config(format!(
            "topology has {} nodes but max_id is {}",
            t.node_count(),
            cfg.max_id
        )));
    }
    Ok(())
}

fn simulate(
    t: &Topology,
    init_channels: &[Channel],
    cfg: &ProtocolConfig,
    seed: u64,
    slot_bound: u64,
    opts: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<RunResult> {
    let mut ns = NetworkState::initial(init_channels, cfg)?;
    let mut slots = 0u64;
    let mut resolutions = Vec::new();
    let mut trace = opts.record_trace.then(Vec::new);
    while !ns.is_goal() && slots < slot_bound {
        let forced = opts.forced.get(slots as usize).map_or(&[][..], Vec::as_slice);
        let mut resolver = SimResolver {
            rng: &mut *rng,
            state: &ns,
            forced,
            taken: Vec::new(),
        };
        let step = network_step_with(&ns, t, cfg, &mut resolver)?;
        resolutions.push(resolver.taken);
        if let Some(tr) = trace.as_mut() {
            tr.push(step.record);
        }
        ns = step.state;
        slots += 1;
    }
    let (slotframes, milliseconds) = slot_time(slots, cfg);
    Ok(RunResult {
        formed: ns.is_goal(),
        slots_used: slots,
        slotframes,
        milliseconds,
        seed,
        init_channels: init_channels.to_vec(),
        resolutions,
        trace,
    })
}

/// One seeded run from fixed initial channels.
pub fn run(t: &Topology, init_channels: &[Channel], cfg: &ProtocolConfig, seed: u64, slot_bound: u64) -> Result<RunResult> {
    run_with(t, init_channels, cfg, seed, slot_bound, &RunOptions::default())
}

pub fn run_with(
    t: &Topology,
    init_channels: &[Channel],
    cfg: &ProtocolConfig,
    seed: u64,
    slot_bound: u64,
    opts: &RunOptions,
) -> Result<RunResult> {
    check_run(t, cfg, slot_bound)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate(t, init_channels, cfg, seed, slot_bound, opts, &mut rng)
}

/// How a batch picks each run's initial channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitChannels {
    Fixed(Vec<Channel>),
    /// Drawn per seed; the root stays on channel 1.
    Random,
}

/// One seeded run whose initial channels may themselves be drawn from the seed.
pub fn run_init(
    t: &Topology,
    init: &InitChannels,
    cfg: &ProtocolConfig,
    seed: u64,
    slot_bound: u64,
    opts: &RunOptions,
) -> Result<RunResult> {
    check_run(t, cfg, slot_bound)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chans = match init {
        InitChannels::Fixed(c) => c.clone(),
        InitChannels::Random => (0..cfg.max_id)
            .map(|i| {
                if i == 0 {
                    Channel(1)
                } else {
                    Channel(rng.random_range(1..=cfg.num_channels))
                }
            })
            .collect(),
    };
    simulate(t, &chans, cfg, seed, slot_bound, opts, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub runs: Vec<RunResult>,
    pub formed: usize,
    pub formation_rate: f64,
    /// Min, median (lower middle) and max slots over formed runs.
    pub min_slots: Option<u64>,
    pub median_slots: Option<u64>,
    pub max_slots: Option<u64>,
}

pub fn batch(
    t: &Topology,
    cfg: &ProtocolConfig,
    init: &InitChannels,
    seeds: &[u64],
    slot_bound: u64,
) -> Result<BatchSummary> {
    if seeds.is_empty() {
        return Err(Error::Config("a batch needs at least one seed".into()));
    }
    let runs = seeds
        .iter()
        .map(|&s| run_init(t, init, cfg, s, slot_bound, &RunOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    let mut formed: Vec<u64> = runs.iter().filter(|r| r.formed).map(|r| r.slots_used).collect();
    formed.sort_unstable();
    Ok(BatchSummary {
        formed: formed.len(),
        formation_rate: formed.len() as f64 / runs.len() as f64,
        min_slots: formed.first().copied(),
        median_slots: (!formed.is_empty()).then(|| formed[(formed.len() - 1) / 2]),
        max_slots: formed.last().copied(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Variant;

    fn chans(v: &[u32]) -> Vec<Channel> {
        v.iter().copied().map(Channel).collect()
    }

    fn far_children() -> Topology {
        Topology::new(3, &[], &[(1, 2), (1, 3)]).unwrap()
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = ProtocolConfig::new(3, 3, Variant::NoAcks);
        let a = run(&far_children(), &chans(&[1, 2, 2]), &cfg, 7, 200).unwrap();
        let b = run(&far_children(), &chans(&[1, 2, 2]), &cfg, 7, 200).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_far_children_config_forms_in_eight() {
        let cfg = ProtocolConfig::new(3, 3, Variant::NoAcks);
        let r = run(&far_children(), &chans(&[1, 1, 3]), &cfg, 0, 100).unwrap();
        assert!(r.formed);
        assert_eq!((r.slots_used, r.slotframes, r.milliseconds), (8, 4, 5760));
    }

    #[test]
    fn narrow_bridge_never_forms() {
        let t = Topology::new(3, &[(1, 2)], &[(2, 3)]).unwrap();
        let cfg = ProtocolConfig::new(3, 3, Variant::NoAcks);
        for seed in 0..5 {
            let r = run(&t, &chans(&[1, 1, 2]), &cfg, seed, 300).unwrap();
            assert!(!r.formed);
            assert_eq!(r.slots_used, 300);
        }
    }

    #[test]
    fn single_seed_batch_matches_run() {
        let cfg = ProtocolConfig::new(3, 3, Variant::NoAcks);
        let init = InitChannels::Fixed(chans(&[1, 1, 3]));
        let s = batch(&far_children(), &cfg, &init, &[4], 100).unwrap();
        let r = run(&far_children(), &chans(&[1, 1, 3]), &cfg, 4, 100).unwrap();
        assert_eq!(s.runs, vec![r.clone()]);
        assert_eq!(s.min_slots, Some(r.slots_used));
        assert_eq!(s.median_slots, Some(r.slots_used));
        assert!(batch(&far_children(), &cfg, &init, &[], 100).is_err());
    }

    #[test]
    fn slot_time_rounds_up_to_frames() {
        let cfg = ProtocolConfig::default();
        assert_eq!(slot_time(0, &cfg), (0, 0));
        assert_eq!(slot_time(7, &cfg), (4, 5760));
    }
}
