//! Line-oriented slot traces and their replay.
//!
//! ```text
//! # tsch-cluster trace
//! init 1 1 3
//! slot 0 parity 0 | air 1@1:BEACON(0) - - | recv 2<1@1:BEACON(0) | res 2:scan=2 | ev role(2,F->T)
//! ```
//!
//! Each slot line lists the post-collision air per channel (`-` when silent,
//! `xN` when N frames collided),
//! every non-silent delivery, the resolutions used and the events. When the
//! root answered inside the slot a `| resp ...` section shows the second
//! round's air. Replaying the `res` fields through the protocol must
//! reproduce every line byte for byte.

use crate::error::{Error, Result};
use crate::protocol::{network_step, NetworkState, Resolution, StepEvent, StepResult};
use crate::mac::SlotOutcome;
use crate::topology::Topology;
use crate::types::{Channel, ProtocolConfig};

pub const HEADER: &str = "# tsch-cluster trace";

fn air(outcome: &SlotOutcome) -> String {
    outcome
        .on_air
        .iter()
        .map(|m| {
            if !m.is_empty() {
                return m.to_string();
            }
            let senders = outcome.sent.iter().filter(|s| !s.is_empty() && s.channel == m.channel).count();
            if senders > 1 {
                format!("x{senders}")
            } else {
                "-".to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn section(name: &str, body: &str) -> String {
    if body.is_empty() {
        name.to_string()
    } else {
        format!("{name} {body}")
    }
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Renders one slot; `parity` is the parity the slot ran in.
pub fn render_slot(index: usize, parity: u8, step: &StepResult, resolutions: &[Resolution]) -> String {
    let primary = &step.record.primary;
    let recv = join(
        primary
            .delivered
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(i, m)| format!("{}<{}", i + 1, m)),
    );
    let events = join(
        step.events
            .iter()
            .filter(|e| !matches!(e, StepEvent::MessageSent(_) | StepEvent::MessageDelivered { .. })),
    );
    let mut line = format!(
        "slot {index} parity {parity} | air {} | {} | {} | {}",
        air(primary),
        section("recv", &recv),
        section("res", &join(resolutions.iter())),
        section("ev", &events)
    );
    if let Some(resp) = &step.record.response {
        line.push_str(" | resp ");
        line.push_str(&air(resp));
    }
    line
}

pub fn render_init(init_channels: &[Channel]) -> String {
    format!("init {}", join(init_channels.iter().map(|c| c.0)))
}

/// A parsed trace: initial channels plus per-slot resolutions and the original lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub init_channels: Vec<Channel>,
    pub resolutions: Vec<Vec<Resolution>>,
    pub lines: Vec<String>,
}

impl Trace {
    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        out.push_str(&render_init(&self.init_channels));
        out.push('\n');
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Config(format!("trace line {line}: {}", msg.into()))
}

pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut init = None;
    let mut resolutions = Vec::new();
    let mut lines = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let no = no + 1;
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("init ") {
            let chans = rest
                .split_whitespace()
                .map(|c| c.parse().map(Channel).map_err(|_| bad(no, format!("bad channel {c:?}"))))
                .collect::<Result<Vec<_>>>()?;
            init = Some(chans);
            continue;
        }
        if !line.starts_with("slot ") {
            return Err(bad(no, "expected `init` or `slot`"));
        }
        let res_field = line
            .split(" | ")
            .find_map(|part| if part == "res" { Some("") } else { part.strip_prefix("res ") })
            .ok_or_else(|| bad(no, "missing `res` section"))?;
        let res = res_field
            .split_whitespace()
            .map(|r| Resolution::parse(r).ok_or_else(|| bad(no, format!("bad resolution {r:?}"))))
            .collect::<Result<Vec<_>>>()?;
        resolutions.push(res);
        lines.push(line.to_string());
    }
    Ok(Trace {
        init_channels: init.ok_or_else(|| bad(0, "missing `init` line"))?,
        resolutions,
        lines,
    })
}

/// Runs `per_slot` resolutions from the initial state and renders every slot.
pub fn record(
    t: &Topology,
    cfg: &ProtocolConfig,
    init_channels: &[Channel],
    per_slot: &[Vec<Resolution>],
) -> Result<(Trace, NetworkState)> {
    let mut ns = NetworkState::initial(init_channels, cfg)?;
    let mut lines = Vec::with_capacity(per_slot.len());
    for (i, res) in per_slot.iter().enumerate() {
        let step = network_step(&ns, t, cfg, res)?;
        lines.push(render_slot(i, ns.parity, &step, res));
        ns = step.state;
    }
    Ok((
        Trace {
            init_channels: init_channels.to_vec(),
            resolutions: per_slot.to_vec(),
            lines,
        },
        ns,
    ))
}

/// Replays a trace and checks every rendered slot matches; returns the final state.
pub fn replay(t: &Topology, cfg: &ProtocolConfig, trace: &Trace) -> Result<NetworkState> {
    let (again, end) = record(t, cfg, &trace.init_channels, &trace.resolutions)?;
    for (i, (a, b)) in trace.lines.iter().zip(&again.lines).enumerate() {
        if a != b {
            return Err(Error::Contract(format!("slot {i} diverges on replay:\n  trace:  {a}\n  replay: {b}")));
        }
    }
    Ok(end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::{explore, shortest_witness};
    use crate::types::Variant;

    #[test]
    fn witness_trace_round_trips() {
        let t = Topology::new(3, &[], &[(1, 2), (1, 3)]).unwrap();
        let cfg = ProtocolConfig::new(3, 3, Variant::NoAcks);
        let init = vec![Channel(1), Channel(1), Channel(3)];
        let g = explore(&t, &init, &cfg, 64).unwrap();
        let w = shortest_witness(&g).unwrap();
        let per_slot: Vec<_> = w.iter().map(|e| e.resolutions.clone()).collect();
        let (trace, end) = record(&t, &cfg, &init, &per_slot).unwrap();
        assert!(end.is_goal());
        let text = trace.to_text();
        let parsed = parse_trace(&text).unwrap();
        assert_eq!(parsed, trace);
        assert_eq!(replay(&t, &cfg, &parsed).unwrap(), end);
        assert!(text.contains("slot 0 parity 0 | air 1@1:BEACON(0) - -"));
        assert!(text.contains("slot 1 parity 1 | air - - - | recv | res | ev\n"));
    }

    #[test]
    fn tampered_trace_is_rejected() {
        let t = Topology::new(2, &[(1, 2)], &[]).unwrap();
        let cfg = ProtocolConfig::new(2, 3, Variant::WithAcks);
        let (mut trace, _) = record(&t, &cfg, &[Channel(1), Channel(1)], &[vec![], vec![]]).unwrap();
        trace.lines[0] = trace.lines[0].replace("BEACON(0)", "BEACON(1)");
        assert!(replay(&t, &cfg, &trace).is_err());
        assert!(parse_trace("slot 0 parity 0 | res").is_err());
    }
}
