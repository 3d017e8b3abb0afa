use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tsch_cluster::explorer::{
    check_formation, explore_bounded, initial_configs, max_states_from_env, shortest_witness, Edge, StateGraph,
    Verdict,
};
use tsch_cluster::protocol::StepResult;
use tsch_cluster::scalability::{self, CONVENTION};
use tsch_cluster::scenario::{self, check_channels, InitialSpec, Scenario, BUILTINS};
use tsch_cluster::simulator::{batch, slot_time, InitChannels};
use tsch_cluster::topology::balanced_binary_tree;
use tsch_cluster::trace::{self, render_init, render_slot};
use tsch_cluster::{Channel, CollisionScope, Error, Variant};

const EXIT_FAILS: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "tsch-cluster", version, about = "Formation analysis for the TSCH cluster-tree protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether every execution forms the network
    Verify(ScenarioArgs),
    /// Print a minimum-slot execution that forms the network
    Witness(ScenarioArgs),
    /// Run seeded randomized executions
    Simulate(SimulateArgs),
    /// Print the closed-form lower bound for balanced binary trees
    Bound(BoundArgs),
    /// List the built-in scenarios
    Scenarios,
    /// Re-run a trace file and check it slot by slot
    Replay {
        scenario: String,
        trace: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    WithAcks,
    NoAcks,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Global,
    PerReceiver,
}

#[derive(Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Args, Default)]
struct Overrides {
    /// Protocol variant
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Initial channels of nodes 2..=n, e.g. 1,3
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<u32>>,
    /// Collision scope
    #[arg(long, value_enum)]
    scope: Option<ScopeArg>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario name or path to a TOML file
    scenario: String,
    #[command(flatten)]
    overrides: Overrides,
    /// Depth bound in slots
    #[arg(long)]
    depth: Option<usize>,
    /// Analyse every initial channel assignment
    #[arg(long, conflicts_with = "channels")]
    sweep: bool,
    /// Write the witness or counterexample as a trace file
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    scenario: String,
    #[command(flatten)]
    overrides: Overrides,
    /// Seeds, as a list and/or inclusive ranges, e.g. 1-100 or 3,7,9
    #[arg(long, value_parser = parse_list)]
    seeds: Option<NumberList>,
    /// Tree height, for generated topologies
    #[arg(long)]
    height: Option<u32>,
    /// Slots before a run counts as not formed
    #[arg(long)]
    slot_bound: Option<u64>,
    /// Write the first seed's run as a trace file
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct BoundArgs {
    /// Tree heights, e.g. 8 or 1-12
    #[arg(long = "h", value_parser = parse_list, default_value = "8")]
    heights: NumberList,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Clone)]
struct NumberList(Vec<u64>);

fn parse_list(s: &str) -> Result<NumberList, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let num = |x: &str| x.trim().parse::<u64>().map_err(|_| format!("not a number: {x:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range {part:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(NumberList(out))
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Budget { .. } => EXIT_INCONCLUSIVE,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

type CliResult = Result<(String, u8), Failure>;

fn load(name: &str, ov: &Overrides) -> Result<Scenario, Failure> {
    let mut sc = match scenario::builtin(name) {
        Some(sc) => sc,
        None => {
            let path = Path::new(name);
            if !path.exists() {
                return Err(input_error(format!(
                    "{name:?} is neither a built-in scenario nor a file (see `tsch-cluster scenarios`)"
                )));
            }
            let text = std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            scenario::parse_scenario(&text)?
        }
    };
    if let Some(v) = ov.variant {
        sc.cfg.variant = match v {
            VariantArg::WithAcks => Variant::WithAcks,
            VariantArg::NoAcks => Variant::NoAcks,
        };
    }
    if let Some(s) = ov.scope {
        sc.cfg.collision_scope = match s {
            ScopeArg::Global => CollisionScope::Global,
            ScopeArg::PerReceiver => CollisionScope::PerReceiver,
        };
    }
    if let Some(list) = &ov.channels {
        let chans: Vec<Channel> = std::iter::once(1).chain(list.iter().copied()).map(Channel).collect();
        check_channels(&sc.name, &chans, &sc.cfg)?;
        sc.initial = InitialSpec::Fixed(chans);
    }
    Ok(sc)
}

fn header(sc: &Scenario) -> String {
    format!(
        "scenario {}: {} nodes, {} channels, {}, {} collisions\n",
        sc.name,
        sc.cfg.max_id,
        sc.cfg.num_channels,
        sc.cfg.variant.as_str(),
        sc.cfg.collision_scope.as_str()
    )
}

fn init_list(chans: &[Channel]) -> String {
    chans.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

fn fixed_channels(sc: &Scenario, what: &str) -> Result<Vec<Channel>, Failure> {
    match &sc.initial {
        InitialSpec::Fixed(c) => Ok(c.clone()),
        _ => Err(input_error(format!(
            "scenario {} has no fixed initial channels; pass --channels or --sweep to {what}",
            sc.name
        ))),
    }
}

fn graph(sc: &Scenario, chans: &[Channel], depth: usize) -> Result<StateGraph, Failure> {
    Ok(explore_bounded(&sc.topology, chans, &sc.cfg, depth, max_states_from_env())?)
}

fn render_edges(g: &StateGraph, edges: &[Edge], first_index: usize) -> Vec<String> {
    edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let step = StepResult {
                state: g.states[e.to].clone(),
                record: e.record.clone(),
                events: e.events.clone(),
            };
            render_slot(first_index + i, g.states[e.from].parity, &step, &e.resolutions)
        })
        .collect()
}

fn write_trace(path: &Path, chans: &[Channel], lines: Vec<String>, resolutions: Vec<Vec<tsch_cluster::Resolution>>) -> Result<(), Failure> {
    let t = trace::Trace {
        init_channels: chans.to_vec(),
        resolutions,
        lines,
    };
    std::fs::write(path, t.to_text()).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn verdict_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Holds => 0,
        Verdict::FailsWithLasso(_) => EXIT_FAILS,
        Verdict::Inconclusive { .. } => EXIT_INCONCLUSIVE,
    }
}

fn depth_of(sc: &Scenario, a: &ScenarioArgs) -> usize {
    a.depth.unwrap_or(sc.analysis.depth)
}

fn sweep_configs(sc: &Scenario) -> Result<Vec<Vec<Channel>>, Failure> {
    Ok(initial_configs(&sc.cfg)?)
}

fn verify(a: &ScenarioArgs) -> CliResult {
    let sc = load(&a.scenario, &a.overrides)?;
    let depth = depth_of(&sc, a);
    if a.sweep || sc.initial == InitialSpec::Sweep && a.overrides.channels.is_none() {
        if a.trace.is_some() {
            return Err(input_error("--trace needs a single initial configuration"));
        }
        return verify_sweep(&sc, depth, a.format);
    }
    let chans = fixed_channels(&sc, "verify")?;
    let g = graph(&sc, &chans, depth)?;
    let v = check_formation(&g);
    let mut out = String::new();
    if a.format == Format::Csv {
        writeln!(out, "init,verdict,class,states").unwrap();
        writeln!(out, "{},{},{},{}", init_list(&chans), verdict_word(&v), class_of(&v), g.state_count()).unwrap();
        return Ok((out, verdict_code(&v)));
    }
    out.push_str(&header(&sc));
    writeln!(out, "init {}", init_list(&chans)).unwrap();
    writeln!(out, "states {}, depth bound {}", g.state_count(), depth).unwrap();
    writeln!(out, "verdict {}", v.label()).unwrap();
    if let Verdict::FailsWithLasso(l) = &v {
        writeln!(out, "stem ({}):", slots(l.stem.len())).unwrap();
        let stem = render_edges(&g, &l.stem, 0);
        let cycle = render_edges(&g, &l.cycle, l.stem.len());
        for line in &stem {
            writeln!(out, "  {line}").unwrap();
        }
        writeln!(out, "cycle ({}, repeats forever):", slots(l.cycle.len())).unwrap();
        for line in &cycle {
            writeln!(out, "  {line}").unwrap();
        }
        if let Some(path) = &a.trace {
            let res = l.stem.iter().chain(&l.cycle).map(|e| e.resolutions.clone()).collect();
            write_trace(path, &chans, stem.into_iter().chain(cycle).collect(), res)?;
        }
    } else if a.trace.is_some() {
        return Err(input_error("--trace on verify writes a counterexample, and there is none"));
    }
    Ok((out, verdict_code(&v)))
}

fn slots(n: usize) -> String {
    if n == 1 {
        "1 slot".to_string()
    } else {
        format!("{n} slots")
    }
}

fn verdict_word(v: &Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::FailsWithLasso(_) => "fails",
        Verdict::Inconclusive { .. } => "inconclusive",
    }
}

fn class_of(v: &Verdict) -> &'static str {
    v.failure_class().map_or("", |c| c.as_str())
}

fn verify_sweep(sc: &Scenario, depth: usize, format: Format) -> CliResult {
    let mut out = String::new();
    let (mut holds, mut fails, mut unknown) = (0, 0, 0);
    if format == Format::Csv {
        writeln!(out, "init,verdict,class,witness,states").unwrap();
    } else {
        out.push_str(&header(sc));
    }
    for chans in sweep_configs(sc)? {
        let g = graph(sc, &chans, depth)?;
        let v = check_formation(&g);
        let w = shortest_witness(&g).ok().map(|w| w.len());
        match v {
            Verdict::Holds => holds += 1,
            Verdict::FailsWithLasso(_) => fails += 1,
            Verdict::Inconclusive { .. } => unknown += 1,
        }
        let wtxt = w.map_or(String::new(), |w| w.to_string());
        if format == Format::Csv {
            writeln!(out, "{},{},{},{},{}", init_list(&chans), verdict_word(&v), class_of(&v), wtxt, g.state_count())
                .unwrap();
        } else {
            let wtxt = w.map_or("none".to_string(), |w| format!("{w} slots"));
            writeln!(out, "init {}: {}, witness {}, {} states", init_list(&chans), v.label(), wtxt, g.state_count())
                .unwrap();
        }
    }
    if format == Format::Text {
        writeln!(out, "summary: {holds} hold, {fails} fail, {unknown} inconclusive").unwrap();
    }
    let code = if fails > 0 {
        EXIT_FAILS
    } else if unknown > 0 {
        EXIT_INCONCLUSIVE
    } else {
        0
    };
    Ok((out, code))
}

fn witness(a: &ScenarioArgs) -> CliResult {
    let sc = load(&a.scenario, &a.overrides)?;
    let depth = depth_of(&sc, a);
    let sweep = a.sweep || sc.initial == InitialSpec::Sweep && a.overrides.channels.is_none();
    let mut best: Option<(Vec<Channel>, StateGraph, Vec<Edge>)> = None;
    let mut rows = Vec::new();
    let candidates = if sweep { sweep_configs(&sc)? } else { vec![fixed_channels(&sc, "witness")?] };
    for chans in candidates {
        let g = graph(&sc, &chans, depth)?;
        let v = check_formation(&g);
        let w = shortest_witness(&g).ok();
        rows.push((chans.clone(), v.clone(), w.as_ref().map(Vec::len)));
        // with a sweep, only configurations that always form compete
        let eligible = !sweep || v.holds();
        if let (true, Some(w)) = (eligible, w) {
            if best.as_ref().is_none_or(|(_, _, b)| w.len() < b.len()) {
                best = Some((chans, g, w));
            }
        }
    }
    let mut out = String::new();
    let Some((chans, g, w)) = best else {
        if a.format == Format::Text {
            out.push_str(&header(&sc));
            let why = if sweep { "no configuration where formation is inevitable reaches the goal" } else { "no goal state is reachable" };
            writeln!(out, "witness none: {why} within {depth} slots").unwrap();
        }
        return Ok((out, EXIT_FAILS));
    };
    let (frames, ms) = slot_time(w.len() as u64, &sc.cfg);
    let lines = render_edges(&g, &w, 0);
    if a.format == Format::Csv {
        writeln!(out, "init,slots,slotframes,milliseconds").unwrap();
        writeln!(out, "{},{},{},{}", init_list(&chans), w.len(), frames, ms).unwrap();
    } else {
        out.push_str(&header(&sc));
        if sweep {
            for (c, v, len) in &rows {
                let l = len.map_or("none".to_string(), |l| format!("{l} slots"));
                writeln!(out, "init {}: {}, witness {}", init_list(c), v.label(), l).unwrap();
            }
        }
        writeln!(out, "witness {} slots, {} slotframes, {} ms (init {})", w.len(), frames, ms, init_list(&chans)).unwrap();
        writeln!(out, "{}", render_init(&chans)).unwrap();
        for line in &lines {
            writeln!(out, "{line}").unwrap();
        }
    }
    if let Some(path) = &a.trace {
        write_trace(path, &chans, lines, w.iter().map(|e| e.resolutions.clone()).collect())?;
    }
    Ok((out, 0))
}

fn simulate(a: &SimulateArgs) -> CliResult {
    let mut sc = load(&a.scenario, &a.overrides)?;
    if let Some(h) = a.height {
        if sc.tree_height.is_none() {
            return Err(input_error("--height applies only to generated tree scenarios"));
        }
        sc.topology = balanced_binary_tree(h)?;
        sc.tree_height = Some(h);
        sc.cfg.max_id = sc.topology.node_count();
        if let InitialSpec::Fixed(_) = sc.initial {
            return Err(input_error("--height changes the node count; fixed initial channels no longer fit"));
        }
    }
    let seeds = a.seeds.as_ref().map_or_else(|| sc.analysis.seeds.clone(), |l| l.0.clone());
    let bound = a.slot_bound.unwrap_or(sc.analysis.slot_bound);
    let init = match &sc.initial {
        InitialSpec::Fixed(c) => InitChannels::Fixed(c.clone()),
        InitialSpec::Random | InitialSpec::Sweep => InitChannels::Random,
    };
    let summary = batch(&sc.topology, &sc.cfg, &init, &seeds, bound)?;
    if let Some(path) = &a.trace {
        let first = &summary.runs[0];
        let (t, _) = trace::record(&sc.topology, &sc.cfg, &first.init_channels, &first.resolutions)?;
        write_trace(path, &t.init_channels, t.lines, t.resolutions)?;
    }
    let mut out = String::new();
    if a.format == Format::Csv {
        writeln!(out, "{}", tsch_cluster::simulator::RunResult::csv_header()).unwrap();
        for r in &summary.runs {
            writeln!(out, "{}", r.csv_row()).unwrap();
        }
    } else {
        out.push_str(&header(&sc));
        for r in &summary.runs {
            let status = if r.formed { "formed" } else { "not formed" };
            writeln!(
                out,
                "seed {}: {status} after {} slots ({} slotframes, {} ms), init {}",
                r.seed,
                r.slots_used,
                r.slotframes,
                r.milliseconds,
                init_list(&r.init_channels)
            )
            .unwrap();
        }
        let opt = |v: Option<u64>| v.map_or("-".to_string(), |v| v.to_string());
        writeln!(
            out,
            "formed {}/{} within {bound} slots; slots min {} median {} max {}",
            summary.formed,
            summary.runs.len(),
            opt(summary.min_slots),
            opt(summary.median_slots),
            opt(summary.max_slots)
        )
        .unwrap();
    }
    let code = if summary.formed == summary.runs.len() { 0 } else { EXIT_FAILS };
    Ok((out, code))
}

fn bound(a: &BoundArgs) -> CliResult {
    let heights = a
        .heights
        .0
        .iter()
        .map(|&h| u32::try_from(h).map_err(|_| input_error(format!("height {h} is out of range"))))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = tsch_cluster::ProtocolConfig::default();
    let rows = scalability::report(&heights, &cfg)?;
    let mut out = String::new();
    if a.format == Format::Csv {
        writeln!(out, "h,nodes,slots,slotframes,milliseconds,ratio").unwrap();
        for r in &rows {
            writeln!(out, "{},{},{},{},{},{:.4}", r.h, r.nodes, r.slots, r.slotframes, r.milliseconds, r.ratio).unwrap();
        }
    } else {
        writeln!(out, "convention: {CONVENTION}").unwrap();
        for r in &rows {
            writeln!(
                out,
                "h {}: nodes {}, slots {}, slotframes {}, ms {} ({} min), slots/(n log2 n) {:.4}",
                r.h,
                r.nodes,
                r.slots,
                r.slotframes,
                r.milliseconds,
                scalability::minutes(&r.milliseconds),
                r.ratio
            )
            .unwrap();
        }
        if let Some(r) = rows.iter().find(|r| r.h == 8) {
            writeln!(
                out,
                "published figure for h 8: {} min; the convention above gives {} min",
                scalability::PUBLISHED_H8_MINUTES,
                scalability::minutes(&r.milliseconds)
            )
            .unwrap();
        }
    }
    Ok((out, 0))
}

fn scenarios() -> CliResult {
    let mut out = String::new();
    for (name, _) in BUILTINS {
        let sc = scenario::builtin(name).expect("built-in scenarios are valid");
        let kind = sc.analysis.kind.as_str();
        writeln!(out, "{name:<22} {kind:<9} {}", sc.description).unwrap();
    }
    Ok((out, 0))
}

fn replay(name: &str, path: &Path, ov: &Overrides) -> CliResult {
    let sc = load(name, ov)?;
    let text = std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let t = trace::parse_trace(&text)?;
    match trace::replay(&sc.topology, &sc.cfg, &t) {
        Ok(end) => {
            let formed = if end.is_goal() { "formed" } else { "not formed" };
            Ok((format!("replay ok: {} slots match, network {formed}\n", t.lines.len()), 0))
        }
        Err(Error::Contract(msg)) => Ok((format!("replay mismatch: {msg}\n"), EXIT_FAILS)),
        Err(e) => Err(e.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => verify(a),
        Command::Witness(a) => witness(a),
        Command::Simulate(a) => simulate(a),
        Command::Bound(a) => bound(a),
        Command::Scenarios => scenarios(),
        Command::Replay { scenario, trace, overrides } => replay(scenario, trace, overrides),
    };
    match result {
        Ok((out, code)) => {
            print!("{out}");
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
