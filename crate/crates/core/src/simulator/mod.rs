//! Slotted-ALOHA engine driving the per-node state machines over the channel
//! model, plus an observer that scores each trial against ground truth.
//!
//! Every antenna runs its own ALOHA instance. Transmit and receive carriers
//! differ, so an antenna keeps listening while it transmits. Only train 0 is
//! scored; a second train exists to interfere.

mod batch;
mod geometry;

pub use batch::{run_batch, BatchStats, Estimate, OutcomeStats};
pub use geometry::{
    antennas, interferer_set, position, true_neighbor_tx, AntennaId, Carrier, FrequencyPlan, Link,
};

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{decoded_indices, AntennaPattern, ChannelParams, FadingState, LinkGain};
use crate::error::{invalid, Result};
use crate::model::{Direction, Frame, FrameKind, GroundTruth, MacAddress, ProtocolParams};
use crate::protocol::{KindDraw, NodeEvent, NodeState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop once every scored side has identified some neighbor.
    NeighborDiscovery,
    /// Also wait for all green flags or a red flag.
    #[default]
    Inauguration,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub trains: Vec<GroundTruth>,
    /// Inter-track distance over in-track spacing.
    pub l_over_delta: f64,
    pub channel: ChannelParams,
    pub antenna: AntennaPattern,
    pub proto: ProtocolParams,
    /// Furthest same-carrier transmitter, in reuse hops, that reaches a receiver.
    pub k: usize,
    pub max_slots: u64,
    pub seed: u64,
    /// Lossless, interference-free links between physical neighbors only.
    pub ideal: bool,
    pub stop: StopRule,
}

impl Scenario {
    pub fn single_train(gt: GroundTruth) -> Self {
        let k = gt.len() - 1;
        Scenario {
            trains: vec![gt],
            l_over_delta: 1.0,
            channel: ChannelParams::default(),
            antenna: AntennaPattern::default(),
            proto: ProtocolParams::default(),
            k,
            max_slots: 20_000,
            seed: 0,
            ideal: false,
            stop: StopRule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.trains.len()) {
            return Err(invalid("trains", "one or two trains are supported"));
        }
        if self.k < 1 {
            return Err(invalid("K", "hop range must be at least 1"));
        }
        if self.max_slots == 0 {
            return Err(invalid("max_slots", "must be positive"));
        }
        if self.trains.len() == 2 && !(self.l_over_delta > 0.0) {
            return Err(invalid("l_over_delta", "must be positive"));
        }
        let all: Vec<MacAddress> = self
            .trains
            .iter()
            .flat_map(|t| t.bns().iter().copied())
            .collect();
        if all.iter().collect::<BTreeSet<_>>().len() != all.len() {
            return Err(invalid(
                "trains",
                "MAC addresses must be unique across trains",
            ));
        }
        self.channel.validate()?;
        self.antenna.validate()?;
        self.proto.validate()
    }

    /// Per-trial generator: ChaCha8 keyed by the scenario seed, one stream per trial.
    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// First identification on one scored side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SideRecord {
    pub bn: usize,
    pub dir: Direction,
    pub true_neighbor: MacAddress,
    /// Slot and sender of the first identification.
    pub identified: Option<(u64, MacAddress)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunMetrics {
    pub trial: u64,
    /// Every scored side first identified its physical neighbor.
    pub nd_correct: bool,
    /// Slot in which the last scored side first identified any neighbor.
    pub nd_complete_slot: Option<u64>,
    /// All green and every node's view matches ground truth.
    pub inaug_correct: bool,
    /// Slot in which all scored nodes showed green.
    pub inaug_complete_slot: Option<u64>,
    /// Slot in which the operator saw all green or a red flag.
    pub inaug_end_slot: Option<u64>,
    pub red_flag_slot: Option<u64>,
    /// The stop rule was not met within `max_slots`.
    pub truncated: bool,
    pub slots_run: u64,
    pub sides: Vec<SideRecord>,
}

impl RunMetrics {
    /// Neighbor-discovery time; censored trials count as the slots they ran.
    pub fn nd_time(&self) -> u64 {
        self.nd_complete_slot.unwrap_or(self.slots_run)
    }

    pub fn inaug_time(&self) -> u64 {
        self.inaug_end_slot.unwrap_or(self.slots_run)
    }
}

/// One node event as seen during a trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent<'a> {
    pub trial: u64,
    pub slot: u64,
    pub mac: MacAddress,
    #[serde(flatten)]
    pub event: &'a NodeEvent,
}

pub fn run_trial(scenario: &Scenario, trial: u64) -> RunMetrics {
    run_trial_traced(scenario, trial, &mut |_| {})
}

pub fn run_trial_traced(
    scenario: &Scenario,
    trial: u64,
    sink: &mut dyn FnMut(TraceEvent<'_>),
) -> RunMetrics {
    Trial::new(scenario, trial).run(sink)
}

struct Receiver {
    antenna: usize,
    /// Flat antenna index of each audible transmitter.
    sources: Vec<usize>,
    links: Vec<Link>,
    fading: Vec<FadingState>,
}

struct Trial<'s> {
    scenario: &'s Scenario,
    trial: u64,
    rng: ChaCha8Rng,
    antennas: Vec<AntennaId>,
    /// Flat node index of each antenna.
    owner: Vec<usize>,
    nodes: Vec<NodeState>,
    receivers: Vec<Receiver>,
    observer: Observer,
}

impl<'s> Trial<'s> {
    fn new(scenario: &'s Scenario, trial: u64) -> Self {
        let mut rng = scenario.trial_rng(trial);
        let antennas = antennas(scenario);
        let mut train_offset = Vec::new();
        let mut nodes = Vec::new();
        for gt in &scenario.trains {
            train_offset.push(nodes.len());
            nodes.extend(
                gt.bns()
                    .iter()
                    .map(|&mac| NodeState::new(mac, gt.cns_of(mac))),
            );
        }
        let flat = |a: AntennaId| (train_offset[a.train] + a.bn) * 2 + a.dir.index();
        let owner = antennas
            .iter()
            .map(|a| train_offset[a.train] + a.bn)
            .collect();

        let receivers = antennas
            .iter()
            .map(|&rx| {
                let links = if scenario.ideal {
                    true_neighbor_tx(rx, scenario)
                        .map(|tx| Link {
                            tx,
                            avg_snr_lin: f64::INFINITY,
                        })
                        .into_iter()
                        .collect()
                } else {
                    interferer_set(rx, scenario)
                };
                let fading = links
                    .iter()
                    .map(|_| FadingState::new(&scenario.channel, &mut rng))
                    .collect();
                Receiver {
                    antenna: flat(rx),
                    sources: links.iter().map(|l| flat(l.tx)).collect(),
                    links,
                    fading,
                }
            })
            .collect();

        Trial {
            scenario,
            trial,
            rng,
            antennas,
            owner,
            nodes,
            observer: Observer::new(&scenario.trains[0]),
            receivers,
        }
    }

    fn run(mut self, sink: &mut dyn FnMut(TraceEvent<'_>)) -> RunMetrics {
        let s = self.scenario;
        let (p_h, p_t) = (s.proto.p_h, s.proto.p_h + s.proto.p_t);
        let mut frames: Vec<Option<Frame>> = vec![None; self.antennas.len()];
        let mut gains = Vec::new();
        let mut active = Vec::new();
        let mut deliveries: Vec<(usize, usize)> = Vec::new();
        let mut slot = 0;
        let mut stopped = false;

        while slot < s.max_slots {
            slot += 1;
            for (i, a) in self.antennas.iter().enumerate() {
                let u: f64 = self.rng.random();
                let draw = if u < p_h {
                    Some(KindDraw::Hello)
                } else if u < p_t {
                    Some(KindDraw::Topology)
                } else {
                    None
                };
                frames[i] = draw
                    .and_then(|d| self.nodes[self.owner[i]].build_frame(a.dir, d, s.proto.probe));
            }

            deliveries.clear();
            for r in &mut self.receivers {
                gains.clear();
                active.clear();
                for (j, &src) in r.sources.iter().enumerate() {
                    if frames[src].is_some() {
                        let h2 = r.fading[j].draw_fading(slot, &mut self.rng);
                        gains.push(LinkGain {
                            avg_snr_lin: r.links[j].avg_snr_lin,
                            h2,
                        });
                        active.push(src);
                    }
                }
                let first = deliveries.len();
                if s.ideal {
                    deliveries.extend(active.iter().map(|&src| (r.antenna, src)));
                } else {
                    deliveries.extend(
                        decoded_indices(&gains, s.channel.rate).map(|k| (r.antenna, active[k])),
                    );
                }
                deliveries[first..].sort_by_key(|&(_, src)| frames[src].as_ref().map(|f| f.sender));
            }

            for &(rx, src) in &deliveries {
                let frame = frames[src].as_ref().expect("delivered frame was sent");
                let node = self.owner[rx];
                let dir = self.antennas[rx].dir;
                let events = match frame.kind {
                    FrameKind::Hello => self.nodes[node].on_hello(dir, frame.sender, &s.proto),
                    FrameKind::Topology => self.nodes[node].on_topology(dir, frame, &s.proto),
                    FrameKind::Probe => Vec::new(),
                };
                let mac = self.nodes[node].mac;
                for event in &events {
                    if node < self.observer.len() {
                        self.observer.record(slot, node, event);
                    }
                    sink(TraceEvent {
                        trial: self.trial,
                        slot,
                        mac,
                        event,
                    });
                }
            }

            self.observer.end_of_slot(slot, &self.nodes, &s.trains[0]);
            if self.observer.finished(s.stop) {
                stopped = true;
                break;
            }
        }

        self.observer.into_metrics(self.trial, slot, !stopped)
    }
}

/// The operator: watches train 0's nodes and knows its ground truth.
struct Observer {
    sides: Vec<SideRecord>,
    n: usize,
    nd_complete_slot: Option<u64>,
    inaug_complete_slot: Option<u64>,
    inaug_correct: bool,
    red_flag_slot: Option<u64>,
}

impl Observer {
    fn new(gt: &GroundTruth) -> Self {
        let sides = (0..gt.len())
            .flat_map(|bn| {
                Direction::BOTH.into_iter().filter_map(move |dir| {
                    gt.neighbor(bn, dir).map(|true_neighbor| SideRecord {
                        bn,
                        dir,
                        true_neighbor,
                        identified: None,
                    })
                })
            })
            .collect();
        Observer {
            sides,
            n: gt.len(),
            nd_complete_slot: None,
            inaug_complete_slot: None,
            inaug_correct: false,
            red_flag_slot: None,
        }
    }

    fn len(&self) -> usize {
        self.n
    }

    fn record(&mut self, slot: u64, node: usize, event: &NodeEvent) {
        match *event {
            NodeEvent::Identified { dir, mac } => {
                if let Some(side) = self
                    .sides
                    .iter_mut()
                    .find(|r| r.bn == node && r.dir == dir && r.identified.is_none())
                {
                    side.identified = Some((slot, mac));
                }
            }
            NodeEvent::RedFlag { .. } => {
                self.red_flag_slot.get_or_insert(slot);
            }
            _ => {}
        }
    }

    fn end_of_slot(&mut self, slot: u64, nodes: &[NodeState], gt: &GroundTruth) {
        if self.nd_complete_slot.is_none() && self.sides.iter().all(|r| r.identified.is_some()) {
            self.nd_complete_slot = Some(slot);
        }
        if self.inaug_end().is_some() {
            return;
        }
        let scored = &nodes[..self.n];
        let all_green = scored.iter().all(|n| n.green_flag)
            && self.sides.iter().all(|r| {
                let side = scored[r.bn].side(r.dir);
                side.locked.is_some() && side.converged
            });
        if all_green {
            self.inaug_complete_slot = Some(slot);
            self.inaug_correct = scored.iter().all(|n| view_matches(n, gt));
        }
    }

    fn inaug_end(&self) -> Option<u64> {
        match (self.inaug_complete_slot, self.red_flag_slot) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn finished(&self, stop: StopRule) -> bool {
        let nd = self.nd_complete_slot.is_some();
        match stop {
            StopRule::NeighborDiscovery => nd,
            StopRule::Inauguration => nd && self.inaug_end().is_some(),
        }
    }

    fn into_metrics(self, trial: u64, slots_run: u64, truncated: bool) -> RunMetrics {
        let nd_correct = self.nd_complete_slot.is_some()
            && self
                .sides
                .iter()
                .all(|r| r.identified.map(|(_, m)| m) == Some(r.true_neighbor));
        // A red flag before or in the all-green slot means the operator never accepted.
        let accepted = match (self.inaug_complete_slot, self.red_flag_slot) {
            (Some(g), Some(r)) => g < r,
            (Some(_), None) => true,
            _ => false,
        };
        RunMetrics {
            trial,
            nd_correct,
            nd_complete_slot: self.nd_complete_slot,
            inaug_correct: accepted && self.inaug_correct,
            inaug_complete_slot: self.inaug_complete_slot.filter(|_| accepted),
            inaug_end_slot: self.inaug_end(),
            red_flag_slot: self.red_flag_slot,
            truncated,
            slots_run,
            sides: self.sides,
        }
    }
}

/// The node's full topology and CN table agree with ground truth.
fn view_matches(node: &NodeState, gt: &GroundTruth) -> bool {
    if node.full_topology() != gt.bns() {
        return false;
    }
    gt.bns().iter().filter(|&&m| m != node.mac).all(|&m| {
        let truth: BTreeSet<_> = gt.cns_of(m).into_iter().collect();
        let seen: BTreeSet<_> = node
            .cn_table
            .get(&m)
            .into_iter()
            .flatten()
            .cloned()
            .collect();
        truth == seen
    })
}
