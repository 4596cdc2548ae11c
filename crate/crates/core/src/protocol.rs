//! Per-node state machine: neighbor discovery, pairwise consistency check,
//! neighbor-discovery-failure check, topology discovery and the topology
//! convergence check.
//!
//! Each side (left/right antenna) runs its own discovery. The node only ever
//! reacts to frames handed to it by the MAC layer and to the transmit
//! opportunities the MAC layer grants it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{CnId, Direction, Frame, FrameKind, MacAddress, NdfMode, ProtocolParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RedFlagReason {
    IdentificationFailure,
    LockingFailure,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum NodeEvent {
    Identified { dir: Direction, mac: MacAddress },
    Locked { dir: Direction, mac: MacAddress },
    NdRestart { dir: Direction },
    RedFlag { reason: RedFlagReason },
    TableUpdated { dir: Direction },
    GreenFlag,
}

/// What the MAC layer drew for an antenna that transmits this slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KindDraw {
    Hello,
    Topology,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SideState {
    pub nd_counters: BTreeMap<MacAddress, u32>,
    pub identified: Option<MacAddress>,
    pub locked: Option<MacAddress>,
    pub pending_topology: Option<Frame>,
    pub ndf_counters: BTreeMap<MacAddress, u32>,
    pub topo_counter: u32,
    pub converged: bool,
}

impl SideState {
    fn ndf_reached(&self, params: &ProtocolParams) -> bool {
        match params.ndf_mode {
            NdfMode::PerSender => self.ndf_counters.values().any(|&c| c >= params.m_ndf),
            NdfMode::Aggregate => self.ndf_counters.values().sum::<u32>() >= params.m_ndf,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub mac: MacAddress,
    pub own_cns: Vec<CnId>,
    pub sides: [SideState; 2],
    /// Per direction, nearest BN first.
    pub topo_table: [Vec<MacAddress>; 2],
    pub cn_table: BTreeMap<MacAddress, Vec<CnId>>,
    pub red_flag: bool,
    pub green_flag: bool,
}

impl NodeState {
    pub fn new(mac: MacAddress, own_cns: Vec<CnId>) -> Self {
        NodeState {
            mac,
            own_cns,
            sides: Default::default(),
            topo_table: Default::default(),
            cn_table: BTreeMap::new(),
            red_flag: false,
            green_flag: false,
        }
    }

    pub fn side(&self, dir: Direction) -> &SideState {
        &self.sides[dir.index()]
    }

    fn side_mut(&mut self, dir: Direction) -> &mut SideState {
        &mut self.sides[dir.index()]
    }

    /// A hello decoded on the `dir` antenna.
    pub fn on_hello(
        &mut self,
        dir: Direction,
        sender: MacAddress,
        params: &ProtocolParams,
    ) -> Vec<NodeEvent> {
        let side = self.side_mut(dir);
        if side.identified.is_some() {
            return Vec::new();
        }
        let count = side.nd_counters.entry(sender).or_insert(0);
        *count += 1;
        if *count < params.m_h {
            return Vec::new();
        }
        side.identified = Some(sender);
        let mut events = vec![NodeEvent::Identified { dir, mac: sender }];
        if let Some(frame) = side.pending_topology.take() {
            events.extend(self.on_topology(dir, &frame, params));
        }
        events
    }

    /// A topology frame decoded on the `dir` antenna.
    pub fn on_topology(
        &mut self,
        dir: Direction,
        frame: &Frame,
        params: &ProtocolParams,
    ) -> Vec<NodeEvent> {
        debug_assert_eq!(frame.kind, FrameKind::Topology);
        let me = self.mac;
        let to_me = frame.dest == Some(me);
        let mut events = Vec::new();
        let side = self.side_mut(dir);

        match (side.locked, side.identified) {
            (Some(locked), _) => {
                if frame.sender == locked {
                    if to_me {
                        side.ndf_counters.clear();
                        self.update_tables(dir, frame, params, &mut events);
                    }
                    // From the locked neighbor but addressed elsewhere: ignored.
                } else {
                    *side.ndf_counters.entry(frame.sender).or_insert(0) += 1;
                    if side.ndf_reached(params) {
                        self.raise_red(RedFlagReason::LockingFailure, &mut events);
                    }
                }
            }
            (None, Some(identified)) => {
                if to_me && frame.sender == identified {
                    side.locked = Some(identified);
                    side.ndf_counters.clear();
                    events.push(NodeEvent::Locked {
                        dir,
                        mac: identified,
                    });
                    self.update_tables(dir, frame, params, &mut events);
                } else if to_me {
                    side.nd_counters.clear();
                    side.ndf_counters.clear();
                    side.identified = None;
                    events.push(NodeEvent::NdRestart { dir });
                } else {
                    *side.ndf_counters.entry(frame.sender).or_insert(0) += 1;
                    if side.ndf_reached(params) {
                        self.raise_red(RedFlagReason::IdentificationFailure, &mut events);
                    }
                }
            }
            (None, None) => side.pending_topology = Some(frame.clone()),
        }
        events
    }

    fn update_tables(
        &mut self,
        dir: Direction,
        frame: &Frame,
        params: &ProtocolParams,
        events: &mut Vec<NodeEvent>,
    ) {
        let me = self.mac;
        let mut table = Vec::with_capacity(frame.mac_list.len() + 1);
        for &m in std::iter::once(&frame.sender).chain(&frame.mac_list) {
            if m != me && !table.contains(&m) {
                table.push(m);
            }
        }
        let mut changed = table != self.topo_table[dir.index()];
        if changed {
            self.topo_table[dir.index()] = table;
        }
        for (cn, mac) in &frame.cn_map {
            if *mac == me {
                continue;
            }
            let known = self.cn_table.entry(*mac).or_default();
            if !known.contains(cn) {
                known.push(cn.clone());
                changed = true;
            }
        }

        let side = self.side_mut(dir);
        if changed {
            side.topo_counter = 0;
            events.push(NodeEvent::TableUpdated { dir });
        } else {
            side.topo_counter += 1;
            if side.topo_counter >= params.m_t && !side.converged {
                side.converged = true;
            }
        }
        self.refresh_green(events);
    }

    fn raise_red(&mut self, reason: RedFlagReason, events: &mut Vec<NodeEvent>) {
        if !self.red_flag {
            self.red_flag = true;
            self.green_flag = false;
            events.push(NodeEvent::RedFlag { reason });
        }
    }

    /// Green means: no red flag, at least one side locked, and every locked
    /// side converged. A newly locked side withdraws the flag until it too
    /// converges.
    fn refresh_green(&mut self, events: &mut Vec<NodeEvent>) {
        let any_locked = self.sides.iter().any(|s| s.locked.is_some());
        let all_converged = self.sides.iter().all(|s| s.locked.is_none() || s.converged);
        let green = !self.red_flag && any_locked && all_converged;
        if green && !self.green_flag {
            events.push(NodeEvent::GreenFlag);
        }
        self.green_flag = green;
    }

    /// The frame this node puts on the `dir` antenna, or `None` to stay silent.
    pub fn build_frame(&self, dir: Direction, draw: KindDraw, probe: bool) -> Option<Frame> {
        match draw {
            KindDraw::Hello => Some(Frame::hello(self.mac, dir)),
            KindDraw::Topology => {
                let side = self.side(dir);
                match side.locked.or(side.identified) {
                    Some(dest) => {
                        let mac_list = self.topo_table[dir.opposite().index()].clone();
                        let mut cn_map: Vec<(CnId, MacAddress)> =
                            self.own_cns.iter().map(|c| (c.clone(), self.mac)).collect();
                        for m in &mac_list {
                            if let Some(cns) = self.cn_table.get(m) {
                                cn_map.extend(cns.iter().map(|c| (c.clone(), *m)));
                            }
                        }
                        Some(Frame::topology(self.mac, dir, dest, mac_list, cn_map))
                    }
                    None if probe => Some(Frame::probe(self.mac, dir)),
                    None => None,
                }
            }
        }
    }

    /// Left table reversed, self, right table.
    pub fn full_topology(&self) -> Vec<MacAddress> {
        let left = &self.topo_table[Direction::Left.index()];
        let right = &self.topo_table[Direction::Right.index()];
        left.iter()
            .rev()
            .copied()
            .chain(std::iter::once(self.mac))
            .chain(right.iter().copied())
            .collect()
    }
}
