//! Domain types shared by the channel, protocol and simulator layers, and the
//! ground-truth topology the observer checks results against.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Opaque link-layer address of a backbone node.
///
/// The total order exists only so that simultaneous events can be resolved
/// deterministically; it carries no information about physical position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MacAddress(pub u64);

impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

/// Identifier of a consist network. Several BNs may attach to the same CN.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CnId(pub Arc<str>);

impl CnId {
    pub fn new(id: &str) -> Self {
        CnId(Arc::from(id))
    }
}

impl fmt::Display for CnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Left, Direction::Right];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    Hello,
    Topology,
    /// Filler transmission sent when a topology draw finds no neighbor to
    /// address. Carries nothing and only ever acts as interference.
    Probe,
}

/// A MAC-layer frame as seen by the channel and the protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub kind: FrameKind,
    pub sender: MacAddress,
    /// Boresight of the transmitting antenna.
    pub direction: Direction,
    pub dest: Option<MacAddress>,
    /// Far-side topology of the sender, nearest BN first.
    pub mac_list: Vec<MacAddress>,
    pub cn_map: Vec<(CnId, MacAddress)>,
}

impl Frame {
    pub fn hello(sender: MacAddress, direction: Direction) -> Self {
        Frame {
            kind: FrameKind::Hello,
            sender,
            direction,
            dest: None,
            mac_list: Vec::new(),
            cn_map: Vec::new(),
        }
    }

    pub fn probe(sender: MacAddress, direction: Direction) -> Self {
        Frame {
            kind: FrameKind::Probe,
            ..Frame::hello(sender, direction)
        }
    }

    /// Builds a topology frame. Panics in debug builds if `mac_list`
    /// contains the sender or duplicates.
    pub fn topology(
        sender: MacAddress,
        direction: Direction,
        dest: MacAddress,
        mac_list: Vec<MacAddress>,
        cn_map: Vec<(CnId, MacAddress)>,
    ) -> Self {
        debug_assert!(!mac_list.contains(&sender));
        debug_assert!(has_no_duplicates(&mac_list));
        Frame {
            kind: FrameKind::Topology,
            sender,
            direction,
            dest: Some(dest),
            mac_list,
            cn_map,
        }
    }
}

pub(crate) fn has_no_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items
        .iter()
        .enumerate()
        .all(|(i, a)| items[..i].iter().all(|b| a != b))
}

/// Physical left-to-right order of a train's BNs plus their CN attachments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    bns: Vec<MacAddress>,
    cn_attachments: Vec<(CnId, MacAddress)>,
}

impl GroundTruth {
    pub fn new(bns: Vec<MacAddress>, cn_attachments: Vec<(CnId, MacAddress)>) -> Result<Self> {
        if bns.len() < 2 {
            return Err(invalid("n_bns", "a backbone needs at least two BNs"));
        }
        if !has_no_duplicates(&bns) {
            return Err(invalid("bns", "MAC addresses must be unique"));
        }
        if let Some((cn, mac)) = cn_attachments.iter().find(|(_, m)| !bns.contains(m)) {
            return Err(invalid(
                "cn_attachments",
                format!("CN {cn} attached to unknown BN {mac}"),
            ));
        }
        Ok(GroundTruth {
            bns,
            cn_attachments,
        })
    }

    /// A train of `n` BNs with one CN per BN. MAC addresses are scrambled
    /// so that their numeric order differs from the physical one.
    pub fn linear(n: usize, train: usize) -> Result<Self> {
        let bns: Vec<MacAddress> = (0..n).map(|i| scrambled_mac(train, i)).collect();
        let cns = bns
            .iter()
            .enumerate()
            .map(|(i, &mac)| (CnId::new(&format!("T{}.{}", train + 1, i + 1)), mac))
            .collect();
        GroundTruth::new(bns, cns)
    }

    pub fn bns(&self) -> &[MacAddress] {
        &self.bns
    }

    pub fn len(&self) -> usize {
        self.bns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bns.is_empty()
    }

    pub fn cn_attachments(&self) -> &[(CnId, MacAddress)] {
        &self.cn_attachments
    }

    pub fn cns_of(&self, mac: MacAddress) -> Vec<CnId> {
        self.cn_attachments
            .iter()
            .filter(|(_, m)| *m == mac)
            .map(|(cn, _)| cn.clone())
            .collect()
    }

    pub fn position(&self, mac: MacAddress) -> Option<usize> {
        self.bns.iter().position(|&m| m == mac)
    }

    /// True physical neighbor of the BN at `index` on side `dir`.
    pub fn neighbor(&self, index: usize, dir: Direction) -> Option<MacAddress> {
        match dir {
            Direction::Left => index.checked_sub(1).map(|i| self.bns[i]),
            Direction::Right => self.bns.get(index + 1).copied(),
        }
    }
}

/// splitmix64 finalizer over (train, index).
fn scrambled_mac(train: usize, index: usize) -> MacAddress {
    let mut z = ((train as u64) << 32 | index as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    // 48 significant bits, like a real MAC; set the locally-administered bit.
    MacAddress((z & 0x0000_ffff_ffff_ffff) | 0x0000_0200_0000_0000)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NdfMode {
    /// One counter per sender; a red flag fires when any counter reaches the threshold.
    #[default]
    PerSender,
    /// Counts summed over all senders.
    Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub m_h: u32,
    pub m_ndf: u32,
    pub m_t: u32,
    pub p_h: f64,
    pub p_t: f64,
    /// Send a probe instead of staying silent when a topology draw has no addressee.
    pub probe: bool,
    pub ndf_mode: NdfMode,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            m_h: 3,
            m_ndf: 20,
            m_t: 30,
            p_h: 0.15,
            p_t: 0.15,
            probe: true,
            ndf_mode: NdfMode::PerSender,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m_h", self.m_h), ("m_ndf", self.m_ndf), ("m_t", self.m_t)] {
            if v < 1 {
                return Err(invalid(name, "threshold must be at least 1"));
            }
        }
        for (name, p) in [("p_h", self.p_h), ("p_t", self.p_t)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(name, format!("{p} is not a probability")));
            }
        }
        if self.p_h + self.p_t > 1.0 + 1e-12 {
            return Err(invalid("p_t", "p_h + p_t must not exceed 1"));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        self.p_h + self.p_t
    }
}

/// Result of ID assignment for one BN.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignedIds {
    pub mac: MacAddress,
    pub bn_id: u32,
    pub subnets: Vec<(CnId, u32)>,
}

/// BN IDs follow the physical order starting at 1. Subnet IDs are handed out
/// to CNs in order of their leftmost attachment; a CN attached to several BNs
/// keeps one subnet ID. CNs sharing the same leftmost BN are ordered as they
/// appear in the attachment list.
pub fn assign_ids(gt: &GroundTruth) -> Vec<AssignedIds> {
    let bn_id = |mac: MacAddress| gt.position(mac).map(|p| p as u32 + 1).unwrap_or(0);

    let mut first_seen: Vec<(&CnId, u32, usize)> = Vec::new();
    for (idx, (cn, mac)) in gt.cn_attachments().iter().enumerate() {
        let id = bn_id(*mac);
        match first_seen.iter_mut().find(|(c, _, _)| *c == cn) {
            Some(entry) => {
                if id < entry.1 {
                    entry.1 = id;
                    entry.2 = idx;
                }
            }
            None => first_seen.push((cn, id, idx)),
        }
    }
    first_seen.sort_by_key(|&(_, id, idx)| (id, idx));
    let subnet: HashMap<&CnId, u32> = first_seen
        .iter()
        .enumerate()
        .map(|(i, (cn, _, _))| (*cn, i as u32 + 1))
        .collect();

    gt.bns()
        .iter()
        .map(|&mac| AssignedIds {
            mac,
            bn_id: bn_id(mac),
            subnets: gt
                .cn_attachments()
                .iter()
                .filter(|(_, m)| *m == mac)
                .map(|(cn, _)| (cn.clone(), subnet[cn]))
                .collect(),
        })
        .collect()
}
