//! Antenna placement and the two-set frequency plan.
//!
//! BN `i` of train `t` sits at `(i, t * l_over_delta)`, lengths in units of the
//! in-track spacing. Right-pointing antennas transmit on the "rightward" set
//! and left-pointing ones on the "leftward" set, so an antenna never receives
//! on its own transmit frequency.

use crate::channel::{angle_off_boresight, antenna_gain, path_gain_distance};
use crate::model::Direction;

use super::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AntennaId {
    pub train: usize,
    pub bn: usize,
    pub dir: Direction,
}

/// A carrier: which of the two sets, and the index within the set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Carrier {
    pub set: Direction,
    pub index: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrequencyPlan {
    pub reuse: u32,
}

impl FrequencyPlan {
    pub fn new(reuse: u32) -> Self {
        debug_assert!(reuse >= 1);
        FrequencyPlan { reuse }
    }

    fn slot(&self, bn: i64) -> u32 {
        bn.rem_euclid(self.reuse as i64) as u32
    }

    pub fn tx(&self, a: AntennaId) -> Carrier {
        Carrier {
            set: a.dir,
            index: self.slot(a.bn as i64),
        }
    }

    /// The left antenna listens to its left neighbor's right transmitter, and
    /// the other way round.
    pub fn rx(&self, a: AntennaId) -> Carrier {
        let bn = a.bn as i64;
        match a.dir {
            Direction::Left => Carrier {
                set: Direction::Right,
                index: self.slot(bn - 1),
            },
            Direction::Right => Carrier {
                set: Direction::Left,
                index: self.slot(bn + 1),
            },
        }
    }
}

/// A transmit antenna audible at some receive antenna.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub tx: AntennaId,
    /// Mean received SNR: one-hop SNR, path loss and both antenna gains.
    pub avg_snr_lin: f64,
}

pub fn position(scenario: &Scenario, a: AntennaId) -> (f64, f64) {
    (a.bn as f64, a.train as f64 * scenario.l_over_delta)
}

/// Every antenna of the scenario, train by train, left to right, left antenna first.
pub fn antennas(scenario: &Scenario) -> Vec<AntennaId> {
    scenario
        .trains
        .iter()
        .enumerate()
        .flat_map(|(train, gt)| {
            (0..gt.len())
                .flat_map(move |bn| Direction::BOTH.map(|dir| AntennaId { train, bn, dir }))
        })
        .collect()
}

/// Transmit antennas on `rx`'s receive carrier with non-zero combined gain
/// towards it, no further than `1 + (K - 1) F` in-track hops, excluding `rx`'s
/// own BN. Ordered as [`antennas`].
pub fn interferer_set(rx: AntennaId, scenario: &Scenario) -> Vec<Link> {
    let plan = FrequencyPlan::new(scenario.channel.reuse);
    let carrier = plan.rx(rx);
    let reach = 1.0 + (scenario.k as f64 - 1.0) * scenario.channel.reuse as f64;
    let snr0 = scenario.channel.snr0_lin();
    let rx_pos = position(scenario, rx);
    antennas(scenario)
        .into_iter()
        .filter(|&tx| plan.tx(tx) == carrier && !(tx.train == rx.train && tx.bn == rx.bn))
        .filter_map(|tx| {
            let tx_pos = position(scenario, tx);
            if (tx_pos.0 - rx_pos.0).abs() > reach + 1e-9 {
                return None;
            }
            let g_tx = antenna_gain(
                angle_off_boresight(tx.dir, tx_pos, rx_pos),
                &scenario.antenna,
            );
            let g_rx = antenna_gain(
                angle_off_boresight(rx.dir, rx_pos, tx_pos),
                &scenario.antenna,
            );
            let gain = g_tx * g_rx;
            if gain <= 0.0 {
                return None;
            }
            let d = (tx_pos.0 - rx_pos.0).hypot(tx_pos.1 - rx_pos.1);
            Some(Link {
                tx,
                avg_snr_lin: snr0 * path_gain_distance(d, scenario.channel.eta) * gain,
            })
        })
        .collect()
}

/// The physical neighbor's transmitter facing `rx`, if any.
pub fn true_neighbor_tx(rx: AntennaId, scenario: &Scenario) -> Option<AntennaId> {
    let n = scenario.trains[rx.train].len();
    let bn = match rx.dir {
        Direction::Left => rx.bn.checked_sub(1)?,
        Direction::Right => Some(rx.bn + 1).filter(|&b| b < n)?,
    };
    Some(AntennaId {
        train: rx.train,
        bn,
        dir: rx.dir.opposite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GroundTruth;
    use Direction::{Left, Right};

    fn single(n: usize, reuse: u32, k: usize) -> Scenario {
        let mut s = Scenario::single_train(GroundTruth::linear(n, 0).unwrap());
        s.channel.reuse = reuse;
        s.k = k;
        s
    }

    fn id(bn: usize, dir: Direction) -> AntennaId {
        AntennaId { train: 0, bn, dir }
    }

    #[test]
    fn plan_pairs_neighbors() {
        for reuse in 1..5 {
            let plan = FrequencyPlan::new(reuse);
            for bn in 0..10 {
                assert_eq!(plan.tx(id(bn, Right)), plan.rx(id(bn + 1, Left)));
                assert_eq!(plan.tx(id(bn + 1, Left)), plan.rx(id(bn, Right)));
                for dir in Direction::BOTH {
                    assert_ne!(plan.tx(id(bn, dir)), plan.rx(id(bn, dir)));
                }
                assert_eq!(
                    plan.tx(id(bn, Right)),
                    plan.tx(id(bn + reuse as usize, Right))
                );
            }
        }
    }

    #[test]
    fn full_reuse_left_receiver() {
        // Fourth BN (index 3), F = 1, K = 3.
        let s = single(6, 1, 3);
        let set: Vec<_> = interferer_set(id(3, Left), &s)
            .iter()
            .map(|l| l.tx)
            .collect();
        assert_eq!(set, vec![id(0, Right), id(1, Right), id(2, Right)]);
    }

    #[test]
    fn reuse_two_left_receiver() {
        let s = single(6, 2, 2);
        let set: Vec<_> = interferer_set(id(3, Left), &s)
            .iter()
            .map(|l| l.tx)
            .collect();
        assert_eq!(set, vec![id(0, Right), id(2, Right)]);
    }

    #[test]
    fn right_end_hears_nothing_on_its_right() {
        let s = single(6, 1, 5);
        assert!(interferer_set(id(5, Right), &s).is_empty());
        assert!(interferer_set(id(0, Left), &s).is_empty());
    }

    #[test]
    fn in_track_powers_follow_hop_path_loss() {
        let s = single(8, 2, 3);
        let links = interferer_set(id(7, Left), &s);
        let snr0 = s.channel.snr0_lin();
        let hops: Vec<f64> = links.iter().map(|l| (7 - l.tx.bn) as f64).collect();
        assert_eq!(hops, vec![5.0, 3.0, 1.0]);
        for l in &links {
            let d = (7 - l.tx.bn) as f64;
            assert!((l.avg_snr_lin - snr0 * d.powf(-3.5)).abs() < 1e-12 * snr0);
        }
    }

    #[test]
    fn interferer_count_rule() {
        for reuse in 1..4u32 {
            for k in 1..6usize {
                let s = single(12, reuse, k);
                for pos in 1..12usize {
                    let n = interferer_set(id(pos, Left), &s).len();
                    let expect = k.min(pos.div_ceil(reuse as usize));
                    assert_eq!(n, expect, "F={reuse} K={k} pos={pos}");
                }
            }
        }
    }

    #[test]
    fn second_train_adds_cross_track_links() {
        let mut s = single(6, 1, 2);
        s.trains.push(GroundTruth::linear(6, 1).unwrap());
        s.l_over_delta = 1.0;
        let links = interferer_set(id(3, Left), &s);
        let cross: Vec<_> = links.iter().filter(|l| l.tx.train == 1).collect();
        assert!(!cross.is_empty());
        let g = s.antenna.sidelobe_gain();
        let snr0 = s.channel.snr0_lin();
        // Directly across is at 90 degrees for both antennas: sidelobe squared.
        let across = cross.iter().find(|l| l.tx.bn == 3).unwrap();
        assert!((across.avg_snr_lin - snr0 * g * g).abs() < 1e-9 * snr0);
        // 45 degrees is outside a 60-degree main beam on both ends.
        let diag = cross.iter().find(|l| l.tx.bn == 2).unwrap();
        let expect = snr0 * 2f64.sqrt().powf(-3.5) * g * g;
        assert!((diag.avg_snr_lin - expect).abs() < 1e-9 * expect);
        // Ahead of the receiver's boresight only when the transmitter is to its left.
        assert!(cross.iter().all(|l| l.tx.bn <= 3 && l.tx.dir == Right));
    }

    #[test]
    fn far_second_train_is_only_sidelobe_interference() {
        let mut s = single(6, 1, 2);
        s.trains.push(GroundTruth::linear(6, 1).unwrap());
        s.l_over_delta = 10.0;
        for l in interferer_set(id(3, Left), &s)
            .iter()
            .filter(|l| l.tx.train == 1)
        {
            assert!(l.avg_snr_lin < 1e-3 * s.channel.snr0_lin());
        }
    }
}
