//! Propagation and per-slot decoding.

mod antenna;
mod fading;

pub use antenna::{angle_off_boresight, antenna_gain, AntennaPattern};
pub use fading::{max_doppler_hz, FadingState, OSCILLATORS};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fading {
    Rayleigh,
    /// `k_factor` is the linear LOS-to-diffuse power ratio; infinity means pure LOS.
    Rician {
        k_factor: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    /// Mean one-hop SNR in dB.
    pub snr0_db: f64,
    /// Path-loss exponent.
    pub eta: f64,
    /// Frequency reuse period in hops.
    pub reuse: u32,
    /// Transmission rate in bits/s/Hz.
    pub rate: f64,
    pub fading: Fading,
    pub speed_kmh: f64,
    pub slot_ms: f64,
    pub carrier_ghz: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            snr0_db: 15.0,
            eta: 3.5,
            reuse: 1,
            rate: 1.5,
            fading: Fading::Rayleigh,
            speed_kmh: 1.0,
            slot_ms: 100.0,
            carrier_ghz: 5.8,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !self.snr0_db.is_finite() {
            return Err(invalid("snr0_db", "must be finite"));
        }
        if !(self.eta > 0.0) {
            return Err(invalid("eta", "path-loss exponent must be positive"));
        }
        if self.reuse < 1 {
            return Err(invalid("F", "reuse period must be at least 1"));
        }
        if !(self.rate > 0.0) {
            return Err(invalid("R", "rate must be positive"));
        }
        if let Fading::Rician { k_factor } = self.fading {
            if !(k_factor >= 0.0) {
                return Err(invalid("k_factor", "must be >= 0"));
            }
        }
        if !(self.slot_ms > 0.0) {
            return Err(invalid("slot_ms", "must be positive"));
        }
        if !(self.speed_kmh >= 0.0) {
            return Err(invalid("speed_kmh", "must be >= 0"));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(invalid("carrier_ghz", "must be positive"));
        }
        Ok(())
    }

    pub fn snr0_lin(&self) -> f64 {
        db_to_lin(self.snr0_db)
    }

    /// Minimum SINR that supports the rate, `2^R - 1`.
    pub fn sinr_threshold(&self) -> f64 {
        sinr_threshold(self.rate)
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn sinr_threshold(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

/// Attenuation between two same-frequency nodes `k` hops apart in the reuse
/// pattern, i.e. `1 + (k-1) F` physical hops.
pub fn path_gain_hops(k: u32, reuse: u32, eta: f64) -> f64 {
    debug_assert!(k >= 1);
    path_gain_distance(1.0 + (k as f64 - 1.0) * reuse as f64, eta)
}

/// Attenuation at a distance measured in units of the in-track spacing.
pub fn path_gain_distance(distance: f64, eta: f64) -> f64 {
    distance.powf(-eta)
}

/// One transmitter as seen by one receiving antenna during one slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkGain {
    /// Mean SNR, path loss and antenna gains included.
    pub avg_snr_lin: f64,
    /// This slot's fading power.
    pub h2: f64,
}

impl LinkGain {
    pub fn received(&self) -> f64 {
        self.avg_snr_lin * self.h2
    }
}

/// Every transmission whose SINR against all others supports `rate` is
/// decoded, so several frames may be captured in the same slot.
pub fn decode_slot<T>(transmitters: &[(LinkGain, T)], rate: f64) -> Vec<&T> {
    let gains: Vec<LinkGain> = transmitters.iter().map(|(g, _)| *g).collect();
    decoded_indices(&gains, rate)
        .map(|i| &transmitters[i].1)
        .collect()
}

/// Indices into `gains` of the transmissions that are decoded.
pub fn decoded_indices(gains: &[LinkGain], rate: f64) -> impl Iterator<Item = usize> + '_ {
    let threshold = sinr_threshold(rate);
    let total: f64 = gains.iter().map(LinkGain::received).sum();
    gains.iter().enumerate().filter_map(move |(i, g)| {
        let s = g.received();
        (s / (1.0 + (total - s)) >= threshold).then_some(i)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_gain_examples() {
        assert_eq!(path_gain_hops(1, 1, 3.5), 1.0);
        assert_eq!(path_gain_hops(1, 4, 2.0), 1.0);
        assert_relative_eq!(
            path_gain_hops(2, 1, 3.5),
            0.088_388_347_648_318,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            path_gain_hops(2, 2, 3.5),
            0.021_383_343_303_319,
            epsilon = 1e-14
        );
    }

    fn link(s: f64) -> LinkGain {
        LinkGain {
            avg_snr_lin: s,
            h2: 1.0,
        }
    }

    #[test]
    fn decode_boundary_is_inclusive() {
        let r = 1.5;
        let tx = [(link(sinr_threshold(r)), 'a')];
        assert_eq!(decode_slot(&tx, r), vec![&'a']);
        let tx = [(link(sinr_threshold(r) * (1.0 - 1e-12)), 'a')];
        assert!(decode_slot(&tx, r).is_empty());
    }

    #[test]
    fn equal_powers_collide() {
        // SINR tends to 1 from below, capacity to 1 bit, so R = 1.5 never decodes.
        for s in [1.0, 10.0, 1e3, 1e9] {
            let tx = [(link(s), 0), (link(s), 1)];
            assert!(decode_slot(&tx, 1.5).is_empty());
        }
    }

    #[test]
    fn multi_capture() {
        // Two strong frames at R small enough that both survive.
        let tx = [(link(100.0), 0), (link(90.0), 1)];
        assert_eq!(decode_slot(&tx, 0.5).len(), 2);
    }

    #[test]
    fn no_transmitters() {
        let tx: [(LinkGain, u8); 0] = [];
        assert!(decode_slot(&tx, 1.5).is_empty());
    }

    #[test]
    fn rayleigh_outage_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = ChannelParams::default();
        let gamma = p.snr0_lin();
        let mut st = FadingState::new(&p, &mut rng);
        let n = 100_000u64;
        let mut ok = 0u64;
        for s in 0..n {
            let g = LinkGain {
                avg_snr_lin: gamma,
                h2: st.draw_fading(s, &mut rng),
            };
            ok += decode_slot(&[(g, ())], p.rate).len() as u64;
        }
        let outage = 1.0 - ok as f64 / n as f64;
        let expected = 1.0 - (-(p.sinr_threshold()) / gamma).exp();
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!(
            (outage - expected).abs() < 3.0 * sigma,
            "{outage} vs {expected}"
        );
    }

    #[test]
    fn validation() {
        assert!(ChannelParams::default().validate().is_ok());
        let bad = ChannelParams {
            eta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChannelParams {
            fading: Fading::Rician { k_factor: -1.0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn removing_an_interferer_never_hurts(
            powers in prop::collection::vec(0.0f64..100.0, 1..6),
            drop in 0usize..6,
            rate in 0.1f64..3.0,
        ) {
            let tx: Vec<_> = powers.iter().enumerate().map(|(i, &s)| (link(s), i)).collect();
            let before: Vec<usize> = decode_slot(&tx, rate).into_iter().copied().collect();
            let drop = drop % tx.len();
            let fewer: Vec<_> = tx.iter().filter(|(_, i)| *i != drop).cloned().collect();
            let after: Vec<usize> = decode_slot(&fewer, rate).into_iter().copied().collect();
            for i in before.into_iter().filter(|&i| i != drop) {
                prop_assert!(after.contains(&i));
            }
        }
    }
}
