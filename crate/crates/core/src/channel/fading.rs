//! Per-link small-scale fading.
//!
//! Rayleigh links draw an independent unit-mean exponential power every slot.
//! Rician links combine a fixed line-of-sight phasor with a diffuse part that
//! evolves over time as a Gaussian-weighted sum of sinusoids: each oscillator
//! has a complex Gaussian amplitude, a Doppler shift `f_d cos(alpha)` with a
//! uniform arrival angle, and a uniform phase. At any instant the diffuse part
//! is exactly circularly-symmetric complex Gaussian with unit power, and its
//! autocorrelation approaches `J0(2 pi f_d tau)` as oscillators are added.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::{ChannelParams, Fading};

pub const OSCILLATORS: usize = 32;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Debug)]
struct Oscillator {
    amp_re: f64,
    amp_im: f64,
    /// Angular Doppler shift in rad/s.
    omega: f64,
    phase: f64,
}

#[derive(Clone, Debug)]
pub struct RicianLink {
    los_weight: f64,
    diffuse_weight: f64,
    los_phase: f64,
    oscillators: Vec<Oscillator>,
    slot_s: f64,
    /// Power of a channel that does not move.
    frozen: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum FadingState {
    Rayleigh,
    Rician(Box<RicianLink>),
}

/// Maximum Doppler shift in Hz for the configured speed and carrier.
pub fn max_doppler_hz(params: &ChannelParams) -> f64 {
    let wavelength = SPEED_OF_LIGHT / (params.carrier_ghz * 1e9);
    (params.speed_kmh / 3.6) / wavelength
}

impl FadingState {
    pub fn new<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Self {
        match params.fading {
            Fading::Rayleigh => FadingState::Rayleigh,
            Fading::Rician { k_factor } => {
                let (los_weight, diffuse_weight) = if k_factor.is_infinite() {
                    (1.0, 0.0)
                } else {
                    (
                        (k_factor / (k_factor + 1.0)).sqrt(),
                        (1.0 / (k_factor + 1.0)).sqrt(),
                    )
                };
                let fd = max_doppler_hz(params);
                let scale = (0.5 / OSCILLATORS as f64).sqrt();
                let oscillators = (0..OSCILLATORS)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        let alpha = rng.random::<f64>() * 2.0 * PI;
                        Oscillator {
                            amp_re: re * scale,
                            amp_im: im * scale,
                            omega: 2.0 * PI * fd * alpha.cos(),
                            phase: rng.random::<f64>() * 2.0 * PI,
                        }
                    })
                    .collect();
                let mut link = RicianLink {
                    los_weight,
                    diffuse_weight,
                    los_phase: rng.random::<f64>() * 2.0 * PI,
                    oscillators,
                    slot_s: params.slot_ms / 1000.0,
                    frozen: None,
                };
                if fd == 0.0 || link.diffuse_weight == 0.0 {
                    link.frozen = Some(link.power_at(0.0));
                }
                FadingState::Rician(Box::new(link))
            }
        }
    }

    /// Fading power |h|^2 for `slot`; constant within a slot.
    pub fn draw_fading<R: Rng + ?Sized>(&mut self, slot: u64, rng: &mut R) -> f64 {
        match self {
            FadingState::Rayleigh => Exp1.sample(rng),
            FadingState::Rician(link) => match link.frozen {
                Some(power) => power,
                None => link.power_at(slot as f64 * link.slot_s),
            },
        }
    }
}

impl RicianLink {
    fn power_at(&self, t: f64) -> f64 {
        if self.diffuse_weight == 0.0 {
            return self.los_weight * self.los_weight;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for o in &self.oscillators {
            let (s, c) = (o.omega * t + o.phase).sin_cos();
            re += o.amp_re * c - o.amp_im * s;
            im += o.amp_re * s + o.amp_im * c;
        }
        let (ls, lc) = self.los_phase.sin_cos();
        let hr = self.los_weight * lc + self.diffuse_weight * re;
        let hi = self.los_weight * ls + self.diffuse_weight * im;
        hr * hr + hi * hi
    }
}
