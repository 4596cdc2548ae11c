//! Experiment files: a base parameter set, a sweep grid and a trial count.
//!
//! ```toml
//! kind = "mh_sweep"
//! trials = 10000
//!
//! [params]
//! snr0_db = 15.0
//! m_ndf = 20
//!
//! [[sweep]]
//! axis = "m_h"
//! values = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
//! ```
//!
//! Several `[[sweep]]` tables form a cartesian grid, first axis outermost.

use std::f64::consts::PI;
use std::path::Path;

use serde::Deserialize;
use wtdp_core::analysis::{AnalysisInput, Receiver};
use wtdp_core::channel::{AntennaPattern, ChannelParams, Fading};
use wtdp_core::model::{Direction, GroundTruth, NdfMode, ProtocolParams};
use wtdp_core::simulator::{interferer_set, true_neighbor_tx, AntennaId, Scenario, StopRule};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MhSweep,
    SnrSweep,
    RicianKSweep,
    TwoTrainSweep,
    Custom,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingKind {
    #[default]
    Rayleigh,
    Rician,
}

/// How many per-side discovery instances the network metrics multiply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentMode {
    /// Sides that have a physical neighbor, `2N - 2`.
    #[default]
    Sides,
    /// Two per BN, `2N`, end BNs' outer sides included.
    Bns,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMode {
    /// Every receiver hears the same `K` in-track transmitters.
    #[default]
    Homogeneous,
    /// Each scored side uses the transmitters the simulator geometry gives it.
    PerReceiver,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    NeighborDiscovery,
    #[default]
    Inauguration,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub snr0_db: f64,
    pub eta: f64,
    #[serde(rename = "F")]
    pub reuse: u32,
    /// Defaults to every same-carrier BN of the train.
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub p_h: f64,
    pub p_t: f64,
    #[serde(rename = "R")]
    pub rate: f64,
    pub m_h: u32,
    pub m_ndf: u32,
    pub m_t: u32,
    pub n_bns: usize,
    pub n_trains: usize,
    pub slot_ms: f64,
    pub seed: u64,
    pub theta_rad: f64,
    pub sidelobe_db: f64,
    pub l_over_delta: f64,
    pub carrier_ghz: f64,
    pub speed_kmh: f64,
    pub fading: FadingKind,
    pub k_factor: f64,
    pub probe: bool,
    pub ndf_mode: NdfMode,
    pub stop: Stop,
    pub max_slots: u64,
    pub ideal: bool,
    pub exponent_mode: ExponentMode,
    pub analysis_mode: AnalysisMode,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            snr0_db: 15.0,
            eta: 3.5,
            reuse: 1,
            k: None,
            p_h: 0.15,
            p_t: 0.15,
            rate: 1.5,
            m_h: 3,
            m_ndf: 20,
            m_t: 30,
            n_bns: 6,
            n_trains: 1,
            slot_ms: 100.0,
            seed: 0,
            theta_rad: PI / 3.0,
            sidelobe_db: 6.0,
            l_over_delta: 1.0,
            carrier_ghz: 5.8,
            speed_kmh: 1.0,
            fading: FadingKind::Rayleigh,
            k_factor: 0.0,
            probe: true,
            ndf_mode: NdfMode::PerSender,
            stop: Stop::Inauguration,
            max_slots: 20_000,
            ideal: false,
            exponent_mode: ExponentMode::Sides,
            analysis_mode: AnalysisMode::Homogeneous,
        }
    }
}

/// Names accepted as sweep axes.
pub const AXES: &[&str] = &[
    "snr0_db",
    "eta",
    "F",
    "K",
    "p_h",
    "p_t",
    "p",
    "R",
    "m_h",
    "m_ndf",
    "m_t",
    "n_bns",
    "n_trains",
    "slot_ms",
    "theta_rad",
    "sidelobe_db",
    "l_over_delta",
    "carrier_ghz",
    "speed_kmh",
    "k_factor",
    "k_factor_db",
    "max_slots",
];

fn integral<T: TryFrom<u64>>(axis: &str, v: f64) -> Result<T> {
    if v.fract() != 0.0 || v < 0.0 || !v.is_finite() {
        return Err(Error::config(format!(
            "sweep axis `{axis}` needs non-negative integers, got {v}"
        )));
    }
    T::try_from(v as u64)
        .map_err(|_| Error::config(format!("sweep axis `{axis}`: {v} out of range")))
}

impl Params {
    /// Sets one sweep axis. `p` splits evenly into `p_h` and `p_t`.
    pub fn set(&mut self, axis: &str, v: f64) -> Result<()> {
        match axis {
            "snr0_db" => self.snr0_db = v,
            "eta" => self.eta = v,
            "F" => self.reuse = integral(axis, v)?,
            "K" => self.k = Some(integral(axis, v)?),
            "p_h" => self.p_h = v,
            "p_t" => self.p_t = v,
            "p" => {
                self.p_h = v / 2.0;
                self.p_t = v / 2.0;
            }
            "R" => self.rate = v,
            "m_h" => self.m_h = integral(axis, v)?,
            "m_ndf" => self.m_ndf = integral(axis, v)?,
            "m_t" => self.m_t = integral(axis, v)?,
            "n_bns" => self.n_bns = integral(axis, v)?,
            "n_trains" => self.n_trains = integral(axis, v)?,
            "slot_ms" => self.slot_ms = v,
            "theta_rad" => self.theta_rad = v,
            "sidelobe_db" => self.sidelobe_db = v,
            "l_over_delta" => self.l_over_delta = v,
            "carrier_ghz" => self.carrier_ghz = v,
            "speed_kmh" => self.speed_kmh = v,
            "k_factor" => self.k_factor = v,
            "k_factor_db" => self.k_factor = 10f64.powf(v / 10.0),
            "max_slots" => self.max_slots = integral(axis, v)?,
            other => {
                return Err(Error::config(format!(
                    "unknown sweep axis `{other}`; expected one of {}",
                    AXES.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Same-carrier transmitters a receiver can hear at most.
    fn k_in_train(&self) -> usize {
        (self.n_bns.saturating_sub(1))
            .div_ceil(self.reuse.max(1) as usize)
            .max(1)
    }

    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            snr0_db: self.snr0_db,
            eta: self.eta,
            reuse: self.reuse,
            rate: self.rate,
            fading: match self.fading {
                FadingKind::Rayleigh => Fading::Rayleigh,
                FadingKind::Rician => Fading::Rician {
                    k_factor: self.k_factor,
                },
            },
            speed_kmh: self.speed_kmh,
            slot_ms: self.slot_ms,
            carrier_ghz: self.carrier_ghz,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let trains = (0..self.n_trains)
            .map(|t| GroundTruth::linear(self.n_bns, t))
            .collect::<wtdp_core::Result<Vec<_>>>()?;
        let scenario = Scenario {
            trains,
            l_over_delta: self.l_over_delta,
            channel: self.channel(),
            antenna: AntennaPattern {
                theta: self.theta_rad,
                sidelobe_db: self.sidelobe_db,
            },
            proto: ProtocolParams {
                m_h: self.m_h,
                m_ndf: self.m_ndf,
                m_t: self.m_t,
                p_h: self.p_h,
                p_t: self.p_t,
                probe: self.probe,
                ndf_mode: self.ndf_mode,
            },
            k: self.k.unwrap_or_else(|| self.k_in_train()),
            max_slots: self.max_slots,
            seed: self.seed,
            ideal: self.ideal,
            stop: match self.stop {
                Stop::NeighborDiscovery => StopRule::NeighborDiscovery,
                Stop::Inauguration => StopRule::Inauguration,
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn exponent_sides(&self) -> u32 {
        let n = self.n_bns as u32;
        match self.exponent_mode {
            ExponentMode::Sides => 2 * n - 2,
            ExponentMode::Bns => 2 * n,
        }
    }

    /// Homogeneous analysis input; `K` is capped at the transmitters a train can hold.
    pub fn analysis_input(&self) -> Result<AnalysisInput> {
        if self.fading != FadingKind::Rayleigh {
            return Err(Error::config(
                "the closed-form analysis covers Rayleigh fading only",
            ));
        }
        if self.n_bns < 2 {
            return Err(Error::config("n_bns must be at least 2"));
        }
        let input = AnalysisInput {
            snr0_lin: self.channel().snr0_lin(),
            eta: self.eta,
            reuse: self.reuse,
            k: self.k.unwrap_or(usize::MAX).min(self.k_in_train()),
            p_h: self.p_h,
            p_t: self.p_t,
            rate: self.rate,
            m_h: self.m_h,
            exponent_sides: self.exponent_sides(),
        };
        input.validate()?;
        Ok(input)
    }

    /// One receiver per scored side of train 0, its physical neighbor first.
    pub fn receivers(&self) -> Result<Vec<Receiver>> {
        self.analysis_input()?;
        let scenario = self.scenario()?;
        let mut out = Vec::new();
        for bn in 0..self.n_bns {
            for dir in Direction::BOTH {
                let rx = AntennaId { train: 0, bn, dir };
                let Some(neighbor) = true_neighbor_tx(rx, &scenario) else {
                    continue;
                };
                let links = interferer_set(rx, &scenario);
                let mut snrs: Vec<f64> = links
                    .iter()
                    .filter(|l| l.tx == neighbor)
                    .map(|l| l.avg_snr_lin)
                    .collect();
                if snrs.is_empty() {
                    return Err(Error::config(format!(
                        "K = {} leaves BN {bn} deaf to its neighbor",
                        scenario.k
                    )));
                }
                snrs.extend(
                    links
                        .iter()
                        .filter(|l| l.tx != neighbor)
                        .map(|l| l.avg_snr_lin),
                );
                out.push(Receiver {
                    link_snrs: snrs,
                    p_h: self.p_h,
                    p_t: self.p_t,
                    rate: self.rate,
                });
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub sweep: Vec<Axis>,
}

fn default_trials() -> u64 {
    1000
}

/// Trial count below which a figure-reproduction kind is refused.
pub const MIN_FIGURE_TRIALS: u64 = 100;

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("`trials` must be at least 1"));
        }
        for a in &self.sweep {
            if a.values.is_empty() {
                return Err(Error::config(format!(
                    "sweep axis `{}` has no values",
                    a.axis
                )));
            }
            Params::default().set(&a.axis, a.values[0])?;
        }
        let has = |name: &str| self.sweep.iter().any(|a| a.axis == name);
        let required: &[&str] = match self.kind {
            ExperimentKind::MhSweep => &["m_h"],
            ExperimentKind::SnrSweep => &["snr0_db"],
            ExperimentKind::RicianKSweep => &["k_factor", "k_factor_db"],
            ExperimentKind::TwoTrainSweep => &["l_over_delta"],
            ExperimentKind::Custom => &[],
        };
        if !required.is_empty() && !required.iter().any(|r| has(r)) {
            return Err(Error::config(format!(
                "{:?} needs a sweep over {}",
                self.kind,
                required.join(" or ")
            )));
        }
        if self.kind != ExperimentKind::Custom && self.trials < MIN_FIGURE_TRIALS {
            return Err(Error::config(format!(
                "{:?} needs at least {MIN_FIGURE_TRIALS} trials per point",
                self.kind
            )));
        }
        if self.kind == ExperimentKind::RicianKSweep && self.params.fading != FadingKind::Rician {
            return Err(Error::config("rician_k_sweep needs `fading = \"rician\"`"));
        }
        if self.kind == ExperimentKind::TwoTrainSweep
            && self.params.n_trains != 2
            && !has("n_trains")
        {
            return Err(Error::config("two_train_sweep needs `n_trains = 2`"));
        }
        Ok(())
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.sweep.iter().map(|a| a.axis.as_str()).collect()
    }

    /// Every grid point as (axis values, resolved parameters), first axis outermost.
    pub fn grid(&self) -> Result<Vec<(Vec<f64>, Params)>> {
        let mut points = vec![(Vec::new(), self.params.clone())];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for (coords, params) in &points {
                for &v in &axis.values {
                    let mut p = params.clone();
                    p.set(&axis.axis, v)?;
                    let mut c = coords.clone();
                    c.push(v);
                    next.push((c, p));
                }
            }
            points = next;
        }
        Ok(points)
    }
}
