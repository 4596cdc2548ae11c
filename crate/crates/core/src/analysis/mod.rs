//! Closed-form neighbor-discovery performance under slotted ALOHA and
//! Rayleigh block fading.
//!
//! A receiving antenna hears `K` same-frequency transmitters ordered by
//! distance. Per slot each transmits with probability `p = p_h + p_t`, and a
//! hello from the `k`-th is decoded with probability `Q_S(k)`. Receptions from
//! different transmitters are then treated as independent, so the time to
//! collect `M_H` hellos from transmitter `k` is negative-binomial and
//! discovery is correct when the nearest transmitter wins the race.

pub mod special;

use serde::Serialize;

use crate::channel::{path_gain_hops, sinr_threshold};
use crate::error::{Error, Result};
pub use special::{negbin_ccdf, negbin_pmf, regularized_incomplete_beta};

/// Above this the 2^K state enumeration is refused.
pub const MAX_ENUMERATED_K: usize = 20;
/// Absolute tail mass at which infinite series are cut.
pub const TAIL_TOLERANCE: f64 = 1e-10;
/// Hard cap on series terms; reaching it is an error.
pub const MAX_TERMS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisInput {
    pub snr0_lin: f64,
    pub eta: f64,
    pub reuse: u32,
    /// Number of same-frequency transmitters in range of a receiver.
    pub k: usize,
    pub p_h: f64,
    pub p_t: f64,
    pub rate: f64,
    pub m_h: u32,
    /// Number of independent (BN, side) discovery instances.
    pub exponent_sides: u32,
}

impl AnalysisInput {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.k < 1 {
            return bad("K", "at least one transmitter must be in range");
        }
        if !(self.p_h >= 0.0 && self.p_t >= 0.0 && self.p_h + self.p_t <= 1.0 + 1e-12) {
            return bad("p_h", "p_h, p_t must be probabilities with p_h + p_t <= 1");
        }
        if self.p_h + self.p_t <= 0.0 {
            return bad("p_h", "transmit probability p_h + p_t must be positive");
        }
        if self.m_h < 1 {
            return bad("m_h", "must be at least 1");
        }
        if self.exponent_sides < 1 {
            return bad("exponent_sides", "must be at least 1");
        }
        Ok(())
    }

    /// Mean received SNR of each in-range transmitter, nearest first.
    pub fn link_snrs(&self) -> Vec<f64> {
        (1..=self.k as u32)
            .map(|k| self.snr0_lin * path_gain_hops(k, self.reuse, self.eta))
            .collect()
    }

    fn receiver(&self) -> Receiver {
        Receiver {
            link_snrs: self.link_snrs(),
            p_h: self.p_h,
            p_t: self.p_t,
            rate: self.rate,
        }
    }
}

/// One receiving antenna: the mean SNRs of the transmitters it can hear,
/// its true neighbor first.
#[derive(Clone, Debug, PartialEq)]
pub struct Receiver {
    pub link_snrs: Vec<f64>,
    pub p_h: f64,
    pub p_t: f64,
    pub rate: f64,
}

impl Receiver {
    /// Success probability for the transmitter at `k` (zero-based) given the
    /// transmit pattern `active`.
    pub fn q_s_conditional(&self, k: usize, active: &[bool]) -> f64 {
        if !active[k] {
            return 0.0;
        }
        let p = self.p_h + self.p_t;
        let g = sinr_threshold(self.rate);
        let own = self.link_snrs[k];
        let mut q = self.p_h / p * (-g / own).exp();
        for (j, (&on, &snr)) in active.iter().zip(&self.link_snrs).enumerate() {
            if j != k && on {
                q /= 1.0 + g * snr / own;
            }
        }
        q
    }

    /// Average of [`Self::q_s_conditional`] over all 2^K transmit patterns.
    pub fn q_s(&self, k: usize) -> Result<f64> {
        let n = self.link_snrs.len();
        if n > MAX_ENUMERATED_K {
            return Err(Error::KTooLarge {
                k: n,
                max: MAX_ENUMERATED_K,
            });
        }
        let p = self.p_h + self.p_t;
        let mut active = vec![false; n];
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            if mask & (1 << k) == 0 {
                continue;
            }
            let mut prob = 1.0;
            for (j, a) in active.iter_mut().enumerate() {
                *a = mask & (1 << j) != 0;
                prob *= if *a { p } else { 1.0 - p };
            }
            total += prob * self.q_s_conditional(k, &active);
        }
        Ok(total)
    }

    pub fn success_profile(&self) -> Result<SuccessProfile> {
        let q_s = (0..self.link_snrs.len())
            .map(|k| self.q_s(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(SuccessProfile { q_s })
    }
}

/// Per-slot hello success probabilities `Q_S(k)`, nearest transmitter first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuccessProfile {
    pub q_s: Vec<f64>,
}

impl SuccessProfile {
    /// Probability that the nearest transmitter reaches `m_h` receptions
    /// strictly before every other one.
    pub fn q_c_nd(&self, m_h: u32) -> Result<f64> {
        let q1 = self.q_s[0];
        if q1 <= 0.0 {
            return Err(Error::NonConvergent(
                "the nearest transmitter is never decoded (Q_S(1) = 0)".into(),
            ));
        }
        let mut total = 0.0;
        let mut t = m_h as u64;
        loop {
            let mut term = negbin_pmf(t, m_h, q1)?;
            for &q in &self.q_s[1..] {
                if term == 0.0 {
                    break;
                }
                term *= negbin_ccdf(t, m_h, q)?;
            }
            total += term;
            if negbin_ccdf(t, m_h, q1)? < TAIL_TOLERANCE {
                return Ok(total);
            }
            t += 1;
            if t - m_h as u64 >= MAX_TERMS {
                return Err(Error::NonConvergent(format!(
                    "correct-discovery series exceeded {MAX_TERMS} terms"
                )));
            }
        }
    }

    /// P(T_ND <= t): some transmitter has delivered `m_h` hellos by slot `t`.
    pub fn t_nd_cdf(&self, t: u64, m_h: u32) -> Result<f64> {
        let mut none = 1.0;
        for &q in &self.q_s {
            none *= negbin_ccdf(t, m_h, q)?;
        }
        Ok(1.0 - none)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NetworkMetrics {
    /// Probability that every discovery instance is correct.
    pub q_star: f64,
    /// Mean slot count until every instance has identified a neighbor.
    pub e_t_star: f64,
    /// Mean slot count until a fully correct discovery, restarting on failure.
    pub e_t_suc_star: f64,
}

/// `sum_{t >= 0} (1 - cdf(t))`, cut once the remaining tail is provably
/// below [`TAIL_TOLERANCE`] under a geometric bound on the term ratio.
pub fn expected_from_cdf(mut cdf: impl FnMut(u64) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    let mut prev = f64::NAN;
    for t in 0..MAX_TERMS {
        let term = 1.0 - cdf(t)?;
        total += term;
        if term <= 0.0 {
            return Ok(total);
        }
        let ratio = term / prev;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < TAIL_TOLERANCE {
            return Ok(total);
        }
        prev = term;
    }
    Err(Error::NonConvergent(format!(
        "expected completion time series exceeded {MAX_TERMS} terms"
    )))
}

/// Network-level metrics for independent receivers, each given as
/// (success profile, number of identical instances).
pub fn network_metrics_for(
    receivers: &[(SuccessProfile, u32)],
    m_h: u32,
) -> Result<NetworkMetrics> {
    let mut q_star = 1.0;
    for (profile, count) in receivers {
        q_star *= profile.q_c_nd(m_h)?.powi(*count as i32);
    }
    let e_t_star = expected_from_cdf(|t| {
        let mut cdf = 1.0;
        for (profile, count) in receivers {
            cdf *= profile.t_nd_cdf(t, m_h)?.powi(*count as i32);
        }
        Ok(cdf)
    })?;
    Ok(NetworkMetrics {
        q_star,
        e_t_star,
        e_t_suc_star: e_t_star / q_star,
    })
}

/// `Q_S(k | i)` for the homogeneous receiver; `k` is one-based.
pub fn q_s_conditional(k: usize, active: &[bool], input: &AnalysisInput) -> f64 {
    input.receiver().q_s_conditional(k - 1, active)
}

/// `Q_S(k)` for the homogeneous receiver; `k` is one-based.
pub fn q_s(k: usize, input: &AnalysisInput) -> Result<f64> {
    input.validate()?;
    input.receiver().q_s(k - 1)
}

pub fn success_profile(input: &AnalysisInput) -> Result<SuccessProfile> {
    input.validate()?;
    input.receiver().success_profile()
}

pub fn q_c_nd(input: &AnalysisInput) -> Result<f64> {
    success_profile(input)?.q_c_nd(input.m_h)
}

pub fn t_nd_cdf(t: u64, input: &AnalysisInput) -> Result<f64> {
    success_profile(input)?.t_nd_cdf(t, input.m_h)
}

pub fn network_metrics(input: &AnalysisInput) -> Result<NetworkMetrics> {
    let profile = success_profile(input)?;
    network_metrics_for(&[(profile, input.exponent_sides)], input.m_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn defaults(k: usize, m_h: u32) -> AnalysisInput {
        AnalysisInput {
            snr0_lin: 10f64.powf(1.5),
            eta: 3.5,
            reuse: 1,
            k,
            p_h: 0.15,
            p_t: 0.15,
            rate: 1.5,
            m_h,
            exponent_sides: 10,
        }
    }

    #[test]
    fn conditional_examples() {
        let one = defaults(1, 1);
        assert_eq!(q_s_conditional(1, &[false], &one), 0.0);
        // 0.5 * exp(-(2^1.5 - 1) / 10^1.5)
        let single = q_s_conditional(1, &[true], &one);
        assert_relative_eq!(single, 0.471_909_936_993_311, epsilon = 1e-13);
        let two = defaults(2, 1);
        let both = q_s_conditional(1, &[true, true], &two);
        assert_relative_eq!(
            both,
            single / (1.0 + (2f64.powf(1.5) - 1.0) / 2f64.powf(3.5)),
            max_relative = 1e-14
        );
        assert_relative_eq!(both, 0.406_254_479_315_811, epsilon = 1e-13);
    }

    #[test]
    fn averaged_examples() {
        assert_relative_eq!(
            q_s(1, &defaults(1, 1)).unwrap(),
            0.141_572_981_097_993,
            epsilon = 1e-13
        );
        let silent = AnalysisInput {
            p_h: 0.0,
            ..defaults(3, 1)
        };
        for k in 1..=3 {
            assert_eq!(q_s(k, &silent).unwrap(), 0.0);
        }
    }

    #[test]
    fn enumeration_cap() {
        let big = defaults(21, 1);
        assert!(matches!(q_s(1, &big), Err(Error::KTooLarge { k: 21, .. })));
    }

    /// Independent route: the state average factorizes over transmitters.
    fn q_s_factorized(k: usize, input: &AnalysisInput) -> f64 {
        let p = input.p_h + input.p_t;
        let g = sinr_threshold(input.rate);
        let snrs = input.link_snrs();
        let own = snrs[k - 1];
        let mut q = input.p_h * (-g / own).exp();
        for (j, &s) in snrs.iter().enumerate() {
            if j != k - 1 {
                q *= (1.0 - p) + p / (1.0 + g * s / own);
            }
        }
        q
    }

    #[test]
    fn enumeration_matches_factorization() {
        for k_total in 1..=8 {
            let input = AnalysisInput {
                reuse: 2,
                ..defaults(k_total, 1)
            };
            for k in 1..=k_total {
                assert_relative_eq!(
                    q_s(k, &input).unwrap(),
                    q_s_factorized(k, &input),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn no_competitors_means_certain_success() {
        let profile = SuccessProfile {
            q_s: vec![0.14, 0.0, 0.0],
        };
        for m in [1, 3, 10] {
            assert!((profile.q_c_nd(m).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unreachable_neighbor_is_an_error() {
        let silent = AnalysisInput {
            p_h: 0.0,
            ..defaults(2, 3)
        };
        assert!(matches!(q_c_nd(&silent), Err(Error::NonConvergent(_))));
        assert!(matches!(
            network_metrics(&silent),
            Err(Error::NonConvergent(_))
        ));
    }

    #[test]
    fn completion_cdf_examples() {
        let input = defaults(3, 4);
        for t in 0..4 {
            assert_eq!(t_nd_cdf(t, &input).unwrap(), 0.0);
        }
        let one = defaults(1, 1);
        let q = q_s(1, &one).unwrap();
        for t in [1u64, 5, 40] {
            assert_relative_eq!(
                t_nd_cdf(t, &one).unwrap(),
                1.0 - (1.0 - q).powi(t as i32),
                max_relative = 1e-12
            );
        }
        assert!(1.0 - t_nd_cdf(2_000, &defaults(5, 10)).unwrap() < 1e-10);
    }

    #[test]
    fn expectation_of_a_step() {
        let e = expected_from_cdf(|t| Ok(if t >= 17 { 1.0 } else { 0.0 })).unwrap();
        assert_eq!(e, 17.0);
    }

    #[test]
    fn geometric_expectation() {
        // Single receiver, single transmitter, M_H = 1: E[T] = 1/q.
        let input = AnalysisInput {
            exponent_sides: 1,
            ..defaults(1, 1)
        };
        let q = q_s(1, &input).unwrap();
        let m = network_metrics(&input).unwrap();
        assert_relative_eq!(m.e_t_star, 1.0 / q, max_relative = 1e-9);
        assert!((m.q_star - 1.0).abs() < 1e-9);
        assert_relative_eq!(m.e_t_suc_star, m.e_t_star, max_relative = 1e-9);
    }

    #[test]
    fn success_profile_bounds_and_ordering() {
        let input = defaults(5, 3);
        let prof = success_profile(&input).unwrap();
        for w in prof.q_s.windows(2) {
            assert!(w[0] > w[1]);
        }
        assert!(prof.q_s.iter().all(|&q| (0.0..=input.p_h).contains(&q)));
    }

    #[test]
    fn correct_discovery_grows_with_threshold() {
        let mut last = 0.0;
        for m in 1..=15 {
            let q = q_c_nd(&defaults(5, m)).unwrap();
            assert!(q >= last - 1e-12, "m_h = {m}");
            last = q;
        }
    }

    #[test]
    fn completion_time_grows_with_threshold_and_sides() {
        let mut last = 0.0;
        for m in 1..=10 {
            let e = network_metrics(&defaults(5, m)).unwrap().e_t_star;
            assert!(e >= last);
            last = e;
        }
        let mut last = 0.0;
        for sides in [1, 2, 5, 10, 12] {
            let input = AnalysisInput {
                exponent_sides: sides,
                ..defaults(5, 3)
            };
            let e = network_metrics(&input).unwrap().e_t_star;
            assert!(e >= last);
            last = e;
        }
    }

    #[test]
    fn optimal_threshold_is_interior() {
        let curve: Vec<f64> = (1..=10)
            .map(|m| network_metrics(&defaults(5, m)).unwrap().e_t_suc_star)
            .collect();
        let argmin = curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(argmin > 0 && argmin < 9, "{curve:?}");
    }

    /// Exact race between two independent counters: probability that the
    /// first reaches `m` strictly before the second, by dynamic programming
    /// over (count1, count2) with no negative-binomial algebra involved.
    #[allow(clippy::needless_range_loop)]
    fn race_dp(q1: f64, q2: f64, m: usize) -> f64 {
        let mut state = vec![vec![0.0; m]; m];
        state[0][0] = 1.0;
        let mut won = 0.0;
        loop {
            let mut next = vec![vec![0.0; m]; m];
            let mut alive = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let p = state[a][b];
                    if p == 0.0 {
                        continue;
                    }
                    for (da, pa) in [(0, 1.0 - q1), (1, q1)] {
                        for (db, pb) in [(0, 1.0 - q2), (1, q2)] {
                            let (na, nb) = (a + da, b + db);
                            let w = p * pa * pb;
                            if na == m && nb < m {
                                won += w;
                            } else if na < m && nb < m {
                                next[na][nb] += w;
                                alive += w;
                            }
                        }
                    }
                }
            }
            state = next;
            if alive < 1e-15 {
                return won;
            }
        }
    }

    #[test]
    fn race_against_dp_equal_rates() {
        let q = 0.12;
        let profile = SuccessProfile { q_s: vec![q, q] };
        let v = profile.q_c_nd(4).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert!((v - race_dp(q, q, 4)).abs() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn race_matches_dp(q1 in 0.02f64..0.6, q2 in 0.0f64..0.6, m in 1usize..=5) {
            let profile = SuccessProfile { q_s: vec![q1, q2] };
            let analytic = profile.q_c_nd(m as u32).unwrap();
            prop_assert!((analytic - race_dp(q1, q2, m)).abs() < 1e-8);
        }
    }
}
