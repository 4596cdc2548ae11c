use rayon::prelude::*;
use serde::Serialize;

use super::{run_trial, RunMetrics, Scenario, StopRule};
use crate::error::{invalid, Result};

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Statistics for one success criterion (neighbor discovery or inauguration).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeStats {
    pub success: Estimate,
    pub mean_time: Estimate,
    /// Mean slots until the first success when failed attempts restart
    /// immediately, accumulated over consecutive trials.
    pub ttfs_sequential: Option<Estimate>,
    /// Mean attempt time over success rate.
    pub ttfs_ratio: Option<Estimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchStats {
    pub trials: u64,
    pub nd: OutcomeStats,
    /// Present when trials ran to inauguration.
    pub inaug: Option<OutcomeStats>,
    pub red_flag_rate: Estimate,
    pub truncated: u64,
}

/// Runs trials `0..trials` in parallel; results are in trial order.
pub fn run_batch(scenario: &Scenario, trials: u64) -> Result<BatchStats> {
    scenario.validate()?;
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let runs: Vec<RunMetrics> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(scenario, t))
        .collect();
    Ok(BatchStats::from_runs(&runs, scenario.stop))
}

impl BatchStats {
    pub fn from_runs(runs: &[RunMetrics], stop: StopRule) -> Self {
        let nd: Vec<(f64, bool)> = runs
            .iter()
            .map(|r| (r.nd_time() as f64, r.nd_correct))
            .collect();
        let inaug = (stop == StopRule::Inauguration).then(|| {
            let v: Vec<(f64, bool)> = runs
                .iter()
                .map(|r| (r.inaug_time() as f64, r.inaug_correct))
                .collect();
            OutcomeStats::from_attempts(&v)
        });
        let red: Vec<bool> = runs.iter().map(|r| r.red_flag_slot.is_some()).collect();
        BatchStats {
            trials: runs.len() as u64,
            nd: OutcomeStats::from_attempts(&nd),
            inaug,
            red_flag_rate: proportion(&red),
            truncated: runs.iter().filter(|r| r.truncated).count() as u64,
        }
    }
}

impl OutcomeStats {
    /// `attempts` holds (time, success) per trial, in trial order.
    pub fn from_attempts(attempts: &[(f64, bool)]) -> Self {
        let successes: Vec<bool> = attempts.iter().map(|a| a.1).collect();
        let times: Vec<f64> = attempts.iter().map(|a| a.0).collect();
        OutcomeStats {
            success: proportion(&successes),
            mean_time: mean(&times),
            ttfs_sequential: sequential_restart(attempts),
            ttfs_ratio: ratio(attempts),
        }
    }
}

fn proportion(xs: &[bool]) -> Estimate {
    let n = xs.len() as f64;
    let p = xs.iter().filter(|&&x| x).count() as f64 / n;
    Estimate {
        value: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
    }
}

/// Sample mean; the standard error is zero for fewer than two samples.
fn mean(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let stderr = if xs.len() < 2 {
        0.0
    } else {
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Estimate { value: m, stderr }
}

fn sequential_restart(attempts: &[(f64, bool)]) -> Option<Estimate> {
    let mut samples = Vec::new();
    let mut acc = 0.0;
    for &(t, ok) in attempts {
        acc += t;
        if ok {
            samples.push(acc);
            acc = 0.0;
        }
    }
    (!samples.is_empty()).then(|| mean(&samples))
}

/// Sum of times over number of successes, with a linearized standard error.
fn ratio(attempts: &[(f64, bool)]) -> Option<Estimate> {
    let n = attempts.len() as f64;
    let total: f64 = attempts.iter().map(|a| a.0).sum();
    let wins = attempts.iter().filter(|a| a.1).count() as f64;
    if wins == 0.0 {
        return None;
    }
    let r = total / wins;
    let stderr = if attempts.len() < 2 {
        0.0
    } else {
        let ss: f64 = attempts
            .iter()
            .map(|&(t, ok)| (t - r * if ok { 1.0 } else { 0.0 }).powi(2))
            .sum();
        let p = wins / n;
        (ss / (n * (n - 1.0))).sqrt() / p
    };
    Some(Estimate { value: r, stderr })
}
