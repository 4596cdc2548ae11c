//! Grid evaluation and the CSV/JSONL writers.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use wtdp_core::analysis::{network_metrics, network_metrics_for, NetworkMetrics};
use wtdp_core::simulator::{
    run_trial, run_trial_traced, BatchStats, Estimate, OutcomeStats, RunMetrics,
};

use crate::config::{AnalysisMode, ExperimentSpec, Params};
use crate::error::{Error, Result};

pub struct AnalysisPoint {
    pub coords: Vec<f64>,
    pub metrics: NetworkMetrics,
}

pub struct SimPoint {
    pub coords: Vec<f64>,
    pub stats: BatchStats,
}

pub fn analyze_params(p: &Params) -> Result<NetworkMetrics> {
    match p.analysis_mode {
        AnalysisMode::Homogeneous => Ok(network_metrics(&p.analysis_input()?)?),
        AnalysisMode::PerReceiver => {
            let profiles = p
                .receivers()?
                .iter()
                .map(|r| Ok((r.success_profile()?, 1)))
                .collect::<Result<Vec<_>>>()?;
            Ok(network_metrics_for(&profiles, p.m_h)?)
        }
    }
}

pub fn analyze(spec: &ExperimentSpec) -> Result<Vec<AnalysisPoint>> {
    spec.grid()?
        .into_par_iter()
        .map(|(coords, p)| {
            Ok(AnalysisPoint {
                coords,
                metrics: analyze_params(&p)?,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct TrialRecord<'a> {
    record: &'static str,
    point: usize,
    #[serde(flatten)]
    metrics: &'a RunMetrics,
}

#[derive(Serialize)]
struct EventRecord<'a, E: Serialize> {
    record: &'static str,
    point: usize,
    #[serde(flatten)]
    event: &'a E,
}

/// Runs every grid point; with `trace`, writes one JSON line per node event
/// and per finished trial, in grid and trial order.
pub fn simulate(spec: &ExperimentSpec, mut trace: Option<&mut dyn Write>) -> Result<Vec<SimPoint>> {
    let mut out = Vec::new();
    for (point, (coords, p)) in spec.grid()?.into_iter().enumerate() {
        let scenario = p.scenario()?;
        let runs: Vec<RunMetrics> = match trace.as_deref_mut() {
            None => (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial(&scenario, t))
                .collect(),
            Some(w) => {
                let traced: Vec<(RunMetrics, Vec<String>)> = (0..spec.trials)
                    .into_par_iter()
                    .map(|t| {
                        let mut lines = Vec::new();
                        let m = run_trial_traced(&scenario, t, &mut |e| {
                            let rec = EventRecord {
                                record: "event",
                                point,
                                event: &e,
                            };
                            lines.push(serde_json::to_string(&rec).expect("event serializes"));
                        });
                        (m, lines)
                    })
                    .collect();
                let mut runs = Vec::with_capacity(traced.len());
                for (m, lines) in traced {
                    for l in lines {
                        writeln!(w, "{l}").map_err(|e| Error::io(Path::new("trace"), e))?;
                    }
                    let rec = TrialRecord {
                        record: "trial",
                        point,
                        metrics: &m,
                    };
                    serde_json::to_writer(&mut *w, &rec)?;
                    writeln!(w).map_err(|e| Error::io(Path::new("trace"), e))?;
                    runs.push(m);
                }
                runs
            }
        };
        out.push(SimPoint {
            coords,
            stats: BatchStats::from_runs(&runs, scenario.stop),
        });
    }
    Ok(out)
}

/// Fixed-precision float cell.
fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn axis_cells(coords: &[f64]) -> Vec<String> {
    coords.iter().map(|v| v.to_string()).collect()
}

pub fn write_analysis_csv<W: Write>(
    spec: &ExperimentSpec,
    points: &[AnalysisPoint],
    w: W,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = spec.axis_names();
    header.extend(["q_star", "e_t_star", "e_t_suc_star"]);
    csv.write_record(&header)?;
    for pt in points {
        let mut row = axis_cells(&pt.coords);
        row.extend(
            [
                pt.metrics.q_star,
                pt.metrics.e_t_star,
                pt.metrics.e_t_suc_star,
            ]
            .map(num),
        );
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io(Path::new("csv"), e))?;
    Ok(())
}

const OUTCOME_COLUMNS: [&str; 8] = [
    "success",
    "success_se",
    "mean_time",
    "mean_time_se",
    "ttfs_seq",
    "ttfs_seq_se",
    "ttfs_ratio",
    "ttfs_ratio_se",
];

fn outcome_cells(o: Option<&OutcomeStats>) -> Vec<String> {
    let est = |e: Option<Estimate>| match e {
        Some(e) => [num(e.value), num(e.stderr)],
        None => [String::new(), String::new()],
    };
    let mut cells = Vec::with_capacity(OUTCOME_COLUMNS.len());
    for pair in [
        est(o.map(|o| o.success)),
        est(o.map(|o| o.mean_time)),
        est(o.and_then(|o| o.ttfs_sequential)),
        est(o.and_then(|o| o.ttfs_ratio)),
    ] {
        cells.extend(pair);
    }
    cells
}

pub fn write_simulation_csv<W: Write>(
    spec: &ExperimentSpec,
    points: &[SimPoint],
    w: W,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<String> = spec.axis_names().into_iter().map(String::from).collect();
    header.push("trials".into());
    for prefix in ["nd", "inaug"] {
        header.extend(OUTCOME_COLUMNS.iter().map(|c| format!("{prefix}_{c}")));
    }
    header.extend(["red_flag_rate".into(), "truncated".into()]);
    csv.write_record(&header)?;
    for pt in points {
        let s = &pt.stats;
        let mut row = axis_cells(&pt.coords);
        row.push(s.trials.to_string());
        row.extend(outcome_cells(Some(&s.nd)));
        row.extend(outcome_cells(s.inaug.as_ref()));
        row.push(num(s.red_flag_rate.value));
        row.push(s.truncated.to_string());
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io(Path::new("csv"), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> ExperimentSpec {
        ExperimentSpec::parse(text).unwrap()
    }

    #[test]
    fn analysis_table_shape() {
        let s = spec("kind = \"custom\"\n[[sweep]]\naxis = \"m_h\"\nvalues = [1, 2, 3]\n");
        let pts = analyze(&s).unwrap();
        let mut buf = Vec::new();
        write_analysis_csv(&s, &pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m_h,q_star,e_t_star,e_t_suc_star");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,0.0"));
    }

    #[test]
    fn zero_hello_probability_does_not_converge() {
        let s = spec("kind = \"custom\"\n[params]\np_h = 0.0\n");
        let err = analyze(&s).err().unwrap();
        assert_eq!(err.exit_code(), 3, "{err}");
    }

    #[test]
    fn per_receiver_mode_is_more_optimistic_at_the_ends() {
        // End and near-end sides hear fewer interferers than the homogeneous model assumes.
        let hom = analyze_params(&Params::default()).unwrap();
        let per = analyze_params(&Params {
            analysis_mode: AnalysisMode::PerReceiver,
            ..Params::default()
        })
        .unwrap();
        assert!(per.q_star > hom.q_star);
    }

    #[test]
    fn simulation_table_and_trace() {
        let s = spec("kind = \"custom\"\ntrials = 8\n[params]\nn_bns = 3\n[[sweep]]\naxis = \"m_h\"\nvalues = [1, 2]\n");
        let mut trace = Vec::new();
        let pts = simulate(&s, Some(&mut trace)).unwrap();
        let mut buf = Vec::new();
        write_simulation_csv(&s, &pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .starts_with("m_h,trials,nd_success,nd_success_se,"));

        let trace = String::from_utf8(trace).unwrap();
        let records: Vec<serde_json::Value> = trace
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let trials = records.iter().filter(|r| r["record"] == "trial").count();
        assert_eq!(trials, 16);
        assert!(records
            .iter()
            .any(|r| r["record"] == "event" && r["event"] == "identified"));

        // Tracing does not perturb the statistics.
        let plain = simulate(&s, None).unwrap();
        for (a, b) in plain.iter().zip(&pts) {
            assert_eq!(a.stats, b.stats);
        }
    }
}
