//! One period end to end: sample scenarios, assemble, solve, decode, verify
//! against the simulator and score on every minute. Also the run report and
//! its companion artifacts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use feeder_mip::{branch_and_bound, BnbOptions, MipStatus};
use serde::{Deserialize, Serialize};

use crate::encode::{assemble_dnr, DnrModel, DnrOptions};
use crate::error::PipelineError;
use crate::extract::{extract_omega, Omega1, Omega2, SolutionFile};
use crate::feeder::Feeder;
use crate::oracle::is_spanning_tree;
use crate::profiles::{build_scenarios, Period, Profiles, Sampling, ScenarioSet};
use crate::sim::{check_solution, evaluate_period, evaluate_scenarios, CheckReport, PeriodEvaluation, SimMetrics, SimOptions};
use crate::wattvar::{in_curve_box, recover_breakpoints};

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub samples: usize,
    pub seed: u64,
    pub sampling: Sampling,
    pub dnr: DnrOptions,
    pub bnb: BnbOptions,
    pub sim: SimOptions,
    /// Per-bus voltage agreement required between solver and simulator.
    pub check_tol: f64,
    /// Distance to a breakpoint or threshold that counts as a tie.
    pub tie_tol: f64,
    /// Score the decoded settings on every minute of the period.
    pub evaluate_minutes: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let bnb = BnbOptions::default();
        SolveConfig {
            samples: 2,
            seed: 1,
            sampling: Sampling::Random,
            dnr: DnrOptions::default(),
            check_tol: 10.0 * bnb.feas_tol,
            tie_tol: 1e-7,
            bnb,
            sim: SimOptions::default(),
            evaluate_minutes: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PeriodOutcome {
    pub period: Period,
    pub instances: usize,
    pub status: MipStatus,
    pub objective: Option<f64>,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall: Duration,
    /// Worst-case underestimate of the loss by the tangent cuts.
    pub epigraph_bound: f64,
    pub omega1: Option<Omega1>,
    pub omega2: Vec<Omega2>,
    pub check: Option<CheckReport>,
    /// Simulated metrics on the sampled instances.
    pub sampled: Option<SimMetrics>,
    /// Simulated metrics on every minute, or why they are missing.
    pub evaluation: Option<Result<PeriodEvaluation, String>>,
    pub log: String,
}

impl PeriodOutcome {
    pub fn is_infeasible(&self) -> bool {
        self.status == MipStatus::Infeasible
    }

    /// Simulated loss on the sampled instances minus the solver objective.
    pub fn loss_gap(&self) -> Option<f64> {
        Some(self.sampled.as_ref()?.total_loss - self.objective?)
    }

    /// Verification failures of a solved period; empty when it passes.
    pub fn failures(&self, feeder: &Feeder) -> Vec<String> {
        let mut out = Vec::new();
        let Some(omega1) = &self.omega1 else {
            return out;
        };
        out.extend(settings_failures(feeder, omega1));
        if let Some(check) = &self.check {
            for m in &check.mismatches {
                out.push(format!("simulator disagrees with solver: {m:?}"));
            }
        }
        if let Some(gap) = self.loss_gap() {
            let slack = 1e-6 * self.objective.unwrap_or(0.0).abs().max(1.0);
            if gap < -slack || gap > self.epigraph_bound + slack {
                out.push(format!(
                    "simulated loss exceeds the objective by {gap:.3e}, outside [0, {:.3e}]",
                    self.epigraph_bound
                ));
            }
        }
        out
    }
}

/// Switch states as one bit per switch in switch order.
pub fn switch_bits(feeder: &Feeder, omega1: &Omega1) -> Vec<bool> {
    feeder.switches().map(|e| omega1.is_closed(feeder, e.id)).collect()
}

/// Structural checks of shared settings: radial topology, the closed-switch
/// count, tap range and admissible curves.
pub fn settings_failures(feeder: &Feeder, omega1: &Omega1) -> Vec<String> {
    let mut out = Vec::new();
    let closed = omega1.closed_switches().len();
    match feeder.closed_switch_count() {
        Ok(need) if need != closed => out.push(format!(
            "{closed} switches closed but a radial topology closes N - |E \\ E_S| = {need}"
        )),
        Err(e) => out.push(e.to_string()),
        _ => {}
    }
    for &e in omega1.switches.keys() {
        if !feeder.edges.get(e).is_some_and(|edge| edge.is_switch()) {
            out.push(format!("edge {e} is not a switch"));
        }
    }
    if !is_spanning_tree(feeder, &switch_bits(feeder, omega1)) {
        out.push("closed edges do not form a spanning tree".into());
    }
    for (&e, &tap) in &omega1.taps {
        if !(-16..=16).contains(&tap) {
            out.push(format!("tap {tap} on edge {e} is outside the 33 positions -16..=16"));
        }
    }
    for e in feeder.remote_regulators() {
        if !omega1.taps.contains_key(&e.id) {
            out.push(format!("no tap for remote regulator {}", e.id));
        }
    }
    for bus in feeder.der_buses() {
        let der = bus.der.expect("DER bus carries a rating");
        match omega1.curves.get(&bus.id) {
            None => out.push(format!("no curve for DER bus {}", bus.id)),
            Some(c) if !in_curve_box(c.beta, c.gamma, &der, 1e-6) => out.push(format!(
                "curve of DER bus {} (beta {}, gamma {}) violates the breakpoint limits",
                bus.id, c.beta, c.gamma
            )),
            _ => {}
        }
    }
    out
}

/// Samples, assembles and solves one period, then verifies and scores the
/// decoded settings. An infeasible period is an outcome, not an error.
pub fn solve_period(
    feeder: &Feeder,
    profiles: &Profiles,
    period: Period,
    config: &SolveConfig,
) -> Result<PeriodOutcome, PipelineError> {
    let scenarios = build_scenarios(profiles, period, config.samples, config.seed, config.sampling)?;
    let dnr = assemble_dnr(feeder, &scenarios, &config.dnr)?;
    solve_assembled(feeder, profiles, &scenarios, &dnr, config)
}

/// Solves an already assembled model of `scenarios`.
pub fn solve_assembled(
    feeder: &Feeder,
    profiles: &Profiles,
    scenarios: &ScenarioSet,
    dnr: &DnrModel,
    config: &SolveConfig,
) -> Result<PeriodOutcome, PipelineError> {
    let start = Instant::now();
    let sol = branch_and_bound(&dnr.model, &config.bnb)?;
    log::info!(
        "period {}: {:?} after {} nodes, objective {:?}",
        scenarios.period,
        sol.status,
        sol.nodes,
        sol.objective
    );
    let mut outcome = PeriodOutcome {
        period: scenarios.period,
        instances: scenarios.len(),
        status: sol.status,
        objective: sol.objective,
        bound: sol.bound,
        gap: sol.gap,
        nodes: sol.nodes,
        wall: Duration::ZERO,
        epigraph_bound: dnr.epigraph_bound(),
        omega1: None,
        omega2: Vec::new(),
        check: None,
        sampled: None,
        evaluation: None,
        log: sol.log,
    };
    if let Some(values) = &sol.values {
        let (omega1, omega2) = extract_omega(dnr, values, config.bnb.int_tol)?;
        outcome.check = Some(check_solution(
            feeder,
            &omega1,
            &omega2,
            scenarios,
            config.check_tol,
            config.tie_tol,
        )?);
        outcome.sampled = Some(evaluate_scenarios(feeder, &omega1, scenarios, &config.sim)?.0);
        if config.evaluate_minutes {
            outcome.evaluation = Some(
                evaluate_period(feeder, &omega1, profiles, scenarios.period, &config.sim).map_err(|e| e.to_string()),
            );
        }
        outcome.omega1 = Some(omega1);
        outcome.omega2 = omega2;
    }
    outcome.wall = start.elapsed();
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub feeder: String,
    pub profiles: String,
    pub samples: usize,
    pub tangents: usize,
    pub seed: u64,
    pub mip_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub bus: usize,
    pub name: String,
    pub beta: f64,
    pub gamma: f64,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub minutes: usize,
    pub total_loss: f64,
    pub mean_loss: f64,
    pub violating_minutes: usize,
    pub violation_count: usize,
    pub max_violation: f64,
    pub min_v: f64,
    pub max_v: f64,
}

impl From<&SimMetrics> for SimulationReport {
    fn from(m: &SimMetrics) -> Self {
        SimulationReport {
            minutes: m.instances,
            total_loss: m.total_loss,
            mean_loss: m.mean_loss(),
            violating_minutes: m.violating_instances,
            violation_count: m.violation_count,
            max_violation: m.max_violation,
            min_v: m.min_v,
            max_v: m.max_v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub period: String,
    pub status: String,
    pub instances: usize,
    pub nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub epigraph_bound: f64,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    /// Closed switch edge ids.
    #[serde(default)]
    pub closed_switches: Vec<usize>,
    /// Open switch edge ids.
    #[serde(default)]
    pub open_switches: Vec<usize>,
    /// Remote regulator edge id to tap position.
    #[serde(default)]
    pub taps: Vec<(usize, i32)>,
    #[serde(default)]
    pub curves: Vec<CurveReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_voltage_diff: Option<f64>,
    #[serde(default)]
    pub ties: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation_error: Option<String>,
}

impl PeriodReport {
    pub fn new(feeder: &Feeder, outcome: &PeriodOutcome) -> Self {
        let failures = outcome.failures(feeder);
        let finite = |x: f64| x.is_finite().then_some(x);
        let mut report = PeriodReport {
            period: outcome.period.to_string(),
            status: format!("{:?}", outcome.status).to_lowercase(),
            instances: outcome.instances,
            nodes: outcome.nodes,
            objective: outcome.objective,
            bound: finite(outcome.bound),
            gap: outcome.objective.and_then(|_| finite(outcome.gap)),
            epigraph_bound: outcome.epigraph_bound,
            verified: outcome.omega1.is_some() && failures.is_empty(),
            failures,
            closed_switches: Vec::new(),
            open_switches: Vec::new(),
            taps: Vec::new(),
            curves: Vec::new(),
            sampled_loss: outcome.sampled.as_ref().map(|m| m.total_loss),
            max_voltage_diff: outcome.check.as_ref().map(|c| c.max_voltage_diff),
            ties: outcome.check.as_ref().map_or(0, |c| c.ties.len()),
            simulation: None,
            simulation_error: None,
        };
        if let Some(omega1) = &outcome.omega1 {
            report.closed_switches = omega1.closed_switches();
            report.open_switches = omega1.switches.iter().filter(|(_, &c)| !c).map(|(&e, _)| e).collect();
            report.taps = omega1.taps.iter().map(|(&e, &t)| (e, t)).collect();
            for (&bus, curve) in &omega1.curves {
                let der = feeder.buses[bus].der.expect("DER bus carries a rating");
                let (p1, p2) = recover_breakpoints(curve.beta, curve.gamma, der.q_max).unwrap_or((f64::NAN, f64::NAN));
                report.curves.push(CurveReport {
                    bus,
                    name: feeder.buses[bus].name.clone(),
                    beta: curve.beta,
                    gamma: curve.gamma,
                    p1,
                    p2,
                });
            }
        }
        match &outcome.evaluation {
            Some(Ok(eval)) => report.simulation = Some(SimulationReport::from(&eval.metrics)),
            Some(Err(e)) => report.simulation_error = Some(e.clone()),
            None => {}
        }
        report
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: RunInfo,
    #[serde(rename = "period")]
    pub periods: Vec<PeriodReport>,
}

impl RunReport {
    /// TOML text. Everything that varies between identical runs (timestamp,
    /// wall times) sits on the first line, a comment.
    pub fn to_toml(&self, wall: &[Duration]) -> String {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let walls: Vec<String> = wall.iter().map(|w| format!("{:.3}", w.as_secs_f64())).collect();
        let mut out = String::new();
        let _ = writeln!(out, "# generated {stamp} unix, wall seconds per period [{}]", walls.join(", "));
        out.push_str(&toml::to_string(self).expect("report serializes"));
        out
    }

    /// Parses a report, ignoring its header comment.
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Per-minute metrics of every evaluated period:
/// `timestamp,loss,min_v,max_v,violations`.
pub fn write_metrics_csv(outcomes: &[PeriodOutcome], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "loss", "min_v", "max_v", "violations"])?;
    for o in outcomes {
        if let Some(Ok(eval)) = &o.evaluation {
            for m in &eval.minutes {
                w.write_record([
                    m.timestamp.to_string(),
                    format!("{:.12e}", m.metrics.loss),
                    format!("{:.9}", m.metrics.min_v),
                    format!("{:.9}", m.metrics.max_v),
                    m.metrics.violations.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Static plotting script for the metrics CSV.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot per-minute loss and voltage extremes from metrics.csv."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "metrics.csv"
rows = list(csv.DictReader(open(path)))
t = [int(r["timestamp"]) / 60 for r in rows]
fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(9, 6))
ax1.plot(t, [float(r["loss"]) for r in rows], lw=0.8)
ax1.set_ylabel("loss (pu)")
ax2.plot(t, [float(r["min_v"]) for r in rows], lw=0.8, label="min v")
ax2.plot(t, [float(r["max_v"]) for r in rows], lw=0.8, label="max v")
ax2.set_ylabel("voltage (pu)")
ax2.set_xlabel("hour")
ax2.legend()
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
"#;

/// File name of the solution of one period.
pub fn solution_file_name(period: Period) -> String {
    format!("solution-{}-{}.json", period.start, period.end)
}

/// Writes report, metrics, plot script, solver log and one solution file per
/// solved period into `dir`.
pub fn write_artifacts(
    dir: &Path,
    feeder: &Feeder,
    info: RunInfo,
    outcomes: &[PeriodOutcome],
) -> Result<RunReport, PipelineError> {
    std::fs::create_dir_all(dir)?;
    let report = RunReport {
        run: info.clone(),
        periods: outcomes.iter().map(|o| PeriodReport::new(feeder, o)).collect(),
    };
    let walls: Vec<Duration> = outcomes.iter().map(|o| o.wall).collect();
    std::fs::write(dir.join("report.toml"), report.to_toml(&walls))?;
    let csv_err = |e: csv::Error| PipelineError::Other(e.to_string());
    write_metrics_csv(outcomes, std::fs::File::create(dir.join("metrics.csv"))?).map_err(csv_err)?;
    std::fs::write(dir.join("plot_metrics.py"), PLOT_SCRIPT)?;
    let mut log = String::new();
    for o in outcomes {
        let _ = writeln!(log, "# period {}", o.period);
        log.push_str(&o.log);
    }
    std::fs::write(dir.join("solver.log"), log)?;
    for o in outcomes {
        if let Some(omega1) = &o.omega1 {
            let file = SolutionFile {
                period: Some(o.period),
                objective: o.objective,
                samples: Some(info.samples),
                seed: Some(info.seed),
                omega1: omega1.clone(),
            };
            std::fs::write(
                dir.join(solution_file_name(o.period)),
                serde_json::to_string_pretty(&file)?,
            )?;
        }
    }
    Ok(report)
}
