//! Local-rules simulator: the operating point a feeder settles into once its
//! switches, curves and remote taps are fixed.
//!
//! Each sweep sums injections up the tree (backward) and propagates voltages
//! down from the substation (forward) under the lossless linear drop model,
//! then refreshes ZIP loads from the new voltages and the region of every
//! local regulator. Sweeps repeat until the largest voltage change is below
//! `tol`. After `damping_after` sweeps the update is damped to break
//! oscillations at region edges.
//!
//! Elastic loads, whose ZIP rows form a band, draw the middle of the band.

use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use crate::encode::local_thresholds;
use crate::error::SimError;
use crate::extract::{Omega1, Omega2};
use crate::feeder::{EdgeKind, Feeder};
use crate::profiles::{Period, Profiles, ScenarioInstance, ScenarioSet};
use crate::wattvar::{reactive_power, segment};

/// Slack before a bus voltage counts as a limit violation.
pub const VIOLATION_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping_after: usize,
    pub damping: f64,
    /// Starting voltage of every non-substation bus; `None` starts at `v0`.
    pub v_init: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            tol: 1e-9,
            max_iter: 200,
            damping_after: 50,
            damping: 0.5,
            v_init: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Flows per edge; zero on open switches.
    pub flow_p: Vec<f64>,
    pub flow_q: Vec<f64>,
    pub closed: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub der_segment: BTreeMap<usize, u8>,
    pub reg_region: BTreeMap<usize, u8>,
}

impl SimState {
    /// True quadratic loss over closed non-regulator edges.
    pub fn loss(&self, feeder: &Feeder) -> f64 {
        feeder
            .edges
            .iter()
            .filter(|e| self.closed[e.id] && !e.is_regulator())
            .map(|e| e.r * (self.flow_p[e.id].powi(2) + self.flow_q[e.id].powi(2)))
            .sum()
    }

    pub fn metrics(&self, feeder: &Feeder) -> InstanceMetrics {
        let mut m = InstanceMetrics {
            loss: self.loss(feeder),
            min_v: f64::INFINITY,
            max_v: f64::NEG_INFINITY,
            violations: 0,
            max_violation: 0.0,
        };
        for bus in feeder.buses.iter().skip(1) {
            let v = self.v[bus.id];
            m.min_v = m.min_v.min(v);
            m.max_v = m.max_v.max(v);
            let excess = (bus.v_min - v).max(v - bus.v_max);
            if excess > VIOLATION_TOL {
                m.violations += 1;
                m.max_violation = m.max_violation.max(excess);
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceMetrics {
    pub loss: f64,
    pub min_v: f64,
    pub max_v: f64,
    /// Buses outside their voltage limits.
    pub violations: usize,
    pub max_violation: f64,
}

/// Aggregate over many instances.
#[derive(Clone, Debug, PartialEq)]
pub struct SimMetrics {
    pub instances: usize,
    pub total_loss: f64,
    /// Instances with at least one violated bus.
    pub violating_instances: usize,
    /// Bus-instance pairs outside limits.
    pub violation_count: usize,
    pub max_violation: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub per_bus_min: Vec<f64>,
    pub per_bus_max: Vec<f64>,
}

impl SimMetrics {
    fn new(buses: usize) -> Self {
        SimMetrics {
            instances: 0,
            total_loss: 0.0,
            violating_instances: 0,
            violation_count: 0,
            max_violation: 0.0,
            min_v: f64::INFINITY,
            max_v: f64::NEG_INFINITY,
            per_bus_min: vec![f64::INFINITY; buses],
            per_bus_max: vec![f64::NEG_INFINITY; buses],
        }
    }

    fn add(&mut self, state: &SimState, m: &InstanceMetrics) {
        self.instances += 1;
        self.total_loss += m.loss;
        self.violating_instances += usize::from(m.violations > 0);
        self.violation_count += m.violations;
        self.max_violation = self.max_violation.max(m.max_violation);
        self.min_v = self.min_v.min(m.min_v);
        self.max_v = self.max_v.max(m.max_v);
        for (k, &v) in state.v.iter().enumerate() {
            self.per_bus_min[k] = self.per_bus_min[k].min(v);
            self.per_bus_max[k] = self.per_bus_max[k].max(v);
        }
    }

    pub fn mean_loss(&self) -> f64 {
        if self.instances == 0 {
            0.0
        } else {
            self.total_loss / self.instances as f64
        }
    }
}

/// Rooted tree of the closed edges: buses in breadth-first order with the
/// edge leading to each bus from its parent.
struct Tree {
    order: Vec<usize>,
    parent_edge: Vec<Option<usize>>,
}

fn closed_edges(feeder: &Feeder, omega1: &Omega1) -> Vec<bool> {
    feeder.edges.iter().map(|e| omega1.is_closed(feeder, e.id)).collect()
}

fn spanning_tree(feeder: &Feeder, closed: &[bool]) -> Result<Tree, SimError> {
    let count = closed.iter().filter(|&&c| c).count();
    let n = feeder.n();
    let mut uf = UnionFind::new(feeder.buses.len());
    for e in feeder.edges.iter().filter(|e| closed[e.id]) {
        uf.union(e.from, e.to);
    }
    if count != n || (1..=n).any(|b| !uf.equiv(0, b)) {
        return Err(SimError::NotRadial { closed: count, n });
    }
    let adj = feeder.adjacency();
    let mut parent_edge = vec![None; feeder.buses.len()];
    let mut seen = vec![false; feeder.buses.len()];
    let mut order = vec![0];
    seen[0] = true;
    let mut head = 0;
    while head < order.len() {
        let bus = order[head];
        head += 1;
        for &e in &adj[bus] {
            if !closed[e] {
                continue;
            }
            let next = feeder.edges[e].other(bus);
            if !seen[next] {
                seen[next] = true;
                parent_edge[next] = Some(e);
                order.push(next);
            }
        }
    }
    Ok(Tree { order, parent_edge })
}

fn check_settings(feeder: &Feeder, omega1: &Omega1) -> Result<(), SimError> {
    for bus in feeder.der_buses() {
        if !omega1.curves.contains_key(&bus.id) {
            return Err(SimError::Settings(format!("no curve for DER bus {}", bus.id)));
        }
    }
    for (&e, &tap) in &omega1.taps {
        if feeder.edges.get(e).map(|e| e.kind) != Some(EdgeKind::RemoteRegulator) {
            return Err(SimError::Settings(format!("tap given for edge {e}, which is not a remote regulator")));
        }
        if !(-16..=16).contains(&tap) {
            return Err(SimError::Settings(format!("tap {tap} on edge {e} is outside [-16, 16]")));
        }
    }
    Ok(())
}

/// Fixed point of the local rules for one instance.
pub fn simulate_instance(
    feeder: &Feeder,
    omega1: &Omega1,
    instance: &ScenarioInstance,
    options: &SimOptions,
) -> Result<SimState, SimError> {
    check_settings(feeder, omega1)?;
    let closed = closed_edges(feeder, omega1);
    let tree = spanning_tree(feeder, &closed)?;
    let nb = feeder.buses.len();

    // DER injections do not depend on voltage.
    let mut p = vec![0.0; nb];
    let mut q = vec![0.0; nb];
    let mut der_segment = BTreeMap::new();
    for bus in feeder.der_buses() {
        let der = bus.der.expect("DER bus carries a rating");
        let (p1, p2) = omega1.curves[&bus.id].breakpoints(der.q_max)?;
        let pi = instance.p_avail(bus.id);
        p[bus.id] = pi;
        q[bus.id] = reactive_power(pi, p1, p2, der.q_max);
        der_segment.insert(bus.id, segment(pi, p1, p2));
    }
    let loads: Vec<_> = feeder
        .load_buses()
        .map(|b| {
            let s = instance.sample(b.id);
            (b.id, b.zip.expect("load bus carries ZIP data").scaled(s.p_load_scale, s.q_load_scale))
        })
        .collect();

    let mut v = vec![options.v_init.unwrap_or(feeder.v0); nb];
    v[0] = feeder.v0;
    let mut flow_p = vec![0.0; feeder.edges.len()];
    let mut flow_q = vec![0.0; feeder.edges.len()];
    let mut reg_region = BTreeMap::new();
    let mut residual = f64::INFINITY;

    for iter in 1..=options.max_iter {
        for &(bus, zip) in &loads {
            let l = zip.limits(v[bus]);
            p[bus] = 0.5 * (l[0] + l[1]);
            q[bus] = 0.5 * (l[2] + l[3]);
        }
        // Backward sweep: subtree injection flows toward the parent.
        let mut sub_p = p.clone();
        let mut sub_q = q.clone();
        flow_p.iter_mut().for_each(|x| *x = 0.0);
        flow_q.iter_mut().for_each(|x| *x = 0.0);
        for &bus in tree.order.iter().rev() {
            let Some(e) = tree.parent_edge[bus] else { continue };
            let edge = &feeder.edges[e];
            let parent = edge.other(bus);
            // Flow from parent into the subtree is minus its net injection.
            let sign = if edge.to == bus { -1.0 } else { 1.0 };
            flow_p[e] = sign * sub_p[bus];
            flow_q[e] = sign * sub_q[bus];
            sub_p[parent] += sub_p[bus];
            sub_q[parent] += sub_q[bus];
        }
        // Forward sweep.
        let mut v_new = v.clone();
        for &bus in &tree.order {
            let Some(e) = tree.parent_edge[bus] else { continue };
            let edge = &feeder.edges[e];
            let vp = v_new[edge.other(bus)];
            let forward = edge.to == bus;
            v_new[bus] = match edge.kind {
                EdgeKind::Line | EdgeKind::Switch => {
                    let drop = edge.r * flow_p[e] + edge.x * flow_q[e];
                    if forward {
                        vp - drop
                    } else {
                        vp + drop
                    }
                }
                EdgeKind::RemoteRegulator => {
                    let ratio = omega1.tap_ratio(e);
                    if forward {
                        ratio * vp
                    } else {
                        vp / ratio
                    }
                }
                EdgeKind::LocalRegulator => {
                    if !forward {
                        return Err(SimError::ReversedRegulator(e));
                    }
                    let band = edge.reg.and_then(|r| r.band()).expect("validated band");
                    let (region, out) = local_regulator_output(vp, band);
                    reg_region.insert(e, region);
                    out
                }
            };
        }
        residual = v_new.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if iter > options.damping_after {
            for (new, old) in v_new.iter_mut().zip(&v) {
                *new = old + options.damping * (*new - old);
            }
        }
        v = v_new;
        if residual < options.tol {
            return Ok(SimState {
                v,
                p,
                q,
                flow_p,
                flow_q,
                closed,
                converged: true,
                iterations: iter,
                residual,
                der_segment,
                reg_region,
            });
        }
    }
    Err(SimError::NoConvergence {
        iterations: options.max_iter,
        residual,
    })
}

/// Region (1 boosting at the top tap, 2 regulating, 3 bucking at the bottom
/// tap) and secondary voltage of a local regulator with mid-band output.
pub fn local_regulator_output(v_primary: f64, band: (f64, f64)) -> (u8, f64) {
    let (a, b) = local_thresholds(band);
    if v_primary <= a {
        (1, 1.1 * v_primary)
    } else if v_primary >= b {
        (3, 0.9 * v_primary)
    } else {
        (2, 0.5 * (band.0 + band.1))
    }
}

/// One minute of an evaluated period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinuteRecord {
    pub timestamp: u32,
    pub metrics: InstanceMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodEvaluation {
    pub metrics: SimMetrics,
    pub minutes: Vec<MinuteRecord>,
}

/// Simulates every minute of `period` with fixed settings.
pub fn evaluate_period(
    feeder: &Feeder,
    omega1: &Omega1,
    profiles: &Profiles,
    period: Period,
    options: &SimOptions,
) -> Result<PeriodEvaluation, SimError> {
    let minutes: Vec<u32> = (period.start..period.end).collect();
    let states: Vec<Result<SimState, SimError>> = minutes
        .par_iter()
        .map(|&m| {
            simulate_instance(feeder, omega1, &profiles.instance_at(m), options).map_err(|e| SimError::AtMinute {
                minute: m,
                source: Box::new(e),
            })
        })
        .collect();
    let mut metrics = SimMetrics::new(feeder.buses.len());
    let mut records = Vec::with_capacity(minutes.len());
    for (minute, state) in minutes.into_iter().zip(states) {
        let state = state?;
        let m = state.metrics(feeder);
        metrics.add(&state, &m);
        records.push(MinuteRecord {
            timestamp: minute,
            metrics: m,
        });
    }
    Ok(PeriodEvaluation {
        metrics,
        minutes: records,
    })
}

/// Simulates a scenario set and aggregates its metrics.
pub fn evaluate_scenarios(
    feeder: &Feeder,
    omega1: &Omega1,
    scenarios: &ScenarioSet,
    options: &SimOptions,
) -> Result<(SimMetrics, Vec<SimState>), SimError> {
    let mut metrics = SimMetrics::new(feeder.buses.len());
    let mut states = Vec::with_capacity(scenarios.len());
    for instance in &scenarios.instances {
        let state = simulate_instance(feeder, omega1, instance, options)?;
        metrics.add(&state, &state.metrics(feeder));
        states.push(state);
    }
    Ok((metrics, states))
}

#[derive(Clone, Debug, PartialEq)]
pub enum TieKind {
    /// Available power on a curve breakpoint.
    CurveBreakpoint { bus: usize, p: f64, breakpoint: f64 },
    /// Primary voltage on a region threshold.
    RegionThreshold { edge: usize, v: f64, threshold: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tie {
    pub t: usize,
    pub kind: TieKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mismatch {
    Voltage { t: usize, bus: usize, solver: f64, simulated: f64 },
    Segment { t: usize, bus: usize, solver: u8, simulated: u8 },
    Region { t: usize, edge: usize, solver: u8, simulated: u8 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub mismatches: Vec<Mismatch>,
    pub ties: Vec<Tie>,
    /// Largest voltage difference over instances without ties.
    pub max_voltage_diff: f64,
    /// True quadratic loss summed over the simulated instances.
    pub simulated_loss: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-simulates every sampled instance and compares with the solver states.
/// Instances where a DER sits on a breakpoint or a regulator primary sits on a
/// threshold (within `tie_tol`) are listed as ties and not compared.
pub fn check_solution(
    feeder: &Feeder,
    omega1: &Omega1,
    omega2: &[Omega2],
    scenarios: &ScenarioSet,
    tol: f64,
    tie_tol: f64,
) -> Result<CheckReport, SimError> {
    let mut report = CheckReport {
        mismatches: Vec::new(),
        ties: Vec::new(),
        max_voltage_diff: 0.0,
        simulated_loss: 0.0,
    };
    for (state, instance) in omega2.iter().zip(&scenarios.instances) {
        let t = state.t;
        let sim = simulate_instance(feeder, omega1, instance, &SimOptions::default())?;
        report.simulated_loss += sim.loss(feeder);
        let mut ties = Vec::new();
        for bus in feeder.der_buses() {
            let der = bus.der.expect("DER bus carries a rating");
            let (p1, p2) = omega1.curves[&bus.id].breakpoints(der.q_max)?;
            let p = instance.p_avail(bus.id);
            for breakpoint in [p1, p2] {
                if (p - breakpoint).abs() <= tie_tol {
                    ties.push(TieKind::CurveBreakpoint { bus: bus.id, p, breakpoint });
                }
            }
        }
        for e in feeder.local_regulators() {
            let band = e.reg.and_then(|r| r.band()).expect("validated band");
            let (a, b) = local_thresholds(band);
            for v in [state.v[e.from], sim.v[e.from]] {
                for threshold in [a, b] {
                    if (v - threshold).abs() <= tie_tol {
                        ties.push(TieKind::RegionThreshold { edge: e.id, v, threshold });
                    }
                }
            }
        }
        if !ties.is_empty() {
            report.ties.extend(ties.into_iter().map(|kind| Tie { t, kind }));
            continue;
        }
        for bus in 0..feeder.buses.len() {
            let diff = (state.v[bus] - sim.v[bus]).abs();
            report.max_voltage_diff = report.max_voltage_diff.max(diff);
            if diff > tol {
                report.mismatches.push(Mismatch::Voltage {
                    t,
                    bus,
                    solver: state.v[bus],
                    simulated: sim.v[bus],
                });
            }
        }
        for (&bus, &seg) in &state.der_segment {
            if sim.der_segment[&bus] != seg {
                report.mismatches.push(Mismatch::Segment {
                    t,
                    bus,
                    solver: seg,
                    simulated: sim.der_segment[&bus],
                });
            }
        }
        for (&edge, &region) in &state.reg_region {
            if sim.reg_region[&edge] != region {
                report.mismatches.push(Mismatch::Region {
                    t,
                    edge,
                    solver: region,
                    simulated: sim.reg_region[&edge],
                });
            }
        }
    }
    Ok(report)
}
