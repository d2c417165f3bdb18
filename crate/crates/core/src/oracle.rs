//! Brute-force ground truth: spanning-tree checks by disjoint sets, the
//! virtual-flow connectivity test by rank, exhaustive topology enumeration and
//! an exhaustive grid search over shared settings scored by the simulator.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use crate::error::OracleError;
use crate::extract::{Omega1, TAP_OFFSET};
use crate::feeder::{reduced_incidence, DerSpec, Feeder};
use crate::profiles::ScenarioSet;
use crate::sim::{simulate_instance, SimOptions, VIOLATION_TOL};
use crate::wattvar::{beta_bounds, gamma_range, reactive_power, Curve};

/// Largest switch count [`enumerate_radial`] accepts.
pub const ENUMERATION_GUARD: usize = 24;
/// Largest configuration count [`grid_search_dnr`] accepts.
pub const GRID_BUDGET: u128 = 10_000_000;
/// Relative pivot threshold of the rank test.
pub const RANK_TOL: f64 = 1e-9;

/// Closed flag per edge for a switch assignment given in switch order.
pub fn closed_mask(feeder: &Feeder, y: &[bool]) -> Vec<bool> {
    assert_eq!(y.len(), feeder.num_switches(), "one bit per switch");
    let mut bits = y.iter();
    feeder
        .edges
        .iter()
        .map(|e| if e.is_switch() { *bits.next().unwrap() } else { true })
        .collect()
}

/// Shared settings closing exactly the switches set in `y`.
pub fn omega1_for(feeder: &Feeder, y: &[bool]) -> Omega1 {
    let mut omega1 = Omega1::default();
    for (e, &closed) in feeder.switches().zip(y) {
        omega1.switches.insert(e.id, closed);
    }
    omega1
}

/// Closed subgraph connected over all buses with exactly `N` edges.
pub fn is_spanning_tree(feeder: &Feeder, y: &[bool]) -> bool {
    let closed = closed_mask(feeder, y);
    let mut uf = UnionFind::new(feeder.buses.len());
    let mut count = 0;
    for e in feeder.edges.iter().filter(|e| closed[e.id]) {
        uf.union(e.from, e.to);
        count += 1;
    }
    count == feeder.n() && (1..feeder.buses.len()).all(|b| uf.equiv(0, b))
}

/// Numerical rank by QR with column pivoting: pivots above
/// `RANK_TOL * |R_00|` count.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let r = m.clone().col_piv_qr().r();
    let lead = r[(0, 0)].abs();
    if lead == 0.0 {
        return 0;
    }
    (0..r.nrows().min(r.ncols()))
        .filter(|&k| r[(k, k)].abs() > RANK_TOL * lead)
        .count()
}

/// Transposed reduced incidence of the closed edges (`N x closed`).
fn closed_incidence_t(feeder: &Feeder, y: &[bool]) -> DMatrix<f64> {
    let closed = closed_mask(feeder, y);
    let a = reduced_incidence(feeder);
    let rows: Vec<usize> = (0..feeder.edges.len()).filter(|&e| closed[e]).collect();
    a.select_rows(&rows).transpose()
}

/// Whether `A^T f = 1` is solvable over the closed edges, decided by
/// `rank(A^T) == rank([A^T | 1])`.
pub fn prop1_feasible(feeder: &Feeder, y: &[bool]) -> bool {
    let at = closed_incidence_t(feeder, y);
    let ones = DVector::from_element(feeder.n(), 1.0);
    let mut augmented = at.clone().insert_column(at.ncols(), 0.0);
    augmented.set_column(at.ncols(), &ones);
    rank(&at) == rank(&augmented)
}

/// A virtual flow over the closed edges (in edge order) when one exists.
pub fn virtual_flow(feeder: &Feeder, y: &[bool]) -> Option<DVector<f64>> {
    let at = closed_incidence_t(feeder, y);
    if at.ncols() == 0 {
        return (feeder.n() == 0).then(|| DVector::zeros(0));
    }
    let ones = DVector::from_element(feeder.n(), 1.0);
    let f = at.clone().svd(true, true).solve(&ones, 1e-12).ok()?;
    ((&at * &f - ones).amax() < 1e-9).then_some(f)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopologyEnumeration {
    /// Switch assignments (in switch order) forming spanning trees.
    pub assignments: Vec<Vec<bool>>,
}

impl TopologyEnumeration {
    pub fn count(&self) -> usize {
        self.assignments.len()
    }
}

/// Every switch assignment that yields a spanning tree, in increasing binary
/// order with the first switch as the least significant bit.
pub fn enumerate_radial(feeder: &Feeder) -> Result<TopologyEnumeration, OracleError> {
    let s = feeder.num_switches();
    if s > ENUMERATION_GUARD {
        return Err(OracleError::TooManySwitches(s));
    }
    let assignments = (0u32..1 << s)
        .map(|mask| (0..s).map(|k| mask >> k & 1 == 1).collect::<Vec<_>>())
        .filter(|y| is_spanning_tree(feeder, y))
        .collect();
    Ok(TopologyEnumeration { assignments })
}

/// Spanning trees of the full graph by the matrix-tree theorem: the
/// determinant of the Laplacian with the substation row and column removed.
pub fn kirchhoff_count(feeder: &Feeder) -> f64 {
    let n = feeder.n();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for e in &feeder.edges {
        for (a, b) in [(e.from, e.to), (e.to, e.from)] {
            if a > 0 {
                lap[(a - 1, a - 1)] += 1.0;
                if b > 0 {
                    lap[(a - 1, b - 1)] -= 1.0;
                }
            }
        }
    }
    lap.determinant()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub beta_steps: usize,
    pub gamma_steps: usize,
    /// Search every tap position when `None`, otherwise hold all remote
    /// regulators at this tap.
    pub fixed_tap: Option<i32>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            beta_steps: 9,
            gamma_steps: 9,
            fixed_tap: None,
        }
    }
}

/// The `(b, g)` grid point of one DER: `beta` evenly spaced over its bounds,
/// `gamma` evenly spaced over the admissible range at that slope.
pub fn grid_curve(der: &DerSpec, spec: &GridSpec, b: usize, g: usize) -> Option<Curve> {
    let lin = |lo: f64, hi: f64, k: usize, n: usize| if n <= 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
    let (blo, bhi) = beta_bounds(der);
    let beta = lin(blo, bhi, b, spec.beta_steps);
    let (glo, ghi) = gamma_range(beta, der)?;
    Some(Curve {
        beta,
        gamma: lin(glo, ghi, g, spec.gamma_steps),
    })
}

/// Best configuration of one topology and tap vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCandidate {
    pub switches: Vec<bool>,
    pub taps: Vec<i32>,
    /// Lowest objective over the curve grid; `None` if no point is feasible.
    pub objective: Option<f64>,
    /// Largest objective change between adjacent feasible grid points.
    pub variation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub omega1: Omega1,
    /// True quadratic loss summed over the instances.
    pub objective: f64,
    pub candidates: Vec<GridCandidate>,
    pub configurations: u128,
    /// Grid-resolution slack: the largest adjacent-point variation among
    /// candidates that could beat the optimum by that margin.
    pub resolution_slack: f64,
}

impl GridResult {
    /// One row per topology and tap vector.
    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["switches", "taps", "objective", "variation"])?;
        for c in &self.candidates {
            let bits: String = c.switches.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let taps = c.taps.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";");
            let obj = c.objective.map(|o| format!("{o:.12e}")).unwrap_or_else(|| "infeasible".into());
            w.write_record([bits, taps, obj, format!("{:.6e}", c.variation)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Summed true loss over the instances, or `None` when a voltage or flow
/// limit is violated or the simulation fails to converge.
pub fn score_omega1(feeder: &Feeder, omega1: &Omega1, scenarios: &ScenarioSet) -> Result<Option<f64>, OracleError> {
    let mut total = 0.0;
    for instance in &scenarios.instances {
        let state = match simulate_instance(feeder, omega1, instance, &SimOptions::default()) {
            Ok(s) => s,
            Err(crate::error::SimError::NoConvergence { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if state.metrics(feeder).violations > 0 {
            return Ok(None);
        }
        let flow_ok = feeder.edges.iter().filter(|e| state.closed[e.id]).all(|e| {
            let (p, q) = (state.flow_p[e.id], state.flow_q[e.id]);
            e.p_lim[0] - VIOLATION_TOL <= p
                && p <= e.p_lim[1] + VIOLATION_TOL
                && e.q_lim[0] - VIOLATION_TOL <= q
                && q <= e.q_lim[1] + VIOLATION_TOL
        });
        if !flow_ok {
            return Ok(None);
        }
        total += state.loss(feeder);
    }
    Ok(Some(total))
}

/// Curve grid of one DER with points merged when they produce the same
/// reactive power on every instance; the simulator cannot tell them apart.
struct DerGrid {
    bus: usize,
    /// Grid point (`b * gamma_steps + g`) to class, `None` if inadmissible.
    class_of: Vec<Option<usize>>,
    classes: Vec<Curve>,
}

fn der_grid(feeder: &Feeder, bus: usize, spec: &GridSpec, scenarios: &ScenarioSet) -> DerGrid {
    let der = feeder.buses[bus].der.expect("DER bus carries a rating");
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut classes = Vec::new();
    let mut class_of = Vec::new();
    for b in 0..spec.beta_steps {
        for g in 0..spec.gamma_steps {
            let Some(curve) = grid_curve(&der, spec, b, g) else {
                class_of.push(None);
                continue;
            };
            let Ok((p1, p2)) = curve.breakpoints(der.q_max) else {
                class_of.push(None);
                continue;
            };
            let key: Vec<u64> = scenarios
                .instances
                .iter()
                .map(|i| reactive_power(i.p_avail(bus), p1, p2, der.q_max).to_bits())
                .collect();
            let next = classes.len();
            let class = *seen.entry(key).or_insert(next);
            if class == next {
                classes.push(curve);
            }
            class_of.push(Some(class));
        }
    }
    DerGrid { bus, class_of, classes }
}

fn mixed_radix(mut index: usize, radices: &[usize], digits: &mut [usize]) {
    for (d, &r) in digits.iter_mut().zip(radices) {
        *d = index % r;
        index /= r;
    }
}

fn evaluate_candidate(
    feeder: &Feeder,
    scenarios: &ScenarioSet,
    grids: &[DerGrid],
    points: usize,
    gamma_steps: usize,
    y: &[bool],
    taps: &[i32],
) -> Result<(GridCandidate, Option<Omega1>), OracleError> {
    let mut base = omega1_for(feeder, y);
    for (e, &tap) in feeder.remote_regulators().zip(taps) {
        base.taps.insert(e.id, tap);
    }
    // Score every combination of curve classes once.
    let class_radix: Vec<usize> = grids.iter().map(|g| g.classes.len().max(1)).collect();
    let combos: usize = class_radix.iter().product();
    let mut digits = vec![0; grids.len()];
    let mut class_obj = Vec::with_capacity(combos);
    for c in 0..combos {
        mixed_radix(c, &class_radix, &mut digits);
        let mut omega1 = base.clone();
        if grids.iter().any(|g| g.classes.is_empty()) {
            class_obj.push(None);
            continue;
        }
        for (g, &d) in grids.iter().zip(&digits) {
            omega1.curves.insert(g.bus, g.classes[d]);
        }
        class_obj.push(score_omega1(feeder, &omega1, scenarios)?);
    }
    // Expand to the full grid, keeping the first minimum in grid order.
    let radix = vec![points; grids.len()];
    let full: usize = radix.iter().product();
    let objective_at = |digits: &[usize]| -> Option<f64> {
        let mut c = 0;
        let mut scale = 1;
        for (g, &d) in grids.iter().zip(digits) {
            c += g.class_of[d]? * scale;
            scale *= g.classes.len();
        }
        class_obj[c]
    };
    let mut best: Option<(f64, usize)> = None;
    let mut variation: f64 = 0.0;
    let mut nb = vec![0; grids.len()];
    for idx in 0..full {
        mixed_radix(idx, &radix, &mut digits);
        let Some(obj) = objective_at(&digits) else { continue };
        if best.is_none_or(|(b, _)| obj < b) {
            best = Some((obj, idx));
        }
        // Forward neighbours along each DER's beta and gamma axes.
        for k in 0..grids.len() {
            let (b, g) = (digits[k] / gamma_steps, digits[k] % gamma_steps);
            for (b2, g2) in [(b + 1, g), (b, g + 1)] {
                if b2 * gamma_steps >= points || g2 >= gamma_steps {
                    continue;
                }
                nb.copy_from_slice(&digits);
                nb[k] = b2 * gamma_steps + g2;
                if let Some(o2) = objective_at(&nb) {
                    variation = variation.max((o2 - obj).abs());
                }
            }
        }
    }
    let omega1 = best.map(|(_, idx)| {
        mixed_radix(idx, &radix, &mut digits);
        let mut omega1 = base.clone();
        for (g, &d) in grids.iter().zip(&digits) {
            omega1.curves.insert(g.bus, g.classes[g.class_of[d].unwrap()]);
        }
        omega1
    });
    Ok((
        GridCandidate {
            switches: y.to_vec(),
            taps: taps.to_vec(),
            objective: best.map(|(o, _)| o),
            variation,
        },
        omega1,
    ))
}

/// Exhaustive search over radial topologies, tap vectors and the curve grid,
/// each configuration scored by simulating every instance. Ties resolve to the
/// first configuration in (topology, taps, grid point) order.
pub fn grid_search_dnr(feeder: &Feeder, scenarios: &ScenarioSet, spec: GridSpec) -> Result<GridResult, OracleError> {
    let trees = enumerate_radial(feeder)?;
    let regs = feeder.remote_regulators().count();
    let tap_values: Vec<i32> = match spec.fixed_tap {
        Some(t) => vec![t],
        None => (-TAP_OFFSET..=TAP_OFFSET).collect(),
    };
    let tap_vectors = (tap_values.len() as u128).pow(regs as u32);
    let points = spec.beta_steps * spec.gamma_steps;
    let ders: Vec<usize> = feeder.der_buses().map(|b| b.id).collect();
    let configurations = trees.count() as u128 * tap_vectors * (points as u128).pow(ders.len() as u32);
    if configurations > GRID_BUDGET {
        return Err(OracleError::GridTooLarge(configurations));
    }
    let grids: Vec<DerGrid> = ders.iter().map(|&b| der_grid(feeder, b, &spec, scenarios)).collect();

    let mut jobs = Vec::new();
    for y in &trees.assignments {
        let mut digits = vec![0; regs];
        for k in 0..tap_vectors as usize {
            mixed_radix(k, &vec![tap_values.len(); regs], &mut digits);
            // Most significant regulator first so job order is lexicographic.
            let taps: Vec<i32> = digits.iter().rev().map(|&d| tap_values[d]).collect();
            jobs.push((y.clone(), taps));
        }
    }
    let gamma_steps = spec.gamma_steps;
    let results: Vec<Result<(GridCandidate, Option<Omega1>), OracleError>> = jobs
        .par_iter()
        .map(|(y, taps)| evaluate_candidate(feeder, scenarios, &grids, points, gamma_steps, y, taps))
        .collect();
    let mut candidates = Vec::with_capacity(results.len());
    let mut best: Option<(f64, Omega1)> = None;
    for r in results {
        let (candidate, omega1) = r?;
        if let (Some(obj), Some(omega1)) = (candidate.objective, omega1) {
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, omega1));
            }
        }
        candidates.push(candidate);
    }
    let (objective, omega1) = best.ok_or(OracleError::NoFeasible)?;
    let resolution_slack = candidates
        .iter()
        .filter(|c| c.objective.is_some_and(|o| o - c.variation <= objective))
        .map(|c| c.variation)
        .fold(0.0, f64::max);
    Ok(GridResult {
        omega1,
        objective,
        candidates,
        configurations,
        resolution_slack,
    })
}
