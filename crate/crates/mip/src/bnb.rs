//! Best-bound branch-and-bound over the binaries of a [`MipModel`].
//!
//! Node selection is best-bound with FIFO tie-break. Branching picks the
//! fractional binary with the highest `branch_priority`, then the most
//! fractional one, then the lowest index. Children re-solve from their
//! parent's simplex basis while the warm-start cache has room; otherwise they
//! replay their fixings from the root relaxation. Both paths give the same LP
//! optimum.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::error::SolveError;
use crate::lp::{LpState, Outcome, Relaxation};
use crate::model::{MipModel, VarId};

#[derive(Clone, Debug)]
pub struct BnbOptions {
    pub mip_gap: f64,
    pub feas_tol: f64,
    pub int_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Maximum number of parent simplex states kept for warm starts.
    pub warm_cache: usize,
    /// Record one log line per processed node.
    pub log_nodes: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            mip_gap: 1e-6,
            feas_tol: 1e-7,
            int_tol: 1e-6,
            time_limit: None,
            node_limit: None,
            warm_cache: 64,
            log_nodes: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MipStatus {
    /// Closed within `mip_gap`.
    Optimal,
    /// Node limit reached with an incumbent.
    Feasible,
    Infeasible,
    /// Time limit reached (or node limit without an incumbent).
    Timeout,
    /// The relaxation is unbounded.
    Unbounded,
}

/// One processed node: its LP value next to the LP value of its parent.
#[derive(Clone, Debug)]
pub struct NodeRecord {
    pub node: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub parent_bound: f64,
    /// `None` when the node LP was infeasible.
    pub lp_objective: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Incumbent with binaries snapped to 0/1.
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    /// `(objective - bound) / max(1, |objective|)`; infinite without incumbent.
    pub gap: f64,
    pub nodes: usize,
    pub elapsed: Duration,
    pub records: Vec<NodeRecord>,
    /// Line-oriented solver log.
    pub log: String,
}

struct Node {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    bound: f64,
    fixings: Vec<(VarId, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node has the smallest bound,
    // then the smallest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Parent states waiting for their children, with the number of children not
/// yet started.
struct WarmCache {
    states: HashMap<usize, (LpState, u8)>,
    capacity: usize,
}

impl WarmCache {
    fn take(&mut self, parent: usize) -> Option<LpState> {
        let (_, remaining) = self.states.get_mut(&parent)?;
        *remaining -= 1;
        if *remaining == 0 {
            self.states.remove(&parent).map(|(s, _)| s)
        } else {
            self.states.get(&parent).map(|(s, _)| s.clone())
        }
    }

    fn forget(&mut self, parent: usize) {
        if let Some((_, remaining)) = self.states.get_mut(&parent) {
            *remaining -= 1;
            if *remaining == 0 {
                self.states.remove(&parent);
            }
        }
    }
}

fn gap_of(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

/// Solves `model` to `options.mip_gap` by LP-based branch-and-bound.
pub fn branch_and_bound(model: &MipModel, options: &BnbOptions) -> Result<MipSolution, SolveError> {
    model.validate()?;
    let start = Instant::now();
    let relaxation = Relaxation::new(model, &[], options.feas_tol)?;
    let binaries: Vec<VarId> = model.binaries().collect();

    let mut log = String::new();
    let mut records = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut cache = WarmCache {
        states: HashMap::new(),
        capacity: options.warm_cache,
    };
    let mut root_state: Option<LpState> = None;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut next_id = 1;
    let mut nodes = 0;
    let mut limit_hit: Option<MipStatus> = None;

    heap.push(Node {
        id: 0,
        parent: None,
        depth: 0,
        bound: f64::NEG_INFINITY,
        fixings: Vec::new(),
    });

    while let Some(node) = heap.pop() {
        if let Some((obj, _)) = &incumbent {
            if node.bound >= obj - options.mip_gap * obj.abs().max(1.0) {
                if let Some(p) = node.parent {
                    cache.forget(p);
                }
                // Every other open node has an even larger bound.
                for rest in heap.drain() {
                    if let Some(p) = rest.parent {
                        cache.forget(p);
                    }
                }
                break;
            }
        }
        if options.time_limit.is_some_and(|t| start.elapsed() >= t) {
            limit_hit = Some(MipStatus::Timeout);
            heap.push(node);
            break;
        }
        if options.node_limit.is_some_and(|n| nodes >= n) {
            limit_hit = Some(if incumbent.is_some() {
                MipStatus::Feasible
            } else {
                MipStatus::Timeout
            });
            heap.push(node);
            break;
        }
        nodes += 1;

        let warm = match node.parent {
            None => relaxation.root(),
            Some(parent) => {
                let &(var, value) = node.fixings.last().expect("child nodes carry a fixing");
                match cache.take(parent) {
                    Some(state) => relaxation.fix(state, var, value),
                    None => replay(&relaxation, root_state.as_ref(), &node.fixings),
                }
            }
        };
        let outcome = match warm {
            Err(SolveError::Numerical(msg)) => {
                log::debug!("node {}: warm re-solve failed ({msg}); rebuilding", node.id);
                relaxation.cold(&node.fixings).inspect_err(|e| log::debug!("node {}: cold rebuild failed ({e})", node.id))?
            }
            other => other?,
        };

        let state = match outcome {
            Outcome::Solved(state) => state,
            Outcome::Infeasible => {
                records.push(NodeRecord {
                    node: node.id,
                    parent: node.parent,
                    depth: node.depth,
                    parent_bound: node.bound,
                    lp_objective: None,
                });
                if options.log_nodes {
                    let _ = writeln!(log, "node {} depth {} infeasible", node.id, node.depth);
                }
                continue;
            }
            Outcome::Unbounded => {
                return Ok(MipSolution {
                    status: MipStatus::Unbounded,
                    values: None,
                    objective: None,
                    bound: f64::NEG_INFINITY,
                    gap: f64::INFINITY,
                    nodes,
                    elapsed: start.elapsed(),
                    records,
                    log,
                });
            }
        };
        let values = relaxation.values(&state);
        let lp_obj = model.objective_value(&values);
        records.push(NodeRecord {
            node: node.id,
            parent: node.parent,
            depth: node.depth,
            parent_bound: node.bound,
            lp_objective: Some(lp_obj),
        });
        if node.parent.is_none() {
            root_state = Some(state.clone());
        }

        let branch_var = select_branch_var(model, &binaries, &values, options.int_tol);
        let open_bound = heap.peek().map_or(lp_obj, |n| n.bound.min(lp_obj));

        match branch_var {
            None => {
                let mut snapped = values;
                for &b in &binaries {
                    snapped[b.0] = snapped[b.0].round();
                }
                let obj = model.objective_value(&snapped);
                let better = incumbent.as_ref().is_none_or(|(best, _)| obj < *best);
                if better {
                    incumbent = Some((obj, snapped));
                }
                if options.log_nodes {
                    let best = incumbent.as_ref().map_or(f64::INFINITY, |i| i.0);
                    let _ = writeln!(
                        log,
                        "node {} depth {} lp {:.10e} integral incumbent {:.10e} bound {:.10e} gap {:.3e}",
                        node.id,
                        node.depth,
                        lp_obj,
                        best,
                        open_bound,
                        gap_of(best, open_bound)
                    );
                }
            }
            Some(var) => {
                if let Some((best, _)) = &incumbent {
                    if lp_obj >= best - options.mip_gap * best.abs().max(1.0) {
                        continue;
                    }
                }
                if options.log_nodes {
                    let best = incumbent.as_ref().map_or(f64::INFINITY, |i| i.0);
                    let _ = writeln!(
                        log,
                        "node {} depth {} lp {:.10e} branch {} ({:.6}) incumbent {:.10e} bound {:.10e} gap {:.3e}",
                        node.id,
                        node.depth,
                        lp_obj,
                        var.0,
                        values[var.0],
                        best,
                        open_bound,
                        gap_of(best, open_bound)
                    );
                }
                if cache.states.len() < cache.capacity {
                    cache.states.insert(node.id, (state, 2));
                }
                for value in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((var, value));
                    heap.push(Node {
                        id: next_id,
                        parent: Some(node.id),
                        depth: node.depth + 1,
                        bound: lp_obj,
                        fixings,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let (status, objective, values, bound) = match (incumbent, limit_hit) {
        (Some((obj, vals)), None) => (MipStatus::Optimal, Some(obj), Some(vals), open_bound.min(obj)),
        (Some((obj, vals)), Some(st)) => (st, Some(obj), Some(vals), open_bound.min(obj)),
        (None, None) => (MipStatus::Infeasible, None, None, f64::INFINITY),
        (None, Some(st)) => (st, None, None, open_bound),
    };
    let gap = objective.map_or(f64::INFINITY, |o| gap_of(o, bound));
    let _ = writeln!(
        log,
        "done status {:?} nodes {} objective {} bound {:.10e} gap {:.3e}",
        status,
        nodes,
        objective.map_or("none".to_string(), |o| format!("{o:.10e}")),
        bound,
        gap
    );
    Ok(MipSolution {
        status,
        values,
        objective,
        bound,
        gap,
        nodes,
        elapsed: start.elapsed(),
        records,
        log,
    })
}

fn replay(
    relaxation: &Relaxation<'_>,
    root: Option<&LpState>,
    fixings: &[(VarId, f64)],
) -> Result<Outcome, SolveError> {
    let mut state = match root {
        Some(s) => s.clone(),
        None => match relaxation.root()? {
            Outcome::Solved(s) => s,
            other => return Ok(other),
        },
    };
    for &(var, value) in fixings {
        state = match relaxation.fix(state, var, value)? {
            Outcome::Solved(s) => s,
            other => return Ok(other),
        };
    }
    Ok(Outcome::Solved(state))
}

fn select_branch_var(model: &MipModel, binaries: &[VarId], values: &[f64], int_tol: f64) -> Option<VarId> {
    let mut best: Option<(i32, f64, VarId)> = None;
    for &b in binaries {
        let x = values[b.0];
        let frac = (x - x.floor()).min(x.ceil() - x);
        if frac <= int_tol {
            continue;
        }
        let prio = model.var(b).branch_priority;
        let better = match best {
            None => true,
            Some((bp, bf, _)) => prio > bp || (prio == bp && frac > bf),
        };
        if better {
            best = Some((prio, frac, b));
        }
    }
    best.map(|(_, _, v)| v)
}
