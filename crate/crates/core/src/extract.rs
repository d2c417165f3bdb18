//! Decoding solver values into shared settings and per-instance states.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::encode::{DnrModel, TAP_BITS, TAP_STEP};
use crate::error::ExtractError;
use crate::feeder::Feeder;
use crate::profiles::Period;
use crate::wattvar::Curve;

/// Offset between the encoded tap value and the tap position.
pub const TAP_OFFSET: i32 = 16;

/// Settings shared by a whole period: switch states, DER curves, remote taps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Omega1 {
    /// Switch edge id to closed flag.
    pub switches: BTreeMap<usize, bool>,
    /// DER bus id to curve.
    pub curves: BTreeMap<usize, Curve>,
    /// Remote regulator edge id to tap position in `[-16, 16]`.
    pub taps: BTreeMap<usize, i32>,
}

impl Omega1 {
    /// Whether edge `id` conducts. Non-switch edges are always closed.
    pub fn is_closed(&self, feeder: &Feeder, id: usize) -> bool {
        !feeder.edges[id].is_switch() || self.switches.get(&id).copied().unwrap_or(false)
    }

    pub fn tap_ratio(&self, edge: usize) -> f64 {
        tap_ratio(self.taps.get(&edge).copied().unwrap_or(0))
    }

    /// Switch edge ids that are closed, in id order.
    pub fn closed_switches(&self) -> Vec<usize> {
        self.switches.iter().filter(|(_, &c)| c).map(|(&e, _)| e).collect()
    }
}

pub fn tap_ratio(tap: i32) -> f64 {
    1.0 + TAP_STEP * f64::from(tap)
}

/// Tap position of a 6-bit code, least significant bit first.
pub fn tap_from_bits(bits: [bool; TAP_BITS]) -> i32 {
    bits.iter().enumerate().map(|(k, &b)| i32::from(b) << k).sum::<i32>() - TAP_OFFSET
}

/// Operating state of one instance as reported by the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct Omega2 {
    pub t: usize,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub flow_p: Vec<f64>,
    pub flow_q: Vec<f64>,
    /// DER bus id to active segment (1..=3).
    pub der_segment: BTreeMap<usize, u8>,
    /// Local regulator edge id to active region (1..=3).
    pub reg_region: BTreeMap<usize, u8>,
}

/// File form of a period solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Period>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    /// Samples per interval and seed the period was solved with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub omega1: Omega1,
}

fn binary(values: &[f64], var: feeder_mip::VarId, int_tol: f64, name: impl Fn() -> String) -> Result<bool, ExtractError> {
    let x = values[var.0];
    if (x - x.round()).abs() > int_tol || !(-int_tol..=1.0 + int_tol).contains(&x) {
        return Err(ExtractError::Fractional { name: name(), value: x });
    }
    Ok(x.round() == 1.0)
}

fn one_hot(values: &[f64], vars: [feeder_mip::VarId; 3], int_tol: f64, name: &str) -> Result<u8, ExtractError> {
    let mut active = 0;
    for (k, &v) in vars.iter().enumerate() {
        if binary(values, v, int_tol, || format!("{name}[{}]", k + 1))? {
            active = k as u8 + 1;
        }
    }
    Ok(active)
}

/// Rounds the binaries of an integral solution and decodes the layouts.
pub fn extract_omega(dnr: &DnrModel, values: &[f64], int_tol: f64) -> Result<(Omega1, Vec<Omega2>), ExtractError> {
    if values.len() != dnr.model.num_vars() {
        return Err(ExtractError::NoSolution);
    }
    let o1 = &dnr.layout.omega1;
    let mut omega1 = Omega1::default();
    for (&e, &y) in &o1.y {
        omega1.switches.insert(e, binary(values, y, int_tol, || format!("switch {e}"))?);
    }
    for (&bus, &beta) in &o1.beta {
        omega1.curves.insert(
            bus,
            Curve {
                beta: values[beta.0],
                gamma: values[o1.gamma[&bus].0],
            },
        );
    }
    for (&e, bits) in &o1.tap_bits {
        let mut decoded = [false; TAP_BITS];
        for (k, &b) in bits.iter().enumerate() {
            decoded[k] = binary(values, b, int_tol, || format!("tap bit {k} of edge {e}"))?;
        }
        omega1.taps.insert(e, tap_from_bits(decoded));
    }
    let mut states = Vec::with_capacity(dnr.layout.omega2.len());
    for o2 in &dnr.layout.omega2 {
        let get = |v: &Option<feeder_mip::VarId>| v.map_or(0.0, |v| values[v.0]);
        let mut der_segment = BTreeMap::new();
        for (&bus, &d) in &o2.der_delta {
            der_segment.insert(bus, one_hot(values, d, int_tol, &format!("segment of DER {bus} t={}", o2.t))?);
        }
        let mut reg_region = BTreeMap::new();
        for (&e, &d) in &o2.reg_delta {
            reg_region.insert(e, one_hot(values, d, int_tol, &format!("region of regulator {e} t={}", o2.t))?);
        }
        states.push(Omega2 {
            t: o2.t,
            v: o2.v.iter().map(|v| values[v.0]).collect(),
            p: o2.p.iter().map(get).collect(),
            q: o2.q.iter().map(get).collect(),
            flow_p: o2.flow_p.iter().map(|v| values[v.0]).collect(),
            flow_q: o2.flow_q.iter().map(|v| values[v.0]).collect(),
            der_segment,
            reg_region,
        });
    }
    Ok((omega1, states))
}
