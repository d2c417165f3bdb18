//! Watt-var rule of each DER in slope/intercept form.
//!
//! Per instance, with `pi` the available power (the DER injects all of it):
//!
//! ```text
//! d1 + d2 + d3 = 1
//! s = beta * pi + gamma
//! q = d2 * s - q_max * d3
//! s <= d1 * gamma - q_max * d3
//! s >= d3 * (gamma + p_max * beta) - q_max * d2
//! ```
//!
//! All products are binary times continuous and are linearized exactly.

use feeder_mip::{mccormick_product, MipModel, Sense, Tag};

use super::{DnrLayout, Omega1Layout, Omega2Layout};
use crate::error::EncodeError;
use crate::feeder::Feeder;
use crate::profiles::ScenarioSet;
use crate::wattvar::linear_range;

/// Admissible-curve polygon for one DER, added once. Also defines the shared
/// ramp value at rated power `u = gamma + p_max * beta`.
pub fn encode_curve_box(
    model: &mut MipModel,
    feeder: &Feeder,
    bus: usize,
    omega1: &mut Omega1Layout,
) -> Result<(), EncodeError> {
    let der = feeder.buses[bus].der.ok_or_else(|| EncodeError::Der {
        bus,
        message: "bus has no DER".into(),
    })?;
    if !(der.p_max > 0.0 && der.q_max > 0.0) {
        return Err(EncodeError::Der {
            bus,
            message: "ratings must be positive".into(),
        });
    }
    let (beta, gamma) = (omega1.beta[&bus], omega1.gamma[&bus]);
    let (p, q) = (der.p_max, der.q_max);
    let tag = Tag::new("curve-box").bus(bus);
    // gamma >= -0.4 p beta ; gamma <= -0.8 p beta
    model.add_constraint([(gamma, 1.0), (beta, 0.4 * p)], Sense::Ge, 0.0, tag.clone())?;
    model.add_constraint([(gamma, 1.0), (beta, 0.8 * p)], Sense::Le, 0.0, tag.clone())?;
    // p beta + gamma <= -q ; 0.1 p beta >= -q
    model.add_constraint([(gamma, 1.0), (beta, p)], Sense::Le, -q, tag.clone())?;
    model.add_constraint([(beta, 0.1 * p)], Sense::Ge, -q, tag)?;

    let (ulo, uhi) = linear_range(&der, p, 1.0);
    let u = model.add_continuous(ulo, uhi, Tag::new("curve-ramp-at-rated").bus(bus))?;
    model.add_constraint(
        [(u, 1.0), (gamma, -1.0), (beta, -p)],
        Sense::Eq,
        0.0,
        Tag::new("curve-ramp-at-rated").bus(bus),
    )?;
    omega1.ramp_at_rated.insert(bus, u);
    Ok(())
}

/// Watt-var rows of DER `bus` in one instance. `p_avail` fixes the active
/// injection; segments that `p_avail` cannot reach under any admissible curve
/// are fixed to zero.
pub fn encode_wattvar(
    model: &mut MipModel,
    feeder: &Feeder,
    bus: usize,
    omega1: &Omega1Layout,
    layout: &Omega2Layout,
    p_avail: f64,
) -> Result<(), EncodeError> {
    let der = feeder.buses[bus].der.ok_or_else(|| EncodeError::Der {
        bus,
        message: "bus has no DER".into(),
    })?;
    if !(p_avail >= 0.0 && p_avail <= der.p_max * (1.0 + 1e-12)) {
        return Err(EncodeError::Der {
            bus,
            message: format!("available power {p_avail} outside [0, {}]", der.p_max),
        });
    }
    let t = layout.t;
    let p_var = layout.p[bus].expect("DER bus has injection variables");
    let q_var = layout.q[bus].expect("DER bus has injection variables");
    model.set_bounds(p_var, p_avail, p_avail)?;
    let [d1, d2, d3] = layout.der_delta[&bus];
    let (beta, gamma) = (omega1.beta[&bus], omega1.gamma[&bus]);
    let u = omega1.ramp_at_rated[&bus];
    let q_max = der.q_max;

    model.add_constraint(
        [(d1, 1.0), (d2, 1.0), (d3, 1.0)],
        Sense::Eq,
        1.0,
        Tag::new("curve-segment-choice").bus(bus).at(t),
    )?;

    // Deadband ends in [0.4, 0.8] p_max and the ramp needs at least 0.1 p_max.
    let tol = 1e-12 * der.p_max;
    if p_avail > 0.8 * der.p_max + tol {
        model.set_bounds(d1, 0.0, 0.0)?;
    }
    if p_avail < 0.4 * der.p_max - tol {
        model.set_bounds(d2, 0.0, 0.0)?;
    }
    if p_avail < 0.5 * der.p_max - tol {
        model.set_bounds(d3, 0.0, 0.0)?;
    }

    let (slo, shi) = linear_range(&der, p_avail, 1.0);
    let s = model.add_continuous(slo, shi, Tag::new("curve-ramp-value").bus(bus).at(t))?;
    model.add_constraint(
        [(s, 1.0), (beta, -p_avail), (gamma, -1.0)],
        Sense::Eq,
        0.0,
        Tag::new("curve-ramp-value").bus(bus).at(t),
    )?;

    let z2 = mccormick_product(model, d2, s, Tag::new("curve-reactive").bus(bus).at(t))?;
    model.add_constraint(
        [(q_var, 1.0), (z2, -1.0), (d3, q_max)],
        Sense::Eq,
        0.0,
        Tag::new("curve-reactive").bus(bus).at(t),
    )?;

    let z1 = mccormick_product(model, d1, gamma, Tag::new("curve-segment-upper").bus(bus).at(t))?;
    model.add_constraint(
        [(s, 1.0), (z1, -1.0), (d3, q_max)],
        Sense::Le,
        0.0,
        Tag::new("curve-segment-upper").bus(bus).at(t),
    )?;

    let z3 = mccormick_product(model, d3, u, Tag::new("curve-segment-lower").bus(bus).at(t))?;
    model.add_constraint(
        [(z3, 1.0), (d2, -q_max), (s, -1.0)],
        Sense::Le,
        0.0,
        Tag::new("curve-segment-lower").bus(bus).at(t),
    )?;
    Ok(())
}

/// For one curve the active segment never decreases with available power.
/// Sorting instances by `p_avail`, consecutive pairs `t -> t'` get
/// `d1[t'] <= d1[t]` and `d3[t] <= d3[t']`. Every curve keeps a segment
/// choice satisfying these rows, so no operating point is cut off.
pub(super) fn encode_ordering_cuts(
    model: &mut MipModel,
    feeder: &Feeder,
    scenarios: &ScenarioSet,
    layout: &DnrLayout,
) -> Result<(), EncodeError> {
    for bus in feeder.der_buses() {
        let mut order: Vec<usize> = (0..scenarios.len()).collect();
        order.sort_by(|&a, &b| {
            scenarios.instances[a]
                .p_avail(bus.id)
                .total_cmp(&scenarios.instances[b].p_avail(bus.id))
                .then(a.cmp(&b))
        });
        for pair in order.windows(2) {
            let lo = layout.omega2[pair[0]].der_delta[&bus.id];
            let hi = layout.omega2[pair[1]].der_delta[&bus.id];
            let tag = Tag::new("curve-segment-order").bus(bus.id).at(pair[1]);
            model.add_constraint([(hi[0], 1.0), (lo[0], -1.0)], Sense::Le, 0.0, tag.clone())?;
            model.add_constraint([(lo[2], 1.0), (hi[2], -1.0)], Sense::Le, 0.0, tag)?;
        }
    }
    Ok(())
}
