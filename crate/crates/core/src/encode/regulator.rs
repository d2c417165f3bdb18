//! Locally controlled (three-region) and remotely controlled (6-bit tap)
//! regulators.

use feeder_mip::{mccormick_product, MipModel, Sense, Tag};

use super::{Omega1Layout, Omega2Layout};
use crate::error::EncodeError;
use crate::feeder::{EdgeKind, Feeder};

pub const TAP_BITS: usize = 6;
/// Ratio change per tap position.
pub const TAP_STEP: f64 = 0.00625;
/// Largest encoded tap value (`+16` after the offset of 16).
pub const TAP_MAX_CODE: u32 = 32;

/// Region thresholds `(lo / 1.1, hi / 0.9)` on the primary voltage.
pub fn local_thresholds(band: (f64, f64)) -> (f64, f64) {
    (band.0 / 1.1, band.1 / 0.9)
}

fn voltage_box(feeder: &Feeder, bus: usize) -> (f64, f64) {
    if bus == 0 {
        (feeder.v0, feeder.v0)
    } else {
        (feeder.buses[bus].v_min, feeder.buses[bus].v_max)
    }
}

/// Three-region model of a local regulator `(i, j)` with mid-band output:
///
/// ```text
/// v_i >= lo_x d1 + a d2 + b d3          a = band_lo / 1.1
/// v_i <= a d1 + b d2 + hi_x d3          b = band_hi / 0.9
/// v_j = 1.1 d1 v_i + mid d2 + 0.9 d3 v_i
/// ```
///
/// Regions the primary voltage box cannot reach are fixed off.
pub fn encode_local_regulator(
    model: &mut MipModel,
    feeder: &Feeder,
    edge: usize,
    layout: &Omega2Layout,
    v_extreme: (f64, f64),
) -> Result<(), EncodeError> {
    let e = &feeder.edges[edge];
    let bad = |message: String| EncodeError::Regulator { edge, message };
    if e.kind != EdgeKind::LocalRegulator {
        return Err(bad("not a local regulator".into()));
    }
    let band = e.reg.and_then(|r| r.band()).ok_or_else(|| bad("missing band".into()))?;
    let (a, b) = local_thresholds(band);
    let (lo_x, hi_x) = v_extreme;
    if !(lo_x < a && a < b && b < hi_x) || band.0 >= band.1 {
        return Err(bad(format!(
            "band [{}, {}] needs {lo_x} < lo/1.1 < hi/0.9 < {hi_x}",
            band.0, band.1
        )));
    }
    let mid = 0.5 * (band.0 + band.1);
    let t = layout.t;
    let (vi, vj) = (layout.v[e.from], layout.v[e.to]);
    let [d1, d2, d3] = layout.reg_delta[&edge];

    model.add_constraint(
        [(d1, 1.0), (d2, 1.0), (d3, 1.0)],
        Sense::Eq,
        1.0,
        Tag::new("regulator-region-choice").edge(edge).at(t),
    )?;
    model.add_constraint(
        [(vi, 1.0), (d1, -lo_x), (d2, -a), (d3, -b)],
        Sense::Ge,
        0.0,
        Tag::new("regulator-primary-lower").edge(edge).at(t),
    )?;
    model.add_constraint(
        [(vi, 1.0), (d1, -a), (d2, -b), (d3, -hi_x)],
        Sense::Le,
        0.0,
        Tag::new("regulator-primary-upper").edge(edge).at(t),
    )?;

    let (vlo, vhi) = voltage_box(feeder, e.from);
    if vhi < a {
        model.set_bounds(d2, 0.0, 0.0)?;
    }
    if vhi < b {
        model.set_bounds(d3, 0.0, 0.0)?;
    }
    if vlo > a {
        model.set_bounds(d1, 0.0, 0.0)?;
    }
    if vlo > b {
        model.set_bounds(d2, 0.0, 0.0)?;
    }

    let tag = Tag::new("regulator-secondary").edge(edge).at(t);
    let z1 = mccormick_product(model, d1, vi, tag.clone())?;
    let z3 = mccormick_product(model, d3, vi, tag.clone())?;
    model.add_constraint([(vj, 1.0), (z1, -1.1), (d2, -mid), (z3, -0.9)], Sense::Eq, 0.0, tag)?;
    Ok(())
}

/// Caps the tap code at 32 so only the 33 physical positions are encodable.
pub(super) fn encode_tap_cap(model: &mut MipModel, edge: usize, omega1: &Omega1Layout) -> Result<(), EncodeError> {
    let bits = omega1.tap_bits[&edge];
    model.add_constraint(
        bits.iter().enumerate().map(|(k, &b)| (b, f64::from(1u32 << k))),
        Sense::Le,
        f64::from(TAP_MAX_CODE),
        Tag::new("tap-range").edge(edge),
    )?;
    Ok(())
}

/// `v_j = (0.9 + 0.00625 * sum_k 2^k b_k) v_i` with shared bits.
pub fn encode_remote_regulator(
    model: &mut MipModel,
    feeder: &Feeder,
    edge: usize,
    omega1: &Omega1Layout,
    layout: &Omega2Layout,
) -> Result<(), EncodeError> {
    let e = &feeder.edges[edge];
    if e.kind != EdgeKind::RemoteRegulator {
        return Err(EncodeError::Regulator {
            edge,
            message: "not a remote regulator".into(),
        });
    }
    let t = layout.t;
    let (vi, vj) = (layout.v[e.from], layout.v[e.to]);
    let tag = Tag::new("regulator-ratio").edge(edge).at(t);
    let mut terms = vec![(vj, 1.0), (vi, -0.9)];
    for (k, &b) in omega1.tap_bits[&edge].iter().enumerate() {
        let z = mccormick_product(model, b, vi, tag.clone())?;
        terms.push((z, -TAP_STEP * f64::from(1u32 << k)));
    }
    model.add_constraint(terms, Sense::Eq, 0.0, tag)?;
    Ok(())
}
