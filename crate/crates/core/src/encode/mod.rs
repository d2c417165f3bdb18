//! Translation of a feeder and a scenario set into one mixed-binary model.
//!
//! Variables split into first-stage decisions shared by every instance
//! ([`Omega1Layout`]: switch states, curve parameters, remote tap bits), one
//! block of operating variables per instance ([`Omega2Layout`]) and the
//! virtual connectivity flows ([`VirtualFlowLayout`]).

mod audit;
mod network;
mod radiality;
mod regulator;
mod wattvar;

use std::collections::BTreeMap;

use feeder_mip::{MipModel, Tag, VarId};

use crate::error::EncodeError;
use crate::feeder::{BusKind, Feeder};
use crate::profiles::{ScenarioInstance, ScenarioSet};

pub use audit::write_audit_csv;
pub use network::{encode_network, encode_zip};
pub use radiality::{encode_radiality, radiality_model};
pub use regulator::{encode_local_regulator, local_thresholds, encode_remote_regulator, TAP_BITS, TAP_STEP};
pub use wattvar::{encode_curve_box, encode_wattvar};

/// Branching priority of switch states.
pub const PRIORITY_SWITCH: i32 = 300;
/// Branching priority of tap bit `k` is `PRIORITY_TAP + k`, so high-order bits
/// branch first.
pub const PRIORITY_TAP: i32 = 200;
/// Branching priority of segment indicators.
pub const PRIORITY_SEGMENT: i32 = 100;

#[derive(Clone, Debug)]
pub struct DnrOptions {
    /// Tangents per loss epigraph.
    pub tangents: usize,
    /// Primary-voltage limits bounding the outer regions of local regulators.
    pub v_extreme: (f64, f64),
    /// Order segment indicators of one DER by available power across instances.
    pub ordering_cuts: bool,
}

impl Default for DnrOptions {
    fn default() -> Self {
        DnrOptions {
            tangents: 15,
            v_extreme: (0.8, 1.2),
            ordering_cuts: true,
        }
    }
}

/// Decisions shared by every instance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Omega1Layout {
    /// Switch edge id to closed indicator.
    pub y: BTreeMap<usize, VarId>,
    /// DER bus id to curve slope.
    pub beta: BTreeMap<usize, VarId>,
    /// DER bus id to curve intercept.
    pub gamma: BTreeMap<usize, VarId>,
    /// DER bus id to `gamma + p_max * beta`, the ramp value at rated power.
    pub ramp_at_rated: BTreeMap<usize, VarId>,
    /// Remote regulator edge id to tap bits, least significant first.
    pub tap_bits: BTreeMap<usize, [VarId; TAP_BITS]>,
}

/// Operating variables of one instance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Omega2Layout {
    pub t: usize,
    /// Voltage per bus; entry 0 is the fixed substation voltage.
    pub v: Vec<VarId>,
    /// Active injection per bus; `None` for the substation.
    pub p: Vec<Option<VarId>>,
    pub q: Vec<Option<VarId>>,
    /// Active flow per edge.
    pub flow_p: Vec<VarId>,
    pub flow_q: Vec<VarId>,
    /// DER bus id to segment indicators.
    pub der_delta: BTreeMap<usize, [VarId; 3]>,
    /// Local regulator edge id to region indicators.
    pub reg_delta: BTreeMap<usize, [VarId; 3]>,
    /// Loss epigraph variables of the active and reactive flow per edge.
    pub loss: Vec<Option<(VarId, VarId)>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VirtualFlowLayout {
    /// Virtual flow per edge, bounded by `[-N, N]`.
    pub f: Vec<VarId>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DnrLayout {
    pub omega1: Omega1Layout,
    pub omega2: Vec<Omega2Layout>,
    pub flows: VirtualFlowLayout,
}

/// An assembled model together with its variable map.
#[derive(Clone, Debug)]
pub struct DnrModel {
    pub model: MipModel,
    pub layout: DnrLayout,
    pub options: DnrOptions,
}

impl DnrModel {
    /// Worst-case total underestimation of the loss by the tangent cuts.
    pub fn epigraph_bound(&self) -> f64 {
        self.model.epigraph_error_bound()
    }
}

/// Allocates the shared decision variables.
pub fn allocate_omega1(model: &mut MipModel, feeder: &Feeder) -> Result<Omega1Layout, EncodeError> {
    let mut layout = Omega1Layout::default();
    for e in feeder.switches() {
        let y = model.add_binary(Tag::new("switch-state").edge(e.id))?;
        model.set_priority(y, PRIORITY_SWITCH);
        layout.y.insert(e.id, y);
    }
    for bus in feeder.der_buses() {
        let der = bus.der.expect("DER bus carries a rating");
        let (blo, bhi) = crate::wattvar::beta_bounds(&der);
        let (glo, ghi) = crate::wattvar::gamma_bounds(&der);
        layout.beta.insert(bus.id, model.add_continuous(blo, bhi, Tag::new("curve-slope").bus(bus.id))?);
        layout.gamma.insert(bus.id, model.add_continuous(glo, ghi, Tag::new("curve-intercept").bus(bus.id))?);
    }
    for e in feeder.remote_regulators() {
        let bits: [VarId; TAP_BITS] = std::array::from_fn(|_| VarId(usize::MAX));
        let mut bits = bits;
        for (k, bit) in bits.iter_mut().enumerate() {
            *bit = model.add_binary(Tag::new(format!("tap-bit-{k}")).edge(e.id))?;
            model.set_priority(*bit, PRIORITY_TAP + k as i32);
        }
        layout.tap_bits.insert(e.id, bits);
    }
    Ok(layout)
}

/// Allocates the operating variables of instance `t` with their box bounds.
pub fn allocate_omega2(
    model: &mut MipModel,
    feeder: &Feeder,
    t: usize,
    instance: &ScenarioInstance,
) -> Result<Omega2Layout, EncodeError> {
    let mut layout = Omega2Layout {
        t,
        ..Omega2Layout::default()
    };
    let ranges = injection_ranges(feeder, instance);
    for bus in &feeder.buses {
        let (v, p, q) = if bus.kind == BusKind::Substation {
            (model.add_fixed(feeder.v0, Tag::new("voltage").bus(bus.id).at(t))?, None, None)
        } else {
            let v = model.add_continuous(bus.v_min, bus.v_max, Tag::new("voltage").bus(bus.id).at(t))?;
            let [plo, phi, qlo, qhi] = match &bus.der {
                Some(der) => [0.0, der.p_max, -der.q_max, 0.0],
                None => ranges[bus.id],
            };
            let p = model.add_continuous(plo, phi, Tag::new("active-injection").bus(bus.id).at(t))?;
            let q = model.add_continuous(qlo, qhi, Tag::new("reactive-injection").bus(bus.id).at(t))?;
            (v, Some(p), Some(q))
        };
        layout.v.push(v);
        layout.p.push(p);
        layout.q.push(q);
    }
    for (e, implied) in feeder.edges.iter().zip(implied_flow_bounds(feeder, &ranges)) {
        let tighten = |lim: [f64; 2], imp: [f64; 2]| {
            let (lo, hi) = (lim[0].max(imp[0]), lim[1].min(imp[1]));
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (lim[0], lim[1]) };
            if e.is_switch() {
                (lo.min(0.0), hi.max(0.0))
            } else {
                (lo, hi)
            }
        };
        let (plo, phi) = tighten(e.p_lim, implied[0]);
        let (qlo, qhi) = tighten(e.q_lim, implied[1]);
        layout.flow_p.push(model.add_continuous(plo, phi, Tag::new("active-flow").edge(e.id).at(t))?);
        layout.flow_q.push(model.add_continuous(qlo, qhi, Tag::new("reactive-flow").edge(e.id).at(t))?);
    }
    for bus in feeder.der_buses() {
        let mut delta = [VarId(0); 3];
        for (k, d) in delta.iter_mut().enumerate() {
            *d = model.add_binary(Tag::new(format!("curve-segment-{}", k + 1)).bus(bus.id).at(t))?;
            model.set_priority(*d, PRIORITY_SEGMENT);
        }
        layout.der_delta.insert(bus.id, delta);
    }
    for e in feeder.local_regulators() {
        let mut delta = [VarId(0); 3];
        for (k, d) in delta.iter_mut().enumerate() {
            *d = model.add_binary(Tag::new(format!("regulator-region-{}", k + 1)).edge(e.id).at(t))?;
            model.set_priority(*d, PRIORITY_SEGMENT);
        }
        layout.reg_delta.insert(e.id, delta);
    }
    Ok(layout)
}

/// `[p_lo, p_hi, q_lo, q_hi]` each bus can inject at one instance over its
/// voltage box. DER active power is the available power; reactive power is
/// zero below the lowest admissible breakpoint `0.4 p_max`.
pub fn injection_ranges(feeder: &Feeder, instance: &ScenarioInstance) -> Vec<[f64; 4]> {
    feeder
        .buses
        .iter()
        .map(|bus| match (&bus.zip, &bus.der) {
            _ if bus.kind == BusKind::Substation => [0.0; 4],
            (Some(zip), _) => {
                let s = instance.sample(bus.id);
                let z = zip.scaled(s.p_load_scale, s.q_load_scale);
                let (a, b) = (z.limits(bus.v_min), z.limits(bus.v_max));
                [a[0].min(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].max(b[3])]
            }
            (None, Some(der)) => {
                let p = instance.p_avail(bus.id);
                let q = if p <= 0.4 * der.p_max { 0.0 } else { -der.q_max };
                [p, p, q, 0.0]
            }
            (None, None) => [0.0; 4],
        })
        .collect()
}

/// Flow ranges `[[P_lo, P_hi], [Q_lo, Q_hi]]` per edge implied by the
/// injection ranges under any radial topology. A bridge carries exactly the
/// net injection of the side away from the substation; any other edge carries
/// at most the total injection magnitude.
pub fn implied_flow_bounds(feeder: &Feeder, ranges: &[[f64; 4]]) -> Vec<[[f64; 2]; 2]> {
    use petgraph::unionfind::UnionFind;
    let total = |k: usize| ranges.iter().map(|r| r[k].abs().max(r[k + 1].abs())).sum::<f64>();
    let (wp, wq) = (total(0), total(2));
    feeder
        .edges
        .iter()
        .map(|e| {
            let mut uf = UnionFind::new(feeder.buses.len());
            for other in feeder.edges.iter().filter(|o| o.id != e.id) {
                uf.union(other.from, other.to);
            }
            if uf.equiv(e.from, e.to) {
                return [[-wp, wp], [-wq, wq]];
            }
            // Side of the bridge away from the substation.
            let (far, sign) = if uf.equiv(0, e.to) { (e.from, 1.0) } else { (e.to, -1.0) };
            let mut sum = [0.0; 4];
            for (b, r) in ranges.iter().enumerate() {
                if uf.equiv(b, far) {
                    sum.iter_mut().zip(r).for_each(|(s, x)| *s += x);
                }
            }
            let span = |lo: f64, hi: f64| {
                let (a, b) = (sign * lo, sign * hi);
                [a.min(b), a.max(b)]
            };
            [span(sum[0], sum[1]), span(sum[2], sum[3])]
        })
        .collect()
}

/// Adds loss epigraphs for every non-regulator edge with resistance.
pub fn encode_losses(
    model: &mut MipModel,
    feeder: &Feeder,
    layout: &mut Omega2Layout,
    tangents: usize,
) -> Result<(), EncodeError> {
    layout.loss = vec![None; feeder.edges.len()];
    for e in &feeder.edges {
        if e.is_regulator() || e.r == 0.0 {
            continue;
        }
        let t = layout.t;
        let lp = feeder_mip::convex_loss_epigraph(
            model,
            layout.flow_p[e.id],
            e.r,
            tangents,
            Tag::new("loss-active").edge(e.id).at(t),
        )?;
        let lq = feeder_mip::convex_loss_epigraph(
            model,
            layout.flow_q[e.id],
            e.r,
            tangents,
            Tag::new("loss-reactive").edge(e.id).at(t),
        )?;
        model.add_objective_term(lp, 1.0)?;
        model.add_objective_term(lq, 1.0)?;
        layout.loss[e.id] = Some((lp, lq));
    }
    Ok(())
}

/// Builds the full multi-instance model: one block per instance tied together
/// by the shared switch states, curves and taps.
pub fn assemble_dnr(
    feeder: &Feeder,
    scenarios: &ScenarioSet,
    options: &DnrOptions,
) -> Result<DnrModel, EncodeError> {
    feeder.closed_switch_count()?;
    let mut model = MipModel::new();
    let mut layout = DnrLayout {
        omega1: allocate_omega1(&mut model, feeder)?,
        ..DnrLayout::default()
    };
    encode_radiality(&mut model, feeder, &mut layout)?;
    for bus in feeder.der_buses() {
        encode_curve_box(&mut model, feeder, bus.id, &mut layout.omega1)?;
    }
    for e in feeder.remote_regulators() {
        regulator::encode_tap_cap(&mut model, e.id, &layout.omega1)?;
    }
    for (t, instance) in scenarios.instances.iter().enumerate() {
        let mut o2 = allocate_omega2(&mut model, feeder, t, instance)?;
        encode_network(&mut model, feeder, &layout.omega1, &o2)?;
        encode_zip(&mut model, feeder, &o2, instance)?;
        for bus in feeder.der_buses() {
            encode_wattvar(&mut model, feeder, bus.id, &layout.omega1, &o2, instance.p_avail(bus.id))?;
        }
        for e in feeder.local_regulators() {
            encode_local_regulator(&mut model, feeder, e.id, &o2, options.v_extreme)?;
        }
        for e in feeder.remote_regulators() {
            encode_remote_regulator(&mut model, feeder, e.id, &layout.omega1, &o2)?;
        }
        encode_losses(&mut model, feeder, &mut o2, options.tangents)?;
        layout.omega2.push(o2);
    }
    if options.ordering_cuts {
        wattvar::encode_ordering_cuts(&mut model, feeder, scenarios, &layout)?;
    }
    Ok(DnrModel {
        model,
        layout,
        options: options.clone(),
    })
}
