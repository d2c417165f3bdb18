//! Nodal balance, voltage drops, switch gating and ZIP load rows.

use feeder_mip::{mccormick_product, MipModel, Sense, Tag};

use super::{Omega1Layout, Omega2Layout};
use crate::error::EncodeError;
use crate::feeder::{EdgeKind, Feeder};
use crate::profiles::ScenarioInstance;

/// Lossless power balance at every non-substation bus, voltage drop on fixed
/// lines, and gated drop plus gated flow limits on switches. Regulator edges
/// get no drop row here.
pub fn encode_network(
    model: &mut MipModel,
    feeder: &Feeder,
    omega1: &Omega1Layout,
    layout: &Omega2Layout,
) -> Result<(), EncodeError> {
    let t = layout.t;
    let adj = feeder.adjacency();
    for bus in feeder.buses.iter().skip(1) {
        for (inj, flow, label) in [
            (layout.p[bus.id], &layout.flow_p, "balance-active"),
            (layout.q[bus.id], &layout.flow_q, "balance-reactive"),
        ] {
            // p_i - sum_out P + sum_in P = 0
            let mut terms = Vec::with_capacity(adj[bus.id].len() + 1);
            if let Some(p) = inj {
                terms.push((p, 1.0));
            }
            for &e in &adj[bus.id] {
                let sign = if feeder.edges[e].from == bus.id { -1.0 } else { 1.0 };
                terms.push((flow[e], sign));
            }
            model.add_constraint(terms, Sense::Eq, 0.0, Tag::new(label).bus(bus.id).at(t))?;
        }
    }

    for e in &feeder.edges {
        let (vi, vj) = (layout.v[e.from], layout.v[e.to]);
        let (pe, qe) = (layout.flow_p[e.id], layout.flow_q[e.id]);
        match e.kind {
            EdgeKind::Line => {
                model.add_constraint(
                    [(vi, 1.0), (vj, -1.0), (pe, -e.r), (qe, -e.x)],
                    Sense::Eq,
                    0.0,
                    Tag::new("line-drop").edge(e.id).at(t),
                )?;
            }
            EdgeKind::Switch => {
                let y = omega1.y[&e.id];
                for (flow, lim, label) in [(pe, e.p_lim, "switch-flow-active"), (qe, e.q_lim, "switch-flow-reactive")] {
                    let tag = Tag::new(label).edge(e.id).at(t);
                    model.add_constraint([(flow, 1.0), (y, -lim[1])], Sense::Le, 0.0, tag.clone())?;
                    model.add_constraint([(flow, 1.0), (y, -lim[0])], Sense::Ge, 0.0, tag)?;
                }
                // y (v_i - v_j - r P - x Q) = 0 with y P = P and y Q = Q
                // (flows vanish on open switches), so only y (v_i - v_j)
                // needs a product.
                let (bi, bj) = (&feeder.buses[e.from], &feeder.buses[e.to]);
                let lo_i = if e.from == 0 { feeder.v0 } else { bi.v_min };
                let hi_i = if e.from == 0 { feeder.v0 } else { bi.v_max };
                let lo_j = if e.to == 0 { feeder.v0 } else { bj.v_min };
                let hi_j = if e.to == 0 { feeder.v0 } else { bj.v_max };
                let tag = Tag::new("switch-drop").edge(e.id).at(t);
                let d = model.add_continuous(lo_i - hi_j, hi_i - lo_j, tag.relabel("switch-voltage-difference"))?;
                model.add_constraint([(d, 1.0), (vi, -1.0), (vj, 1.0)], Sense::Eq, 0.0, tag.relabel("switch-voltage-difference"))?;
                let z = mccormick_product(model, y, d, tag.clone())?;
                model.add_constraint([(z, 1.0), (pe, -e.r), (qe, -e.x)], Sense::Eq, 0.0, tag)?;
            }
            EdgeKind::LocalRegulator | EdgeKind::RemoteRegulator => {}
        }
    }
    Ok(())
}

/// Ties load injections to the bus voltage through the linearized ZIP rows,
/// scaled by the instance factors. Inelastic loads become equalities.
pub fn encode_zip(
    model: &mut MipModel,
    feeder: &Feeder,
    layout: &Omega2Layout,
    instance: &ScenarioInstance,
) -> Result<(), EncodeError> {
    let t = layout.t;
    for bus in feeder.load_buses() {
        let zip = bus.zip.expect("load bus carries ZIP data");
        let s = instance.sample(bus.id);
        let z = zip.scaled(s.p_load_scale, s.q_load_scale);
        let v = layout.v[bus.id];
        let rows = [
            (layout.p[bus.id], 0, "zip-active"),
            (layout.q[bus.id], 2, "zip-reactive"),
        ];
        for (inj, k, label) in rows {
            let inj = inj.expect("load bus has injection variables");
            let tag = Tag::new(label).bus(bus.id).at(t);
            // inj - alpha12 v {>=, <=} alpha0
            if z.alpha0[k] == z.alpha0[k + 1] && z.alpha12[k] == z.alpha12[k + 1] {
                model.add_constraint([(inj, 1.0), (v, -z.alpha12[k])], Sense::Eq, z.alpha0[k], tag)?;
            } else {
                model.add_constraint([(inj, 1.0), (v, -z.alpha12[k])], Sense::Ge, z.alpha0[k], tag.clone())?;
                model.add_constraint([(inj, 1.0), (v, -z.alpha12[k + 1])], Sense::Le, z.alpha0[k + 1], tag)?;
            }
        }
    }
    Ok(())
}
