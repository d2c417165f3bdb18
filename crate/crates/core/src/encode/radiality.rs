//! Spanning-tree constraints through one unit of virtual commodity per bus.

use feeder_mip::{MipModel, Sense, Tag};

use super::DnrLayout;
use crate::error::EncodeError;
use crate::feeder::Feeder;

/// Adds `A^T f = 1` over non-substation buses, `-N y_e <= f_e <= N y_e` on
/// switches and `sum y = N - |E \ E_S|`. The virtual flows `f` appear nowhere
/// else.
pub fn encode_radiality(model: &mut MipModel, feeder: &Feeder, layout: &mut DnrLayout) -> Result<(), EncodeError> {
    let closed = feeder.closed_switch_count()?;
    let n = feeder.n() as f64;
    layout.flows.f = feeder
        .edges
        .iter()
        .map(|e| model.add_continuous(-n, n, Tag::new("virtual-flow").edge(e.id)))
        .collect::<Result<_, _>>()?;
    let f = &layout.flows.f;
    let adj = feeder.adjacency();
    for bus in 1..feeder.buses.len() {
        let terms = adj[bus].iter().map(|&e| {
            let sign = if feeder.edges[e].from == bus { 1.0 } else { -1.0 };
            (f[e], sign)
        });
        model.add_constraint(terms, Sense::Eq, 1.0, Tag::new("virtual-flow-balance").bus(bus))?;
    }
    for e in feeder.switches() {
        let y = layout.omega1.y[&e.id];
        let tag = Tag::new("virtual-flow-gate").edge(e.id);
        model.add_constraint([(f[e.id], 1.0), (y, -n)], Sense::Le, 0.0, tag.clone())?;
        model.add_constraint([(f[e.id], 1.0), (y, n)], Sense::Ge, 0.0, tag)?;
    }
    model.add_constraint(
        layout.omega1.y.values().map(|&y| (y, 1.0)),
        Sense::Eq,
        closed as f64,
        Tag::new("closed-switch-count"),
    )?;
    Ok(())
}

/// A model holding only the switch indicators and the radiality rows, for
/// checking which switch assignments the rows admit.
pub fn radiality_model(feeder: &Feeder) -> Result<(MipModel, DnrLayout), EncodeError> {
    let mut model = MipModel::new();
    let mut layout = DnrLayout::default();
    for e in feeder.switches() {
        let y = model.add_binary(Tag::new("switch-state").edge(e.id))?;
        layout.omega1.y.insert(e.id, y);
    }
    encode_radiality(&mut model, feeder, &mut layout)?;
    Ok((model, layout))
}
