//! Radial topologies three ways: spanning-tree enumeration, the rank test on
//! the reduced incidence matrix and the virtual-flow rows solved as an LP.

use feeder_dnr::encode::radiality_model;
use feeder_dnr::oracle::{enumerate_radial, is_spanning_tree, kirchhoff_count, prop1_feasible};
use feeder_dnr::synth::{eight_bus, switched_cycle};
use feeder_mip::{solve_lp, BoundOverride, LpOptions, LpStatus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cycle = switched_cycle(4)?;
    let trees = enumerate_radial(&cycle)?;
    println!("5-cycle: {} spanning trees, Kirchhoff count {:.0}", trees.count(), kirchhoff_count(&cycle));

    let feeder = eight_bus()?;
    let (model, layout) = radiality_model(&feeder)?;
    let switches: Vec<_> = feeder.switches().map(|e| layout.omega1.y[&e.id]).collect();
    for bits in 0..1u32 << switches.len() {
        let y: Vec<bool> = (0..switches.len()).map(|k| bits >> k & 1 == 1).collect();
        let fix: Vec<BoundOverride> = switches
            .iter()
            .zip(&y)
            .map(|(&var, &on)| BoundOverride {
                var,
                lower: f64::from(u8::from(on)),
                upper: f64::from(u8::from(on)),
            })
            .collect();
        let lp = solve_lp(&model, &fix, &LpOptions::default())?;
        println!(
            "y = {:?}: tree {}, connected (rank test) {}, radiality rows feasible {}",
            y,
            is_spanning_tree(&feeder, &y),
            prop1_feasible(&feeder, &y),
            lp.status == LpStatus::Optimal
        );
    }
    Ok(())
}
