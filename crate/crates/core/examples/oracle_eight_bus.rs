//! Branch-and-bound against the exhaustive grid oracle on the 8-bus fixture.
//!
//! The solver objective uses tangent cuts, so it may sit below the true loss
//! by at most the epigraph bound; the oracle scores true losses on a finite
//! curve grid, so it may sit above the continuous optimum by its reported
//! grid slack.

use std::time::Instant;

use feeder_dnr::encode::{assemble_dnr, DnrOptions};
use feeder_dnr::oracle::{grid_search_dnr, GridSpec};
use feeder_dnr::synth::{eight_bus, eight_bus_scenarios};
use feeder_mip::{branch_and_bound, BnbOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feeder = eight_bus()?;
    let scenarios = eight_bus_scenarios();

    let t = Instant::now();
    let dnr = assemble_dnr(&feeder, &scenarios, &DnrOptions::default())?;
    let sol = branch_and_bound(&dnr.model, &BnbOptions::default())?;
    let o_bb = sol.objective.ok_or("branch-and-bound found no solution")?;
    let eps_tangent = dnr.epigraph_bound();
    println!("branch-and-bound: {o_bb:.9} ({} nodes, {:.2?})", sol.nodes, t.elapsed());

    let t = Instant::now();
    let grid = grid_search_dnr(&feeder, &scenarios, GridSpec::default())?;
    let o_or = grid.objective;
    let eps_grid = grid.resolution_slack + eps_tangent;
    println!(
        "oracle:           {o_or:.9} ({} configurations, {:.2?})",
        grid.configurations,
        t.elapsed()
    );
    println!("epigraph bound {eps_tangent:.3e}, grid slack {eps_grid:.3e}");
    println!(
        "O_bb - eps_tangent <= O_or: {}, O_or <= O_bb + eps_grid: {}",
        o_bb - eps_tangent <= o_or,
        o_or <= o_bb + eps_grid
    );
    Ok(())
}
