//! Solves the 8-bus fixture, re-simulates the decoded settings and shows
//! which checks catch a tampered solution.

use feeder_dnr::encode::assemble_dnr;
use feeder_dnr::pipeline::{settings_failures, solve_assembled, SolveConfig};
use feeder_dnr::synth::{eight_bus, eight_bus_scenarios};
use feeder_dnr::Profiles;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feeder = eight_bus()?;
    let scenarios = eight_bus_scenarios();
    let config = SolveConfig {
        evaluate_minutes: false,
        ..SolveConfig::default()
    };
    let dnr = assemble_dnr(&feeder, &scenarios, &config.dnr)?;
    let outcome = solve_assembled(&feeder, &Profiles::default(), &scenarios, &dnr, &config)?;
    let check = outcome.check.as_ref().ok_or("no solution")?;
    println!(
        "objective {:.9}, simulated loss {:.9}, epigraph bound {:.3e}",
        outcome.objective.unwrap_or(f64::NAN),
        check.simulated_loss,
        dnr.epigraph_bound()
    );
    println!(
        "largest solver/simulator voltage difference {:.3e}, {} ties skipped",
        check.max_voltage_diff,
        check.ties.len()
    );
    println!("failures: {:?}", outcome.failures(&feeder));

    let mut tampered = outcome.omega1.clone().ok_or("no solution")?;
    for tap in tampered.taps.values_mut() {
        *tap = 17;
    }
    if let Some(closed) = tampered.switches.values_mut().find(|c| !**c) {
        *closed = true;
    }
    for f in settings_failures(&feeder, &tampered) {
        println!("tampered: {f}");
    }
    Ok(())
}
