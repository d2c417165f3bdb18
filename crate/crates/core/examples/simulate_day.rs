//! Runs the local-rules simulator over the synthetic day with fixed settings:
//! tie switches open, neutral remote tap and the least absorbing curve on
//! every DER.

use feeder_dnr::oracle::omega1_for;
use feeder_dnr::sim::{evaluate_period, SimOptions};
use feeder_dnr::synth::{day_periods, synthetic_37_day, DayOptions, Synth37Options};
use feeder_dnr::wattvar::Curve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (feeder, profiles) = synthetic_37_day(&Synth37Options::default(), &DayOptions::default())?;
    // The first three switches close the backbone, the last two are ties.
    let y: Vec<bool> = (0..feeder.num_switches()).map(|k| k < 3).collect();
    let mut omega1 = omega1_for(&feeder, &y);
    for e in feeder.remote_regulators() {
        omega1.taps.insert(e.id, 0);
    }
    for bus in feeder.der_buses() {
        omega1.curves.insert(bus.id, Curve::least_absorbing(&bus.der.expect("DER bus")));
    }
    for period in day_periods() {
        let eval = evaluate_period(&feeder, &omega1, &profiles, period, &SimOptions::default())?;
        let m = &eval.metrics;
        println!(
            "{period}: mean loss {:.5} pu, v in [{:.4}, {:.4}], {} of {} minutes violate limits",
            m.mean_loss(),
            m.min_v,
            m.max_v,
            m.violating_instances,
            m.instances
        );
    }
    Ok(())
}
