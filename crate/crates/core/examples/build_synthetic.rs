//! Writes the synthetic 37-bus feeder and its day of minute profiles.
//!
//! ```text
//! cargo run --release --example build_synthetic -- target/synthetic
//! ```

use std::path::PathBuf;

use feeder_dnr::oracle::{enumerate_radial, kirchhoff_count};
use feeder_dnr::synth::{nominal_load_37, synthetic_37_day, DayOptions, Synth37Options};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/synthetic".into()));
    std::fs::create_dir_all(&dir)?;
    let (feeder, profiles) = synthetic_37_day(&Synth37Options::default(), &DayOptions::default())?;
    std::fs::write(dir.join("feeder.json"), feeder.to_json())?;
    profiles.to_path(dir.join("profiles.csv"))?;

    let rating = feeder.der_buses().next().and_then(|b| b.der).map_or(0.0, |d| d.p_max);
    let trees = enumerate_radial(&feeder)?;
    println!("{}: {} buses, {} edges, {} switches", feeder.name, feeder.n(), feeder.edges.len(), feeder.num_switches());
    println!("nominal load {:.3} pu, DER rating {rating:.4} pu each", nominal_load_37());
    println!("{} radial topologies; the full graph has {:.0} spanning trees", trees.count(), kirchhoff_count(&feeder));
    println!("wrote {}", dir.display());
    Ok(())
}
