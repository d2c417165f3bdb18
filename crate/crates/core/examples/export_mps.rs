//! Writes the 8-bus model in MPS format and reads it back.

use feeder_dnr::encode::{assemble_dnr, write_audit_csv, DnrOptions};
use feeder_dnr::synth::{eight_bus, eight_bus_scenarios};
use feeder_mip::{export_mps, read_mps};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feeder = eight_bus()?;
    let dnr = assemble_dnr(&feeder, &eight_bus_scenarios(), &DnrOptions::default())?;
    let text = export_mps(&dnr.model, "EIGHTBUS");
    let path = std::env::temp_dir().join("eight-bus.mps");
    std::fs::write(&path, &text)?;
    let back = read_mps(&text)?;
    println!(
        "wrote {} ({} variables, {} rows); read back {} variables, {} rows",
        path.display(),
        dnr.model.num_vars(),
        dnr.model.num_constraints(),
        back.num_vars(),
        back.num_constraints()
    );
    // Row-by-row provenance of the same model.
    let audit = std::env::temp_dir().join("eight-bus-audit.csv");
    write_audit_csv(&dnr.model, std::fs::File::create(&audit)?)?;
    println!("audit in {}", audit.display());
    Ok(())
}
