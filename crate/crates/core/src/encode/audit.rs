use std::io::Write;

use feeder_mip::{MipModel, Site};

/// One CSV row per constraint: `id,label,t,site`.
pub fn write_audit_csv(model: &MipModel, writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "label", "t", "site"])?;
    for (id, c) in model.constraints.iter().enumerate() {
        let t = c.role.t.map(|t| t.to_string()).unwrap_or_default();
        let site = match c.role.site {
            Site::Global => String::new(),
            s => s.to_string(),
        };
        w.write_record([id.to_string(), c.role.label.to_string(), t, site])?;
    }
    w.flush()?;
    Ok(())
}
