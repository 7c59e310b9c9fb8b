use std::io::Write;

use crate::error::Result;
use crate::fluid::closed::ClosedTrajectory;
use crate::format::fmt_sig;

pub const FLUID_CSV_HEADER: &str = "t,mean_x_o,mean_x_a,mean_x_ba,mean_x_b,mean_x_ab,lyapunov_mean,dist_to_cycle,y_o,y_a,y_ba,y_b,y_ab";

/// Writes one row per record.
pub fn write_fluid_csv<W: Write>(mut w: W, traj: &ClosedTrajectory) -> Result<()> {
    writeln!(w, "{FLUID_CSV_HEADER}")?;
    for r in &traj.records {
        let mut row = vec![fmt_sig(r.t)];
        row.extend(r.mean().to_array().iter().map(|v| fmt_sig(*v)));
        row.push(fmt_sig(r.diagnostics.lyapunov_mean));
        row.push(fmt_sig(r.diagnostics.dist_to_cycle));
        row.extend(r.rates.to_array().iter().map(|v| fmt_sig(*v)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
