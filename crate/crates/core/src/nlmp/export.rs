//! Trajectory CSV and binary lattice snapshots.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::format::fmt_sig;

use super::integrate::NlmpTrajectory;
use super::lattice::MarginalLattice;

pub const NLMP_CSV_HEADER: &str = "t,mean_n_o_over_n,mean_n_a_over_n,mean_n_ba_over_n,mean_n_b_over_n,mean_n_ab_over_n,lambda_o,lambda_a,lambda_ba,lambda_b,lambda_ab,boundary_mass";

const MAGIC: &[u8; 4] = b"RSNL";
const VERSION: u32 = 1;

pub fn write_nlmp_csv<W: Write>(mut w: W, traj: &NlmpTrajectory) -> Result<()> {
    writeln!(w, "{NLMP_CSV_HEADER}")?;
    for s in &traj.samples {
        let mut fields = vec![fmt_sig(s.t)];
        fields.extend(s.scaled_means.iter().map(|v| fmt_sig(*v)));
        fields.extend(s.rates.to_canonical().iter().map(|v| fmt_sig(*v)));
        fields.push(fmt_sig(s.boundary_mass));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Header: magic, version, `x_max`, `N` (u32 each), time (f64); then the
/// flat `[μ_O | μ_Ā | μ_B̄]` array as little-endian f64.
pub fn write_lattice<W: Write>(mut w: W, mu: &MarginalLattice, time: f64) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(mu.x_max() as u32).to_le_bytes())?;
    w.write_all(&mu.n().to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    for v in mu.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_lattice<R: Read>(mut r: R) -> Result<(MarginalLattice, f64)> {
    let mut head = [0u8; 24];
    r.read_exact(&mut head)?;
    if &head[0..4] != MAGIC {
        return Err(Error::invalid("not a lattice snapshot (bad magic)"));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    if word(4) != VERSION {
        return Err(Error::invalid(format!("unsupported snapshot version {}", word(4))));
    }
    let x_max = word(8) as usize;
    let n = word(12);
    let time = f64::from_le_bytes(head[16..24].try_into().unwrap());
    let d = x_max + 1;
    let mut buf = vec![0u8; 8 * (d + 2 * d * d)];
    r.read_exact(&mut buf)?;
    let data: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mu_o = data[..d].to_vec();
    let mu_abar = data[d..d + d * d].to_vec();
    let mu_bbar = data[d + d * d..].to_vec();
    Ok((MarginalLattice::new(x_max, n, mu_o, mu_abar, mu_bbar)?, time))
}
