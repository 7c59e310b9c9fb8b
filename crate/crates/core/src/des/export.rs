use std::io::{Read, Write};

use crate::des::sim::{DesTrajectory, MfState};
use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::metrics::oscillation::sync_index;
use crate::model::NetworkParams;

pub const DES_CSV_HEADER: &str = "t,mean_n_o,mean_n_a,mean_n_ba,mean_n_b,mean_n_ab,sync_index";

const DUMP_MAGIC: &[u8; 4] = b"RSNM";
const DUMP_VERSION: u32 = 1;

/// Snapshot means per row; the sync index column is `nan` unless full
/// states were kept.
pub fn write_des_csv<W: Write>(mut w: W, traj: &DesTrajectory, params: &NetworkParams) -> Result<()> {
    writeln!(w, "{DES_CSV_HEADER}")?;
    for (k, (t, m)) in traj.times.iter().zip(&traj.means).enumerate() {
        let sync = match &traj.states {
            Some(states) => {
                let scaled: Vec<_> = (0..states[k].m()).map(|i| states[k].scaled(i)).collect();
                sync_index(&scaled, params).index.unwrap_or(f64::NAN)
            }
            None => f64::NAN,
        };
        let mut row = vec![fmt_sig(*t)];
        row.extend(m.iter().map(|v| fmt_sig(*v)));
        row.push(fmt_sig(sync));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Full-state dump: 16-byte header then little-endian `u32` counts,
/// triangle-major.
pub fn write_state_dump<W: Write>(mut w: W, state: &MfState) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(state.m() as u32).to_le_bytes())?;
    w.write_all(&state.n.to_le_bytes())?;
    for c in &state.counts {
        for v in c {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_state_dump<R: Read>(mut r: R) -> Result<MfState> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != DUMP_MAGIC {
        return Err(Error::invalid("not a state dump (bad magic)"));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != DUMP_VERSION {
        return Err(Error::invalid(format!("unsupported dump version {}", word(4))));
    }
    let (m, n) = (word(8) as usize, word(12));
    let mut counts = Vec::with_capacity(m);
    let mut buf = [0u8; 20];
    for _ in 0..m {
        r.read_exact(&mut buf)?;
        let mut c = [0u32; 5];
        for (j, v) in c.iter_mut().enumerate() {
            *v = u32::from_le_bytes(buf[4 * j..4 * j + 4].try_into().expect("4 bytes"));
        }
        counts.push(c);
    }
    Ok(MfState { n, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::des::sim::{run, InitSpec, SimConfig};

    #[test]
    fn dump_round_trip() {
        let s = MfState {
            n: 7,
            counts: vec![[1, 2, 3, 1, 0], [0, 0, 0, 0, 7]],
        };
        let mut buf = Vec::new();
        write_state_dump(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 16 + 2 * 20);
        assert_eq!(&buf[..4], b"RSNM");
        assert_eq!(&buf[16..20], &1u32.to_le_bytes());
        assert_eq!(read_state_dump(&buf[..]).unwrap(), s);
        assert!(read_state_dump(&b"XXXX0000000000000000"[..]).is_err());
    }

    #[test]
    fn csv_header() {
        let mut c = SimConfig::new(3, 10, 1.0, 0, InitSpec::CyclePhase(0.0));
        c.keep_states = true;
        c.dt_out = Some(0.5);
        let p = NetworkParams::default();
        let tr = run(&c, &p).unwrap();
        let mut buf = Vec::new();
        write_des_csv(&mut buf, &tr, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], DES_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,0,10,0,0,0,1");
    }
}
