//! Trajectory CSV and the flat binary snapshot format.
//!
//! Snapshot layout, little-endian throughout:
//!
//! ```text
//! 0   "HLF1"
//! 4   u32  d
//! 8   f64  L
//! 16  u32  M
//! 20  f64  t
//! 28  "LE" + 2 zero bytes
//! 32  M^d × (f64 re, f64 im)
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;

use super::Record;
use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

pub const CSV_SCHEMA: &str = "#schema=1";
pub const CSV_HEADER: &str = "t,l2,l2p4d_x,h1,linf,lowfreq_l2,N_of_t";

const MAGIC: &[u8; 4] = b"HLF1";
const ENDIAN_TAG: &[u8; 4] = b"LE\0\0";
const HEADER_LEN: usize = 32;

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_records_csv<W: Write>(mut out: W, records: &[Record]) -> Result<()> {
    writeln!(out, "{CSV_SCHEMA}")?;
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{},{}",
            r.t,
            r.l2,
            r.lq,
            r.h1,
            r.linf,
            opt(r.lowfreq_l2),
            opt(r.n_of_t)
        )?;
    }
    Ok(())
}

pub fn write_snapshot<W: Write>(mut out: W, field: &Field, t: f64) -> Result<()> {
    let g = field.grid();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    header.extend_from_slice(&g.period().to_le_bytes());
    header.extend_from_slice(&(g.points() as u32).to_le_bytes());
    header.extend_from_slice(&t.to_le_bytes());
    header.extend_from_slice(ENDIAN_TAG);
    debug_assert_eq!(header.len(), HEADER_LEN);
    out.write_all(&header)?;
    let mut body = Vec::with_capacity(16 * field.coefficients().len());
    for c in field.coefficients() {
        body.extend_from_slice(&c.re.to_le_bytes());
        body.extend_from_slice(&c.im.to_le_bytes());
    }
    out.write_all(&body)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<(Field, f64)> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if &header[28..32] != ENDIAN_TAG {
        return Err(Error::Format("unsupported endianness tag".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let grid = Grid::new(u32_at(4) as usize, f64_at(8), u32_at(16) as usize)
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    let t = f64_at(20);
    let mut body = vec![0u8; 16 * grid.len()];
    input.read_exact(&mut body)?;
    let coeffs = body
        .chunks_exact(16)
        .map(|b| {
            Complex64::new(
                f64::from_le_bytes(b[0..8].try_into().unwrap()),
                f64::from_le_bytes(b[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((Field::from_coefficients(grid, coeffs)?, t))
}
