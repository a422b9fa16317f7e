//! ELF1 snapshot files: magic `ELFIELD1`, then little-endian `u32 N`,
//! `u32 M`, `f64 L`, `f64 time`, `u32 components`, then the values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid, SpectralField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ELFIELD1";

pub fn write_to(w: &mut impl Write, field: &SpectralField, time: f64) -> Result<()> {
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&g.box_length().to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    w.write_all(&(field.components() as u32).to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_from(r: &mut impl Read) -> Result<(SpectralField, f64)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let dim = read_u32(r)? as usize;
    let m = read_u32(r)? as usize;
    let length = read_f64(r)?;
    let time = read_f64(r)?;
    let components = read_u32(r)? as usize;
    let grid = Grid::new(dim, m, length)?;
    let count = components
        .checked_mul(grid.npoints())
        .ok_or_else(|| Error::Format("component count overflows".into()))?;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Ok((SpectralField::from_values(grid, components, values)?, time))
}

pub fn write(path: impl AsRef<Path>, field: &SpectralField, time: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(&mut w, field, time)?;
    w.flush()?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<(SpectralField, f64)> {
    read_from(&mut BufReader::new(File::open(path)?))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bytes() {
        let g = Grid::new(2, 8, 1.5).unwrap();
        let f = SpectralField::from_fn(g, 2, |x, o| {
            o[0] = x[0];
            o[1] = -x[1];
        });
        let mut buf = Vec::new();
        write_to(&mut buf, &f, 0.25).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 8 + 8 + 4 + 2 * 64 * 8);
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        let (back, t) = read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(t, 0.25);
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid(), f.grid());
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"NOTMAGIC".to_vec();
        assert!(read_from(&mut buf.as_slice()).is_err());
    }
}
