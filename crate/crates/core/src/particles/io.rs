//! Path and increment export.

use super::sim::{BrownianIncrements, EnsemblePath};
use crate::error::{Error, Result};
use std::io::{Read, Write};

/// File signature of the binary increments format.
pub const INCREMENTS_MAGIC: [u8; 4] = *b"KINB";
/// Current version of the binary increments format.
pub const INCREMENTS_VERSION: u16 = 1;

/// Writes the recorded states as CSV with columns `t,particle_id,x,v`.
pub fn write_path_csv(path: &EnsemblePath, mut w: impl Write) -> Result<()> {
    writeln!(w, "t,particle_id,x,v")?;
    for (k, &s) in path.recorded_steps().iter().enumerate() {
        let t = path.times()[s];
        for (i, p) in path.states()[k].iter().enumerate() {
            writeln!(w, "{t:.17e},{i},{:.17e},{:.17e}", p.x, p.v)?;
        }
    }
    Ok(())
}

/// Writes increments in the binary layout: a 16-byte little-endian header
/// (`magic[4]`, `version: u16`, `d: u16`, `N: u32`, `M: u32`), then the
/// `ΔB` array and the `ΔI` array, each `M × N × d` little-endian `f64` in
/// row-major order.
pub fn write_increments(inc: &BrownianIncrements, mut w: impl Write) -> Result<()> {
    let n = u32::try_from(inc.n()).map_err(|_| Error::invalid("too many particles for the format"))?;
    let m = u32::try_from(inc.m()).map_err(|_| Error::invalid("too many steps for the format"))?;
    let mut header = Vec::with_capacity(16);
    header.extend_from_slice(&INCREMENTS_MAGIC);
    header.extend_from_slice(&INCREMENTS_VERSION.to_le_bytes());
    header.extend_from_slice(&1u16.to_le_bytes());
    header.extend_from_slice(&n.to_le_bytes());
    header.extend_from_slice(&m.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(8 * inc.raw_db().len());
    for x in inc.raw_db().iter().chain(inc.raw_di()) {
        buf.extend_from_slice(&x.to_le_bytes());
        if buf.len() >= 1 << 16 {
            w.write_all(&buf)?;
            buf.clear();
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads increments written by [`write_increments`]; the step size is not
/// part of the file and is supplied by the caller.
pub fn read_increments(mut r: impl Read, dt: f64) -> Result<BrownianIncrements> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|_| Error::Format("truncated increments header".into()))?;
    if header[0..4] != INCREMENTS_MAGIC {
        return Err(Error::Format("bad increments signature".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != INCREMENTS_VERSION {
        return Err(Error::Format(format!("unsupported increments version {version}")));
    }
    let d = u16::from_le_bytes([header[6], header[7]]);
    if d != 1 {
        return Err(Error::Format(format!("unsupported dimension {d}")));
    }
    let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let m = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let count = n * m;
    let mut bytes = vec![0u8; 16 * count];
    r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated increments payload".into()))?;
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (db, di) = vals.split_at(count);
    BrownianIncrements::from_raw(n, m, dt, db.to_vec(), di.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{simulate, GaussianMixture, InitialSampler, InteractionKernel, Recording, SimConfig};
    use crate::semigroup::Noise;

    fn path() -> EnsemblePath {
        simulate(&SimConfig {
            n: 7,
            t_end: 0.1,
            dt: 0.01,
            noise: Noise::Kinetic,
            kernel: InteractionKernel::kuramoto(0.5),
            initial: InitialSampler::Iid(GaussianMixture::default_initial()),
            seed: 1,
            recording: Recording::Steps(vec![0, 10]),
        })
        .unwrap()
    }

    #[test]
    fn increments_round_trip_bit_exactly() {
        let p = path();
        let mut buf = Vec::new();
        write_increments(p.increments(), &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 2 * 8 * 7 * 10);
        let back = read_increments(buf.as_slice(), 0.01).unwrap();
        assert_eq!(&back, p.increments());
        for (a, b) in back.raw_db().iter().zip(p.increments().raw_db()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let p = path();
        let mut buf = Vec::new();
        write_increments(p.increments(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_increments(bad.as_slice(), 0.01).is_err());
        assert!(read_increments(&buf[..100], 0.01).is_err());
    }

    #[test]
    fn path_csv_has_one_row_per_particle_and_snapshot() {
        let p = path();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,particle_id,x,v");
        assert_eq!(lines.len(), 1 + 2 * 7);
    }
}
