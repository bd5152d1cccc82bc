//! Binary prior cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "MAPZ1" | Q u64 | F u64 | topology hash u64 | flags u32 | F x f64 freqs
//!         | F x Q x Q x (re f64, im f64), row-major per frequency | crc32 u32
//! ```
//!
//! The CRC covers every byte before it, magic included. Flag bit 0 marks
//! reciprocal data.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crc32fast::Hasher;

use super::PriorData;
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};
use crate::topology::{FrequencyGrid, PortTopology};

pub const MAGIC: &[u8; 5] = b"MAPZ1";

const FLAG_RECIPROCAL: u32 = 1;

struct CrcWriter<W> {
    inner: W,
    crc: Hasher,
}

impl<W: Write> Write for CrcWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.crc.update(&buf[..n]);
        Ok(n)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

struct CrcReader<R> {
    inner: R,
    crc: Hasher,
}

impl<R: Read> Read for CrcReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.crc.update(&buf[..n]);
        Ok(n)
    }
}

pub fn cache_write(prior: &PriorData, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = CrcWriter {
        inner: BufWriter::with_capacity(1 << 20, file),
        crc: Hasher::new(),
    };
    write_body(prior, &mut w).map_err(|e| Error::io(path, e))?;
    let crc = w.crc.finalize();
    let mut inner = w.inner;
    inner.write_all(&crc.to_le_bytes()).and_then(|_| inner.flush()).map_err(|e| Error::io(path, e))
}

fn write_body<W: Write>(prior: &PriorData, w: &mut W) -> std::io::Result<()> {
    let q = prior.port_count();
    w.write_all(MAGIC)?;
    w.write_all(&(q as u64).to_le_bytes())?;
    w.write_all(&(prior.freqs().len() as u64).to_le_bytes())?;
    w.write_all(&prior.topology().hash().to_le_bytes())?;
    let flags = if prior.is_reciprocal() { FLAG_RECIPROCAL } else { 0 };
    w.write_all(&flags.to_le_bytes())?;
    for f in prior.freqs().as_slice() {
        w.write_all(&f.to_le_bytes())?;
    }
    let mut row = Vec::with_capacity(q * 16);
    for m in prior.matrices() {
        for i in 0..q {
            row.clear();
            for j in 0..q {
                let v = m[(i, j)];
                row.extend_from_slice(&v.re.to_le_bytes());
                row.extend_from_slice(&v.im.to_le_bytes());
            }
            w.write_all(&row)?;
        }
    }
    Ok(())
}

/// Reads a cache written for `topo`. A cache built for another topology is
/// rejected with [`Error::HashMismatch`] before any payload is read.
pub fn cache_read(path: &Path, topo: &PortTopology) -> Result<PriorData> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let total = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut r = CrcReader {
        inner: BufReader::with_capacity(1 << 20, file),
        crc: Hasher::new(),
    };
    let short = |what: &str| Error::CorruptCache(format!("truncated {what}"));

    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|_| short("header"))?;
    if &magic != MAGIC {
        return Err(Error::CorruptCache("bad magic".into()));
    }
    let mut header = [0u8; 28];
    r.read_exact(&mut header).map_err(|_| short("header"))?;
    let q = u64::from_le_bytes(header[0..8].try_into().unwrap());
    let nf = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let hash = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let flags = u32::from_le_bytes(header[24..28].try_into().unwrap());

    let expected = topo.hash();
    if hash != expected {
        return Err(Error::HashMismatch {
            expected,
            found: hash,
        });
    }
    if q != topo.len() as u64 {
        return Err(Error::CorruptCache(format!("header Q = {q}, topology has {}", topo.len())));
    }
    let want = 5u64
        .checked_add(28)
        .and_then(|n| n.checked_add(nf.checked_mul(8)?))
        .and_then(|n| n.checked_add(nf.checked_mul(q)?.checked_mul(q)?.checked_mul(16)?))
        .and_then(|n| n.checked_add(4));
    if want != Some(total) {
        return Err(Error::CorruptCache(format!(
            "file is {total} bytes, header implies {}",
            want.map_or("overflow".to_string(), |w| w.to_string())
        )));
    }
    let (q, nf) = (q as usize, nf as usize);

    let mut freqs = Vec::with_capacity(nf);
    let mut b8 = [0u8; 8];
    for _ in 0..nf {
        r.read_exact(&mut b8).map_err(|_| short("frequencies"))?;
        freqs.push(f64::from_le_bytes(b8));
    }
    let mut matrices = Vec::with_capacity(nf);
    let mut row = vec![0u8; q * 16];
    for _ in 0..nf {
        let mut m = CMatrix::zeros(q, q);
        for i in 0..q {
            r.read_exact(&mut row).map_err(|_| short("data"))?;
            for j in 0..q {
                let re = f64::from_le_bytes(row[16 * j..16 * j + 8].try_into().unwrap());
                let im = f64::from_le_bytes(row[16 * j + 8..16 * j + 16].try_into().unwrap());
                m[(i, j)] = c64::new(re, im);
            }
        }
        matrices.push(m);
    }
    let computed = r.crc.clone().finalize();
    let mut b4 = [0u8; 4];
    r.inner.read_exact(&mut b4).map_err(|_| short("checksum"))?;
    if u32::from_le_bytes(b4) != computed {
        return Err(Error::CorruptCache("checksum mismatch".into()));
    }
    let freqs = FrequencyGrid::new(freqs).map_err(|e| Error::CorruptCache(e.to_string()))?;
    Ok(PriorData::new(topo.clone(), freqs, matrices)?.with_reciprocal(flags & FLAG_RECIPROCAL != 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{enumerate_ports, DesignSpace};

    fn prior() -> PriorData {
        let topo = enumerate_ports(&DesignSpace::single_layer(2, 2));
        let q = topo.len();
        let freqs = FrequencyGrid::new(vec![1e9, 3e9]).unwrap();
        let mats = (0..2)
            .map(|f| CMatrix::from_fn(q, q, |i, j| c64::new((i * q + j) as f64 / 7.0, -(f as f64) / 3.0)))
            .collect();
        PriorData::new(topo, freqs, mats).unwrap().with_reciprocal(false)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        let p = prior();
        cache_write(&p, &path).unwrap();
        let back = cache_read(&path, p.topology()).unwrap();
        assert_eq!(back.matrices(), p.matrices());
        assert_eq!(back.freqs(), p.freqs());
        assert!(!back.is_reciprocal());
    }

    #[test]
    fn wrong_topology_is_hash_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        cache_write(&prior(), &path).unwrap();
        let other = enumerate_ports(&DesignSpace::single_layer(2, 3));
        assert!(matches!(cache_read(&path, &other), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        let p = prior();
        cache_write(&p, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(cache_read(&path, p.topology()), Err(Error::CorruptCache(_))));
        bytes.truncate(bytes.len() - 9);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(cache_read(&path, p.topology()), Err(Error::CorruptCache(_))));
    }
}
