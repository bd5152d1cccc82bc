//! Prior impedance data over all virtual ports, and its I/O partition.

pub mod cache;
pub mod touchstone;

use std::path::Path;

use crate::error::{Error, ReciprocityViolation, Result};
use crate::linalg::CMatrix;
use crate::pattern::IoSelection;
use crate::topology::{FrequencyGrid, PortTopology};

pub use cache::{cache_read, cache_write};
pub use touchstone::{ParamKind, Touchstone};

/// Default relative tolerance for the reciprocity check.
pub const RECIPROCITY_TOL: f64 = 1e-6;

/// Per-frequency Q x Q impedance matrices in ohms, frequency-major.
///
/// A 16x16 single-layer space has Q = 1444, i.e. ~33 MB per frequency; at
/// Q ~ 3200 a single frequency slab is ~160 MB.
#[derive(Debug, Clone)]
pub struct PriorData {
    topo: PortTopology,
    freqs: FrequencyGrid,
    matrices: Vec<CMatrix>,
    reciprocal: bool,
}

impl PriorData {
    pub fn new(topo: PortTopology, freqs: FrequencyGrid, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != freqs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequencies but {} matrices",
                freqs.len(),
                matrices.len()
            )));
        }
        let q = topo.len();
        for (f, m) in matrices.iter().enumerate() {
            if m.nrows() != q || m.ncols() != q {
                return Err(Error::DimensionMismatch(format!(
                    "matrix #{f} is {}x{}, topology has Q = {q}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(PriorData {
            topo,
            freqs,
            matrices,
            reciprocal: true,
        })
    }

    /// Marks the data as (non-)reciprocal; only reciprocal data is checked
    /// by [`PriorData::validate_reciprocity`].
    pub fn with_reciprocal(mut self, reciprocal: bool) -> Self {
        self.reciprocal = reciprocal;
        self
    }

    pub fn topology(&self) -> &PortTopology {
        &self.topo
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, f: usize) -> &CMatrix {
        &self.matrices[f]
    }

    pub fn is_reciprocal(&self) -> bool {
        self.reciprocal
    }

    pub fn port_count(&self) -> usize {
        self.topo.len()
    }

    /// Every `|Z_pq - Z_qp| > tol * max(1, |Z_pq|)`.
    pub fn reciprocity_violations(&self, tol: f64) -> Vec<ReciprocityViolation> {
        let mut out = Vec::new();
        for (f, m) in self.matrices.iter().enumerate() {
            for p in 0..m.nrows() {
                for q in (p + 1)..m.ncols() {
                    let zpq = m[(p, q)];
                    let deviation = (zpq - m[(q, p)]).norm();
                    if deviation > tol * zpq.norm().max(1.0) {
                        out.push(ReciprocityViolation {
                            freq_index: f,
                            p,
                            q,
                            deviation,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn validate_reciprocity(&self, tol: f64) -> Result<()> {
        if !self.reciprocal {
            return Ok(());
        }
        let violations = self.reciprocity_violations(tol);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::NonReciprocal { violations })
        }
    }

    pub fn partition(&self, io: &IoSelection) -> Result<PartitionedPrior<'_>> {
        partition(self, io)
    }

    /// Reads a Touchstone v1 file (Z or S) whose port count must equal Q.
    pub fn read_touchstone(path: &Path, topo: &PortTopology) -> Result<Self> {
        let ts = Touchstone::read(path)?;
        Self::from_touchstone(ts, topo)
    }

    pub fn from_touchstone(ts: Touchstone, topo: &PortTopology) -> Result<Self> {
        if ts.ports() != topo.len() {
            return Err(Error::PortCountMismatch {
                expected: topo.len(),
                found: ts.ports(),
            });
        }
        let ts = ts.into_kind(ParamKind::Z)?;
        let freqs = FrequencyGrid::new(ts.freqs)?;
        PriorData::new(topo.clone(), freqs, ts.data)
    }

    pub fn to_touchstone(&self, kind: ParamKind, ref_ohms: f64) -> Result<Touchstone> {
        Touchstone::new(
            ParamKind::Z,
            ref_ohms,
            self.freqs.as_slice().to_vec(),
            self.matrices.clone(),
        )?
        .into_kind(kind)
    }

    pub fn write_touchstone(&self, path: &Path, kind: ParamKind, ref_ohms: f64) -> Result<()> {
        self.to_touchstone(kind, ref_ohms)?.write_file(path)
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        cache_write(self, path)
    }

    pub fn read_cache(path: &Path, topo: &PortTopology) -> Result<Self> {
        cache_read(path, topo)
    }
}

/// Reads either a binary cache or a Touchstone file, chosen by magic bytes.
pub fn load_prior(path: &Path, topo: &PortTopology) -> Result<PriorData> {
    use std::io::Read;
    let mut head = [0u8; 5];
    let n = std::fs::File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .map_err(|e| Error::io(path, e))?;
    if n == 5 && &head == cache::MAGIC {
        cache_read(path, topo)
    } else {
        PriorData::read_touchstone(path, topo)
    }
}

/// Index view of a prior with the I/O ports moved first.
///
/// The permutation is I/O ports in selection order followed by every other
/// port ascending. Blocks are gathered on request, so building a partition
/// costs nothing beyond the index lists.
#[derive(Debug, Clone)]
pub struct PartitionedPrior<'a> {
    prior: &'a PriorData,
    io: IoSelection,
    vp: Vec<usize>,
}

pub fn partition<'a>(prior: &'a PriorData, io: &IoSelection) -> Result<PartitionedPrior<'a>> {
    let q = prior.port_count();
    if io.is_empty() || io.len() >= q {
        return Err(Error::InvalidIo(format!("need 1 <= K < Q (K = {}, Q = {q})", io.len())));
    }
    if let Some(&p) = io.ports().iter().find(|&&p| p >= q) {
        return Err(Error::InvalidIo(format!("port {p} out of range (Q = {q})")));
    }
    Ok(PartitionedPrior {
        prior,
        io: io.clone(),
        vp: io.complement(q),
    })
}

impl<'a> PartitionedPrior<'a> {
    pub fn prior(&self) -> &'a PriorData {
        self.prior
    }

    pub fn io(&self) -> &IoSelection {
        &self.io
    }

    /// Non-I/O ports, ascending.
    pub fn vp(&self) -> &[usize] {
        &self.vp
    }

    pub fn permutation(&self) -> Vec<usize> {
        self.io.ports().iter().chain(&self.vp).copied().collect()
    }

    pub fn freq_count(&self) -> usize {
        self.prior.freqs.len()
    }

    pub fn gather(&self, f: usize, rows: &[usize], cols: &[usize]) -> CMatrix {
        let m = &self.prior.matrices[f];
        CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
    }

    pub fn io_io(&self, f: usize) -> CMatrix {
        self.gather(f, self.io.ports(), self.io.ports())
    }

    pub fn io_vp(&self, f: usize) -> CMatrix {
        self.gather(f, self.io.ports(), &self.vp)
    }

    pub fn vp_io(&self, f: usize) -> CMatrix {
        self.gather(f, &self.vp, self.io.ports())
    }

    pub fn vp_vp(&self, f: usize) -> CMatrix {
        self.gather(f, &self.vp, &self.vp)
    }

    /// Reassembles `[[io_io, io_vp], [vp_io, vp_vp]]`.
    pub fn assemble(&self, f: usize) -> CMatrix {
        let k = self.io.len();
        let q = k + self.vp.len();
        let blocks = [
            [self.io_io(f), self.io_vp(f)],
            [self.vp_io(f), self.vp_vp(f)],
        ];
        let mut out = CMatrix::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                let (bi, ri) = if i < k { (0, i) } else { (1, i - k) };
                let (bj, rj) = if j < k { (0, j) } else { (1, j - k) };
                out[(i, j)] = blocks[bi][bj][(ri, rj)];
            }
        }
        out
    }
}

/// `P Z P^T` for the permutation listing new-to-old indices.
pub fn permute(z: &CMatrix, perm: &[usize]) -> CMatrix {
    CMatrix::from_fn(perm.len(), perm.len(), |i, j| z[(perm[i], perm[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::topology::{enumerate_ports, DesignSpace};

    fn czero() -> c64 {
        c64::new(0.0, 0.0)
    }

    fn small_prior(rows: usize, cols: usize, nf: usize) -> PriorData {
        let topo = enumerate_ports(&DesignSpace::single_layer(rows, cols));
        let q = topo.len();
        let freqs = FrequencyGrid::linspace(1e9, 2e9, nf).unwrap();
        let mats = (0..nf)
            .map(|f| {
                CMatrix::from_fn(q, q, |i, j| {
                    let (a, b) = (i.min(j) as f64, i.max(j) as f64);
                    c64::new(1.0 + a + 0.5 * b + f as f64, 0.1 * (a - b))
                })
            })
            .collect();
        PriorData::new(topo, freqs, mats).unwrap()
    }

    #[test]
    fn partition_matches_permutation_matrix() {
        let prior = small_prior(2, 2, 2);
        let io = IoSelection::new(vec![13, 10], prior.topology(), false).unwrap();
        let part = prior.partition(&io).unwrap();
        let perm = part.permutation();
        assert_eq!(&perm[..2], &[13, 10]);
        assert!(perm[2..].windows(2).all(|w| w[0] < w[1]));
        // explicit P Z P^T
        let q = prior.port_count();
        let pmat = CMatrix::from_fn(q, q, |i, j| {
            if perm[i] == j {
                c64::new(1.0, 0.0)
            } else {
                czero()
            }
        });
        for f in 0..2 {
            let expect = &pmat * prior.matrix(f) * pmat.transpose();
            let got = part.assemble(f);
            assert_eq!(got, expect);
            assert_eq!(got, permute(prior.matrix(f), &perm));
        }
    }

    #[test]
    fn three_port_direct_indexing() {
        let topo = enumerate_ports(&DesignSpace::single_layer(1, 1));
        let freqs = FrequencyGrid::new(vec![1e9]).unwrap();
        let z = CMatrix::from_fn(4, 4, |i, j| c64::new((10 * i + j) as f64, 0.0));
        let prior = PriorData::new(topo.clone(), freqs, vec![z]).unwrap();
        let io = IoSelection::new(vec![2], &topo, false).unwrap();
        let part = prior.partition(&io).unwrap();
        assert_eq!(part.io_io(0)[(0, 0)], c64::new(22.0, 0.0));
        assert_eq!(part.vp(), &[0, 1, 3]);
        assert_eq!(part.io_vp(0)[(0, 2)], c64::new(23.0, 0.0));
        assert_eq!(part.vp_io(0)[(1, 0)], c64::new(12.0, 0.0));
        // K = Q - 1 leaves a 1x1 vp block
        let io = IoSelection::new(vec![0, 1, 2], &topo, false).unwrap();
        let part = prior.partition(&io).unwrap();
        assert_eq!(part.vp_vp(0).nrows(), 1);
        assert_eq!(part.vp_vp(0)[(0, 0)], c64::new(33.0, 0.0));
    }

    #[test]
    fn reciprocity_reports_indices() {
        let prior = small_prior(1, 2, 1);
        assert!(prior.validate_reciprocity(RECIPROCITY_TOL).is_ok());
        let mut mats = prior.matrices().to_vec();
        mats[0][(1, 4)] += c64::new(1e-3, 0.0);
        let bad = PriorData::new(prior.topology().clone(), prior.freqs().clone(), mats).unwrap();
        match bad.validate_reciprocity(RECIPROCITY_TOL) {
            Err(Error::NonReciprocal { violations }) => {
                assert_eq!(violations.len(), 1);
                assert_eq!((violations[0].p, violations[0].q), (1, 4));
            }
            other => panic!("{other:?}"),
        }
        assert!(bad.clone().with_reciprocal(false).validate_reciprocity(RECIPROCITY_TOL).is_ok());
    }

    #[test]
    fn rejects_wrong_dimension() {
        let topo = enumerate_ports(&DesignSpace::single_layer(1, 1));
        let freqs = FrequencyGrid::new(vec![1e9]).unwrap();
        let r = PriorData::new(topo, freqs, vec![CMatrix::zeros(3, 3)]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}
