//! Synthetic lumped network over the virtual-pixel graph and a brute-force
//! nodal solver for it.
//!
//! Every pixel node and every diagonal node carries a shunt `G + jwC` to
//! ground. Each port p sits in series with a branch `R + jwL` hanging off its
//! positive node `a`; the far end of the branch is a private terminal `t`, and
//! the port gap is `t`-to-`b`:
//!
//! ```text
//!   a ──[R + jwL]── t   (port p)   b
//! ```
//!
//! With every gap open the network reduces to the shunts (plus optional
//! parasitic coupling), so the port impedance matrix is
//! `diag(Z_br) + B^T Y^-1 B` where column p of `B` is `e_a - e_b`.
//!
//! The oracle instead terminates the gaps physically: a short merges `t`
//! into `b`, a finite load becomes an impedance branch `t`-`b` with its own
//! current unknown, an open leaves `t` floating, and I/O gaps are driven by
//! unit currents.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, solve, CMatrix};
use crate::pattern::{map_to_loads, IoSelection, LoadAssignment, LoadState, PixelPattern};
use crate::prior::PriorData;
use crate::solver::{NetworkResponse, Representation};
use crate::topology::{DesignSpace, FrequencyGrid, Node, PortTopology};

/// Element-value ranges; each value is drawn uniformly from its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub r_ohms: (f64, f64),
    pub l_henry: (f64, f64),
    pub c_farad: (f64, f64),
    pub g_siemens: (f64, f64),
    /// Scale of the optional coupling between nearby non-adjacent pixels,
    /// relative to the shunt ranges. Zero disables it.
    pub parasitic: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            r_ohms: (0.05, 0.5),
            l_henry: (0.1e-9, 1e-9),
            c_farad: (5e-15, 50e-15),
            g_siemens: (1e-6, 1e-4),
            parasitic: 0.0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("R", self.r_ohms),
            ("L", self.l_henry),
            ("C", self.c_farad),
            ("G", self.g_siemens),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::MalformedInput(format!(
                    "{name} range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.parasitic >= 0.0 && self.parasitic.is_finite()) {
            return Err(Error::MalformedInput("parasitic scale must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shunt {
    pub g: f64,
    pub c: f64,
}

impl Shunt {
    fn admittance(&self, w: f64) -> c64 {
        c64::new(self.g, w * self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub r: f64,
    pub l: f64,
}

impl Branch {
    fn impedance(&self, w: f64) -> c64 {
        c64::new(self.r, w * self.l)
    }
}

/// Parasitic shunt between two nodes (node indices as in
/// [`PortTopology::node_index`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub a: usize,
    pub b: usize,
    pub g: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNetwork {
    topo: PortTopology,
    params: SynthParams,
    seed: u64,
    shunts: Vec<Shunt>,
    branches: Vec<Branch>,
    couplings: Vec<Coupling>,
    /// Ports whose polarity is reversed (port voltage `V(b) - V(t)`).
    flipped: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    space: DesignSpace,
    seed: u64,
    params: SynthParams,
    nodes: Vec<String>,
    shunts: Vec<Shunt>,
    branches: Vec<BranchRecord>,
    couplings: Vec<Coupling>,
}

#[derive(Serialize, Deserialize)]
struct BranchRecord {
    port: usize,
    node_a: String,
    node_b: String,
    r: f64,
    l: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    flipped: bool,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Deterministic network for `topo` drawn from `params` with `seed`.
pub fn generate(topo: &PortTopology, params: &SynthParams, seed: u64) -> Result<SyntheticNetwork> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shunts: Vec<Shunt> = (0..topo.node_count())
        .map(|_| Shunt {
            g: uniform(&mut rng, params.g_siemens),
            c: uniform(&mut rng, params.c_farad),
        })
        .collect();
    let branches: Vec<Branch> = (0..topo.len())
        .map(|_| Branch {
            r: uniform(&mut rng, params.r_ohms),
            l: uniform(&mut rng, params.l_henry),
        })
        .collect();
    let mut couplings = Vec::new();
    if params.parasitic > 0.0 {
        let space = topo.space();
        let s = params.parasitic;
        for layer in 0..space.layers {
            for i in 0..space.rows {
                for j in 0..space.cols {
                    for (di, dj) in [(0i64, 2i64), (1, -1), (1, 1), (2, 0)] {
                        let (i2, j2) = (i as i64 + di, j as i64 + dj);
                        if i2 < 0 || j2 < 0 || i2 >= space.rows as i64 || j2 >= space.cols as i64 {
                            continue;
                        }
                        let node = |row, col| topo.node_index(Node::Pixel { layer, row, col }).unwrap();
                        couplings.push(Coupling {
                            a: node(i, j),
                            b: node(i2 as usize, j2 as usize),
                            g: s * uniform(&mut rng, params.g_siemens),
                            c: s * uniform(&mut rng, params.c_farad),
                        });
                    }
                }
            }
        }
    }
    Ok(SyntheticNetwork {
        topo: topo.clone(),
        params: params.clone(),
        seed,
        shunts,
        branches,
        couplings,
        flipped: vec![false; topo.len()],
    })
}

fn omega(freq_hz: f64) -> f64 {
    2.0 * PI * freq_hz
}

impl SyntheticNetwork {
    pub fn topology(&self) -> &PortTopology {
        &self.topo
    }

    pub fn params(&self) -> &SynthParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shunts(&self) -> &[Shunt] {
        &self.shunts
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn node_count(&self) -> usize {
        self.shunts.len()
    }

    /// Reverses the polarity of `port`.
    pub fn flip_port(&mut self, port: usize) {
        self.flipped[port] = !self.flipped[port];
    }

    fn sign(&self, port: usize) -> f64 {
        if self.flipped[port] {
            -1.0
        } else {
            1.0
        }
    }

    /// Node indices of a port's terminals, `None` for ground.
    fn terminals(&self, port: usize) -> (Option<usize>, Option<usize>) {
        let p = self.topo.port(port);
        (self.topo.node_index(p.node_a), self.topo.node_index(p.node_b))
    }

    /// Nodal admittance of the background network (all port gaps open).
    pub fn background_admittance(&self, freq_hz: f64) -> CMatrix {
        let w = omega(freq_hz);
        let n = self.node_count();
        let mut y = CMatrix::zeros(n, n);
        for (k, s) in self.shunts.iter().enumerate() {
            y[(k, k)] += s.admittance(w);
        }
        for c in &self.couplings {
            stamp(&mut y, Some(c.a), Some(c.b), c64::new(c.g, w * c.c));
        }
        y
    }

    /// Port impedance matrix at one frequency.
    pub fn port_impedance(&self, freq_hz: f64) -> Result<CMatrix> {
        let w = omega(freq_hz);
        let n = self.node_count();
        let y = self.background_admittance(freq_hz);
        let yinv = if self.couplings.is_empty() {
            // shunts only: Y is diagonal
            let one = c64::new(1.0, 0.0);
            CMatrix::from_fn(n, n, |i, j| if i == j { one / y[(i, i)] } else { c64::new(0.0, 0.0) })
        } else {
            let eye = CMatrix::from_fn(n, n, |i, j| c64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
            solve(y.as_ref(), eye.as_ref(), freq_hz)?
        };
        let q = self.topo.len();
        // ground is row/column n of an extended inverse, identically zero
        let (a, b): (Vec<usize>, Vec<usize>) = (0..q)
            .map(|p| {
                let (a, b) = self.terminals(p);
                (a.unwrap_or(n), b.unwrap_or(n))
            })
            .unzip();
        let zero = c64::new(0.0, 0.0);
        let yext = CMatrix::from_fn(n + 1, n + 1, |i, j| if i < n && j < n { yinv[(i, j)] } else { zero });
        // Y^-1 B, then B^T (Y^-1 B)
        let yb = CMatrix::from_fn(n + 1, q, |i, c| yext[(i, a[c])] - yext[(i, b[c])]);
        let sign: Vec<f64> = (0..q).map(|p| self.sign(p)).collect();
        let mut z = CMatrix::from_fn(q, q, |r, c| (yb[(a[r], c)] - yb[(b[r], c)]) * (sign[r] * sign[c]));
        for p in 0..q {
            z[(p, p)] += self.branches[p].impedance(w);
        }
        Ok(z)
    }

    /// Z_ALL over `freqs`.
    pub fn extract_prior(&self, freqs: &FrequencyGrid) -> Result<PriorData> {
        let mats = freqs
            .as_slice()
            .iter()
            .map(|&f| self.port_impedance(f))
            .collect::<Result<Vec<_>>>()?;
        PriorData::new(self.topo.clone(), freqs.clone(), mats)
    }

    /// I/O impedance with every non-I/O port terminated per `loads`,
    /// solved on the physically loaded nodal network.
    pub fn oracle_loads(&self, loads: &LoadAssignment, freqs: &FrequencyGrid) -> Result<NetworkResponse> {
        let q = self.topo.len();
        if loads.len() + loads.io().len() != q {
            return Err(Error::DimensionMismatch(format!(
                "{} loads and {} I/O ports for Q = {q}",
                loads.len(),
                loads.io().len()
            )));
        }
        let data = freqs
            .as_slice()
            .iter()
            .map(|&f| self.oracle_at(loads, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkResponse {
            io: loads.io().clone(),
            freqs: freqs.clone(),
            data,
            repr: Representation::Z,
        })
    }

    fn oracle_at(&self, loads: &LoadAssignment, freq_hz: f64) -> Result<CMatrix> {
        let w = omega(freq_hz);
        let n = self.node_count();
        let io = loads.io().ports();

        // Node ids: 0..n network nodes, n is ground, then one terminal per
        // port that is not shorted or open.
        let ground = n;
        let mut dsu = Dsu::new(n + 1);
        let mut term = vec![usize::MAX; self.topo.len()];
        let mut elements: Vec<(usize, usize, c64)> = Vec::new();
        let node_id = |x: Option<usize>| x.unwrap_or(ground);

        let mut attach = |dsu: &mut Dsu, port: usize| {
            let t = dsu.push();
            let (a, _) = self.terminals(port);
            elements.push((node_id(a), t, c64::new(1.0, 0.0) / self.branches[port].impedance(w)));
            t
        };
        for &p in io {
            term[p] = attach(&mut dsu, p);
        }
        let mut finite = Vec::new();
        for (p, state) in loads.iter() {
            match state {
                LoadState::Open => {}
                LoadState::Short => {
                    // the terminal is the gap's b side itself
                    let t = attach(&mut dsu, p);
                    dsu.union(t, node_id(self.terminals(p).1));
                }
                LoadState::Finite(z) => {
                    let t = attach(&mut dsu, p);
                    finite.push((t, node_id(self.terminals(p).1), z));
                }
            }
        }
        for (k, s) in self.shunts.iter().enumerate() {
            elements.push((k, ground, s.admittance(w)));
        }
        for c in &self.couplings {
            elements.push((c.a, c.b, c64::new(c.g, w * c.c)));
        }

        // Compact the merged node set, ground's class removed.
        let groot = dsu.find(ground);
        let mut index = vec![usize::MAX; dsu.len()];
        let mut m = 0;
        for v in 0..dsu.len() {
            let r = dsu.find(v);
            if r != groot && index[r] == usize::MAX {
                index[r] = m;
                m += 1;
            }
        }
        let map = |dsu: &mut Dsu, v: usize| {
            let r = dsu.find(v);
            (r != groot).then(|| index[r])
        };

        // Finite loads get a branch-current unknown each (row m + k:
        // V_t - V_b - z I = 0), which stays well conditioned as z -> 0.
        let dim = m + finite.len();
        let mut y = CMatrix::zeros(dim, dim);
        for &(a, b, g) in &elements {
            let (a, b) = (map(&mut dsu, a), map(&mut dsu, b));
            stamp(&mut y, a, b, g);
        }
        let one = c64::new(1.0, 0.0);
        for (k, &(t, b, z)) in finite.iter().enumerate() {
            let r = m + k;
            if let Some(t) = map(&mut dsu, t) {
                y[(t, r)] += one;
                y[(r, t)] += one;
            }
            if let Some(b) = map(&mut dsu, b) {
                y[(b, r)] -= one;
                y[(r, b)] -= one;
            }
            y[(r, r)] -= z;
        }
        let k = io.len();
        let mut rhs = CMatrix::zeros(dim, k);
        let mut sense = Vec::with_capacity(k);
        for (col, &p) in io.iter().enumerate() {
            let s = self.sign(p);
            let t = map(&mut dsu, term[p]);
            let b = map(&mut dsu, node_id(self.terminals(p).1));
            if let Some(t) = t {
                rhs[(t, col)] += c64::new(s, 0.0);
            }
            if let Some(b) = b {
                rhs[(b, col)] -= c64::new(s, 0.0);
            }
            sense.push((t, b, s));
        }
        let v = solve(y.as_ref(), rhs.as_ref(), freq_hz)?;
        let volt = |node: Option<usize>, col: usize| node.map_or(c64::new(0.0, 0.0), |i| v[(i, col)]);
        Ok(CMatrix::from_fn(k, k, |i, j| {
            let (t, b, s) = sense[i];
            (volt(t, j) - volt(b, j)) * s
        }))
    }

    /// Oracle response for a pixel pattern.
    pub fn oracle_solve(
        &self,
        pattern: &PixelPattern,
        io: &IoSelection,
        via_z: c64,
        freqs: &FrequencyGrid,
    ) -> Result<NetworkResponse> {
        let loads = map_to_loads(pattern, &self.topo, io, via_z)?;
        self.oracle_loads(&loads, freqs)
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            space: self.topo.space().clone(),
            seed: self.seed,
            params: self.params.clone(),
            nodes: (0..self.node_count()).map(|k| node_name(&self.topo, k)).collect(),
            shunts: self.shunts.clone(),
            branches: self
                .branches
                .iter()
                .enumerate()
                .map(|(p, b)| {
                    let port = self.topo.port(p);
                    BranchRecord {
                        port: p,
                        node_a: port.node_a.to_string(),
                        node_b: port.node_b.to_string(),
                        r: b.r,
                        l: b.l,
                        flipped: self.flipped[p],
                    }
                })
                .collect(),
            couplings: self.couplings.clone(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        let topo = PortTopology::new(&file.space)?;
        if file.shunts.len() != topo.node_count() || file.branches.len() != topo.len() {
            return Err(Error::DimensionMismatch(format!(
                "network has {} shunts and {} branches, topology needs {} and {}",
                file.shunts.len(),
                file.branches.len(),
                topo.node_count(),
                topo.len()
            )));
        }
        let n = topo.node_count();
        if file.couplings.iter().any(|c| c.a >= n || c.b >= n || c.a == c.b) {
            return Err(Error::MalformedInput("coupling references an invalid node".into()));
        }
        let mut branches = Vec::with_capacity(topo.len());
        let mut flipped = Vec::with_capacity(topo.len());
        for (p, b) in file.branches.iter().enumerate() {
            let port = topo.port(p);
            if b.port != p || b.node_a != port.node_a.to_string() || b.node_b != port.node_b.to_string() {
                return Err(Error::MalformedInput(format!("branch #{p} does not match the topology")));
            }
            branches.push(Branch { r: b.r, l: b.l });
            flipped.push(b.flipped);
        }
        Ok(SyntheticNetwork {
            topo,
            params: file.params,
            seed: file.seed,
            shunts: file.shunts,
            branches,
            couplings: file.couplings,
            flipped,
        })
    }
}

fn node_name(topo: &PortTopology, k: usize) -> String {
    let space = topo.space();
    let per_layer = space.pixels_per_layer();
    let corners = space.corners_per_layer();
    let layers = space.layers;
    if k < layers * per_layer {
        let (layer, rem) = (k / per_layer, k % per_layer);
        Node::Pixel { layer, row: rem / space.cols, col: rem % space.cols }.to_string()
    } else {
        let k = k - layers * per_layer;
        let (layer, rem) = (k / corners, k % corners);
        let w = space.cols - 1;
        Node::Corner { layer, row: rem / w, col: rem % w }.to_string()
    }
}

/// Two-terminal admittance stamp; `None` is ground.
fn stamp(y: &mut CMatrix, a: Option<usize>, b: Option<usize>, g: c64) {
    if let Some(a) = a {
        y[(a, a)] += g;
    }
    if let Some(b) = b {
        y[(b, b)] += g;
    }
    if let (Some(a), Some(b)) = (a, b) {
        if a == b {
            // element shorted out by a merge
            y[(a, a)] -= g + g;
        } else {
            y[(a, b)] -= g;
            y[(b, a)] -= g;
        }
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    fn len(&self) -> usize {
        self.parent.len()
    }

    fn push(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}
