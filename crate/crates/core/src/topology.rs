//! Virtual-port enumeration for an L-layer M x N pixel design space.
//!
//! Every pixel becomes a node ("virtual pixel"), every interior pixel corner
//! carries a small diagonal node, and two-terminal ports are inserted:
//!
//! * one horizontal port between each pair of row-neighbours,
//! * one vertical port between each pair of column-neighbours,
//! * four diagonal ports per interior corner, one to each surrounding pixel,
//! * one ground port per exposed boundary edge of every outer pixel,
//! * optionally one via port per pixel site between adjacent layers.
//!
//! Indices are 0-based in the Rust API. The CSV port map uses 1-based layer,
//! row and column numbers.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Physical sizing of the design space. Not used by the reduction itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Pixel pitch in metres.
    pub pitch_m: f64,
    /// Virtual pixel edge as a fraction of the pitch.
    pub shrink: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub layers: usize,
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub has_vias: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
}

impl DesignSpace {
    pub fn new(layers: usize, rows: usize, cols: usize, has_vias: bool) -> Result<Self> {
        let space = DesignSpace {
            layers,
            rows,
            cols,
            has_vias,
            geometry: None,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn single_layer(rows: usize, cols: usize) -> Self {
        Self::new(1, rows, cols, false).expect("rows and cols must be positive")
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = Some(geometry);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidDesignSpace(format!(
                "layers, rows and cols must be positive (got {}x{}x{})",
                self.rows, self.cols, self.layers
            )));
        }
        if self.has_vias && self.layers < 2 {
            return Err(Error::InvalidDesignSpace(
                "via ports need at least two layers".into(),
            ));
        }
        Ok(())
    }

    /// Same pixel grid, ignoring geometry metadata.
    pub fn same_grid(&self, other: &DesignSpace) -> bool {
        self.layers == other.layers
            && self.rows == other.rows
            && self.cols == other.cols
            && self.has_vias == other.has_vias
    }

    pub fn pixels_per_layer(&self) -> usize {
        self.rows * self.cols
    }

    /// Linear index of a pixel, layer-major then row-major.
    pub fn pixel_index(&self, layer: usize, row: usize, col: usize) -> usize {
        (layer * self.rows + row) * self.cols + col
    }

    /// Number of diagonal (corner) nodes per layer.
    pub fn corners_per_layer(&self) -> usize {
        (self.rows - 1) * (self.cols - 1)
    }

    pub fn via_layers(&self) -> usize {
        if self.has_vias {
            self.layers - 1
        } else {
            0
        }
    }
}

impl fmt::Display for DesignSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.rows, self.cols, self.layers)?;
        if self.has_vias {
            write!(f, "+vias")?;
        }
        Ok(())
    }
}

/// Strictly increasing list of positive frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::MalformedInput("frequency grid is empty".into()));
        }
        for (index, &value) in freqs.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::MalformedInput(format!(
                    "frequency #{index} ({value}) must be positive and finite"
                )));
            }
            if index > 0 && value <= freqs[index - 1] {
                return Err(Error::NonIncreasingFrequencies { index, value });
            }
        }
        Ok(FrequencyGrid(freqs))
    }

    /// `points` evenly spaced samples from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, points: usize) -> Result<Self> {
        match points {
            0 => Err(Error::MalformedInput("frequency grid needs at least one point".into())),
            1 => Self::new(vec![start]),
            _ => {
                let step = (stop - start) / (points - 1) as f64;
                let mut v: Vec<f64> = (0..points).map(|k| start + step * k as f64).collect();
                v[points - 1] = stop;
                Self::new(v)
            }
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.0
    }
}

/// Parses `start:stop:points`. Start and stop accept an optional
/// k/M/G suffix (with or without a trailing `Hz`).
impl FromStr for FrequencyGrid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::MalformedInput(format!(
                "frequency spec `{s}` must look like start:stop:points"
            )));
        }
        let start = parse_hz(parts[0])?;
        let stop = parse_hz(parts[1])?;
        let points: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::MalformedInput(format!("bad point count `{}`", parts[2])))?;
        Self::linspace(start, stop, points)
    }
}

fn parse_hz(s: &str) -> Result<f64> {
    let t = s.trim();
    let t = t
        .strip_suffix("Hz")
        .or_else(|| t.strip_suffix("hz"))
        .or_else(|| t.strip_suffix("HZ"))
        .unwrap_or(t);
    let (num, scale) = match t.chars().last() {
        Some('k') | Some('K') => (&t[..t.len() - 1], 1e3),
        Some('M') => (&t[..t.len() - 1], 1e6),
        Some('G') | Some('g') => (&t[..t.len() - 1], 1e9),
        _ => (t, 1.0),
    };
    num.trim()
        .parse::<f64>()
        .map(|v| v * scale)
        .map_err(|_| Error::MalformedInput(format!("bad frequency `{s}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortClass {
    #[serde(rename = "horizontal")]
    HorizontalEdge,
    #[serde(rename = "vertical")]
    VerticalEdge,
    Diagonal,
    Ground,
    Via,
}

impl PortClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PortClass::HorizontalEdge => "horizontal",
            PortClass::VerticalEdge => "vertical",
            PortClass::Diagonal => "diagonal",
            PortClass::Ground => "ground",
            PortClass::Via => "via",
        }
    }
}

impl FromStr for PortClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "horizontal" => PortClass::HorizontalEdge,
            "vertical" => PortClass::VerticalEdge,
            "diagonal" => PortClass::Diagonal,
            "ground" => PortClass::Ground,
            "via" => PortClass::Via,
            _ => return Err(Error::MalformedInput(format!("unknown port class `{s}`"))),
        })
    }
}

/// Which side of the anchor a port sits on.
///
/// Edge and ground ports use the compass sides of their anchor pixel.
/// Diagonal ports are anchored at a corner and name the pixel they reach.
/// Via ports point `Up` from the anchor pixel on the lower layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    N,
    E,
    S,
    W,
    NW,
    NE,
    SW,
    SE,
    Up,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::N => "N",
            Side::E => "E",
            Side::S => "S",
            Side::W => "W",
            Side::NW => "NW",
            Side::NE => "NE",
            Side::SW => "SW",
            Side::SE => "SE",
            Side::Up => "U",
        }
    }
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "N" => Side::N,
            "E" => Side::E,
            "S" => Side::S,
            "W" => Side::W,
            "NW" => Side::NW,
            "NE" => Side::NE,
            "SW" => Side::SW,
            "SE" => Side::SE,
            "U" | "UP" => Side::Up,
            _ => return Err(Error::MalformedInput(format!("unknown side `{s}`"))),
        })
    }
}

/// A node of the virtual-pixel network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Pixel { layer: usize, row: usize, col: usize },
    /// Diagonal node at the corner shared by pixels (row, col) and (row+1, col+1).
    Corner { layer: usize, row: usize, col: usize },
    Ground,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Node::Pixel { layer, row, col } => write!(f, "p{}.{}.{}", layer + 1, row + 1, col + 1),
            Node::Corner { layer, row, col } => write!(f, "d{}.{}.{}", layer + 1, row + 1, col + 1),
            Node::Ground => write!(f, "gnd"),
        }
    }
}

impl FromStr for Node {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "gnd" {
            return Ok(Node::Ground);
        }
        let bad = || Error::MalformedInput(format!("bad node `{s}`"));
        let (kind, rest) = s.split_at(1.min(s.len()));
        let nums: Vec<usize> = rest
            .split('.')
            .map(|t| t.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if nums.len() != 3 || nums.contains(&0) {
            return Err(bad());
        }
        let (layer, row, col) = (nums[0] - 1, nums[1] - 1, nums[2] - 1);
        match kind {
            "p" => Ok(Node::Pixel { layer, row, col }),
            "d" => Ok(Node::Corner { layer, row, col }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortId {
    pub index: usize,
    pub class: PortClass,
    pub layer: usize,
    pub row: usize,
    pub col: usize,
    pub side: Side,
    /// Positive terminal.
    pub node_a: Node,
    pub node_b: Node,
}

impl PortId {
    /// The pixel(s) whose absence opens this port.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize, usize)> {
        let mut out = [None, None];
        for (slot, node) in out.iter_mut().zip([self.node_a, self.node_b]) {
            if let Node::Pixel { layer, row, col } = node {
                *slot = Some((layer, row, col));
            }
        }
        out.into_iter().flatten()
    }
}

/// `L(6MN - 3M - 3N + 4)` plus `(L - 1)MN` via ports when enabled.
pub fn count_ports(space: &DesignSpace) -> usize {
    let (l, m, n) = (space.layers, space.rows, space.cols);
    let per_layer = 6 * m * n + 4 - 3 * m - 3 * n;
    l * per_layer + space.via_layers() * m * n
}

/// All virtual ports of a design space in canonical order. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PortTopology {
    space: DesignSpace,
    ports: Vec<PortId>,
    adjacency: Vec<Vec<usize>>,
    lookup: HashMap<(usize, usize, usize, Side), usize>,
}

/// Enumerates ports layer by layer (horizontal, vertical, diagonal, ground;
/// row-major inside each class), then appends all via ports.
pub fn enumerate_ports(space: &DesignSpace) -> PortTopology {
    let (m, n) = (space.rows, space.cols);
    let mut ports = Vec::with_capacity(count_ports(space));
    let mut push = |class, layer, row, col, side, node_a, node_b| {
        let index = ports.len();
        ports.push(PortId {
            index,
            class,
            layer,
            row,
            col,
            side,
            node_a,
            node_b,
        });
    };
    let px = |layer, row, col| Node::Pixel { layer, row, col };

    for l in 0..space.layers {
        for i in 0..m {
            for j in 0..n.saturating_sub(1) {
                push(PortClass::HorizontalEdge, l, i, j, Side::E, px(l, i, j), px(l, i, j + 1));
            }
        }
        for i in 0..m.saturating_sub(1) {
            for j in 0..n {
                push(PortClass::VerticalEdge, l, i, j, Side::S, px(l, i, j), px(l, i + 1, j));
            }
        }
        for i in 0..m.saturating_sub(1) {
            for j in 0..n.saturating_sub(1) {
                let corner = Node::Corner { layer: l, row: i, col: j };
                for (side, (pi, pj)) in [
                    (Side::NW, (i, j)),
                    (Side::NE, (i, j + 1)),
                    (Side::SW, (i + 1, j)),
                    (Side::SE, (i + 1, j + 1)),
                ] {
                    push(PortClass::Diagonal, l, i, j, side, px(l, pi, pj), corner);
                }
            }
        }
        for i in 0..m {
            for j in 0..n {
                let exposed = [
                    (Side::N, i == 0),
                    (Side::E, j == n - 1),
                    (Side::S, i == m - 1),
                    (Side::W, j == 0),
                ];
                for (side, on_boundary) in exposed {
                    if on_boundary {
                        push(PortClass::Ground, l, i, j, side, px(l, i, j), Node::Ground);
                    }
                }
            }
        }
    }
    for l in 0..space.via_layers() {
        for i in 0..m {
            for j in 0..n {
                push(PortClass::Via, l, i, j, Side::Up, px(l, i, j), px(l + 1, i, j));
            }
        }
    }

    let mut adjacency = vec![Vec::new(); space.layers * m * n];
    let mut lookup = HashMap::with_capacity(ports.len());
    for p in &ports {
        for (l, i, j) in p.pixels() {
            adjacency[space.pixel_index(l, i, j)].push(p.index);
        }
        lookup.insert((p.layer, p.row, p.col, p.side), p.index);
    }
    for set in &mut adjacency {
        set.sort_unstable();
    }

    PortTopology {
        space: space.clone(),
        ports,
        adjacency,
        lookup,
    }
}

impl PortTopology {
    pub fn new(space: &DesignSpace) -> Result<Self> {
        space.validate()?;
        Ok(enumerate_ports(space))
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn ports(&self) -> &[PortId] {
        &self.ports
    }

    pub fn port(&self, index: usize) -> &PortId {
        &self.ports[index]
    }

    /// Q, the total number of virtual ports.
    pub fn len(&self) -> usize {
        self.ports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ports.is_empty()
    }

    /// Ports touching pixel `(layer, row, col)`, ascending.
    pub fn adjacency(&self, layer: usize, row: usize, col: usize) -> &[usize] {
        &self.adjacency[self.space.pixel_index(layer, row, col)]
    }

    /// Looks up a port by anchor and side (0-based coordinates).
    pub fn find(&self, layer: usize, row: usize, col: usize, side: Side) -> Option<usize> {
        self.lookup.get(&(layer, row, col, side)).copied()
    }

    pub fn class_counts(&self) -> HashMap<PortClass, usize> {
        let mut counts = HashMap::new();
        for p in &self.ports {
            *counts.entry(p.class).or_insert(0) += 1;
        }
        counts
    }

    /// Network nodes excluding ground: all pixels, then all corners.
    pub fn node_count(&self) -> usize {
        self.space.layers * (self.space.pixels_per_layer() + self.space.corners_per_layer())
    }

    /// Dense index of a non-ground node, `None` for ground.
    pub fn node_index(&self, node: Node) -> Option<usize> {
        let s = &self.space;
        match node {
            Node::Pixel { layer, row, col } => Some(s.pixel_index(layer, row, col)),
            Node::Corner { layer, row, col } => Some(
                s.layers * s.pixels_per_layer()
                    + layer * s.corners_per_layer()
                    + row * (s.cols - 1)
                    + col,
            ),
            Node::Ground => None,
        }
    }

    /// Stable 64-bit fingerprint of the canonical port map.
    pub fn hash(&self) -> u64 {
        let mut buf = Vec::new();
        self.write_port_map(&mut buf).expect("writing to memory");
        let digest = Sha256::digest(&buf);
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn write_port_map<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{PORT_MAP_HEADER}")?;
        for p in &self.ports {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.index,
                p.class.as_str(),
                p.layer + 1,
                p.row + 1,
                p.col + 1,
                p.side.as_str(),
                p.node_a,
                p.node_b
            )?;
        }
        Ok(())
    }

    pub fn export_port_map(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_port_map(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Rebuilds a topology from its CSV port map. The design space is
    /// inferred from the rows and the result must match a fresh enumeration.
    pub fn parse_port_map(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == PORT_MAP_HEADER => {}
            _ => return Err(Error::MalformedInput("port map header missing".into())),
        }
        let mut parsed = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| {
                Error::MalformedInput(format!("port map line {}: {what}", lineno + 2))
            };
            if f.len() != 8 {
                return Err(bad("expected 8 fields"));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
            let one_based = |s: &str| match num(s)? {
                0 => Err(bad("coordinates are 1-based")),
                v => Ok(v - 1),
            };
            parsed.push(PortId {
                index: num(f[0])?,
                class: f[1].parse()?,
                layer: one_based(f[2])?,
                row: one_based(f[3])?,
                col: one_based(f[4])?,
                side: f[5].parse()?,
                node_a: f[6].parse()?,
                node_b: f[7].parse()?,
            });
        }
        if parsed.is_empty() {
            return Err(Error::MalformedInput("port map has no ports".into()));
        }
        let mut layers = 0;
        let mut rows = 0;
        let mut cols = 0;
        let mut has_vias = false;
        for p in &parsed {
            for node in [p.node_a, p.node_b] {
                if let Node::Pixel { layer, row, col } = node {
                    layers = layers.max(layer + 1);
                    rows = rows.max(row + 1);
                    cols = cols.max(col + 1);
                }
            }
            has_vias |= p.class == PortClass::Via;
        }
        let space = DesignSpace::new(layers, rows, cols, has_vias)?;
        let topo = enumerate_ports(&space);
        if topo.ports != parsed {
            return Err(Error::MalformedInput(format!(
                "port map is not the canonical enumeration of {space}"
            )));
        }
        Ok(topo)
    }

    pub fn read_port_map(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_port_map(&text)
    }
}

pub const PORT_MAP_HEADER: &str = "index,class,layer,anchor_i,anchor_j,side,node_a,node_b";

#[cfg(test)]
mod tests {
    use super::*;

    fn topo(m: usize, n: usize, l: usize, vias: bool) -> PortTopology {
        PortTopology::new(&DesignSpace::new(l, m, n, vias).unwrap()).unwrap()
    }

    #[test]
    fn published_port_counts() {
        assert_eq!(count_ports(&DesignSpace::single_layer(16, 16)), 1444);
        assert_eq!(count_ports(&DesignSpace::single_layer(17, 17)), 1636);
        assert_eq!(count_ports(&DesignSpace::new(2, 16, 16, true).unwrap()), 3144);
        assert_eq!(count_ports(&DesignSpace::single_layer(1, 1)), 4);
    }

    #[test]
    fn three_by_three_split() {
        let t = topo(3, 3, 1, false);
        assert_eq!(t.len(), 40);
        let c = t.class_counts();
        assert_eq!(c[&PortClass::HorizontalEdge], 6);
        assert_eq!(c[&PortClass::VerticalEdge], 6);
        assert_eq!(c[&PortClass::Diagonal], 16);
        assert_eq!(c[&PortClass::Ground], 12);
    }

    #[test]
    fn single_pixel_has_only_ground_ports() {
        let t = topo(1, 1, 1, false);
        assert_eq!(t.len(), 4);
        assert!(t.ports().iter().all(|p| p.class == PortClass::Ground));
        assert_eq!(t.adjacency(0, 0, 0), &[0, 1, 2, 3]);
    }

    #[test]
    fn two_layer_with_vias() {
        let t = topo(2, 2, 2, true);
        assert_eq!(t.len(), 36);
        assert_eq!(count_ports(t.space()), 36);
        let vias: Vec<_> = t.ports().iter().filter(|p| p.class == PortClass::Via).collect();
        assert_eq!(vias.len(), 4);
        // vias come last
        assert!(vias.iter().all(|p| p.index >= 32));
    }

    #[test]
    fn exhaustive_counts_match_formula() {
        for l in 1..=3 {
            for m in 1..=20 {
                for n in 1..=20 {
                    for vias in [false, true] {
                        if vias && l < 2 {
                            continue;
                        }
                        let space = DesignSpace::new(l, m, n, vias).unwrap();
                        let t = enumerate_ports(&space);
                        assert_eq!(t.len(), count_ports(&space), "{space}");
                        assert!(t.ports().iter().enumerate().all(|(k, p)| p.index == k));
                    }
                }
            }
        }
    }

    #[test]
    fn corner_pixels_own_two_ground_ports() {
        let t = topo(4, 5, 1, false);
        let grounds = |i, j| {
            t.adjacency(0, i, j)
                .iter()
                .filter(|&&p| t.port(p).class == PortClass::Ground)
                .count()
        };
        assert_eq!(grounds(0, 0), 2);
        assert_eq!(grounds(3, 4), 2);
        assert_eq!(grounds(0, 2), 1);
        assert_eq!(grounds(2, 2), 0);
    }

    #[test]
    fn adjacency_covers_each_port_by_its_pixels() {
        let t = topo(4, 3, 2, true);
        let mut seen = vec![0usize; t.len()];
        for l in 0..2 {
            for i in 0..4 {
                for j in 0..3 {
                    for &p in t.adjacency(l, i, j) {
                        seen[p] += 1;
                    }
                }
            }
        }
        for p in t.ports() {
            let expect = match p.class {
                PortClass::HorizontalEdge | PortClass::VerticalEdge | PortClass::Via => 2,
                PortClass::Diagonal | PortClass::Ground => 1,
            };
            assert_eq!(seen[p.index], expect, "{p:?}");
        }
    }

    #[test]
    fn port_map_round_trip() {
        for t in [topo(3, 3, 1, false), topo(1, 1, 1, false), topo(2, 3, 3, true)] {
            let mut buf = Vec::new();
            t.write_port_map(&mut buf).unwrap();
            let text = String::from_utf8(buf).unwrap();
            assert_eq!(text.lines().count(), t.len() + 1);
            assert!(!text.contains('\r'));
            let back = PortTopology::parse_port_map(&text).unwrap();
            assert_eq!(back, t);
            assert_eq!(back.hash(), t.hash());
        }
    }

    #[test]
    fn port_map_rejects_tampering() {
        let t = topo(2, 2, 1, false);
        let mut buf = Vec::new();
        t.write_port_map(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("horizontal", "vertical", 1);
        assert!(PortTopology::parse_port_map(&text).is_err());
    }

    #[test]
    fn hash_distinguishes_spaces() {
        assert_ne!(topo(3, 3, 1, false).hash(), topo(3, 4, 1, false).hash());
        assert_ne!(topo(2, 2, 2, false).hash(), topo(2, 2, 2, true).hash());
    }

    #[test]
    fn node_census() {
        let t = topo(2, 2, 1, false);
        assert_eq!(t.node_count(), 5);
        assert_eq!(t.node_index(Node::Corner { layer: 0, row: 0, col: 0 }), Some(4));
        assert_eq!(t.node_index(Node::Ground), None);
    }

    #[test]
    fn frequency_spec_parsing() {
        let g: FrequencyGrid = "1G:2GHz:3".parse().unwrap();
        assert_eq!(g.as_slice(), &[1e9, 1.5e9, 2e9]);
        assert!("2e9:1e9:3".parse::<FrequencyGrid>().is_err());
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(DesignSpace::new(1, 2, 2, true).is_err());
    }
}
