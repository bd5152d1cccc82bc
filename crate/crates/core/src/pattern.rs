//! Pixel/via patterns, I/O port selection and the pattern-to-load mapping.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::c64;
use crate::topology::{DesignSpace, PortClass, PortTopology, Side};

/// Binary M x N x (2L - 1) occupancy tensor: L pixel slices followed by
/// L - 1 via slices (via slice `v` joins layers `v` and `v + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelPattern {
    space: DesignSpace,
    pixels: Vec<bool>,
    vias: Vec<bool>,
}

impl PixelPattern {
    pub fn all_present(space: &DesignSpace) -> Self {
        Self::filled(space, true)
    }

    pub fn all_absent(space: &DesignSpace) -> Self {
        Self::filled(space, false)
    }

    fn filled(space: &DesignSpace, value: bool) -> Self {
        PixelPattern {
            space: space.clone(),
            pixels: vec![value; space.layers * space.pixels_per_layer()],
            vias: vec![value; space.via_layers() * space.pixels_per_layer()],
        }
    }

    /// Builds a pattern from flat layer-major, row-major bit vectors.
    pub fn new(space: &DesignSpace, pixels: Vec<bool>, vias: Vec<bool>) -> Result<Self> {
        let per_layer = space.pixels_per_layer();
        if pixels.len() != space.layers * per_layer {
            return Err(Error::DimensionMismatch(format!(
                "expected {} pixel bits, got {}",
                space.layers * per_layer,
                pixels.len()
            )));
        }
        if vias.len() != space.via_layers() * per_layer {
            return Err(Error::DimensionMismatch(format!(
                "expected {} via bits, got {}",
                space.via_layers() * per_layer,
                vias.len()
            )));
        }
        let p = PixelPattern {
            space: space.clone(),
            pixels,
            vias,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn pixel(&self, layer: usize, row: usize, col: usize) -> bool {
        self.pixels[self.space.pixel_index(layer, row, col)]
    }

    pub fn set_pixel(&mut self, layer: usize, row: usize, col: usize, present: bool) {
        let k = self.space.pixel_index(layer, row, col);
        self.pixels[k] = present;
    }

    /// Via between `layer` and `layer + 1`. Always false without via ports.
    pub fn via(&self, layer: usize, row: usize, col: usize) -> bool {
        if layer >= self.space.via_layers() {
            return false;
        }
        self.vias[self.space.pixel_index(layer, row, col)]
    }

    pub fn set_via(&mut self, layer: usize, row: usize, col: usize, present: bool) {
        let k = self.space.pixel_index(layer, row, col);
        self.vias[k] = present;
    }

    /// Entry of the full tensor; `slice` runs over 0..2L-1.
    pub fn entry(&self, row: usize, col: usize, slice: usize) -> bool {
        if slice < self.space.layers {
            self.pixel(slice, row, col)
        } else {
            self.via(slice - self.space.layers, row, col)
        }
    }

    pub fn present_pixels(&self) -> usize {
        self.pixels.iter().filter(|&&b| b).count()
    }

    pub fn present_vias(&self) -> usize {
        self.vias.iter().filter(|&&b| b).count()
    }

    /// Vias sitting on a missing pixel, as 1-based `(row, col, slice)` where
    /// `slice` indexes the full 2L-1 tensor.
    pub fn via_violations(&self) -> Vec<(usize, usize, usize)> {
        let s = &self.space;
        let mut out = Vec::new();
        for v in 0..s.via_layers() {
            for i in 0..s.rows {
                for j in 0..s.cols {
                    if self.via(v, i, j) && !(self.pixel(v, i, j) && self.pixel(v + 1, i, j)) {
                        out.push((i + 1, j + 1, s.layers + v + 1));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let sites = self.via_violations();
        if sites.is_empty() {
            Ok(())
        } else {
            Err(Error::ViaConstraintViolation { sites })
        }
    }

    /// Clears every via that violates the overlap rule; returns how many.
    pub fn drop_invalid_vias(&mut self) -> usize {
        let s = self.space.clone();
        let mut dropped = 0;
        for v in 0..s.via_layers() {
            for i in 0..s.rows {
                for j in 0..s.cols {
                    if self.via(v, i, j) && !(self.pixel(v, i, j) && self.pixel(v + 1, i, j)) {
                        self.set_via(v, i, j, false);
                        dropped += 1;
                    }
                }
            }
        }
        dropped
    }

    /// Elementwise `self <= other`.
    pub fn is_subset_of(&self, other: &PixelPattern) -> bool {
        self.pixels.iter().zip(&other.pixels).all(|(a, b)| !a || *b)
            && self.vias.iter().zip(&other.vias).all(|(a, b)| !a || *b)
    }

    pub fn to_json_value(&self, id: Option<&Value>) -> Value {
        let s = &self.space;
        let slab = |bits: &[bool], l: usize| -> Vec<Vec<u8>> {
            (0..s.rows)
                .map(|i| {
                    (0..s.cols)
                        .map(|j| bits[s.pixel_index(l, i, j)] as u8)
                        .collect()
                })
                .collect()
        };
        let mut obj = serde_json::Map::new();
        if let Some(id) = id {
            obj.insert("id".into(), id.clone());
        }
        obj.insert("rows".into(), s.rows.into());
        obj.insert("cols".into(), s.cols.into());
        obj.insert("layers".into(), s.layers.into());
        let pixels: Vec<_> = (0..s.layers).map(|l| slab(&self.pixels, l)).collect();
        obj.insert("pixels".into(), serde_json::to_value(pixels).unwrap());
        if s.has_vias {
            let vias: Vec<_> = (0..s.via_layers()).map(|l| slab(&self.vias, l)).collect();
            obj.insert("vias".into(), serde_json::to_value(vias).unwrap());
        }
        Value::Object(obj)
    }

    pub fn to_json(&self) -> String {
        self.to_json_value(None).to_string()
    }
}

/// Options for [`parse_pattern`].
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Expected design space; dimensions must match when given. It also
    /// decides whether the pattern carries via slices.
    pub space: Option<DesignSpace>,
    /// Zero out vias over missing pixels instead of failing.
    pub coerce_vias: bool,
}

#[derive(Debug, Clone)]
pub struct ParsedPattern {
    pub id: Option<Value>,
    pub pattern: PixelPattern,
    pub warnings: Vec<String>,
}

/// Parses one pattern object:
/// `{"rows": M, "cols": N, "layers": L, "pixels": [...], "vias": [...]}`.
/// `layers` defaults to 1.
///
/// `pixels` holds one M x N slab per layer and `vias` one per adjacent layer
/// pair. A slab may be nested (`[[0,1],[1,1]]`) or flat row-major. A
/// single-layer pattern may also give its one slab directly.
pub fn parse_pattern(text: &str, opts: &ParseOptions) -> Result<ParsedPattern> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::MalformedInput(format!("pattern JSON: {e}")))?;
    pattern_from_value(&value, opts)
}

/// Parses every pattern object in `text` (JSON lines, concatenated objects or
/// a top-level array), preserving order.
pub fn parse_pattern_batch(text: &str, opts: &ParseOptions) -> Result<Vec<ParsedPattern>> {
    let mut out = Vec::new();
    for value in serde_json::Deserializer::from_str(text).into_iter::<Value>() {
        let value = value.map_err(|e| Error::MalformedInput(format!("pattern JSON: {e}")))?;
        match value {
            Value::Array(items) => {
                for v in &items {
                    out.push(pattern_from_value(v, opts)?);
                }
            }
            v => out.push(pattern_from_value(&v, opts)?),
        }
    }
    Ok(out)
}

pub fn read_patterns(path: &Path, opts: &ParseOptions) -> Result<Vec<ParsedPattern>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pattern_batch(&text, opts)
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
struct PatternDoc {
    #[serde(default)]
    id: Option<Value>,
    rows: usize,
    cols: usize,
    #[serde(default = "one")]
    layers: usize,
    pixels: Value,
    #[serde(default)]
    vias: Option<Value>,
}

fn pattern_from_value(value: &Value, opts: &ParseOptions) -> Result<ParsedPattern> {
    let doc: PatternDoc = serde_json::from_value(value.clone())
        .map_err(|e| Error::MalformedInput(format!("pattern: {e}")))?;
    let has_vias = match &opts.space {
        Some(s) => s.has_vias,
        None => doc.vias.is_some() && doc.layers >= 2,
    };
    let space = DesignSpace::new(doc.layers, doc.rows, doc.cols, has_vias)
        .map_err(|e| Error::MalformedInput(e.to_string()))?;
    if let Some(expected) = &opts.space {
        if !expected.same_grid(&space) {
            return Err(Error::DimensionMismatch(format!(
                "pattern is {space}, design space is {expected}"
            )));
        }
    }
    let per_layer = space.pixels_per_layer();
    let pixels = read_slabs(&doc.pixels, space.layers, space.rows, space.cols, "pixels")?;
    let vias = match (&doc.vias, space.has_vias) {
        (Some(v), true) => read_slabs(v, space.via_layers(), space.rows, space.cols, "vias")?,
        (None, _) => vec![false; space.via_layers() * per_layer],
        (Some(v), false) => {
            let bits = read_slabs(v, doc.layers.saturating_sub(1), doc.rows, doc.cols, "vias")?;
            if bits.iter().any(|&b| b) {
                return Err(Error::MalformedInput(
                    "pattern sets vias but the design space has no via ports".into(),
                ));
            }
            Vec::new()
        }
    };
    let mut pattern = PixelPattern {
        space,
        pixels,
        vias,
    };
    let mut warnings = Vec::new();
    let violations = pattern.via_violations();
    if !violations.is_empty() {
        if !opts.coerce_vias {
            return Err(Error::ViaConstraintViolation { sites: violations });
        }
        pattern.drop_invalid_vias();
        let msg = format!(
            "dropped {} via(s) over missing pixels: {:?}",
            violations.len(),
            violations
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(ParsedPattern {
        id: doc.id,
        pattern,
        warnings,
    })
}

fn read_slabs(v: &Value, count: usize, rows: usize, cols: usize, what: &str) -> Result<Vec<bool>> {
    let bad = |msg: String| Error::MalformedInput(format!("{what}: {msg}"));
    let arr = v.as_array().ok_or_else(|| bad("expected an array".into()))?;
    // A single slab given without the outer per-layer array.
    let single_nested = count == 1
        && arr.len() == rows
        && arr.iter().all(|r| r.as_array().is_some_and(|r| r.iter().all(is_bit)));
    let single_flat = count == 1 && arr.len() == rows * cols && arr.iter().all(is_bit);
    let slabs: Vec<&Value> = if single_nested || single_flat {
        vec![v]
    } else {
        arr.iter().collect()
    };
    if slabs.len() != count {
        return Err(bad(format!("expected {count} slab(s), got {}", slabs.len())));
    }
    let mut bits = Vec::with_capacity(count * rows * cols);
    for slab in slabs {
        let flat: Vec<&Value> = match slab.as_array() {
            Some(a) if a.len() == rows * cols && a.iter().all(is_bit) => a.iter().collect(),
            Some(a) if a.len() == rows => {
                let mut out = Vec::with_capacity(rows * cols);
                for r in a {
                    let r = r.as_array().filter(|r| r.len() == cols).ok_or_else(|| {
                        bad(format!("each row must hold {cols} entries"))
                    })?;
                    out.extend(r.iter());
                }
                out
            }
            _ => return Err(bad(format!("each slab must be {rows}x{cols}"))),
        };
        for b in flat {
            bits.push(bit(b).ok_or_else(|| bad(format!("entries must be 0 or 1, got {b}")))?);
        }
    }
    Ok(bits)
}

fn is_bit(v: &Value) -> bool {
    bit(v).is_some()
}

fn bit(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::Number(n) => match n.as_u64() {
            Some(0) => Some(false),
            Some(1) => Some(true),
            _ => None,
        },
        _ => None,
    }
}

/// i.i.d. Bernoulli(`density`) pixels; vias drawn with the same density and
/// then masked by the overlap rule. Reproducible per seed.
pub fn random_pattern(space: &DesignSpace, density: f64, seed: u64) -> PixelPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pattern_with(space, density, &mut rng)
}

pub fn random_pattern_with<R: Rng>(space: &DesignSpace, density: f64, rng: &mut R) -> PixelPattern {
    let density = density.clamp(0.0, 1.0);
    let mut p = PixelPattern::all_absent(space);
    for b in p.pixels.iter_mut() {
        *b = rng.random_bool(density);
    }
    for b in p.vias.iter_mut() {
        *b = rng.random_bool(density);
    }
    p.drop_invalid_vias();
    p
}

/// Ordered, duplicate-free list of I/O port indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IoSelection(Vec<usize>);

impl IoSelection {
    /// Validates `ports` against `topo`. Unless `allow_any`, every port must
    /// be a ground port.
    pub fn new(ports: Vec<usize>, topo: &PortTopology, allow_any: bool) -> Result<Self> {
        let q = topo.len();
        if ports.is_empty() || ports.len() >= q {
            return Err(Error::InvalidIo(format!(
                "need 1 <= K < Q ports (K = {}, Q = {q})",
                ports.len()
            )));
        }
        let mut seen = HashSet::new();
        for &p in &ports {
            if p >= q {
                return Err(Error::InvalidIo(format!("port {p} out of range (Q = {q})")));
            }
            if !seen.insert(p) {
                return Err(Error::InvalidIo(format!("port {p} listed twice")));
            }
            let class = topo.port(p).class;
            if !allow_any && class != PortClass::Ground {
                return Err(Error::InvalidIo(format!(
                    "port {p} is a {} port; only ground ports may be I/O (use the expert override)",
                    class.as_str()
                )));
            }
        }
        Ok(IoSelection(ports))
    }

    /// Parses a comma-separated list. Each item is either a raw port index or
    /// a `layer/row/col/side` descriptor with 1-based coordinates, e.g.
    /// `1/1/1/W` for the west ground port of the top-left pixel.
    pub fn parse(spec: &str, topo: &PortTopology, allow_any: bool) -> Result<Self> {
        let mut ports = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let port = if item.contains('/') {
                let parts: Vec<&str> = item.split('/').collect();
                if parts.len() != 4 {
                    return Err(Error::InvalidIo(format!(
                        "descriptor `{item}` must be layer/row/col/side"
                    )));
                }
                let num = |s: &str| -> Result<usize> {
                    match s.parse::<usize>() {
                        Ok(v) if v >= 1 => Ok(v - 1),
                        _ => Err(Error::InvalidIo(format!("bad coordinate `{s}` in `{item}`"))),
                    }
                };
                let side: Side = parts[3]
                    .parse()
                    .map_err(|_| Error::InvalidIo(format!("bad side in `{item}`")))?;
                topo.find(num(parts[0])?, num(parts[1])?, num(parts[2])?, side)
                    .ok_or_else(|| Error::InvalidIo(format!("no port at `{item}`")))?
            } else {
                item.parse::<usize>()
                    .map_err(|_| Error::InvalidIo(format!("bad port `{item}`")))?
            };
            ports.push(port);
        }
        Self::new(ports, topo, allow_any)
    }

    pub fn ports(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, port: usize) -> bool {
        self.0.contains(&port)
    }

    /// Ports not in the selection, ascending.
    pub fn complement(&self, q: usize) -> Vec<usize> {
        let io: HashSet<usize> = self.0.iter().copied().collect();
        (0..q).filter(|p| !io.contains(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadState {
    Short,
    Open,
    Finite(c64),
}

impl LoadState {
    /// Load impedance, `None` for an open circuit.
    pub fn impedance(self) -> Option<c64> {
        match self {
            LoadState::Short => Some(c64::new(0.0, 0.0)),
            LoadState::Open => None,
            LoadState::Finite(z) => Some(z),
        }
    }
}

/// Loads on the Q - K non-I/O ports, keyed by original port index.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadAssignment {
    io: IoSelection,
    ports: Vec<usize>,
    states: Vec<LoadState>,
}

impl LoadAssignment {
    /// `ports` must be the ascending complement of `io`.
    pub fn new(io: IoSelection, ports: Vec<usize>, states: Vec<LoadState>) -> Result<Self> {
        if ports.len() != states.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} ports but {} load states",
                ports.len(),
                states.len()
            )));
        }
        if ports.windows(2).any(|w| w[0] >= w[1]) || ports.iter().any(|&p| io.contains(p)) {
            return Err(Error::DimensionMismatch(
                "load ports must be ascending and disjoint from the I/O ports".into(),
            ));
        }
        Ok(LoadAssignment { io, ports, states })
    }

    pub fn io(&self) -> &IoSelection {
        &self.io
    }

    pub fn ports(&self) -> &[usize] {
        &self.ports
    }

    pub fn states(&self) -> &[LoadState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, port: usize) -> Option<LoadState> {
        self.ports
            .binary_search(&port)
            .ok()
            .map(|k| self.states[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, LoadState)> + '_ {
        self.ports.iter().copied().zip(self.states.iter().copied())
    }

    /// I/O ports first (selection order), then the loaded ports ascending.
    pub fn permutation(&self) -> Vec<usize> {
        self.io.ports().iter().chain(&self.ports).copied().collect()
    }

    /// `(short, open, finite)` counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        self.states.iter().fold((0, 0, 0), |(s, o, f), st| match st {
            LoadState::Short => (s + 1, o, f),
            LoadState::Open => (s, o + 1, f),
            LoadState::Finite(_) => (s, o, f + 1),
        })
    }

    /// Replaces the state of one port.
    pub fn set(&mut self, port: usize, state: LoadState) -> Result<()> {
        let k = self
            .ports
            .binary_search(&port)
            .map_err(|_| Error::DimensionMismatch(format!("port {port} carries no load")))?;
        self.states[k] = state;
        Ok(())
    }
}

/// Maps a pattern to port loads.
///
/// Non-I/O ground ports are opened. Edge and diagonal ports start shorted and
/// open when any pixel they touch is absent. Via ports carry `via_z` (a short
/// when zero) if the via is present and are open otherwise.
pub fn map_to_loads(
    pattern: &PixelPattern,
    topo: &PortTopology,
    io: &IoSelection,
    via_z: c64,
) -> Result<LoadAssignment> {
    if !pattern.space().same_grid(topo.space()) {
        return Err(Error::DimensionMismatch(format!(
            "pattern is {}, topology is {}",
            pattern.space(),
            topo.space()
        )));
    }
    if let Some(&p) = io.ports().iter().find(|&&p| p >= topo.len()) {
        return Err(Error::DimensionMismatch(format!(
            "I/O port {p} out of range (Q = {})",
            topo.len()
        )));
    }
    pattern.validate()?;

    let ports = io.complement(topo.len());
    let states = ports
        .iter()
        .map(|&idx| {
            let port = topo.port(idx);
            match port.class {
                PortClass::Ground => LoadState::Open,
                PortClass::HorizontalEdge | PortClass::VerticalEdge | PortClass::Diagonal => {
                    if port.pixels().all(|(l, i, j)| pattern.pixel(l, i, j)) {
                        LoadState::Short
                    } else {
                        LoadState::Open
                    }
                }
                PortClass::Via => {
                    if !pattern.via(port.layer, port.row, port.col) {
                        LoadState::Open
                    } else if via_z == c64::new(0.0, 0.0) {
                        LoadState::Short
                    } else {
                        LoadState::Finite(via_z)
                    }
                }
            }
        })
        .collect();
    LoadAssignment::new(io.clone(), ports, states)
}
