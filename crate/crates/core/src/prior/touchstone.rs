//! Touchstone v1 reader/writer for S- and Z-parameter data.
//!
//! Reading accepts RI, MA and DB number formats and any frequency unit. The
//! port count is inferred from the data layout (a line holding an odd number
//! of values starts a new frequency block) and cross-checked against an
//! `.sNp`/`.zNp` extension when there is one. Z data is stored normalized to
//! the reference resistance, as Touchstone v1 prescribes.
//!
//! Writing always emits `# HZ <S|Z> RI R <ref>` with shortest round-trip
//! float formatting.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};
use crate::solver::{s_to_z_matrix, z_to_s_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    S,
    Z,
}

impl ParamKind {
    pub fn letter(self) -> char {
        match self {
            ParamKind::S => 'S',
            ParamKind::Z => 'Z',
        }
    }
}

impl std::str::FromStr for ParamKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(ParamKind::S),
            "Z" => Ok(ParamKind::Z),
            other => Err(Error::UnsupportedFormat(format!("parameter type `{other}`"))),
        }
    }
}

/// N-port data with Z in ohms (never normalized in memory).
#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub kind: ParamKind,
    pub ref_ohms: f64,
    pub freqs: Vec<f64>,
    pub data: Vec<CMatrix>,
}

#[derive(Debug, Clone, Copy)]
enum NumberFormat {
    Ri,
    Ma,
    Db,
}

impl Touchstone {
    pub fn new(kind: ParamKind, ref_ohms: f64, freqs: Vec<f64>, data: Vec<CMatrix>) -> Result<Self> {
        if !(ref_ohms.is_finite() && ref_ohms > 0.0) {
            return Err(Error::MalformedInput(format!(
                "reference impedance must be positive, got {ref_ohms}"
            )));
        }
        if freqs.len() != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequencies but {} matrices",
                freqs.len(),
                data.len()
            )));
        }
        let n = data.first().map_or(0, |m| m.nrows());
        if data.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::DimensionMismatch("matrices must all be square and equal-sized".into()));
        }
        Ok(Touchstone {
            kind,
            ref_ohms,
            freqs,
            data,
        })
    }

    pub fn ports(&self) -> usize {
        self.data.first().map_or(0, |m| m.nrows())
    }

    /// Converts to `kind` with a uniform real reference impedance.
    pub fn into_kind(self, kind: ParamKind) -> Result<Self> {
        if kind == self.kind {
            return Ok(self);
        }
        let z0 = self.ref_ohms;
        let data = self
            .data
            .iter()
            .zip(&self.freqs)
            .map(|(m, &f)| match kind {
                ParamKind::Z => s_to_z_matrix(m, z0, f),
                ParamKind::S => z_to_s_matrix(m, z0, f),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Touchstone {
            kind,
            data,
            ..self
        })
    }

    /// Conventional file extension, e.g. `s2p` or `z1444p`.
    pub fn extension(&self) -> String {
        format!("{}{}p", self.kind.letter().to_ascii_lowercase(), self.ports())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let hinted = path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(ports_from_extension);
        let ts = Self::parse(&text)?;
        if let Some(n) = hinted {
            if n != ts.ports() {
                return Err(Error::PortCountMismatch {
                    expected: n,
                    found: ts.ports(),
                });
            }
        }
        Ok(ts)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut unit = 1e9;
        let mut kind = ParamKind::S;
        let mut format = NumberFormat::Ma;
        let mut ref_ohms = 50.0;
        let mut seen_option = false;
        let mut blocks: Vec<Vec<f64>> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('!').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                return Err(Error::UnsupportedFormat(
                    "Touchstone v2 keywords are not supported".into(),
                ));
            }
            if let Some(opts) = line.strip_prefix('#') {
                if seen_option {
                    continue;
                }
                seen_option = true;
                let toks: Vec<String> = opts.split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
                let mut k = 0;
                while k < toks.len() {
                    match toks[k].as_str() {
                        "HZ" => unit = 1.0,
                        "KHZ" => unit = 1e3,
                        "MHZ" => unit = 1e6,
                        "GHZ" => unit = 1e9,
                        "S" => kind = ParamKind::S,
                        "Z" => kind = ParamKind::Z,
                        "Y" | "H" | "G" => {
                            return Err(Error::UnsupportedFormat(format!(
                                "{}-parameters are not supported",
                                toks[k]
                            )))
                        }
                        "RI" => format = NumberFormat::Ri,
                        "MA" => format = NumberFormat::Ma,
                        "DB" => format = NumberFormat::Db,
                        "R" => {
                            k += 1;
                            ref_ohms = toks.get(k).and_then(|t| t.parse().ok()).ok_or_else(|| {
                                Error::MalformedInput("option line: R needs a value".into())
                            })?;
                        }
                        other => {
                            return Err(Error::UnsupportedFormat(format!("option `{other}`")))
                        }
                    }
                    k += 1;
                }
                continue;
            }
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| {
                    Error::MalformedInput(format!("line {}: non-numeric data", lineno + 1))
                })?;
            if values.len() % 2 == 1 {
                blocks.push(values);
            } else {
                blocks
                    .last_mut()
                    .ok_or_else(|| {
                        Error::MalformedInput(format!("line {}: data before a frequency", lineno + 1))
                    })?
                    .extend(values);
            }
        }

        if blocks.is_empty() {
            return Err(Error::MalformedInput("no network data".into()));
        }
        let pairs = (blocks[0].len() - 1) / 2;
        let n = (pairs as f64).sqrt().round() as usize;
        if n == 0 || n * n != pairs {
            return Err(Error::MalformedInput(format!(
                "{pairs} values per frequency is not a square port count"
            )));
        }
        let scale = if kind == ParamKind::Z { ref_ohms } else { 1.0 };
        let mut freqs = Vec::with_capacity(blocks.len());
        let mut data = Vec::with_capacity(blocks.len());
        for (b, block) in blocks.iter().enumerate() {
            if block.len() != 1 + 2 * n * n {
                return Err(Error::MalformedInput(format!(
                    "frequency block {b} has {} values, expected {}",
                    block.len(),
                    1 + 2 * n * n
                )));
            }
            let f = block[0] * unit;
            if let Some(&prev) = freqs.last() {
                if f <= prev {
                    return Err(Error::NonIncreasingFrequencies { index: b, value: f });
                }
            }
            freqs.push(f);
            let mut m = CMatrix::zeros(n, n);
            for k in 0..n * n {
                let (a, c) = (block[1 + 2 * k], block[2 + 2 * k]);
                let v = match format {
                    NumberFormat::Ri => c64::new(a, c),
                    NumberFormat::Ma => c64::from_polar(a, c.to_radians()),
                    NumberFormat::Db => c64::from_polar(10f64.powf(a / 20.0), c.to_radians()),
                };
                let (i, j) = if n == 2 { (k % 2, k / 2) } else { (k / n, k % n) };
                m[(i, j)] = v * scale;
            }
            data.push(m);
        }
        Touchstone::new(kind, ref_ohms, freqs, data)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.ports();
        writeln!(w, "! {n}-port {}-parameters", self.kind.letter())?;
        writeln!(w, "# HZ {} RI R {}", self.kind.letter(), self.ref_ohms)?;
        let scale = if self.kind == ParamKind::Z { 1.0 / self.ref_ohms } else { 1.0 };
        let mut line = String::new();
        for (f, m) in self.freqs.iter().zip(&self.data) {
            line.clear();
            write!(line, "{f:e}").unwrap();
            let pair = |line: &mut String, v: c64| {
                let v = v * scale;
                write!(line, " {:e} {:e}", v.re, v.im).unwrap();
            };
            match n {
                1 => pair(&mut line, m[(0, 0)]),
                2 => {
                    for (i, j) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        pair(&mut line, m[(i, j)]);
                    }
                }
                _ => {
                    for i in 0..n {
                        for j in 0..n {
                            if j > 0 && j % 4 == 0 {
                                writeln!(w, "{line}")?;
                                line.clear();
                            }
                            pair(&mut line, m[(i, j)]);
                        }
                        writeln!(w, "{line}")?;
                        line.clear();
                    }
                }
            }
            if !line.is_empty() {
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn ports_from_extension(ext: &str) -> Option<usize> {
    let ext = ext.to_ascii_lowercase();
    let rest = ext.strip_prefix('s').or_else(|| ext.strip_prefix('z'))?;
    rest.strip_suffix('p')?.parse().ok()
}
