use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use mapes_core::c64;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const JOBS_ENV: &str = "MAPES_JOBS";

/// Every option a command can take. Values left unset fall back to the
/// config file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat `key = value` file using the long flag names as keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub rows: Option<usize>,
    #[arg(long, global = true)]
    pub cols: Option<usize>,
    #[arg(long, global = true)]
    pub layers: Option<usize>,
    /// Include inter-layer via ports.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub vias: Option<bool>,

    /// Frequency sweep as start:stop:points, e.g. 1G:40G:41.
    #[arg(long, global = true)]
    pub freq: Option<String>,
    /// Comma-separated port indices or layer/row/col/side descriptors.
    #[arg(long, global = true)]
    pub io: Option<String>,
    /// Permit I/O on non-ground ports.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub allow_any_io: Option<bool>,
    /// Via load impedance as re,im in ohms.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub via_z: Option<Complex>,
    #[arg(long, global = true)]
    pub ref_ohms: Option<f64>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub density: Option<f64>,
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true)]
    pub shard_size: Option<usize>,
    /// Scale of the synthetic parasitic coupling.
    #[arg(long, global = true)]
    pub parasitic: Option<f64>,

    /// Worker pool size.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Clear vias over missing pixels instead of rejecting the pattern.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub coerce_vias: Option<bool>,

    /// Prior file: binary cache or Touchstone.
    #[arg(long, global = true)]
    pub prior: Option<PathBuf>,
    /// Synthetic network JSON written by gen-prior.
    #[arg(long, global = true)]
    pub network: Option<PathBuf>,
    /// Pattern file: JSON lines, concatenated objects or an array.
    #[arg(long, global = true)]
    pub patterns: Option<PathBuf>,
    /// Stored responses to compare against instead of the oracle.
    #[arg(long, global = true)]
    pub reference: Option<PathBuf>,
    /// Output format: json, touchstone, table or cache depending on the command.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Response representation for eval: s or z.
    #[arg(long, global = true)]
    pub repr: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex(pub f64, pub f64);

impl FromStr for Complex {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number `{t}` in `{s}`"));
        match parts.as_slice() {
            [re] => Ok(Complex(num(re)?, 0.0)),
            [re, im] => Ok(Complex(num(re)?, num(im)?)),
            _ => Err(format!("`{s}` must look like re,im")),
        }
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

impl From<Complex> for c64 {
    fn from(z: Complex) -> c64 {
        c64::new(z.0, z.1)
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub layers: usize,
    pub vias: bool,
    pub freq: String,
    pub io: Option<String>,
    pub allow_any_io: bool,
    pub via_z: Complex,
    pub ref_ohms: f64,
    pub seed: u64,
    pub density: f64,
    pub count: usize,
    pub shard_size: usize,
    pub parasitic: f64,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub coerce_vias: bool,
    pub prior: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub format: Option<String>,
    pub repr: String,
}

const KEYS: &[&str] = &[
    "rows", "cols", "layers", "vias", "freq", "io", "allow-any-io", "via-z", "ref-ohms", "seed",
    "density", "count", "shard-size", "parasitic", "jobs", "out", "coerce-vias", "prior",
    "network", "patterns", "reference", "format", "repr",
];

/// Parses `key = value` lines. `#` starts a comment; keys may use `-` or `_`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", n + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(map)
}

struct Layers<'a> {
    file: &'a BTreeMap<String, String>,
}

impl Layers<'_> {
    fn get<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))),
        }
    }
}

fn default_jobs() -> Result<usize, CliError> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{JOBS_ENV}=`{v}` is not a worker count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

impl RunConfig {
    /// Flags win over the config file, which wins over `MAPES_JOBS` and the
    /// built-in defaults.
    pub fn resolve(flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Core(mapes_core::Error::io(path, e)))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let l = Layers { file: &file };
        let jobs = match l.get(flags.jobs, "jobs")? {
            Some(j) => j,
            None => default_jobs()?,
        };
        Ok(RunConfig {
            rows: l.get(flags.rows, "rows")?,
            cols: l.get(flags.cols, "cols")?,
            layers: l.get(flags.layers, "layers")?.unwrap_or(1),
            vias: l.get(flags.vias, "vias")?.unwrap_or(false),
            freq: l.get(flags.freq, "freq")?.unwrap_or_else(|| "1G:40G:41".into()),
            io: l.get(flags.io, "io")?,
            allow_any_io: l.get(flags.allow_any_io, "allow-any-io")?.unwrap_or(false),
            via_z: l.get(flags.via_z, "via-z")?.unwrap_or(Complex(0.0, 0.0)),
            ref_ohms: l.get(flags.ref_ohms, "ref-ohms")?.unwrap_or(mapes_core::solver::DEFAULT_REF_OHMS),
            seed: l.get(flags.seed, "seed")?.unwrap_or(0),
            density: l.get(flags.density, "density")?.unwrap_or(0.5),
            count: l.get(flags.count, "count")?.unwrap_or(100),
            shard_size: l.get(flags.shard_size, "shard-size")?.unwrap_or(1000),
            parasitic: l.get(flags.parasitic, "parasitic")?.unwrap_or(0.0),
            jobs,
            out: l.get(flags.out, "out")?,
            coerce_vias: l.get(flags.coerce_vias, "coerce-vias")?.unwrap_or(false),
            prior: l.get(flags.prior, "prior")?,
            network: l.get(flags.network, "network")?,
            patterns: l.get(flags.patterns, "patterns")?,
            reference: l.get(flags.reference, "reference")?,
            format: l.get(flags.format, "format")?,
            repr: l.get(flags.repr, "repr")?.unwrap_or_else(|| "s".into()),
        })
    }

    /// The config in the same flat format `--config` reads. Output paths
    /// and the worker count are left out since they never change results.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        if let Some(r) = self.rows {
            put("rows", r.to_string());
        }
        if let Some(c) = self.cols {
            put("cols", c.to_string());
        }
        put("layers", self.layers.to_string());
        put("vias", self.vias.to_string());
        put("freq", self.freq.clone());
        if let Some(io) = &self.io {
            put("io", io.clone());
        }
        put("allow-any-io", self.allow_any_io.to_string());
        put("via-z", self.via_z.to_string());
        put("ref-ohms", self.ref_ohms.to_string());
        put("seed", self.seed.to_string());
        put("density", self.density.to_string());
        put("count", self.count.to_string());
        put("shard-size", self.shard_size.to_string());
        put("parasitic", self.parasitic.to_string());
        put("coerce-vias", self.coerce_vias.to_string());
        s
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        value
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
    }
}
