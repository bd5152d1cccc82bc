use std::io::Write;
use std::path::Path;

use log::{info, warn};
use mapes_core::dataset::{generate_dataset, DatasetConfig};
use mapes_core::engine::Engine;
use mapes_core::metrics::{compare_report, ReportFormat};
use mapes_core::pattern::{read_patterns, IoSelection, ParseOptions, ParsedPattern, PixelPattern};
use mapes_core::prior::{load_prior, ParamKind, RECIPROCITY_TOL};
use mapes_core::synth::{generate, SynthParams, SyntheticNetwork};
use mapes_core::topology::{enumerate_ports, DesignSpace, FrequencyGrid, PortTopology};
use mapes_core::{Error, NetworkResponse, PriorData};
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

pub const NETWORK_FILE: &str = "network.json";
pub const CACHE_FILE: &str = "prior.mapz";
pub const RUN_CONFIG_FILE: &str = "run-config.txt";

type Result<T> = std::result::Result<T, CliError>;

fn space(cfg: &RunConfig) -> Result<DesignSpace> {
    match (cfg.rows, cfg.cols) {
        (Some(rows), Some(cols)) => Ok(DesignSpace::new(cfg.layers, rows, cols, cfg.vias)?),
        _ => Err(CliError::Usage("--rows and --cols are required".into())),
    }
}

fn io_selection(cfg: &RunConfig, topo: &PortTopology) -> Result<IoSelection> {
    let spec = cfg
        .io
        .as_deref()
        .ok_or_else(|| CliError::Usage("--io is required".into()))?;
    Ok(IoSelection::parse(spec, topo, cfg.allow_any_io)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))?;
            Ok(())
        }
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.require(&cfg.out, "out")?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir)
}

fn patterns(cfg: &RunConfig, space: &DesignSpace) -> Result<Vec<ParsedPattern>> {
    let path = cfg.require(&cfg.patterns, "patterns")?;
    let opts = ParseOptions {
        space: Some(space.clone()),
        coerce_vias: cfg.coerce_vias,
    };
    let parsed = read_patterns(path, &opts)?;
    for (k, p) in parsed.iter().enumerate() {
        for w in &p.warnings {
            warn!("pattern {k}: {w}");
        }
    }
    Ok(parsed)
}

fn prior(cfg: &RunConfig, topo: &PortTopology) -> Result<PriorData> {
    let path = cfg.require(&cfg.prior, "prior")?;
    let prior = load_prior(path, topo)?;
    info!("loaded prior {} ({} ports, {} frequencies)", path.display(), topo.len(), prior.freqs().len());
    Ok(prior)
}

fn format(cfg: &RunConfig, allowed: &[&str]) -> Result<String> {
    let f = cfg.format.clone().unwrap_or_else(|| allowed[0].to_string()).to_ascii_lowercase();
    if allowed.contains(&f.as_str()) {
        Ok(f)
    } else {
        Err(CliError::Usage(format!("--format must be one of {}", allowed.join(", "))))
    }
}

pub fn topology(cfg: &RunConfig) -> Result<()> {
    let topo = enumerate_ports(&space(cfg)?);
    if let Some(path) = &cfg.out {
        topo.export_port_map(path)?;
        info!("wrote port map to {}", path.display());
    }
    println!("{}", topo.len());
    Ok(())
}

pub fn gen_prior(cfg: &RunConfig) -> Result<()> {
    let kind = format(cfg, &["cache", "touchstone"])?;
    let topo = enumerate_ports(&space(cfg)?);
    let freqs: FrequencyGrid = cfg.freq.parse()?;
    let params = SynthParams {
        parasitic: cfg.parasitic,
        ..SynthParams::default()
    };
    let dir = out_dir(cfg)?;
    let net = generate(&topo, &params, cfg.seed)?;
    let prior = Engine::new(cfg.jobs)?.extract_prior(&net, &freqs)?;
    prior.validate_reciprocity(RECIPROCITY_TOL)?;

    write_file(&dir.join(NETWORK_FILE), net.to_json().as_bytes())?;
    let prior_path = if kind == "cache" {
        let p = dir.join(CACHE_FILE);
        prior.write_cache(&p)?;
        p
    } else {
        let p = dir.join(format!("prior.z{}p", topo.len()));
        prior.write_touchstone(&p, ParamKind::Z, cfg.ref_ohms)?;
        p
    };
    write_file(&dir.join(RUN_CONFIG_FILE), cfg.to_config_text().as_bytes())?;
    println!("{} ports, {} frequencies -> {}", topo.len(), freqs.len(), prior_path.display());
    Ok(())
}

fn evaluate_all(cfg: &RunConfig) -> Result<(PriorData, Vec<ParsedPattern>, IoSelection, Vec<NetworkResponse>)> {
    let space = space(cfg)?;
    let topo = enumerate_ports(&space);
    let prior = prior(cfg, &topo)?;
    let parsed = patterns(cfg, &space)?;
    let io = io_selection(cfg, &topo)?;
    let list: Vec<PixelPattern> = parsed.iter().map(|p| p.pattern.clone()).collect();
    let responses = Engine::new(cfg.jobs)?.evaluate_batch(&prior, &list, &io, cfg.via_z.into())?;
    Ok((prior, parsed, io, responses))
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let kind = format(cfg, &["json", "touchstone"])?;
    let (_, parsed, io, responses) = evaluate_all(cfg)?;
    let responses = match cfg.repr.to_ascii_lowercase().as_str() {
        "s" => responses
            .iter()
            .map(|r| r.to_s(cfg.ref_ohms))
            .collect::<mapes_core::Result<Vec<_>>>()?,
        "z" => responses,
        other => return Err(CliError::Usage(format!("--repr must be s or z, got `{other}`"))),
    };
    if kind == "json" {
        let mut text = String::new();
        for (p, r) in parsed.iter().zip(&responses) {
            text.push_str(&r.to_json_value(p.id.as_ref()).to_string());
            text.push('\n');
        }
        return emit(cfg, &text);
    }
    let dir = out_dir(cfg)?;
    let letter = if cfg.repr.eq_ignore_ascii_case("z") { 'z' } else { 's' };
    for (k, r) in responses.iter().enumerate() {
        r.write_touchstone(&dir.join(format!("{k:05}.{letter}{}p", io.len())), cfg.ref_ohms)?;
    }
    info!("wrote {} Touchstone files to {}", responses.len(), dir.display());
    Ok(())
}

fn read_responses(path: &Path) -> Result<Vec<NetworkResponse>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::Deserializer::from_str(&text)
        .into_iter::<Value>()
        .map(|v| {
            let v = v.map_err(|e| Error::MalformedInput(format!("{}: {e}", path.display())))?;
            Ok(NetworkResponse::from_json_value(&v)?)
        })
        .collect()
}

pub fn compare(cfg: &RunConfig) -> Result<()> {
    let report = match format(cfg, &["table", "json"])?.as_str() {
        "json" => ReportFormat::Json,
        _ => ReportFormat::Table,
    };
    let (prior, parsed, io, test) = evaluate_all(cfg)?;
    let reference = match (&cfg.network, &cfg.reference) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let net = SyntheticNetwork::from_json(&text)?;
            if net.topology().hash() != prior.topology().hash() {
                return Err(Error::DimensionMismatch(format!(
                    "network {} was generated for a different design space",
                    path.display()
                ))
                .into());
            }
            let list: Vec<PixelPattern> = parsed.iter().map(|p| p.pattern.clone()).collect();
            Engine::new(cfg.jobs)?.oracle_batch(&net, &list, &io, cfg.via_z.into(), prior.freqs())?
        }
        (None, Some(path)) => read_responses(path)?,
        _ => return Err(CliError::Usage("give exactly one of --network or --reference".into())),
    };
    let to_s = |v: &[NetworkResponse]| {
        v.iter()
            .map(|r| r.to_s(cfg.ref_ohms))
            .collect::<mapes_core::Result<Vec<_>>>()
    };
    let text = compare_report(&to_s(&reference)?, &to_s(&test)?, report)?;
    emit(cfg, &text)
}

pub fn dataset(cfg: &RunConfig) -> Result<()> {
    let topo = enumerate_ports(&space(cfg)?);
    let prior = prior(cfg, &topo)?;
    let io = io_selection(cfg, &topo)?;
    let dir = out_dir(cfg)?;
    let dcfg = DatasetConfig {
        count: cfg.count,
        density: cfg.density,
        seed: cfg.seed,
        shard_size: cfg.shard_size,
        ref_ohms: cfg.ref_ohms,
        via_z: cfg.via_z.into(),
    };
    let manifest = generate_dataset(&Engine::new(cfg.jobs)?, &prior, &io, &dcfg, dir)?;
    write_file(&dir.join(RUN_CONFIG_FILE), cfg.to_config_text().as_bytes())?;
    println!("{} records in {} shard(s) -> {}", manifest.count, manifest.shards.len(), dir.display());
    Ok(())
}
