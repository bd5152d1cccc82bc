//! Closed-form multiport reduction and Z/S conversion.

use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{c64, identity, solve, CMatrix, Factorized};
use crate::pattern::{map_to_loads, IoSelection, LoadAssignment, LoadState, PixelPattern};
use crate::prior::{ParamKind, PartitionedPrior, PriorData, Touchstone};
use crate::topology::FrequencyGrid;

/// Default reference impedance for S-parameters.
pub const DEFAULT_REF_OHMS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Representation {
    /// Impedance in ohms.
    Z,
    /// Scattering parameters against a uniform real reference.
    S { ref_ohms: f64 },
}

/// K x K response at the I/O ports for every frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkResponse {
    pub io: IoSelection,
    pub freqs: FrequencyGrid,
    pub data: Vec<CMatrix>,
    pub repr: Representation,
}

/// Loaded ports that survive open elimination, with their load impedances.
///
/// The plan is the frequency-independent half of a reduction: build it once
/// per pattern and call [`reduce_at`] for each frequency.
#[derive(Debug, Clone)]
pub struct ReductionPlan {
    io: Vec<usize>,
    kept: Vec<usize>,
    loads: Vec<c64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReduceStats {
    /// Dimension of the factored system (Short + Finite ports).
    pub system_dim: usize,
    pub short: usize,
    pub open: usize,
    pub finite: usize,
}

impl ReductionPlan {
    pub fn new(part: &PartitionedPrior<'_>, loads: &LoadAssignment) -> Result<Self> {
        if loads.io() != part.io() || loads.ports() != part.vp() {
            return Err(Error::DimensionMismatch(
                "load assignment does not match the partition's port ordering".into(),
            ));
        }
        let mut kept = Vec::new();
        let mut zl = Vec::new();
        for (port, state) in loads.iter() {
            if let Some(z) = state.impedance() {
                kept.push(port);
                zl.push(z);
            }
        }
        Ok(ReductionPlan {
            io: part.io().ports().to_vec(),
            kept,
            loads: zl,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }
}

/// Reduces one frequency slab of the prior.
pub fn reduce_at(prior: &PriorData, plan: &ReductionPlan, f: usize) -> Result<CMatrix> {
    let z = prior.matrix(f);
    let freq_hz = prior.freqs().as_slice()[f];
    let (io, kept) = (&plan.io, &plan.kept);
    let z_io_io = CMatrix::from_fn(io.len(), io.len(), |i, j| z[(io[i], io[j])]);
    if kept.is_empty() {
        return Ok(z_io_io);
    }
    let a = CMatrix::from_fn(kept.len(), kept.len(), |i, j| {
        let v = z[(kept[i], kept[j])];
        if i == j {
            v + plan.loads[i]
        } else {
            v
        }
    });
    let z_vp_io = CMatrix::from_fn(kept.len(), io.len(), |i, j| z[(kept[i], io[j])]);
    let z_io_vp = CMatrix::from_fn(io.len(), kept.len(), |i, j| z[(io[i], kept[j])]);
    let lu = Factorized::new(a.as_ref(), freq_hz)?;
    let x = lu.solve(z_vp_io.as_ref());
    let out = z_io_io - &z_io_vp * &x;
    if !all_finite(&out) {
        return Err(Error::SingularSystem {
            freq_hz,
            condition: lu.condition_estimate(),
        });
    }
    Ok(out)
}

/// `Z_io,io - Z_io,vp (Z_L + Z_vp,vp)^-1 Z_vp,io` at every frequency, with
/// open ports removed before the solve.
pub fn reduce(part: &PartitionedPrior<'_>, loads: &LoadAssignment) -> Result<NetworkResponse> {
    reduce_with_stats(part, loads).map(|(r, _)| r)
}

pub fn reduce_with_stats(
    part: &PartitionedPrior<'_>,
    loads: &LoadAssignment,
) -> Result<(NetworkResponse, ReduceStats)> {
    let plan = ReductionPlan::new(part, loads)?;
    let prior = part.prior();
    let data = (0..part.freq_count())
        .map(|f| reduce_at(prior, &plan, f))
        .collect::<Result<Vec<_>>>()?;
    let (short, open, finite) = loads.counts();
    let stats = ReduceStats {
        system_dim: plan.system_dim(),
        short,
        open,
        finite,
    };
    Ok((
        NetworkResponse {
            io: part.io().clone(),
            freqs: prior.freqs().clone(),
            data,
            repr: Representation::Z,
        },
        stats,
    ))
}

/// Partition, load mapping and reduction in one call.
pub fn evaluate(
    prior: &PriorData,
    pattern: &PixelPattern,
    io: &IoSelection,
    via_z: c64,
) -> Result<NetworkResponse> {
    let part = prior.partition(io)?;
    let loads = map_to_loads(pattern, prior.topology(), io, via_z)?;
    reduce(&part, &loads)
}

fn check_ref(ref_ohms: f64) -> Result<()> {
    if ref_ohms.is_finite() && ref_ohms > 0.0 {
        Ok(())
    } else {
        Err(Error::MalformedInput(format!("reference impedance must be positive, got {ref_ohms}")))
    }
}

fn all_finite(m: &CMatrix) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

fn shift(m: &CMatrix, s: c64) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { m[(i, j)] + s } else { m[(i, j)] })
}

/// `S = (Z - z0 I)(Z + z0 I)^-1`, computed as `(Z + z0 I)^-1 (Z - z0 I)`
/// (the two factors commute).
pub fn z_to_s_matrix(z: &CMatrix, ref_ohms: f64, freq_hz: f64) -> Result<CMatrix> {
    check_ref(ref_ohms)?;
    let z0 = c64::new(ref_ohms, 0.0);
    solve(shift(z, z0).as_ref(), shift(z, -z0).as_ref(), freq_hz)
}

/// `Z = z0 (I + S)(I - S)^-1`, computed as `z0 (I - S)^-1 (I + S)`.
pub fn s_to_z_matrix(s: &CMatrix, ref_ohms: f64, freq_hz: f64) -> Result<CMatrix> {
    check_ref(ref_ohms)?;
    let n = s.nrows();
    let one = identity(n);
    let x = solve((&one - s).as_ref(), (&one + s).as_ref(), freq_hz)?;
    Ok(CMatrix::from_fn(n, n, |i, j| x[(i, j)] * ref_ohms))
}

pub fn z_to_s(resp: &NetworkResponse, ref_ohms: f64) -> Result<NetworkResponse> {
    match resp.repr {
        Representation::Z => {}
        Representation::S { .. } => {
            return Err(Error::RepresentationMismatch("z_to_s needs a Z response".into()))
        }
    }
    let data = resp
        .data
        .iter()
        .zip(resp.freqs.as_slice())
        .map(|(z, &f)| z_to_s_matrix(z, ref_ohms, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkResponse {
        data,
        repr: Representation::S { ref_ohms },
        ..resp.clone()
    })
}

pub fn s_to_z(resp: &NetworkResponse) -> Result<NetworkResponse> {
    let Representation::S { ref_ohms } = resp.repr else {
        return Err(Error::RepresentationMismatch("s_to_z needs an S response".into()));
    };
    let data = resp
        .data
        .iter()
        .zip(resp.freqs.as_slice())
        .map(|(s, &f)| s_to_z_matrix(s, ref_ohms, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkResponse {
        data,
        repr: Representation::Z,
        ..resp.clone()
    })
}

impl NetworkResponse {
    pub fn k(&self) -> usize {
        self.io.len()
    }

    /// Converts to S against `ref_ohms`, re-referencing S data if needed.
    pub fn to_s(&self, ref_ohms: f64) -> Result<NetworkResponse> {
        match self.repr {
            Representation::Z => z_to_s(self, ref_ohms),
            Representation::S { ref_ohms: r } if r == ref_ohms => Ok(self.clone()),
            Representation::S { .. } => z_to_s(&s_to_z(self)?, ref_ohms),
        }
    }

    pub fn to_z(&self) -> Result<NetworkResponse> {
        match self.repr {
            Representation::Z => Ok(self.clone()),
            Representation::S { .. } => s_to_z(self),
        }
    }

    /// Touchstone data in this response's own representation. Z responses
    /// are written against `ref_ohms`.
    pub fn to_touchstone(&self, ref_ohms: f64) -> Result<Touchstone> {
        let (kind, r) = match self.repr {
            Representation::Z => (ParamKind::Z, ref_ohms),
            Representation::S { ref_ohms } => (ParamKind::S, ref_ohms),
        };
        Touchstone::new(kind, r, self.freqs.as_slice().to_vec(), self.data.clone())
    }

    pub fn write_touchstone(&self, path: &Path, ref_ohms: f64) -> Result<()> {
        self.to_touchstone(ref_ohms)?.write_file(path)
    }

    /// `{pattern_id, io, freqs, ref_ohms?, z|s: [F][K][K][re, im]}`.
    pub fn to_json_value(&self, pattern_id: Option<&Value>) -> Value {
        let values: Vec<Vec<Vec<[f64; 2]>>> = self
            .data
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                    .collect()
            })
            .collect();
        let mut obj = json!({
            "pattern_id": pattern_id.cloned().unwrap_or(Value::Null),
            "io": self.io,
            "freqs": self.freqs.as_slice(),
        });
        match self.repr {
            Representation::Z => obj["z"] = json!(values),
            Representation::S { ref_ohms } => {
                obj["ref_ohms"] = json!(ref_ohms);
                obj["s"] = json!(values);
            }
        }
        obj
    }

    /// Inverse of [`NetworkResponse::to_json_value`]. The `io` field is
    /// trusted as written.
    pub fn from_json_value(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::MalformedInput(format!("response JSON: {what}"));
        let io: IoSelection = serde_json::from_value(v.get("io").cloned().ok_or_else(|| bad("missing io"))?)?;
        let freqs: Vec<f64> = serde_json::from_value(v.get("freqs").cloned().ok_or_else(|| bad("missing freqs"))?)?;
        let (repr, key) = if v.get("s").is_some() {
            let r = v.get("ref_ohms").and_then(Value::as_f64).unwrap_or(DEFAULT_REF_OHMS);
            (Representation::S { ref_ohms: r }, "s")
        } else {
            (Representation::Z, "z")
        };
        let values: Vec<Vec<Vec<[f64; 2]>>> =
            serde_json::from_value(v.get(key).cloned().ok_or_else(|| bad("missing z/s data"))?)?;
        let k = io.len();
        if values.len() != freqs.len() {
            return Err(bad("data and frequency counts differ"));
        }
        let data = values
            .iter()
            .map(|rows| {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(bad("matrix is not K x K"));
                }
                Ok(CMatrix::from_fn(k, k, |i, j| c64::new(rows[i][j][0], rows[i][j][1])))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkResponse {
            io,
            freqs: FrequencyGrid::new(freqs)?,
            data,
            repr,
        })
    }
}

/// Load state as a diagonal entry, for callers that model opens literally.
pub fn literal_load(state: LoadState, open_ohms: f64) -> c64 {
    state.impedance().unwrap_or(c64::new(open_ohms, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{enumerate_ports, DesignSpace};

    fn r(x: f64) -> c64 {
        c64::new(x, 0.0)
    }

    #[test]
    fn three_port_hand_solution() {
        // V = Z I with V1 = 0 (short), I2 = 0 (open): Z_in = 2 - 1 * 1/2 * 1.
        let topo = enumerate_ports(&DesignSpace::single_layer(1, 1));
        let mut z = CMatrix::from_fn(4, 4, |i, j| if i == j { r(2.0) } else { r(1.0) });
        // port 3 is decoupled so the 4-port space behaves as the 3-port example
        for k in 0..3 {
            z[(3, k)] = r(0.0);
            z[(k, 3)] = r(0.0);
        }
        let prior = PriorData::new(topo.clone(), FrequencyGrid::new(vec![1e9]).unwrap(), vec![z]).unwrap();
        let io = IoSelection::new(vec![0], &topo, false).unwrap();
        let part = prior.partition(&io).unwrap();
        let loads = LoadAssignment::new(
            io,
            vec![1, 2, 3],
            vec![LoadState::Short, LoadState::Open, LoadState::Open],
        )
        .unwrap();
        let (resp, stats) = reduce_with_stats(&part, &loads).unwrap();
        assert_eq!(resp.data[0][(0, 0)], r(1.5));
        assert_eq!(stats.system_dim, 1);
    }

    #[test]
    fn all_open_returns_io_block() {
        let topo = enumerate_ports(&DesignSpace::single_layer(2, 2));
        let q = topo.len();
        let z = CMatrix::from_fn(q, q, |i, j| c64::new((i + j) as f64, (i * j) as f64));
        let prior = PriorData::new(topo.clone(), FrequencyGrid::new(vec![1e9]).unwrap(), vec![z.clone()]).unwrap();
        let io = IoSelection::new(vec![12, 9], &topo, false).unwrap();
        let pattern = PixelPattern::all_absent(topo.space());
        let resp = evaluate(&prior, &pattern, &io, r(0.0)).unwrap();
        assert_eq!(resp.data[0][(0, 0)], z[(12, 12)]);
        assert_eq!(resp.data[0][(0, 1)], z[(12, 9)]);
        assert_eq!(resp.data[0][(1, 0)], z[(9, 12)]);
    }

    #[test]
    fn zero_coupling_returns_io_block() {
        let topo = enumerate_ports(&DesignSpace::single_layer(2, 2));
        let q = topo.len();
        let io_ports = [12usize, 9];
        let z = CMatrix::from_fn(q, q, |i, j| {
            let (a, b) = (io_ports.contains(&i), io_ports.contains(&j));
            if a != b {
                r(0.0)
            } else if i == j {
                c64::new(10.0 + i as f64, 1.0)
            } else {
                c64::new(0.5, 0.1)
            }
        });
        let prior = PriorData::new(topo.clone(), FrequencyGrid::new(vec![1e9]).unwrap(), vec![z.clone()]).unwrap();
        let io = IoSelection::new(io_ports.to_vec(), &topo, false).unwrap();
        let resp = evaluate(&prior, &PixelPattern::all_present(topo.space()), &io, r(0.0)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(resp.data[0][(i, j)], z[(io_ports[i], io_ports[j])]);
            }
        }
    }

    #[test]
    fn conversion_anchors() {
        let z = CMatrix::from_fn(3, 3, |i, j| if i == j { r(50.0) } else { r(0.0) });
        let s = z_to_s_matrix(&z, 50.0, 1.0).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| s[(i, j)] == r(0.0))));
        let short = CMatrix::from_fn(1, 1, |_, _| r(0.0));
        assert_eq!(z_to_s_matrix(&short, 50.0, 1.0).unwrap()[(0, 0)], r(-1.0));
        let hundred = CMatrix::from_fn(1, 1, |_, _| r(100.0));
        let s = z_to_s_matrix(&hundred, 50.0, 1.0).unwrap()[(0, 0)];
        assert!((s - r(1.0 / 3.0)).norm() <= f64::EPSILON / 3.0, "{s}");
        let zero_s = CMatrix::zeros(2, 2);
        let back = s_to_z_matrix(&zero_s, 50.0, 1.0).unwrap();
        assert_eq!(back[(0, 0)], r(50.0));
        assert_eq!(back[(0, 1)], r(0.0));
        let minus_one = CMatrix::from_fn(1, 1, |_, _| r(-1.0));
        assert_eq!(s_to_z_matrix(&minus_one, 50.0, 1.0).unwrap()[(0, 0)], r(0.0));
    }

    #[test]
    fn conversion_rejects_bad_input() {
        let z = CMatrix::from_fn(1, 1, |_, _| r(-50.0));
        assert!(matches!(z_to_s_matrix(&z, 50.0, 2e9), Err(Error::SingularSystem { freq_hz, .. }) if freq_hz == 2e9));
        assert!(matches!(z_to_s_matrix(&z, 0.0, 1.0), Err(Error::MalformedInput(_))));
        let one = CMatrix::from_fn(1, 1, |_, _| r(1.0));
        assert!(matches!(s_to_z_matrix(&one, 50.0, 1.0), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn json_round_trip() {
        let topo = enumerate_ports(&DesignSpace::single_layer(2, 2));
        let io = IoSelection::new(vec![12, 9], &topo, false).unwrap();
        let resp = NetworkResponse {
            io,
            freqs: FrequencyGrid::new(vec![1e9, 2e9]).unwrap(),
            data: (0..2)
                .map(|f| CMatrix::from_fn(2, 2, |i, j| c64::new(0.1 * (i + j + f) as f64, -0.3 / 7.0)))
                .collect(),
            repr: Representation::S { ref_ohms: 75.0 },
        };
        let v = resp.to_json_value(Some(&json!("p7")));
        assert_eq!(v["pattern_id"], "p7");
        assert_eq!(v["s"][1][0][1][0], json!(0.2));
        let back = NetworkResponse::from_json_value(&serde_json::from_str(&v.to_string()).unwrap()).unwrap();
        assert_eq!(back, resp);
    }

    #[test]
    fn mismatched_loads_are_rejected() {
        let topo = enumerate_ports(&DesignSpace::single_layer(1, 1));
        let prior = PriorData::new(
            topo.clone(),
            FrequencyGrid::new(vec![1e9]).unwrap(),
            vec![CMatrix::from_fn(4, 4, |i, j| if i == j { r(1.0) } else { r(0.0) })],
        )
        .unwrap();
        let part = prior.partition(&IoSelection::new(vec![0], &topo, false).unwrap()).unwrap();
        let other = IoSelection::new(vec![1], &topo, false).unwrap();
        let loads = LoadAssignment::new(other, vec![0, 2, 3], vec![LoadState::Open; 3]).unwrap();
        assert!(matches!(reduce(&part, &loads), Err(Error::DimensionMismatch(_))));
    }
}
