#![allow(dead_code)]

use mapes_core::linalg::{relative_frobenius, CMatrix};
use mapes_core::pattern::{IoSelection, PixelPattern};
use mapes_core::synth::{generate, SynthParams, SyntheticNetwork};
use mapes_core::topology::{enumerate_ports, DesignSpace, FrequencyGrid, PortClass, PortTopology};
use mapes_core::{c64, PriorData};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    relative_frobenius(a.as_ref(), b.as_ref())
}

pub fn czero() -> c64 {
    c64::new(0.0, 0.0)
}

/// A synthetic network, its extracted prior and the grid it was sampled on.
pub struct Bench {
    pub space: DesignSpace,
    pub topo: PortTopology,
    pub net: SyntheticNetwork,
    pub prior: PriorData,
    pub freqs: FrequencyGrid,
}

pub fn bench(space: DesignSpace, seed: u64, freqs: FrequencyGrid, params: &SynthParams) -> Bench {
    let topo = enumerate_ports(&space);
    let net = generate(&topo, params, seed).unwrap();
    let prior = net.extract_prior(&freqs).unwrap();
    Bench {
        space,
        topo,
        net,
        prior,
        freqs,
    }
}

pub fn ground_ports(topo: &PortTopology) -> Vec<usize> {
    topo.ports().iter().filter(|p| p.class == PortClass::Ground).map(|p| p.index).collect()
}

/// `k` distinct random ground ports.
pub fn random_io(topo: &PortTopology, k: usize, rng: &mut ChaCha8Rng) -> IoSelection {
    let mut g = ground_ports(topo);
    g.shuffle(rng);
    g.truncate(k);
    IoSelection::new(g, topo, false).unwrap()
}

/// Random complex symmetric matrix with a positive definite real part.
pub fn passive_symmetric(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let b = CMatrix::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), 0.0));
    let x = CMatrix::from_fn(n, n, |_, _| c64::new(0.0, rng.random_range(-1.0..1.0)));
    let bbt = &b * b.transpose();
    CMatrix::from_fn(n, n, |i, j| {
        let re = bbt[(i, j)].re / n as f64 + if i == j { 0.5 } else { 0.0 };
        let im = 0.5 * (x[(i, j)].im + x[(j, i)].im);
        c64::new(re, im) * scale
    })
}

pub fn random_pattern_rng(space: &DesignSpace, density: f64, rng: &mut ChaCha8Rng) -> PixelPattern {
    mapes_core::pattern::random_pattern_with(space, density, rng)
}

pub fn to_na(m: &CMatrix) -> nalgebra::DMatrix<nalgebra::Complex<f64>> {
    nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| nalgebra::Complex::new(m[(i, j)].re, m[(i, j)].im))
}

pub fn from_na(m: &nalgebra::DMatrix<nalgebra::Complex<f64>>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)].re, m[(i, j)].im))
}
