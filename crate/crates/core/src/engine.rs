//! Bounded worker pool over (pattern, frequency) work items.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};
use crate::pattern::{map_to_loads, IoSelection, PixelPattern};
use crate::prior::PriorData;
use crate::solver::{reduce_at, NetworkResponse, ReductionPlan, Representation};
use crate::synth::SyntheticNetwork;
use crate::topology::FrequencyGrid;

/// Owns a fixed-size thread pool. Results always come back in input order,
/// and each work item is computed by the same sequential code regardless of
/// the pool size, so output does not depend on `jobs`.
pub struct Engine {
    pool: rayon::ThreadPool,
    jobs: usize,
}

impl Engine {
    pub fn new(jobs: usize) -> Result<Self> {
        if jobs == 0 {
            return Err(Error::MalformedInput("jobs must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .thread_name(|i| format!("mapes-worker-{i}"))
            .build()
            .map_err(|e| Error::MalformedInput(format!("cannot start worker pool: {e}")))?;
        Ok(Engine { pool, jobs })
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    /// `f(0), f(1), ..., f(n-1)` computed on the pool, in order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        if self.jobs == 1 {
            return (0..n).map(f).collect();
        }
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }

    /// Evaluates every pattern at every frequency of `prior`.
    pub fn evaluate_batch(
        &self,
        prior: &PriorData,
        patterns: &[PixelPattern],
        io: &IoSelection,
        via_z: c64,
    ) -> Result<Vec<NetworkResponse>> {
        let part = prior.partition(io)?;
        let plans = patterns
            .iter()
            .map(|p| ReductionPlan::new(&part, &map_to_loads(p, prior.topology(), io, via_z)?))
            .collect::<Result<Vec<_>>>()?;
        let nf = prior.freqs().len();
        let slabs: Vec<Result<CMatrix>> = self.map(plans.len() * nf, |k| reduce_at(prior, &plans[k / nf], k % nf));
        let mut slabs = slabs.into_iter();
        (0..plans.len())
            .map(|_| {
                let data = slabs.by_ref().take(nf).collect::<Result<Vec<_>>>()?;
                Ok(NetworkResponse {
                    io: io.clone(),
                    freqs: prior.freqs().clone(),
                    data,
                    repr: Representation::Z,
                })
            })
            .collect()
    }

    /// Extracts the prior of `net`, one frequency per work item.
    pub fn extract_prior(&self, net: &SyntheticNetwork, freqs: &FrequencyGrid) -> Result<PriorData> {
        let mats = self
            .map(freqs.len(), |k| net.port_impedance(freqs.as_slice()[k]))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        PriorData::new(net.topology().clone(), freqs.clone(), mats)
    }

    /// Oracle responses, one pattern per work item.
    pub fn oracle_batch(
        &self,
        net: &SyntheticNetwork,
        patterns: &[PixelPattern],
        io: &IoSelection,
        via_z: c64,
        freqs: &FrequencyGrid,
    ) -> Result<Vec<NetworkResponse>> {
        self.map(patterns.len(), |k| net.oracle_solve(&patterns[k], io, via_z, freqs))
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::random_pattern;
    use crate::solver::evaluate;
    use crate::synth::{generate, SynthParams};
    use crate::topology::{enumerate_ports, DesignSpace};

    #[test]
    fn batch_matches_single_and_is_order_preserving() {
        let space = DesignSpace::single_layer(3, 4);
        let topo = enumerate_ports(&space);
        let net = generate(&topo, &SynthParams::default(), 3).unwrap();
        let freqs = FrequencyGrid::linspace(1e9, 9e9, 4).unwrap();
        let prior = net.extract_prior(&freqs).unwrap();
        let io = IoSelection::parse("1/1/1/W,1/3/4/E", &topo, false).unwrap();
        let patterns: Vec<_> = (0..7).map(|s| random_pattern(&space, 0.6, s)).collect();
        let zero = c64::new(0.0, 0.0);
        let one = Engine::new(1).unwrap().evaluate_batch(&prior, &patterns, &io, zero).unwrap();
        let three = Engine::new(3).unwrap().evaluate_batch(&prior, &patterns, &io, zero).unwrap();
        assert_eq!(one, three);
        for (p, r) in patterns.iter().zip(&one) {
            assert_eq!(&evaluate(&prior, p, &io, zero).unwrap(), r);
        }
    }

    #[test]
    fn parallel_extraction_matches_sequential() {
        let topo = enumerate_ports(&DesignSpace::single_layer(2, 3));
        let net = generate(&topo, &SynthParams::default(), 5).unwrap();
        let freqs = FrequencyGrid::linspace(1e9, 9e9, 5).unwrap();
        let want = net.extract_prior(&freqs).unwrap();
        let got = Engine::new(3).unwrap().extract_prior(&net, &freqs).unwrap();
        assert_eq!(got.matrices(), want.matrices());
    }

    #[test]
    fn zero_jobs_rejected() {
        assert!(Engine::new(0).is_err());
    }
}
