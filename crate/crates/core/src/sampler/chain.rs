use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{droplet_distance, sample_equilibrium, ChainState};
use crate::equilibrium::EquilibriumResult;
use crate::error::{invalid, Result};
use crate::potential::{ExternalField, Rect};

const TARGET_ACCEPTANCE: f64 = 0.3;

/// Parameters of one chain. Together with the potential and the equilibrium
/// data these determine the output bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainParams {
    pub n: usize,
    pub beta: f64,
    /// Sweeps after burn-in.
    pub sweeps: usize,
    pub burn_in: usize,
    /// Sweeps between retained samples.
    pub thin: usize,
    pub seed: u64,
    pub chain: u32,
    pub step_scale: f64,
    /// Burn-in sweeps per step-size adaptation.
    pub tune_window: usize,
    /// Sweeps between from-scratch energy rechecks.
    pub recheck_every: usize,
    pub keep_configurations: bool,
    /// Hard wall for proposals; defaults to the equilibrium grid box.
    pub sampling_box: Option<Rect>,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            n: 32,
            beta: 1.0,
            sweeps: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 0,
            chain: 0,
            step_scale: 1.0,
            tune_window: 50,
            recheck_every: 1_000,
            keep_configurations: false,
            sampling_box: None,
        }
    }
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("β must be positive, got {}", self.beta)));
        }
        if self.thin == 0 || self.tune_window == 0 || self.recheck_every == 0 {
            return Err(invalid("thin, tune_window and recheck_every must be positive"));
        }
        if !(self.step_scale > 0.0) {
            return Err(invalid("step_scale must be positive"));
        }
        Ok(())
    }
}

/// RNG stream for chain `chain` at particle count `n`: the ChaCha8 stream id
/// `n·2³² + chain` under the master seed.
pub fn stream_id(n: usize, chain: u32) -> u64 {
    ((n as u64) << 32) | chain as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n: usize,
    pub beta: f64,
    pub potential: String,
    pub seed: u64,
    pub chain: u32,
    pub stream: u64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub initial_step_scale: f64,
    /// Step scale frozen at the end of burn-in.
    pub step_scale: f64,
    pub acceptance: f64,
    pub max_cache_drift: f64,
    pub warnings: Vec<String>,
}

/// Retained samples of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub meta: SampleMeta,
    pub d_n: Vec<f64>,
    pub energies: Vec<f64>,
    /// Running post-burn-in acceptance rate at each retained sample.
    pub acceptance: Vec<f64>,
    pub configurations: Option<Vec<Vec<Complex64>>>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.d_n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_n.is_empty()
    }
}

/// A chain that can be driven sample by sample.
pub struct Chain<'a, P: ExternalField + ?Sized> {
    p: &'a P,
    params: ChainParams,
    state: ChainState,
    rng: ChaCha8Rng,
    max_drift: f64,
    sweeps_since_check: usize,
    tuned: bool,
}

impl<'a, P: ExternalField + ?Sized> Chain<'a, P> {
    pub fn new(params: ChainParams, p: &'a P, eq: &EquilibriumResult) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(stream_id(params.n, params.chain));
        let init = sample_equilibrium(p, eq, params.n, &mut rng)?;
        let sampling_box = params.sampling_box.unwrap_or(eq.grid.rect);
        let state = ChainState::new(init, p, params.beta, params.step_scale, sampling_box)?;
        Ok(Self { p, params, state, rng, max_drift: 0.0, sweeps_since_check: 0, tuned: false })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn max_cache_drift(&self) -> f64 {
        self.max_drift
    }

    fn sweep(&mut self) {
        self.state.sweep(self.p, &mut self.rng);
        self.sweeps_since_check += 1;
        if self.sweeps_since_check >= self.params.recheck_every {
            self.max_drift = self.max_drift.max(self.state.recheck(self.p));
            self.sweeps_since_check = 0;
        }
    }

    /// Run burn-in, adapting the step scale toward 30% acceptance in windows;
    /// the scale is frozen afterwards and the counters reset.
    pub fn burn_in(&mut self) {
        if self.tuned {
            return;
        }
        let mut done = 0;
        while done < self.params.burn_in {
            let before = self.state.stats;
            let len = self.params.tune_window.min(self.params.burn_in - done);
            for _ in 0..len {
                self.sweep();
            }
            done += len;
            let proposed = self.state.stats.proposed - before.proposed;
            if proposed > 0 {
                let rate = (self.state.stats.accepted - before.accepted) as f64 / proposed as f64;
                let s = self.state.step_scale * (2.0 * (rate - TARGET_ACCEPTANCE)).exp();
                self.state.step_scale = s.clamp(1e-4 * self.params.step_scale, 1e3 * self.params.step_scale);
            }
        }
        self.state.stats = Default::default();
        self.tuned = true;
    }

    /// Advance by `thin` sweeps and return the state.
    pub fn next_sample(&mut self) -> &ChainState {
        self.burn_in();
        for _ in 0..self.params.thin {
            self.sweep();
        }
        &self.state
    }

    pub fn meta(&self) -> SampleMeta {
        let acceptance = self.state.stats.rate();
        let mut warnings = Vec::new();
        if self.tuned && self.state.stats.proposed > 0 && !(0.1..=0.7).contains(&acceptance) {
            warnings.push(format!("acceptance rate {acceptance:.3} outside [0.1, 0.7] after tuning"));
        }
        if self.max_drift > 1e-9 {
            warnings.push(format!("energy cache drift {:.3e} exceeded 1e-9", self.max_drift));
        }
        SampleMeta {
            n: self.params.n,
            beta: self.params.beta,
            potential: self.p.label(),
            seed: self.params.seed,
            chain: self.params.chain,
            stream: stream_id(self.params.n, self.params.chain),
            sweeps: self.params.sweeps,
            burn_in: self.params.burn_in,
            thin: self.params.thin,
            initial_step_scale: self.params.step_scale,
            step_scale: self.state.step_scale,
            acceptance,
            max_cache_drift: self.max_drift,
            warnings,
        }
    }
}

/// Run one chain to completion, recording `D_n`, the energy and the running
/// acceptance rate at each retained sample.
pub fn run_chain<P: ExternalField + ?Sized>(
    params: &ChainParams,
    p: &P,
    eq: &EquilibriumResult,
) -> Result<SampleBatch> {
    let mut chain = Chain::new(params.clone(), p, eq)?;
    let samples = params.sweeps / params.thin;
    let mut d_n = Vec::with_capacity(samples);
    let mut energies = Vec::with_capacity(samples);
    let mut acceptance = Vec::with_capacity(samples);
    let mut configurations = params.keep_configurations.then(|| Vec::with_capacity(samples));
    for _ in 0..samples {
        let st = chain.next_sample();
        d_n.push(droplet_distance(eq, st.points()));
        energies.push(st.energy());
        acceptance.push(st.stats.rate());
        if let Some(c) = configurations.as_mut() {
            c.push(st.points().to_vec());
        }
    }
    let meta = chain.meta();
    for w in &meta.warnings {
        log::warn!("chain {} (n = {}): {w}", meta.chain, meta.n);
    }
    Ok(SampleBatch { meta, d_n, energies, acceptance, configurations })
}

/// Run `chains` independent chains in parallel; chain `i` uses stream
/// `stream_id(n, i)` of the master seed.
pub fn run_chains<P: ExternalField + ?Sized>(
    params: &ChainParams,
    chains: u32,
    p: &P,
    eq: &EquilibriumResult,
) -> Result<Vec<SampleBatch>> {
    (0..chains)
        .into_par_iter()
        .map(|i| run_chain(&ChainParams { chain: i, ..params.clone() }, p, eq))
        .collect()
}
