//! Metropolis sampling of the Gibbs measure `∝ e^{−βH_n}` and per-configuration
//! observables.

mod chain;
mod lagrange;
pub mod snapshot;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use chain::{run_chain, run_chains, stream_id, Chain, ChainParams, SampleBatch, SampleMeta};
pub use lagrange::{
    eval_lagrange, lagrange_functional, log_lagrange, pair_functional, product_functional, Quadrature, Region,
    RegionRule,
};

use crate::equilibrium::EquilibriumResult;
use crate::error::{invalid, Result};
use crate::potential::{ExternalField, Rect};
use crate::quad;

/// An ordered list of `n` particle positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<Complex64>,
}

impl Configuration {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("configuration must contain at least one point"));
        }
        if let Some(z) = points.iter().find(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid(format!("non-finite point {z}")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Complex64> {
        self.points
    }
}

/// `H_n = Σ_{j≠k} log 1/|ζ_j − ζ_k| + n_field·Σ_j Q(ζ_j)`, summed over ordered
/// pairs. Coincident points or infinite `Q` give `+∞`.
pub fn hamiltonian<P: ExternalField + ?Sized>(points: &[Complex64], p: &P, n_field: usize) -> f64 {
    let mut pair = 0.0;
    for (k, a) in points.iter().enumerate() {
        for b in &points[..k] {
            let d2 = (a - b).norm_sqr();
            if d2 == 0.0 {
                return f64::INFINITY;
            }
            pair -= d2.ln();
        }
    }
    let mut field = 0.0;
    for z in points {
        let q = p.value(*z);
        if q == f64::INFINITY {
            return f64::INFINITY;
        }
        field += q;
    }
    pair + n_field as f64 * field
}

/// `Σ_{i≠j} log|ζ_j − ζ_i|` for every `j`.
pub fn interaction_sums(points: &[Complex64]) -> Vec<f64> {
    let mut s = vec![0.0; points.len()];
    for k in 0..points.len() {
        for i in 0..k {
            let l = 0.5 * (points[k] - points[i]).norm_sqr().ln();
            s[k] += l;
            s[i] += l;
        }
    }
    s
}

/// Metropolis acceptance probability `min(1, e^{−βΔH})`.
pub fn acceptance_probability(beta: f64, delta: f64) -> f64 {
    if delta.is_nan() || delta == f64::INFINITY {
        return 0.0;
    }
    if delta <= 0.0 {
        1.0
    } else {
        (-beta * delta).exp()
    }
}

/// Density of the isotropic Gaussian proposal with per-coordinate standard
/// deviation `std`, with respect to Lebesgue measure.
pub fn proposal_density(std: f64, from: Complex64, to: Complex64) -> f64 {
    let v = std * std;
    (-(to - from).norm_sqr() / (2.0 * v)).exp() / (std::f64::consts::TAU * v)
}

/// Accept/reject counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
    pub outside_box: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Mutable state of a single Markov chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    points: Vec<Complex64>,
    sums: Vec<f64>,
    q: Vec<f64>,
    energy: f64,
    pub beta: f64,
    pub step_scale: f64,
    pub sampling_box: Rect,
    pub stats: MoveStats,
    accepted_since_check: u64,
    scratch: Vec<f64>,
}

impl ChainState {
    pub fn new<P: ExternalField + ?Sized>(
        cfg: Configuration,
        p: &P,
        beta: f64,
        step_scale: f64,
        sampling_box: Rect,
    ) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid(format!("β must be finite and ≥ 0, got {beta}")));
        }
        if !(step_scale > 0.0 && step_scale.is_finite()) {
            return Err(invalid(format!("step scale must be positive, got {step_scale}")));
        }
        let points = cfg.into_points();
        if let Some(z) = points.iter().find(|z| !sampling_box.contains(**z)) {
            return Err(invalid(format!("initial point {z} lies outside the sampling box")));
        }
        let energy = hamiltonian(&points, p, points.len());
        if !energy.is_finite() {
            return Err(invalid("initial configuration has infinite energy"));
        }
        let q = points.iter().map(|z| p.value(*z)).collect();
        let n = points.len();
        Ok(Self {
            sums: interaction_sums(&points),
            points,
            q,
            energy,
            beta,
            step_scale,
            sampling_box,
            stats: MoveStats::default(),
            accepted_since_check: 0,
            scratch: vec![0.0; n],
        })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn interaction_sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn accepted_since_check(&self) -> u64 {
        self.accepted_since_check
    }

    /// Per-coordinate proposal standard deviation `step_scale/√n`.
    pub fn proposal_std(&self) -> f64 {
        self.step_scale / (self.n() as f64).sqrt()
    }

    /// `ΔH` for moving particle `j` to `z`, in `O(n)`.
    pub fn move_delta<P: ExternalField + ?Sized>(&self, p: &P, j: usize, z: Complex64) -> f64 {
        let q_new = p.value(z);
        if q_new == f64::INFINITY {
            return f64::INFINITY;
        }
        let s_new: f64 = self
            .points
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, w)| 0.5 * (z - w).norm_sqr().ln())
            .sum();
        if s_new == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        -2.0 * (s_new - self.sums[j]) + self.n() as f64 * (q_new - self.q[j])
    }

    /// Propose moving particle `j` to `z` and accept with the Metropolis rule
    /// using the uniform draw `u`. Returns whether the move was accepted.
    pub fn try_move<P: ExternalField + ?Sized>(&mut self, p: &P, j: usize, z: Complex64, u: f64) -> bool {
        self.stats.proposed += 1;
        if !self.sampling_box.contains(z) {
            self.stats.outside_box += 1;
            return false;
        }
        let q_new = p.value(z);
        if q_new == f64::INFINITY {
            return false;
        }
        let old = self.points[j];
        // log ratios of new to old distances, reused for the cache update
        let mut dlog = 0.0;
        for (i, w) in self.points.iter().enumerate() {
            if i == j {
                self.scratch[i] = 0.0;
                continue;
            }
            let r = 0.5 * ((z - w).norm_sqr() / (old - w).norm_sqr()).ln();
            self.scratch[i] = r;
            dlog += r;
        }
        if dlog.is_nan() || dlog == f64::NEG_INFINITY {
            return false;
        }
        let delta = -2.0 * dlog + self.n() as f64 * (q_new - self.q[j]);
        let accept = delta <= 0.0 || u < (-self.beta * delta).exp();
        if !accept {
            return false;
        }
        for (i, s) in self.sums.iter_mut().enumerate() {
            *s += self.scratch[i];
        }
        self.sums[j] += dlog;
        self.points[j] = z;
        self.q[j] = q_new;
        self.energy += delta;
        self.stats.accepted += 1;
        self.accepted_since_check += 1;
        true
    }

    /// `n` single-particle Gaussian proposals with uniformly chosen indices.
    pub fn sweep<P: ExternalField + ?Sized>(&mut self, p: &P, rng: &mut ChaCha8Rng) {
        let n = self.n();
        let std = self.proposal_std();
        for _ in 0..n {
            let j = rng.random_range(0..n);
            let dx: f64 = StandardNormal.sample(rng);
            let dy: f64 = StandardNormal.sample(rng);
            let z = self.points[j] + Complex64::new(std * dx, std * dy);
            let u: f64 = rng.random();
            self.try_move(p, j, z, u);
        }
    }

    /// Recompute energy and caches from scratch. Returns the largest relative
    /// discrepancy found before resynchronising.
    pub fn recheck<P: ExternalField + ?Sized>(&mut self, p: &P) -> f64 {
        let fresh = hamiltonian(&self.points, p, self.n());
        let sums = interaction_sums(&self.points);
        let scale = fresh.abs().max(1.0);
        let mut worst = (fresh - self.energy).abs() / scale;
        let sum_scale = sums.iter().map(|s| s.abs()).fold(1.0, f64::max);
        for (a, b) in sums.iter().zip(&self.sums) {
            worst = worst.max((a - b).abs() / sum_scale);
        }
        self.energy = fresh;
        self.sums = sums;
        self.q = self.points.iter().map(|z| p.value(*z)).collect();
        self.accepted_since_check = 0;
        worst
    }
}

/// `D_n = max_j dist(ζ_j, S)`. A known disc radius is used exactly; otherwise
/// the droplet polygon is queried.
pub fn droplet_distance(eq: &EquilibriumResult, points: &[Complex64]) -> f64 {
    match eq.droplet_radius {
        Some(r) => points.iter().map(|z| (z.norm() - r).max(0.0)).fold(0.0, f64::max),
        None => points.iter().map(|z| eq.distance_to_droplet(*z)).fold(0.0, f64::max),
    }
}

/// `n` i.i.d. draws from `σ`: inverse CDF of the radial mass `rQ′(r)/2` when the
/// droplet is a disc, otherwise cell sampling from the grid weights with a
/// uniform offset inside the cell.
pub fn sample_equilibrium<P: ExternalField + ?Sized>(
    p: &P,
    eq: &EquilibriumResult,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Configuration> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let mut pts = Vec::with_capacity(n);
    if let (Some(radius), true) = (eq.droplet_radius, p.is_radial()) {
        let mass = |r: f64| p.radial(r).map(|v| 0.5 * r * v.dq).unwrap_or(f64::NAN);
        for _ in 0..n {
            let u: f64 = rng.random();
            let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let r = quad::bisect(|r| mass(r) - u, 0.0, radius, 1e-13).unwrap_or(radius * u.sqrt());
            pts.push(Complex64::from_polar(r, t));
        }
    } else {
        let mut cdf = Vec::with_capacity(eq.sigma_weights.len());
        let mut acc = 0.0;
        for w in &eq.sigma_weights {
            acc += w.max(0.0);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(invalid("equilibrium weights are empty"));
        }
        let h = eq.grid.h();
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|c| *c <= u).min(cdf.len() - 1);
            let c = eq.grid.centre(idx);
            let (dx, dy): (f64, f64) = (rng.random(), rng.random());
            pts.push(c + Complex64::new((dx - 0.5) * h, (dy - 0.5) * h));
        }
    }
    Configuration::new(pts)
}
