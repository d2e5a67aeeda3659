use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumResult;
use crate::error::{invalid, Result};
use crate::potential::ExternalField;
use crate::quad::log_sum_exp;
use crate::sampler::{Region, RegionRule};

/// `log|f(ζ)|` for `f = q·e^{−nQ/2}`, with `q(ζ) = Σ_k coeffs[k] ζ^k`.
pub fn log_weighted_poly<P: ExternalField + ?Sized>(coeffs: &[Complex64], p: &P, n: usize, z: Complex64) -> Result<f64> {
    if coeffs.len() > n {
        return Err(invalid(format!("degree {} exceeds n − 1 = {}", coeffs.len() - 1, n.saturating_sub(1))));
    }
    Ok(log_weighted_unchecked(coeffs, p, n, z))
}

fn log_weighted_unchecked<P: ExternalField + ?Sized>(coeffs: &[Complex64], p: &P, n: usize, z: Complex64) -> f64 {
    let q = coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
    q.norm().ln() - 0.5 * n as f64 * p.value(z)
}

pub fn weighted_poly_eval<P: ExternalField + ?Sized>(coeffs: &[Complex64], p: &P, n: usize, z: Complex64) -> Result<f64> {
    log_weighted_poly(coeffs, p, n, z).map(f64::exp)
}

/// Random polynomial of degree at most `n − 1`: a random degree and random
/// support, with complex Gaussian coefficients scaled by `√(n^{k+1}/k!)` so
/// that every monomial carries comparable weighted mass.
pub fn random_weighted_poly<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let degree = rng.random_range(0..n.max(1));
    let density: f64 = rng.random_range(0.2..=1.0);
    let mut log_fact = 0.0;
    let mut coeffs = Vec::with_capacity(degree + 1);
    for k in 0..=degree {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        let keep = k == degree || rng.random::<f64>() < density;
        let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        let scale = (0.5 * ((k + 1) as f64 * (n as f64).ln() - log_fact)).exp();
        coeffs.push(if keep { Complex64::new(a, b) * scale } else { Complex64::new(0.0, 0.0) });
    }
    coeffs
}

/// Outcome of a property suite.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub polynomials: usize,
    pub checks: usize,
    pub violations: usize,
    /// Largest observed `lhs/rhs`.
    pub worst_ratio: f64,
}

fn droplet_samples(eq: &EquilibriumResult) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = match eq.droplet_radius {
        Some(r) => (0..4096).map(|k| Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / 4096.0)).collect(),
        None => eq.geometry.vertices().collect(),
    };
    pts.extend((0..eq.grid.cells()).filter(|&i| eq.droplet_mask[i]).map(|i| eq.grid.centre(i)));
    pts
}

fn exterior_samples(eq: &EquilibriumResult, lo: f64, hi: f64, limit: usize) -> Vec<Complex64> {
    let all: Vec<Complex64> = eq
        .grid
        .centres()
        .filter(|z| {
            let d = eq.distance_to_droplet(*z);
            d >= lo && d <= hi
        })
        .collect();
    let stride = (all.len() / limit.max(1)).max(1);
    all.into_iter().step_by(stride).collect()
}

/// Maximum principle: `|f(ζ)|·e^{nQ_eff(ζ)/2} ≤ (1 + 1e−6)·max_S |f|` on the
/// exterior ring `0.05 ≤ δ(ζ) ≤ 0.5`, for `polynomials` random `f`.
pub fn maximum_principle_suite<P: ExternalField + ?Sized>(
    p: &P,
    eq: &EquilibriumResult,
    n: usize,
    polynomials: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let inside = droplet_samples(eq);
    let ring = exterior_samples(eq, 0.05, 0.5, 2000);
    let ring_eff: Vec<f64> = ring.iter().map(|z| eq.effective_potential(p, *z)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport { polynomials, ..Default::default() };
    for _ in 0..polynomials {
        let coeffs = random_weighted_poly(n, &mut rng);
        let max_s = inside.iter().map(|z| log_weighted_unchecked(&coeffs, p, n, *z)).fold(f64::NEG_INFINITY, f64::max);
        for (z, qe) in ring.iter().zip(&ring_eff) {
            let lhs = log_weighted_unchecked(&coeffs, p, n, *z) + 0.5 * n as f64 * qe;
            let ratio = (lhs - max_s).exp();
            report.checks += 1;
            report.worst_ratio = report.worst_ratio.max(ratio);
            if ratio > 1.0 + 1e-6 {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}

/// Pointwise `L^{2β}` estimate:
/// `|f(ζ₀)|^{2β} ≤ n·e^{sβ}·∫_{D(ζ₀,1/√n)} |f|^{2β} dA` at points within
/// distance 0.2 of the droplet, with `s = max ΔQ` over the disc plus 0.01.
/// The disc integral is refined until the verdict is stable.
pub fn pointwise_suite<P: ExternalField + ?Sized>(
    p: &P,
    eq: &EquilibriumResult,
    n: usize,
    beta: f64,
    polynomials: usize,
    points_per_poly: usize,
    seed: u64,
) -> Result<SuiteReport> {
    if !(beta > 0.0) {
        return Err(invalid("β must be positive"));
    }
    let candidates: Vec<Complex64> = eq.grid.centres().filter(|z| eq.distance_to_droplet(*z) <= 0.2).collect();
    if candidates.is_empty() {
        return Err(invalid("no grid points near the droplet"));
    }
    let radius = 1.0 / (n as f64).sqrt();
    let h = eq.grid.h();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport { polynomials, ..Default::default() };
    for _ in 0..polynomials {
        let coeffs = random_weighted_poly(n, &mut rng);
        for _ in 0..points_per_poly {
            let c = candidates[rng.random_range(0..candidates.len())];
            let z0 = c + Complex64::new((rng.random::<f64>() - 0.5) * h, (rng.random::<f64>() - 0.5) * h);
            let disc = Region::disc(z0, radius);
            let lhs = 2.0 * beta * log_weighted_unchecked(&coeffs, p, n, z0);
            let mut order = 12;
            let mut prev: Option<f64> = None;
            let ratio = loop {
                let rule = RegionRule::new(&disc, order)?;
                let s = rule.nodes.iter().map(|z| p.laplacian(*z)).fold(p.laplacian(z0), f64::max) + 0.01;
                let log_int = log_sum_exp(
                    rule.nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(z, w)| w.ln() + 2.0 * beta * log_weighted_unchecked(&coeffs, p, n, *z)),
                );
                let log_rhs = (n as f64).ln() + s * beta + log_int;
                let r = lhs - log_rhs;
                if let Some(pr) = prev {
                    if (pr <= 0.0) == (r <= 0.0) && (r - pr).abs() < 1e-3 {
                        break r.exp();
                    }
                }
                if order >= 192 {
                    break r.exp();
                }
                prev = Some(r);
                order *= 2;
            };
            report.checks += 1;
            report.worst_ratio = report.worst_ratio.max(ratio);
            if ratio > 1.0 {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}
