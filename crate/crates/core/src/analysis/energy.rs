use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibrium::kernel::LogKernel;
use crate::equilibrium::{EquilibriumResult, GridDomain};
use crate::error::{invalid, Error, Result};
use crate::potential::ExternalField;
use crate::quad::gauss_legendre_on;
use crate::sampler::hamiltonian;

/// `I_Q^♯[μ_n] = (1/(n(n−1)))Σ_{j≠k} log 1/|ζ_j − ζ_k| + μ_n(Q)`; `+∞` for
/// coincident points.
pub fn energy_discrete<P: ExternalField + ?Sized>(points: &[Complex64], p: &P) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(invalid("the discrete energy needs at least two points"));
    }
    let mut pair = 0.0;
    for (k, a) in points.iter().enumerate() {
        for b in &points[..k] {
            let d2 = (a - b).norm_sqr();
            if d2 == 0.0 {
                return Ok(f64::INFINITY);
            }
            pair -= d2.ln();
        }
    }
    let q: f64 = points.iter().map(|z| p.value(*z)).sum();
    Ok(pair / (n * (n - 1)) as f64 + q / n as f64)
}

/// `L_Q(z, w) = log 1/|z − w| + (Q(z) + Q(w))/2`.
pub fn lq_kernel<P: ExternalField + ?Sized>(p: &P, z: Complex64, w: Complex64) -> f64 {
    -(z - w).norm().ln() + 0.5 * (p.value(z) + p.value(w))
}

/// `I_Q[μ] = ∬ log 1/|z − w| dμ dμ + μ(Q)` for cell weights on `grid`, with
/// the cell-averaged logarithmic kernel.
pub fn energy_continuous<P: ExternalField + ?Sized>(grid: &GridDomain, weights: &[f64], p: &P) -> Result<f64> {
    if weights.len() != grid.cells() {
        return Err(invalid(format!("{} weights for {} cells", weights.len(), grid.cells())));
    }
    let kernel = LogKernel::new(grid.resolution, grid.h(), 3);
    let mut u = vec![0.0; weights.len()];
    kernel.apply(weights, &mut u);
    Ok(weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| w * (u[i] + p.value(grid.centre(i))))
        .sum())
}

/// Right-hand side of the entropy estimate:
/// `−β(1−1/n)γ(Q) − (β/n)σ(Q) − (1/n)∫_S ΔQ log ΔQ dA`.
pub fn entropy_rhs(eq: &EquilibriumResult, n: usize, beta: f64) -> f64 {
    let nf = n as f64;
    -beta * (1.0 - 1.0 / nf) * eq.robin_const - beta / nf * eq.sigma_q - eq.sigma_log_laplacian / nf
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionQuadrature {
    pub radial_order: usize,
    pub angular_order: usize,
    /// Convergence threshold on the change of `log Z_n` between refinements.
    pub tol: f64,
    pub max_evaluations: u64,
}

impl Default for PartitionQuadrature {
    fn default() -> Self {
        Self { radial_order: 24, angular_order: 8, tol: 1e-6, max_evaluations: 2_000_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub n: usize,
    pub beta: f64,
    pub log_z: f64,
    /// Change of `log Z_n` at the last refinement.
    pub change: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyCheck {
    pub estimate: PartitionEstimate,
    /// `(1/n²) log Z_n`.
    pub normalized: f64,
    pub rhs: f64,
    pub passed: bool,
    /// `n = 1` is reported but not asserted.
    pub degenerate: bool,
}

/// Radius beyond which `e^{−βH_n}` is negligible for any single particle.
fn radial_cutoff<P: ExternalField + ?Sized>(p: &P, n: usize, beta: f64) -> f64 {
    let nf = n as f64;
    let q0 = p.value(Complex64::new(0.0, 0.0));
    let excess = |r: f64| {
        let q = (0..16)
            .map(|a| p.value(Complex64::from_polar(r, std::f64::consts::TAU * a as f64 / 16.0)))
            .fold(f64::INFINITY, f64::min);
        beta * nf * (q - q0) - 2.0 * beta * (nf - 1.0) * (1.0 + 2.0 * r).ln()
    };
    let mut r = 1.0;
    while excess(r) < 40.0 && r < 1e6 {
        r *= 1.25;
    }
    r
}

/// `log Z_n = log ∫ e^{−βH_n} dA^{⊗n}` for `n ≤ 3` by tensor quadrature in
/// polar coordinates (Gauss–Legendre in `r`, trapezoid in `θ`), doubling both
/// orders until `log Z_n` changes by less than `quad.tol`. For radial
/// potentials the first angle is fixed by rotation invariance.
pub fn partition_bruteforce<P: ExternalField + ?Sized>(
    p: &P,
    beta: f64,
    n: usize,
    quad: &PartitionQuadrature,
) -> Result<PartitionEstimate> {
    if !(1..=3).contains(&n) {
        return Err(invalid(format!("brute-force partition functions need n ∈ {{1, 2, 3}}, got {n}")));
    }
    if !(beta > 0.0) {
        return Err(invalid("β must be positive"));
    }
    let r_cut = radial_cutoff(p, n, beta);
    let mut orders = (quad.radial_order.max(4), quad.angular_order.max(2));
    let mut prev: Option<f64> = None;
    let mut evaluations = 0u64;
    let mut last_change = f64::NAN;
    loop {
        let angles_free = if p.is_radial() { n - 1 } else { n };
        let cost = (orders.0 as u64).pow(n as u32) * (orders.1 as u64).pow(angles_free as u32);
        if evaluations + cost > quad.max_evaluations {
            return Err(Error::Quadrature(format!(
                "partition function budget of {} evaluations exceeded (last change {:.3e})",
                quad.max_evaluations, last_change
            )));
        }
        let log_z = tensor_log_z(p, beta, n, r_cut, orders.0, orders.1);
        evaluations += cost;
        if let Some(pz) = prev {
            let change = (log_z - pz).abs();
            if change <= quad.tol {
                return Ok(PartitionEstimate { n, beta, log_z, change, evaluations });
            }
            last_change = change;
        }
        prev = Some(log_z);
        orders = (orders.0 * 2, orders.1 * 2);
    }
}

fn tensor_log_z<P: ExternalField + ?Sized>(p: &P, beta: f64, n: usize, r_cut: f64, mr: usize, mt: usize) -> f64 {
    let (rs, rw) = gauss_legendre_on(mr, 0.0, r_cut);
    // per particle: dA = 2r dr · dθ/(2π)
    let radial: Vec<(f64, f64)> = rs.iter().zip(&rw).map(|(r, w)| (*r, 2.0 * r * w)).collect();
    let angles: Vec<f64> = (0..mt).map(|a| std::f64::consts::TAU * a as f64 / mt as f64).collect();
    let fixed_first = p.is_radial();
    let per_angle = 1.0 / mt as f64;

    // each particle ranges over (radial node, angle node) pairs
    let sites: Vec<(Complex64, f64)> = radial
        .iter()
        .flat_map(|(r, w)| angles.iter().map(move |t| (Complex64::from_polar(*r, *t), w * per_angle)))
        .collect();
    let first_sites: Vec<(Complex64, f64)> = if fixed_first {
        radial.iter().map(|(r, w)| (Complex64::new(*r, 0.0), *w)).collect()
    } else {
        sites.clone()
    };

    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut push = |x: f64| {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > max {
            sum = sum * (max - x).exp() + 1.0;
            max = x;
        } else {
            sum += (x - max).exp();
        }
    };
    let mut pts = vec![Complex64::new(0.0, 0.0); n];
    for (z0, w0) in &first_sites {
        pts[0] = *z0;
        if n == 1 {
            push(w0.ln() - beta * hamiltonian(&pts, p, n));
            continue;
        }
        for (z1, w1) in &sites {
            pts[1] = *z1;
            if n == 2 {
                push((w0 * w1).ln() - beta * hamiltonian(&pts, p, n));
                continue;
            }
            for (z2, w2) in &sites {
                pts[2] = *z2;
                push((w0 * w1 * w2).ln() - beta * hamiltonian(&pts, p, n));
            }
        }
    }
    max + sum.ln()
}

/// Entropy estimate check `(1/n²) log Z_n ≥ rhs`.
pub fn entropy_check<P: ExternalField + ?Sized>(
    p: &P,
    eq: &EquilibriumResult,
    beta: f64,
    n: usize,
    quad: &PartitionQuadrature,
) -> Result<EntropyCheck> {
    let estimate = partition_bruteforce(p, beta, n, quad)?;
    let normalized = estimate.log_z / (n * n) as f64;
    let rhs = entropy_rhs(eq, n, beta);
    Ok(EntropyCheck { estimate, normalized, rhs, passed: normalized >= rhs, degenerate: n == 1 })
}

/// Summary of the energy functionals for one potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub robin_const: f64,
    pub energy_continuous: f64,
    pub discrete_mean: Option<f64>,
    pub discrete_samples: usize,
    pub entropy: Vec<EntropyCheck>,
}
