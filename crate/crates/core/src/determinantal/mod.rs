//! Exact `β = 1` computations for radial potentials.

mod gumbel;
mod weighted;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use gumbel::{gumbel_cdf, gumbel_transform, GumbelConstants, EULER_GAMMA};
pub use weighted::{
    log_weighted_poly, maximum_principle_suite, pointwise_suite, random_weighted_poly, weighted_poly_eval, SuiteReport,
};

use crate::equilibrium::radial_droplet_radius;
use crate::error::{Error, Result};
use crate::potential::ExternalField;
use crate::quad::{self, gauss_legendre};

/// Integrands are truncated where they fall below `e^{−TRUNCATION}` of their peak.
const TRUNCATION: f64 = 40.0;
const PANELS: usize = 96;
const PANEL_ORDER: usize = 8;

/// Radial factor `k`: the scaled density `g_k(r) = 2r^{2k+1}e^{−nQ(r)}/peak`
/// tabulated on panels for CDF evaluation and inversion.
#[derive(Debug, Clone)]
struct Factor {
    log_peak: f64,
    log_norm: f64,
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Factor {
    fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty table")
    }

    fn lo(&self) -> f64 {
        self.edges[0]
    }

    fn hi(&self) -> f64 {
        *self.edges.last().expect("non-empty table")
    }
}

/// Orthogonal norms and radial factors of the `β = 1` ensemble of a radial potential.
pub struct RadialEnsemble<'a, P: ExternalField + ?Sized> {
    p: &'a P,
    n: usize,
    radius: f64,
    c0: f64,
    factors: Vec<Factor>,
    max_rel_error: f64,
    gl: (Vec<f64>, Vec<f64>),
}

fn radial_q<P: ExternalField + ?Sized>(p: &P, r: f64) -> (f64, f64) {
    let v = p.radial(r).expect("radial profile checked at build");
    (v.q, v.dq)
}

impl<'a, P: ExternalField + ?Sized> RadialEnsemble<'a, P> {
    pub fn build(p: &'a P, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !p.is_radial() {
            return Err(Error::UnsupportedPotential(format!("{} has no radial profile", p.label())));
        }
        let radius = radial_droplet_radius(p)?;
        let c0 = p.radial(radius).expect("radial").laplacian(radius);
        let gl = gauss_legendre(PANEL_ORDER);
        let built: Vec<Result<(Factor, f64)>> =
            (0..n).into_par_iter().map(|k| build_factor(p, n, k, &gl)).collect();
        let mut factors = Vec::with_capacity(n);
        let mut max_rel_error: f64 = 0.0;
        for f in built {
            let (f, e) = f?;
            max_rel_error = max_rel_error.max(e);
            factors.push(f);
        }
        Ok(Self { p, n, radius, c0, factors, max_rel_error, gl })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn potential(&self) -> &P {
        self.p
    }

    /// Droplet radius `R`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `c₀ = ΔQ(R)`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `log h_k` for `k = 0, …, n−1`.
    pub fn log_norms(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.log_norm).collect()
    }

    /// Largest estimated relative quadrature error among the norms.
    pub fn max_rel_error(&self) -> f64 {
        self.max_rel_error
    }

    /// `log R_n(r)` for `|ζ| = r`.
    pub fn log_one_point(&self, r: f64) -> f64 {
        let (q, _) = radial_q(self.p, r);
        if r == 0.0 {
            return -(self.n as f64) * q - self.factors[0].log_norm;
        }
        let lr = r.ln();
        let s = quad::log_sum_exp(self.factors.iter().enumerate().map(|(k, f)| 2.0 * k as f64 * lr - f.log_norm));
        s - self.n as f64 * q
    }

    /// `R_n(ζ) = e^{−nQ(ζ)} Σ_{k<n} |ζ|^{2k}/h_k`.
    pub fn one_point_exact(&self, r: f64) -> f64 {
        self.log_one_point(r).exp()
    }

    /// `∫ R_n dA`, which equals `n`.
    pub fn kernel_mass(&self) -> Result<f64> {
        let hi = self.factors.iter().map(|f| f.hi()).fold(self.radius, f64::max);
        let f = |r: f64| self.one_point_exact(r) * 2.0 * r;
        let inner = quad::integrate(f, 0.0, self.radius, 0.0, 1e-12)?;
        let outer = quad::integrate(f, self.radius, hi, 0.0, 1e-12)?;
        Ok(inner.value + outer.value)
    }

    fn partial(&self, k: usize, r: f64) -> f64 {
        let f = &self.factors[k];
        if r <= f.lo() {
            return 0.0;
        }
        if r >= f.hi() {
            return f.total();
        }
        let i = f.edges.partition_point(|e| *e <= r) - 1;
        f.cumulative[i] + self.panel_integral(k, f.edges[i], r)
    }

    fn scaled_density(&self, k: usize, r: f64) -> f64 {
        let f = &self.factors[k];
        if r <= 0.0 {
            return 0.0;
        }
        let (q, _) = radial_q(self.p, r);
        (std::f64::consts::LN_2 + (2 * k + 1) as f64 * r.ln() - self.n as f64 * q - f.log_peak).exp()
    }

    fn panel_integral(&self, k: usize, a: f64, b: f64) -> f64 {
        let (xs, ws) = &self.gl;
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        xs.iter().zip(ws).map(|(x, w)| w * h * self.scaled_density(k, m + h * x)).sum()
    }

    /// `F_k(r) = ∫_0^r 2t^{2k+1}e^{−nQ(t)}dt / h_k`.
    pub fn factor_cdf(&self, k: usize, r: f64) -> f64 {
        let f = &self.factors[k];
        (self.partial(k, r) / f.total()).clamp(0.0, 1.0)
    }

    /// `P(max_j |ζ_j| ≤ r) = Π_k F_k(r)`.
    pub fn radius_cdf(&self, r: f64) -> f64 {
        let mut log = 0.0;
        for k in 0..self.n {
            let f = self.factor_cdf(k, r);
            if f == 0.0 {
                return 0.0;
            }
            log += f.ln();
        }
        log.exp()
    }

    /// Quantile of the maximal modulus, by bisection on `radius_cdf`.
    pub fn radius_quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidParameter(format!("quantile level must lie in (0, 1), got {u}")));
        }
        let lo = 0.0;
        let hi = self.factors.iter().map(|f| f.hi()).fold(self.radius, f64::max);
        quad::bisect(|r| self.radius_cdf(r) - u, lo, hi, 1e-12)
            .ok_or_else(|| Error::NonConvergence { what: "radius quantile", iterations: 0, residual: f64::NAN })
    }

    /// Inverse of `F_k` at level `u`, to `1e−10` in `r`.
    pub fn factor_quantile(&self, k: usize, u: f64) -> Result<f64> {
        let f = &self.factors[k];
        let target = u.clamp(0.0, 1.0) * f.total();
        let i = (f.cumulative.partition_point(|c| *c <= target).max(1) - 1).min(PANELS - 1);
        let (mut a, mut b) = (f.edges[i], f.edges[i + 1]);
        let base = f.cumulative[i];
        let g = |x: f64| base + self.panel_integral(k, f.edges[i], x) - target;
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let v = g(x);
            if v > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let d = self.scaled_density(k, x);
            let newton = if d > 0.0 { x - v / d } else { f64::NAN };
            let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - x).abs() <= 1e-12 || b - a <= 1e-10 {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::NonConvergence { what: "radial inverse CDF", iterations: 200, residual: b - a })
    }

    /// One draw of the `n` moduli (independent across `k`).
    pub fn sample_radii<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        (0..self.n).map(|k| self.factor_quantile(k, rng.random::<f64>())).collect()
    }

    /// `draws` samples of `max_j |ζ_j|`. Draw `d` uses ChaCha8 stream `d` of
    /// `seed`, so the output does not depend on thread scheduling.
    pub fn max_radius_draws(&self, draws: usize, seed: u64) -> Result<Vec<f64>> {
        (0..draws)
            .into_par_iter()
            .map(|d| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(d as u64);
                let radii = self.sample_radii(&mut rng)?;
                Ok(radii.into_iter().fold(0.0, f64::max))
            })
            .collect()
    }
}

fn build_factor<P: ExternalField + ?Sized>(p: &P, n: usize, k: usize, gl: &(Vec<f64>, Vec<f64>)) -> Result<(Factor, f64)> {
    let nf = n as f64;
    let m = (2 * k + 1) as f64;
    let log_g = |r: f64| -> f64 {
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        std::f64::consts::LN_2 + m * r.ln() - nf * radial_q(p, r).0
    };
    // the peak solves (2k+1) = n·r·Q′(r); r·Q′ is nondecreasing
    let slope = |r: f64| m - nf * r * radial_q(p, r).1;
    let mut hi = 1.0;
    while slope(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e150 {
            return Err(Error::Quadrature(format!("no peak for factor {k}")));
        }
    }
    let peak = quad::bisect(slope, 0.0, hi, 1e-15 * hi).ok_or_else(|| Error::Quadrature(format!("peak of factor {k}")))?;
    let log_peak = log_g(peak);
    let drop = |r: f64| log_g(r) - log_peak + TRUNCATION;
    let lo = if drop(f64::MIN_POSITIVE) >= 0.0 {
        0.0
    } else {
        quad::bisect(drop, 0.0, peak, 1e-14 * peak).unwrap_or(0.0)
    };
    let mut right = 2.0 * peak;
    while drop(right) > 0.0 {
        right *= 2.0;
    }
    let hi = quad::bisect(drop, peak, right, 1e-14 * right).unwrap_or(right);

    let g = |r: f64| (log_g(r) - log_peak).exp();
    let left = quad::integrate(g, lo, peak, 0.0, 1e-13)?;
    let right_part = quad::integrate(g, peak, hi, 0.0, 1e-13)?;
    let total = left.value + right_part.value;
    let tail = (-TRUNCATION).exp() * (hi - lo);
    let rel_error = (left.error + right_part.error + tail) / total;
    if !(rel_error <= 1e-8) {
        return Err(Error::Quadrature(format!("h_{k}: relative error {rel_error:.2e} exceeds 1e-8")));
    }

    let (xs, ws) = gl;
    let width = (hi - lo) / PANELS as f64;
    let edges: Vec<f64> = (0..=PANELS).map(|i| lo + width * i as f64).collect();
    let mut cumulative = Vec::with_capacity(PANELS + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in edges.windows(2) {
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        acc += xs.iter().zip(ws).map(|(x, wt)| wt * half * g(mid + half * x)).sum::<f64>();
        cumulative.push(acc);
    }
    let table_error = (acc - total).abs() / total;
    Ok((
        Factor { log_peak, log_norm: log_peak + total.ln(), edges, cumulative },
        rel_error.max(table_error),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn ginibre_origin_value_is_n() {
        let p = Potential::ginibre();
        let e = RadialEnsemble::build(&p, 16).unwrap();
        assert!((e.one_point_exact(0.0) - 16.0).abs() < 1e-9);
        assert!(e.max_rel_error() < 1e-8);
    }

    #[test]
    fn cdf_limits_and_monotone() {
        let p = Potential::power(2.0).unwrap();
        let e = RadialEnsemble::build(&p, 12).unwrap();
        assert_eq!(e.radius_cdf(0.0), 0.0);
        assert!((e.radius_cdf(10.0) - 1.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..400 {
            let v = e.radius_cdf(i as f64 * 0.005);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn quantile_inverts_factor() {
        let p = Potential::ginibre();
        let e = RadialEnsemble::build(&p, 20).unwrap();
        for k in [0, 5, 19] {
            for u in [0.01, 0.3, 0.5, 0.97] {
                let r = e.factor_quantile(k, u).unwrap();
                assert!((e.factor_cdf(k, r) - u).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_non_radial() {
        let p = Potential::elliptic(0.3).unwrap();
        assert!(RadialEnsemble::build(&p, 4).is_err());
    }
}
