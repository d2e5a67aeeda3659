use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::{ExternalField, Rect};
use crate::quad::{gauss_legendre_on, Estimate};

/// `log |ℓ_j(ζ)|^{2β}` for the weighted Lagrange polynomial of particle `j`,
/// with `n = points.len()` in the weight `e^{−n(Q(ζ)−Q(ζ_j))/2}`.
pub fn log_lagrange<P: ExternalField + ?Sized>(points: &[Complex64], j: usize, z: Complex64, p: &P, beta: f64) -> f64 {
    let zj = points[j];
    if z == zj {
        return 0.0;
    }
    let mut s = 0.0;
    for (i, w) in points.iter().enumerate() {
        if i != j {
            s += ((z - w).norm_sqr() / (zj - w).norm_sqr()).ln();
        }
    }
    if s == f64::NEG_INFINITY {
        return s;
    }
    let n = points.len() as f64;
    beta * (s - n * (p.value(z) - p.value(zj)))
}

/// `|ℓ_j(ζ)|^{2β}`; exactly 1 at `ζ_j` and exactly 0 at the other particles.
pub fn eval_lagrange<P: ExternalField + ?Sized>(points: &[Complex64], j: usize, z: Complex64, p: &P, beta: f64) -> f64 {
    log_lagrange(points, j, z, p, beta).exp()
}

/// Integration region for the `Y` functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Disc { centre: (f64, f64), radius: f64 },
    Rect(Rect),
}

impl Region {
    pub fn disc(centre: Complex64, radius: f64) -> Self {
        Region::Disc { centre: (centre.re, centre.im), radius }
    }

    /// Area in `dA` units (Lebesgue measure over `π`).
    pub fn area(&self) -> f64 {
        match *self {
            Region::Disc { radius, .. } => radius * radius,
            Region::Rect(r) => r.width() * r.height() / std::f64::consts::PI,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            Region::Disc { centre, radius } => (z - Complex64::new(centre.0, centre.1)).norm() < radius,
            Region::Rect(r) => r.contains(z),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Region::Disc { centre, radius } => centre.0.is_finite() && centre.1.is_finite() && radius >= 0.0,
            Region::Rect(r) => r.x_min <= r.x_max && r.y_min <= r.y_max && r.width().is_finite() && r.height().is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("malformed region {self:?}")))
        }
    }
}

/// Tensor Gauss–Legendre resolution: `order` radial × `2·order` angular nodes
/// on a disc, `order × order` on a rectangle. Refinement doubles `order`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Quadrature {
    pub order: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_refinements: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { order: 16, rel_tol: 1e-6, abs_tol: 1e-12, max_refinements: 5 }
    }
}

/// Precomputed nodes and `dA` weights on a region.
#[derive(Debug, Clone)]
pub struct RegionRule {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl RegionRule {
    pub fn new(region: &Region, order: usize) -> Result<Self> {
        region.validate()?;
        let order = order.max(1);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match *region {
            Region::Disc { centre, radius } => {
                let c = Complex64::new(centre.0, centre.1);
                let (rs, ws) = gauss_legendre_on(order, 0.0, radius);
                let m = 2 * order;
                for (r, w) in rs.iter().zip(&ws) {
                    for a in 0..m {
                        let t = std::f64::consts::TAU * (a as f64 + 0.5) / m as f64;
                        nodes.push(c + Complex64::from_polar(*r, t));
                        weights.push(w * r * 2.0 / m as f64);
                    }
                }
            }
            Region::Rect(r) => {
                let (xs, wx) = gauss_legendre_on(order, r.x_min, r.x_max);
                let (ys, wy) = gauss_legendre_on(order, r.y_min, r.y_max);
                for (y, b) in ys.iter().zip(&wy) {
                    for (x, a) in xs.iter().zip(&wx) {
                        nodes.push(Complex64::new(*x, *y));
                        weights.push(a * b / std::f64::consts::PI);
                    }
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn integrate(&self, mut f: impl FnMut(Complex64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }

    /// `Y_{j,W}` on this fixed rule.
    pub fn y<P: ExternalField + ?Sized>(&self, points: &[Complex64], j: usize, p: &P, beta: f64) -> f64 {
        self.integrate(|z| eval_lagrange(points, j, z, p, beta))
    }
}

/// `Y_{j,W} = ∫_W |ℓ_j|^{2β} dA`, refined until two successive orders agree.
pub fn lagrange_functional<P: ExternalField + ?Sized>(
    points: &[Complex64],
    j: usize,
    region: &Region,
    quad: &Quadrature,
    p: &P,
    beta: f64,
) -> Result<Estimate> {
    if j >= points.len() {
        return Err(invalid(format!("index {j} out of range for {} points", points.len())));
    }
    region.validate()?;
    if region.area() == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let mut order = quad.order.max(2);
    let mut prev = RegionRule::new(region, order)?.y(points, j, p, beta);
    let mut residual = f64::INFINITY;
    for _ in 0..=quad.max_refinements {
        order *= 2;
        let next = RegionRule::new(region, order)?.y(points, j, p, beta);
        residual = (next - prev).abs();
        if residual <= quad.abs_tol.max(quad.rel_tol * next.abs()) {
            return Ok(Estimate { value: next, error: residual });
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "Y_{{{j},W}} not converged at order {order}: last change {residual:.3e} on value {prev:.6e}"
    )))
}

/// Nested two-index functional
/// `∫_{W₁} |ℓ_j(ζ)|^{2β} ∫_{W₂} |ℓ_k^{(ζ)}(η)|^{2β} dA(η) dA(ζ)`, where
/// `ℓ_k^{(ζ)}` is the Lagrange polynomial of particle `k` in the configuration
/// with `ζ_j` replaced by `ζ`. Its integrand equals
/// `e^{−β(H(…ζ…η…) − H(…ζ_j…ζ_k…))}`.
pub fn pair_functional<P: ExternalField + ?Sized>(
    rule_j: &RegionRule,
    rule_k: &RegionRule,
    points: &[Complex64],
    j: usize,
    k: usize,
    p: &P,
    beta: f64,
) -> f64 {
    assert!(j != k && j < points.len() && k < points.len(), "indices must be distinct and in range");
    let n = points.len() as f64;
    let zk = points[k];
    let qk = p.value(zk);
    // η-dependent part of log|ℓ_k^{(ζ)}(η)|², excluding the factor for the moved particle
    let base: Vec<f64> = rule_k
        .nodes
        .iter()
        .map(|b| {
            let mut s = 0.0;
            for (i, w) in points.iter().enumerate() {
                if i != j && i != k {
                    s += ((b - w).norm_sqr() / (zk - w).norm_sqr()).ln();
                }
            }
            s - n * (p.value(*b) - qk)
        })
        .collect();
    rule_j.integrate(|a| {
        let outer = eval_lagrange(points, j, a, p, beta);
        if outer == 0.0 {
            return 0.0;
        }
        let ca = (zk - a).norm_sqr().ln();
        let inner: f64 = rule_k
            .nodes
            .iter()
            .zip(&rule_k.weights)
            .zip(&base)
            .map(|((b, w), s)| w * (beta * (s + (b - a).norm_sqr().ln() - ca)).exp())
            .sum();
        outer * inner
    })
}

/// `Y_{j,W₁}·Y_{k,W₂}` with both Lagrange polynomials taken in the original
/// configuration.
pub fn product_functional<P: ExternalField + ?Sized>(
    rule_j: &RegionRule,
    rule_k: &RegionRule,
    points: &[Complex64],
    j: usize,
    k: usize,
    p: &P,
    beta: f64,
) -> f64 {
    rule_j.y(points, j, p, beta) * rule_k.y(points, k, p, beta)
}
