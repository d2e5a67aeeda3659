//! Monte Carlo checks of the Lagrange-polynomial identities
//! `E[1_U(ζ_j)·Y_{j,W}] = |U|·P(ζ_1 ∈ W)` and its two-index analogue.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::stats::{blocked_standard_error, mean};
use crate::error::{Error, Result};
use crate::potential::ExternalField;
use crate::sampler::{pair_functional, product_functional, Region, RegionRule};

/// Comparison of two sample means through their per-sample difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub samples: usize,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub difference: f64,
    pub difference_se: f64,
    /// `|difference| / difference_se`.
    pub z_score: f64,
    pub pass: bool,
}

fn check(lhs: &[f64], rhs: &[f64], blocks: usize) -> Result<IdentityCheck> {
    if lhs.len() < 2 * blocks {
        return Err(Error::EmptyInput("identity samples"));
    }
    let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let d = mean(&diff);
    let se = blocked_standard_error(&diff, blocks);
    let z = if se > 0.0 { d.abs() / se } else if d == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(IdentityCheck {
        samples: lhs.len(),
        lhs: mean(lhs),
        lhs_se: blocked_standard_error(lhs, blocks),
        rhs: mean(rhs),
        rhs_se: blocked_standard_error(rhs, blocks),
        difference: d,
        difference_se: se,
        z_score: z,
        pass: z <= 3.0,
    })
}

/// Single-index identity for particle `j`. The right side uses
/// `P(ζ_1 ∈ W) = E[(1/n)Σ_i 1_W(ζ_i)]` by exchangeability.
pub struct SingleIdentity {
    j: usize,
    u: Region,
    w: Region,
    rule: RegionRule,
    beta: f64,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
}

impl SingleIdentity {
    pub fn new(j: usize, u: Region, w: Region, order: usize, beta: f64) -> Result<Self> {
        Ok(Self { j, u, w, rule: RegionRule::new(&w, order)?, beta, lhs: Vec::new(), rhs: Vec::new() })
    }

    pub fn add<P: ExternalField + ?Sized>(&mut self, points: &[Complex64], p: &P) {
        let l = if self.u.contains(points[self.j]) { self.rule.y(points, self.j, p, self.beta) } else { 0.0 };
        let frac = points.iter().filter(|z| self.w.contains(**z)).count() as f64 / points.len() as f64;
        self.lhs.push(l);
        self.rhs.push(self.u.area() * frac);
    }

    pub fn finish(&self, blocks: usize) -> Result<IdentityCheck> {
        check(&self.lhs, &self.rhs, blocks)
    }
}

/// Two-index identity for particles `j ≠ k`, evaluated with the nested
/// functional and, for comparison, with the plain product `Y_j·Y_k`.
pub struct PairIdentity {
    j: usize,
    k: usize,
    u: (Region, Region),
    w: (Region, Region),
    rules: (RegionRule, RegionRule),
    beta: f64,
    nested: Vec<f64>,
    product: Vec<f64>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairIdentityReport {
    pub nested: IdentityCheck,
    pub product: IdentityCheck,
}

impl PairIdentity {
    pub fn new(j: usize, k: usize, u: (Region, Region), w: (Region, Region), order: usize, beta: f64) -> Result<Self> {
        if j == k {
            return Err(crate::error::invalid("the two indices must differ"));
        }
        Ok(Self {
            j,
            k,
            u,
            w,
            rules: (RegionRule::new(&w.0, order)?, RegionRule::new(&w.1, order)?),
            beta,
            nested: Vec::new(),
            product: Vec::new(),
            rhs: Vec::new(),
        })
    }

    pub fn add<P: ExternalField + ?Sized>(&mut self, points: &[Complex64], p: &P) {
        let hit = self.u.0.contains(points[self.j]) && self.u.1.contains(points[self.k]);
        let (nested, product) = if hit {
            (
                pair_functional(&self.rules.0, &self.rules.1, points, self.j, self.k, p, self.beta),
                product_functional(&self.rules.0, &self.rules.1, points, self.j, self.k, p, self.beta),
            )
        } else {
            (0.0, 0.0)
        };
        let n = points.len();
        let mut pairs = 0usize;
        for (a, za) in points.iter().enumerate() {
            if !self.w.0.contains(*za) {
                continue;
            }
            pairs += points.iter().enumerate().filter(|(b, zb)| *b != a && self.w.1.contains(**zb)).count();
        }
        self.nested.push(nested);
        self.product.push(product);
        self.rhs.push(self.u.0.area() * self.u.1.area() * pairs as f64 / (n * (n - 1)) as f64);
    }

    pub fn finish(&self, blocks: usize) -> Result<PairIdentityReport> {
        Ok(PairIdentityReport {
            nested: check(&self.nested, &self.rhs, blocks)?,
            product: check(&self.product, &self.rhs, blocks)?,
        })
    }
}
