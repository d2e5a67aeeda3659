use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::tail::least_squares;
use crate::error::{invalid, Error, Result};
use crate::potential::Rect;

/// One-point intensity estimate on annuli `edges[i] ≤ |ζ| < edges[i+1]`,
/// normalized per unit `dA` (expected particles per `dA`).
#[derive(Debug, Clone)]
pub struct RadialHistogram {
    n: usize,
    edges: Vec<f64>,
    counts: Vec<u64>,
    samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub n: usize,
    pub samples: u64,
    pub typical_spacing: f64,
    pub centres: Vec<f64>,
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    /// Binomial standard error of each density value.
    pub std_error: Vec<f64>,
    pub counts: Vec<u64>,
}

impl RadialProfile {
    /// `Σ` density × annulus area, i.e. the mean number of points covered.
    pub fn total_mass(&self) -> f64 {
        self.edges.windows(2).zip(&self.density).map(|(e, d)| d * (e[1] * e[1] - e[0] * e[0])).sum()
    }
}

impl RadialHistogram {
    /// Annulus widths must be at least twice the typical spacing `1/√n`.
    pub fn new(n: usize, edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
            return Err(invalid("radial bin edges must be nonnegative and strictly increasing"));
        }
        let spacing = 1.0 / (n as f64).sqrt();
        let narrowest = edges.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if narrowest < 2.0 * spacing * (1.0 - 1e-12) {
            return Err(invalid(format!("bin width {narrowest:.4} is below twice the spacing 1/√n = {spacing:.4}")));
        }
        let bins = edges.len() - 1;
        Ok(Self { n, edges, counts: vec![0; bins], samples: 0 })
    }

    pub fn uniform(n: usize, r_max: f64, bins: usize) -> Result<Self> {
        Self::new(n, (0..=bins).map(|i| r_max * i as f64 / bins as f64).collect())
    }

    pub fn add(&mut self, points: &[Complex64]) {
        self.samples += 1;
        for z in points {
            let r = z.norm();
            let i = self.edges.partition_point(|e| *e <= r);
            if i >= 1 && i < self.edges.len() {
                self.counts[i - 1] += 1;
            }
        }
    }

    pub fn finish(&self) -> Result<RadialProfile> {
        if self.samples == 0 {
            return Err(Error::EmptyInput("one-point histogram"));
        }
        let s = self.samples as f64;
        let mut density = Vec::new();
        let mut std_error = Vec::new();
        for (w, c) in self.edges.windows(2).zip(&self.counts) {
            let area = w[1] * w[1] - w[0] * w[0];
            density.push(*c as f64 / (s * area));
            std_error.push((*c as f64).max(1.0).sqrt() / (s * area));
        }
        Ok(RadialProfile {
            n: self.n,
            samples: self.samples,
            typical_spacing: 1.0 / (self.n as f64).sqrt(),
            centres: self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
            edges: self.edges.clone(),
            density,
            std_error,
            counts: self.counts.clone(),
        })
    }
}

/// Cartesian one-point histogram on a rectangle split into `bins × bins` cells.
#[derive(Debug, Clone)]
pub struct CartesianHistogram {
    n: usize,
    rect: Rect,
    bins: usize,
    counts: Vec<u64>,
    samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityField {
    pub n: usize,
    pub samples: u64,
    pub rect: Rect,
    pub bins: usize,
    pub typical_spacing: f64,
    /// Row-major (`x + bins·y`) intensity per unit `dA`.
    pub density: Vec<f64>,
}

impl IntensityField {
    pub fn bin_centre(&self, idx: usize) -> Complex64 {
        let (x, y) = (idx % self.bins, idx / self.bins);
        let wx = self.rect.width() / self.bins as f64;
        let wy = self.rect.height() / self.bins as f64;
        Complex64::new(self.rect.x_min + (x as f64 + 0.5) * wx, self.rect.y_min + (y as f64 + 0.5) * wy)
    }

    pub fn total_mass(&self) -> f64 {
        let area = self.rect.width() * self.rect.height() / (std::f64::consts::PI * (self.bins * self.bins) as f64);
        self.density.iter().sum::<f64>() * area
    }
}

impl CartesianHistogram {
    pub fn new(n: usize, rect: Rect, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(invalid("need at least one bin"));
        }
        let spacing = 1.0 / (n as f64).sqrt();
        let side = (rect.width() / bins as f64).min(rect.height() / bins as f64);
        if side < 2.0 * spacing * (1.0 - 1e-12) {
            return Err(invalid(format!("bin side {side:.4} is below twice the spacing 1/√n = {spacing:.4}")));
        }
        Ok(Self { n, rect, bins, counts: vec![0; bins * bins], samples: 0 })
    }

    pub fn add(&mut self, points: &[Complex64]) {
        self.samples += 1;
        let b = self.bins as f64;
        for z in points {
            let fx = (z.re - self.rect.x_min) / self.rect.width() * b;
            let fy = (z.im - self.rect.y_min) / self.rect.height() * b;
            if fx >= 0.0 && fy >= 0.0 && fx < b && fy < b {
                self.counts[fx as usize + self.bins * fy as usize] += 1;
            }
        }
    }

    pub fn finish(&self) -> Result<IntensityField> {
        if self.samples == 0 {
            return Err(Error::EmptyInput("one-point histogram"));
        }
        let area =
            self.rect.width() * self.rect.height() / (std::f64::consts::PI * (self.bins * self.bins) as f64);
        let s = self.samples as f64;
        Ok(IntensityField {
            n: self.n,
            samples: self.samples,
            rect: self.rect,
            bins: self.bins,
            typical_spacing: 1.0 / (self.n as f64).sqrt(),
            density: self.counts.iter().map(|c| *c as f64 / (s * area)).collect(),
        })
    }
}

/// Least-squares fit of `−log R_n` against `δ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    /// `slope/(βn)`.
    pub c_hat: f64,
    pub c0: f64,
    /// `ĉ ∈ [1.8, 2.2]·c₀`.
    pub verdict: bool,
}

/// Fit `(δ, R_n)` pairs inside `window`.
pub fn decay_fit(values: &[(f64, f64)], window: (f64, f64), n: usize, beta: f64, c0: f64) -> Result<DecayFit> {
    let inside: Vec<(f64, f64)> = values.iter().copied().filter(|(d, _)| *d >= window.0 && *d <= window.1).collect();
    if inside.len() < 2 {
        return Err(invalid(format!("need at least two points in the window {window:?}")));
    }
    if let Some((d, v)) = inside.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(invalid(format!("non-positive value {v} at δ = {d}")));
    }
    let xs: Vec<f64> = inside.iter().map(|(d, _)| d * d).collect();
    let ys: Vec<f64> = inside.iter().map(|(_, v)| -v.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    let c_hat = slope / (beta * n as f64);
    Ok(DecayFit {
        window,
        points: inside.iter().map(|(d, v)| (d * d, -v.ln())).collect(),
        slope,
        intercept,
        rms_residual: rms,
        c_hat,
        c0,
        verdict: (1.8 * c0..=2.2 * c0).contains(&c_hat),
    })
}
