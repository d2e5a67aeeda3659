use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standard Gumbel distribution function `exp(−exp(−t))`.
pub fn gumbel_cdf(t: f64) -> f64 {
    (-(-t).exp()).exp()
}

/// Rescaling of `D_n` toward the standard Gumbel law:
/// `ω_n = √(4nγ_n c₀)·(D_n − √(γ_n/(4nc₀)))` with
/// `γ_n = log(n/2π) − log log n + log(R²c₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelConstants {
    pub n: usize,
    pub radius: f64,
    pub c0: f64,
    pub gamma_n: f64,
    pub scale: f64,
    pub shift: f64,
}

impl GumbelConstants {
    pub fn new(n: usize, radius: f64, c0: f64) -> Result<Self> {
        if n < 3 {
            return Err(invalid(format!("γ_n needs n ≥ 3, got {n}")));
        }
        if !(radius > 0.0 && c0 > 0.0) {
            return Err(invalid("R and c₀ must be positive"));
        }
        let nf = n as f64;
        let gamma_n = (nf / std::f64::consts::TAU).ln() - nf.ln().ln() + (radius * radius * c0).ln();
        if !(gamma_n > 0.0) {
            return Err(invalid(format!("γ_n = {gamma_n:.4} is not positive at n = {n}")));
        }
        Ok(Self {
            n,
            radius,
            c0,
            gamma_n,
            scale: (4.0 * nf * gamma_n * c0).sqrt(),
            shift: (gamma_n / (4.0 * nf * c0)).sqrt(),
        })
    }

    pub fn transform(&self, d_n: f64) -> f64 {
        self.scale * (d_n - self.shift)
    }

    /// `E max|ζ_j|` under the limiting law: `R + shift + γ_E/scale`.
    pub fn predicted_mean_max_radius(&self) -> f64 {
        self.radius + self.shift + EULER_GAMMA / self.scale
    }

    /// Leading-order shift `(1/(2√c₀))·√(log n / n)`.
    pub fn leading_shift(&self) -> f64 {
        let nf = self.n as f64;
        (nf.ln() / nf).sqrt() / (2.0 * self.c0.sqrt())
    }
}

pub fn gumbel_transform(d_n: &[f64], gc: &GumbelConstants) -> Vec<f64> {
    d_n.iter().map(|d| gc.transform(*d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centring() {
        let gc = GumbelConstants::new(1024, 1.0, 1.0).unwrap();
        assert_eq!(gc.transform(gc.shift), 0.0);
        assert!((gumbel_cdf(0.0) - (-1f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn shift_approaches_leading_order_slowly() {
        // ratio is √(γ_n / log n): about 0.823 at n = 10⁶
        let ratio = |n: usize| {
            let gc = GumbelConstants::new(n, 1.0, 1.0).unwrap();
            gc.shift / gc.leading_shift()
        };
        let nf = 1e6f64;
        let direct = (((nf / std::f64::consts::TAU).ln() - nf.ln().ln()) / nf.ln()).sqrt();
        assert!((ratio(1_000_000) - direct).abs() < 1e-14);
        assert!((ratio(1_000_000) - 0.8228).abs() < 1e-3);
        let mut prev = 0.0;
        for e in [3u32, 6, 9, 12, 15, 18] {
            let r = ratio(10usize.pow(e));
            assert!(r > prev && r < 1.0);
            prev = r;
        }
    }

    #[test]
    fn rejects_small_n() {
        assert!(GumbelConstants::new(8, 1.0, 1.0).is_err());
        assert!(GumbelConstants::new(2, 1.0, 1.0).is_err());
    }
}
