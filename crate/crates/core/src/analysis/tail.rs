use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::stats::{median, wilson_interval, Z95};
use crate::equilibrium::EquilibriumResult;
use crate::error::{invalid, Error, Result};
use crate::potential::ExternalField;

/// Row of a `D_n` tail table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub threshold: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Empirical `P(D_n > √((log n + μ + t)/(cβn)))` against `e^{−2t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub n: usize,
    pub beta: f64,
    pub c: f64,
    pub mu: f64,
    pub samples: usize,
    pub rows: Vec<TailRow>,
    pub warnings: Vec<String>,
    /// The bound is only claimed for `t ≤ aβn` with an unspecified `a`.
    pub cap_note: String,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

pub fn tail_threshold(n: usize, beta: f64, c: f64, mu: f64, t: f64) -> f64 {
    let nf = n as f64;
    ((nf.ln() + mu + t) / (c * beta * nf)).sqrt()
}

/// Tail table for `D_n` samples. Failure at a given `t` means the lower 95%
/// Wilson limit exceeds `e^{−2t}`. Values of `t` where fewer than 5
/// exceedances would be expected under the bound are dropped with a warning.
pub fn dn_tail(d_n: &[f64], n: usize, beta: f64, c0: f64, c: f64, mu: f64, t_grid: &[f64]) -> Result<TailReport> {
    if d_n.is_empty() {
        return Err(Error::EmptyInput("D_n samples"));
    }
    if !(c > 0.0 && c < c0) {
        return Err(invalid(format!("c must satisfy 0 < c < c₀ = {c0}, got {c}")));
    }
    if mu < 0.0 {
        return Err(invalid("μ must be nonnegative"));
    }
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let total = d_n.len();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for t in ts {
        if (n as f64).ln() + mu + t <= 0.0 {
            return Err(invalid(format!("log n + μ + t must be positive at t = {t}")));
        }
        let bound = (-2.0 * t).exp();
        if total as f64 * bound < 5.0 {
            warnings.push(format!("t ≥ {t} dropped: expected count under the bound is below 5 with {total} samples"));
            break;
        }
        let threshold = tail_threshold(n, beta, c, mu, t);
        let k = d_n.iter().filter(|d| **d > threshold).count();
        let (ci_lo, ci_hi) = wilson_interval(k, total, Z95);
        rows.push(TailRow { t, threshold, p_hat: k as f64 / total as f64, ci_lo, ci_hi, bound, pass: ci_lo <= bound });
    }
    Ok(TailReport {
        n,
        beta,
        c,
        mu,
        samples: total,
        rows,
        warnings,
        cap_note: format!("valid for t ≤ a·βn = a·{:.1} with a unspecified; not enforced", beta * n as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub beta: f64,
    pub median: f64,
    pub scale: f64,
    /// `median D_n / √(log n/(βn))`.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `A = 1.1/√c₀`.
    pub a: f64,
    pub below_a_at_largest: bool,
    /// Least-squares slope of `ρ_n` against `log n`.
    pub trend: f64,
}

/// Localization scaling from per-`n` medians `(n, β, median D_n)`.
pub fn localization_scaling(medians: &[(usize, f64, f64)], c0: f64) -> Result<ScalingReport> {
    if medians.len() < 3 {
        return Err(invalid(format!("need at least 3 values of n, got {}", medians.len())));
    }
    let mut rows: Vec<ScalingRow> = medians
        .iter()
        .map(|&(n, beta, median)| {
            let nf = n as f64;
            let scale = (nf.ln() / (beta * nf)).sqrt();
            ScalingRow { n, beta, median, scale, rho: median / scale }
        })
        .collect();
    rows.sort_by_key(|r| r.n);
    let a = 1.1 / c0.sqrt();
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.rho).collect();
    let (slope, _) = least_squares(&xs, &ys);
    let last = rows.last().expect("non-empty");
    Ok(ScalingReport { below_a_at_largest: last.rho < a, rows, a, trend: slope })
}

/// Localization scaling from `D_n` samples per `n`; each needs ≥ 10³ samples.
pub fn localization_scaling_samples(batches: &[(usize, f64, &[f64])], c0: f64) -> Result<ScalingReport> {
    let mut medians = Vec::new();
    for (n, beta, d) in batches {
        if d.len() < 1000 {
            return Err(invalid(format!("n = {n}: {} samples, need at least 1000", d.len())));
        }
        medians.push((*n, *beta, median(d)));
    }
    localization_scaling(&medians, c0)
}

pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    // shifting by the first sample keeps constant data exactly constant
    let n = xs.len() as f64;
    let (x0, y0) = (xs[0], ys[0]);
    let mx = xs.iter().map(|x| x - x0).sum::<f64>() / n + x0;
    let my = ys.iter().map(|y| y - y0).sum::<f64>() / n + y0;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeRRow {
    pub r: f64,
    /// `k(r) = ½ min{Q_eff(ζ) : δ(ζ) ≥ r}`.
    pub k: f64,
    pub bound: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub exceedances: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeRReport {
    pub n: usize,
    pub beta: f64,
    pub r0: f64,
    pub samples: usize,
    pub rows: Vec<LargeRRow>,
}

impl LargeRReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// `½ min{Q_eff : δ ≥ r}`. For a disc droplet `Q_eff` is radial and increasing
/// outside, so the minimum sits at `|ζ| = R + r`; otherwise exterior grid
/// cells are scanned.
pub fn exterior_rate<P: ExternalField + ?Sized>(p: &P, eq: &EquilibriumResult, r: f64) -> f64 {
    if let Some(radius) = eq.droplet_radius {
        return 0.5 * eq.effective_potential(p, Complex64::new(radius + r, 0.0));
    }
    let m = (0..eq.grid.cells())
        .filter(|&i| eq.distance_to_droplet(eq.grid.centre(i)) >= r)
        .map(|i| eq.q_eff[i])
        .fold(f64::INFINITY, f64::min);
    0.5 * m
}

/// Empirical `P(D_n > r)` against `e^{−k(r)βn}`, for `r ≥ r₀ = √(a₀/c)`.
pub fn large_r_tail<P: ExternalField + ?Sized>(
    d_n: &[f64],
    n: usize,
    beta: f64,
    p: &P,
    eq: &EquilibriumResult,
    c: f64,
    r_grid: &[f64],
) -> Result<LargeRReport> {
    if d_n.is_empty() {
        return Err(Error::EmptyInput("D_n samples"));
    }
    if !(c > 0.0) {
        return Err(invalid("c must be positive"));
    }
    let r0 = (eq.a0 / c).sqrt();
    let mut rows = Vec::new();
    for &r in r_grid {
        if r < r0 {
            return Err(invalid(format!("r = {r} is below r₀ = √(a₀/c) = {r0:.4}")));
        }
        let k = exterior_rate(p, eq, r);
        let bound = if k.is_finite() { (-k * beta * n as f64).exp() } else { 0.0 };
        let exceedances = d_n.iter().filter(|d| **d > r).count();
        let (ci_lo, ci_hi) = wilson_interval(exceedances, d_n.len(), Z95);
        rows.push(LargeRRow {
            r,
            k,
            bound,
            p_hat: exceedances as f64 / d_n.len() as f64,
            ci_lo,
            ci_hi,
            exceedances,
            pass: ci_lo <= bound,
        });
    }
    Ok(LargeRReport { n, beta, r0, samples: d_n.len(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_increase_and_probabilities_decrease() {
        let d: Vec<f64> = (0..10_000).map(|i| 0.4 * i as f64 / 10_000.0).collect();
        let ts: Vec<f64> = (0..12).map(|i| 0.25 * i as f64).collect();
        let rep = dn_tail(&d, 64, 1.0, 1.0, 0.9, 0.0, &ts).unwrap();
        for w in rep.rows.windows(2) {
            assert!(w[1].threshold > w[0].threshold);
            assert!(w[1].p_hat <= w[0].p_hat);
        }
    }

    #[test]
    fn large_t_is_truncated_and_zero_tail_passes() {
        let d = vec![0.0; 1000];
        let rep = dn_tail(&d, 64, 1.0, 1.0, 0.9, 0.0, &[0.0, 1.0, 10.0]).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.warnings.len(), 1);
        assert!(rep.passed());
        assert!(dn_tail(&d, 64, 1.0, 1.0, 1.0, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn doubling_beta_scales_denominator() {
        let a = localization_scaling(&[(64, 1.0, 0.1), (256, 1.0, 0.05), (1024, 1.0, 0.03)], 1.0).unwrap();
        let b = localization_scaling(&[(64, 2.0, 0.1), (256, 2.0, 0.05), (1024, 2.0, 0.03)], 1.0).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((y.scale / x.scale - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        }
        assert!(localization_scaling(&[(64, 1.0, 0.1), (256, 1.0, 0.05)], 1.0).is_err());
    }
}
