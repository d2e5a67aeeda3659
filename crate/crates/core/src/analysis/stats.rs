//! Small statistics helpers.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Median (average of the two middle values for even length).
pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Wilson score interval for `k` successes out of `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Standard error of the mean from `blocks` contiguous batch means; the
/// trailing remainder is dropped.
pub fn blocked_standard_error(x: &[f64], blocks: usize) -> f64 {
    let blocks = blocks.min(x.len());
    if blocks < 2 {
        return f64::NAN;
    }
    let len = x.len() / blocks;
    let means: Vec<f64> = x.chunks_exact(len).take(blocks).map(mean).collect();
    (variance(&means) / blocks as f64).sqrt()
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Split-chain potential scale reduction factor.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let splits: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let m = splits.len() as f64;
    let l = half as f64;
    let means: Vec<f64> = splits.iter().map(|s| mean(s)).collect();
    let w = splits.iter().map(|s| variance(s)).sum::<f64>() / m;
    let b = l * variance(&means);
    let var_plus = (l - 1.0) / l * w + b / l;
    (var_plus / w).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wilson_reference_values() {
        // k = 0: upper limit z²/(n + z²)
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - Z95 * Z95 / (100.0 + Z95 * Z95)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!((hi - 0.5 - 0.09617).abs() < 1e-4);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic(&x, |t| t) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn rhat_near_one_for_iid_and_large_for_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..4000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..4000).map(|_| rng.random()).collect();
        assert!((split_rhat(&[&a, &b]) - 1.0).abs() < 0.01);
        let c: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
        assert!(split_rhat(&[&a, &c]) > 1.5);
    }

    #[test]
    fn blocked_se_of_iid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..100_000).map(|_| rng.random()).collect();
        let se = blocked_standard_error(&x, 100);
        let expected = (1.0f64 / 12.0 / 100_000.0).sqrt();
        assert!((se / expected - 1.0).abs() < 0.3, "{se} vs {expected}");
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }
}
