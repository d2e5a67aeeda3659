//! Logarithmic kernel on a uniform grid, applied by zero-padded FFT
//! convolution.
//!
//! Entry `(a, b)` of the kernel is the mean of `log 1/|x − y|` over a pair of
//! square cells at lattice offset `(a, b)`. Near offsets use the exact cell
//! average; the rest use the centre-to-centre value.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::quad;

/// Mean of `log|d + u|` for `u` the difference of two independent uniform
/// points in the unit square, at integer lattice offset `d = (a, b)`.
pub fn mean_log_distance(a: i32, b: i32) -> f64 {
    let (a, b) = (a as f64, b as f64);
    let inner = |u: f64| -> f64 {
        let f = |v: f64| (1.0 - v.abs()) * 0.5 * ((a + u).powi(2) + (b + v).powi(2)).ln();
        let lo = quad::integrate(f, -1.0, 0.0, 1e-13, 1e-12).map(|e| e.value).unwrap_or(f64::NAN);
        let hi = quad::integrate(f, 0.0, 1.0, 1e-13, 1e-12).map(|e| e.value).unwrap_or(f64::NAN);
        (1.0 - u.abs()) * (lo + hi)
    };
    let lo = quad::integrate(inner, -1.0, 0.0, 1e-12, 1e-11).map(|e| e.value).unwrap_or(f64::NAN);
    let hi = quad::integrate(inner, 0.0, 1.0, 1e-12, 1e-11).map(|e| e.value).unwrap_or(f64::NAN);
    lo + hi
}

/// Self-interaction constant `c` of a uniformly charged square of side `h`:
/// its energy is `−log(c·h)`.
pub fn square_self_energy_constant() -> f64 {
    mean_log_distance(0, 0).exp()
}

/// Convolution with the logarithmic kernel on an `n × n` cell grid.
pub struct LogKernel {
    n: usize,
    m: usize,
    /// Kernel spectrum in transposed (column-major) layout.
    spectrum_t: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LogKernel {
    /// `near_field` is the largest offset (in cells, per axis) that uses the
    /// exact cell-averaged kernel.
    pub fn new(n: usize, h: f64, near_field: usize) -> Self {
        let m = 2 * n;
        let nf = near_field as i32;
        let near: Vec<f64> = (0..=nf)
            .flat_map(|a| (0..=nf).map(move |b| (a, b)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(a, b)| mean_log_distance(a, b))
            .collect();
        let mut table = vec![Complex64::new(0.0, 0.0); m * m];
        for row in 0..m {
            let dy = if row < n { row as i32 } else { row as i32 - m as i32 };
            for col in 0..m {
                let dx = if col < n { col as i32 } else { col as i32 - m as i32 };
                let (ax, ay) = (dx.abs(), dy.abs());
                let v = if ax <= nf && ay <= nf {
                    -(near[(ax * (nf + 1) + ay) as usize] + h.ln())
                } else {
                    -0.5 * ((dx as f64 * h).powi(2) + (dy as f64 * h).powi(2)).ln()
                };
                // transposed storage: column index major
                table[col * m + row] = Complex64::new(v, 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        // 2-D FFT of the transposed table is the transpose of the 2-D FFT
        fft_rows(&forward, &mut table, m);
        transpose_in_place(&mut table, m);
        fft_rows(&forward, &mut table, m);
        transpose_in_place(&mut table, m);
        LogKernel {
            n,
            m,
            spectrum_t: table,
            forward,
            inverse,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `out[i] = Σ_j K(i, j) w[j]` with cells indexed `x + n·y`.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        assert_eq!(w.len(), n * n);
        assert_eq!(out.len(), n * n);
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
        buf.par_chunks_mut(m).take(n).enumerate().for_each(|(y, row)| {
            for x in 0..n {
                row[x] = Complex64::new(w[x + n * y], 0.0);
            }
        });
        fft_rows(&self.forward, &mut buf[..n * m], m);
        let mut cols = transpose(&buf, m);
        fft_rows(&self.forward, &mut cols, m);
        cols.par_iter_mut().zip(self.spectrum_t.par_iter()).for_each(|(a, k)| *a *= k);
        fft_rows(&self.inverse, &mut cols, m);
        let mut rows = transpose(&cols, m);
        fft_rows(&self.inverse, &mut rows[..n * m], m);
        let scale = 1.0 / (m * m) as f64;
        out.par_chunks_mut(n).enumerate().for_each(|(y, o)| {
            for x in 0..n {
                o[x] = rows[y * m + x].re * scale;
            }
        });
    }
}

fn fft_rows(plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64], m: usize) {
    data.par_chunks_mut(m).for_each_init(
        || vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
        |scratch, row| plan.process_with_scratch(row, scratch),
    );
}

fn transpose(data: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    out.par_chunks_mut(m).enumerate().for_each(|(c, col)| {
        for r in 0..m {
            col[r] = data[r * m + c];
        }
    });
    out
}

fn transpose_in_place(data: &mut [Complex64], m: usize) {
    for r in 0..m {
        for c in (r + 1)..m {
            data.swap(r * m + c, c * m + r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn square_constant_matches_monte_carlo() {
        // independent oracle: Monte Carlo over pairs of points in the unit square
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples = 2_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let dx: f64 = rng.random::<f64>() - rng.random::<f64>();
            let dy: f64 = rng.random::<f64>() - rng.random::<f64>();
            acc += 0.5 * (dx * dx + dy * dy).ln();
        }
        let mc = acc / samples as f64;
        let exact = mean_log_distance(0, 0);
        assert!((exact - mc).abs() < 2e-3, "{exact} vs {mc}");
        let c = square_self_energy_constant();
        assert!((c - 0.44705).abs() < 1e-4, "{c}");
    }

    #[test]
    fn far_offsets_approach_point_kernel() {
        let v = mean_log_distance(6, 2);
        let point = 0.5 * (36.0f64 + 4.0).ln();
        assert!((v - point).abs() < 2e-3);
        assert!((mean_log_distance(1, 0) - mean_log_distance(0, 1)).abs() < 1e-9);
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let n = 12;
        let h = 0.3;
        let k = LogKernel::new(n, h, 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
        let mut out = vec![0.0; n * n];
        k.apply(&w, &mut out);
        let near00 = -(mean_log_distance(0, 0) + h.ln());
        let near10 = -(mean_log_distance(1, 0) + h.ln());
        let near11 = -(mean_log_distance(1, 1) + h.ln());
        for i in 0..n * n {
            let (xi, yi) = ((i % n) as i32, (i / n) as i32);
            let mut s = 0.0;
            for j in 0..n * n {
                let (xj, yj) = ((j % n) as i32, (j / n) as i32);
                let (dx, dy) = ((xi - xj).abs(), (yi - yj).abs());
                let kij = match (dx, dy) {
                    (0, 0) => near00,
                    (1, 0) | (0, 1) => near10,
                    (1, 1) => near11,
                    _ => -0.5 * ((dx as f64 * h).powi(2) + (dy as f64 * h).powi(2)).ln(),
                };
                s += kij * w[j];
            }
            assert!((s - out[i]).abs() < 1e-10 * (1.0 + s.abs()), "{i}: {s} vs {}", out[i]);
        }
    }
}
