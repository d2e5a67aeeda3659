use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::stats::{blocked_standard_error, mean};
use crate::equilibrium::EquilibriumResult;
use crate::error::{Error, Result};

/// Bounded continuous test functions for `μ_n(f) − σ(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    One,
    /// `exp(−|ζ − c|²/(2w²))`.
    Bump { centre: (f64, f64), width: f64 },
    /// `min(|ζ|², clip)`.
    ModulusSquared { clip: f64 },
    /// `Re ζ` clamped to `[−clip, clip]`.
    RealPart { clip: f64 },
    /// `Im ζ` clamped to `[−clip, clip]`.
    ImagPart { clip: f64 },
}

impl TestFunction {
    pub fn eval(&self, z: Complex64) -> f64 {
        match *self {
            TestFunction::One => 1.0,
            TestFunction::Bump { centre, width } => {
                (-(z - Complex64::new(centre.0, centre.1)).norm_sqr() / (2.0 * width * width)).exp()
            }
            TestFunction::ModulusSquared { clip } => z.norm_sqr().min(clip),
            TestFunction::RealPart { clip } => z.re.clamp(-clip, clip),
            TestFunction::ImagPart { clip } => z.im.clamp(-clip, clip),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TestFunction::One => "one".into(),
            TestFunction::Bump { centre, width } => format!("bump({},{};{})", centre.0, centre.1, width),
            TestFunction::ModulusSquared { clip } => format!("abs2_clip{clip}"),
            TestFunction::RealPart { clip } => format!("re_clip{clip}"),
            TestFunction::ImagPart { clip } => format!("im_clip{clip}"),
        }
    }

    pub fn builtins() -> Vec<TestFunction> {
        vec![
            TestFunction::One,
            TestFunction::ModulusSquared { clip: 4.0 },
            TestFunction::RealPart { clip: 2.0 },
            TestFunction::ImagPart { clip: 2.0 },
            TestFunction::Bump { centre: (0.0, 0.0), width: 0.5 },
            TestFunction::Bump { centre: (0.5, 0.0), width: 0.3 },
            TestFunction::Bump { centre: (-0.3, 0.6), width: 0.25 },
        ]
    }

    /// `σ(f)` by quadrature over the equilibrium grid weights.
    pub fn sigma(&self, eq: &EquilibriumResult) -> f64 {
        eq.sigma_weights.iter().enumerate().map(|(i, w)| w * self.eval(eq.grid.centre(i))).sum()
    }
}

/// Per-sample values of `μ_n(f) = (1/n)Σ_j f(ζ_j)` for a set of functions.
#[derive(Debug, Clone)]
pub struct MeasureAccumulator {
    functions: Vec<TestFunction>,
    values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub function: String,
    pub sigma: f64,
    pub mean: f64,
    pub std_error: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub samples: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

impl MeasureAccumulator {
    pub fn new(functions: Vec<TestFunction>) -> Self {
        let values = vec![Vec::new(); functions.len()];
        Self { functions, values }
    }

    pub fn add(&mut self, points: &[Complex64]) {
        let n = points.len() as f64;
        for (f, v) in self.functions.iter().zip(&mut self.values) {
            v.push(points.iter().map(|z| f.eval(*z)).sum::<f64>() / n);
        }
    }

    /// Compare sample means with `σ(f)`; each row passes when
    /// `|mean − σ(f)| ≤ max(abs_tol, 3 s.e.)`, with blocked standard errors.
    pub fn finish(&self, eq: &EquilibriumResult, abs_tol: f64) -> Result<ConvergenceReport> {
        let samples = self.values.first().map_or(0, Vec::len);
        if samples == 0 {
            return Err(Error::EmptyInput("empirical measure samples"));
        }
        let rows = self
            .functions
            .iter()
            .zip(&self.values)
            .map(|(f, v)| {
                let sigma = f.sigma(eq);
                let m = mean(v);
                let se = if samples >= 40 { blocked_standard_error(v, 20) } else { 0.0 };
                let se = if se.is_nan() { 0.0 } else { se };
                let tolerance = abs_tol.max(3.0 * se);
                ConvergenceRow {
                    function: f.name(),
                    sigma,
                    mean: m,
                    std_error: se,
                    difference: (m - sigma).abs(),
                    tolerance,
                    pass: (m - sigma).abs() <= tolerance,
                }
            })
            .collect();
        Ok(ConvergenceReport { samples, rows })
    }
}

/// Run the comparison over stored configurations.
pub fn empirical_measure_test(
    configurations: &[Vec<Complex64>],
    eq: &EquilibriumResult,
    functions: &[TestFunction],
    abs_tol: f64,
) -> Result<ConvergenceReport> {
    let mut acc = MeasureAccumulator::new(functions.to_vec());
    for c in configurations {
        acc.add(c);
    }
    acc.finish(eq, abs_tol)
}
