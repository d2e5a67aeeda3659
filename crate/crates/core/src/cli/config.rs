//! Experiment configuration: one TOML file plus `CGAS_<SECTION>__<KEY>`
//! environment overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::TestFunction;
use crate::error::{Error, Result};
use crate::potential::{make_builtin, perturb, Builtin, ExternalField, Perturbation, Potential, Rect};

fn config_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub sampler: SamplerSpec,
    pub exact: ExactSpec,
    pub analysis: AnalysisSpec,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSpec {
    /// `ginibre`, `power` or `elliptic`.
    pub name: String,
    pub b: Option<f64>,
    pub tau: Option<f64>,
    pub perturbation: Option<PerturbationSpec>,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self { name: "ginibre".into(), b: None, tau: None, perturbation: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    Constant { value: f64 },
    Sinusoidal { amplitude: f64, frequency: f64 },
    GaussianBump { amplitude: f64, center: [f64; 2], width: f64 },
}

impl PerturbationSpec {
    fn build(&self) -> (Perturbation, f64) {
        match *self {
            PerturbationSpec::Constant { value } => (Perturbation::Constant(value), value.abs()),
            PerturbationSpec::Sinusoidal { amplitude, frequency } => {
                (Perturbation::Sinusoidal { amplitude, frequency }, amplitude.abs())
            }
            PerturbationSpec::GaussianBump { amplitude, center, width } => (
                Perturbation::GaussianBump { amplitude, center: Complex64::new(center[0], center[1]), width },
                amplitude.abs(),
            ),
        }
    }
}

pub type Field = Arc<dyn ExternalField>;

impl PotentialSpec {
    pub fn base(&self) -> Result<Potential> {
        let kind = match self.name.as_str() {
            "ginibre" => Builtin::Ginibre,
            "power" => Builtin::Power { b: self.b.ok_or_else(|| config_err("potential.b", "required for power"))? },
            "elliptic" => {
                Builtin::Elliptic { tau: self.tau.ok_or_else(|| config_err("potential.tau", "required for elliptic"))? }
            }
            other => {
                return Err(config_err("potential.name", format!("unknown potential `{other}` (ginibre, power, elliptic)")))
            }
        };
        make_builtin(kind).map_err(|e| config_err("potential", e.to_string()))
    }

    /// The field used at particle count `n`: `Q + u/n` when a perturbation is
    /// configured, otherwise `Q`.
    pub fn field(&self, n: usize, sampling_box: Rect) -> Result<Field> {
        let base = self.base()?;
        match &self.perturbation {
            None => Ok(Arc::new(base)),
            Some(spec) => {
                let (u, sup) = spec.build();
                let p = perturb(base, u, sup, n, sampling_box)
                    .map_err(|e| config_err("potential.perturbation", e.to_string()))?;
                Ok(Arc::new(p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Closed form for radial potentials, grid solver otherwise.
    Auto,
    Grid,
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub half_width: f64,
    pub resolution: usize,
    pub method: SolveMethod,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_width: 2.0, resolution: 256, method: SolveMethod::Auto, tol: 1e-4, max_iterations: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSpec {
    pub n: Vec<usize>,
    /// β for any `n` missing from `beta_table`.
    pub beta: f64,
    /// Per-`n` inverse temperatures, keyed by `n` written as a string.
    pub beta_table: BTreeMap<String, f64>,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: u32,
    pub step_scale: f64,
    pub recheck_every: usize,
    pub snapshots: bool,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            n: vec![32],
            beta: 1.0,
            beta_table: BTreeMap::new(),
            sweeps: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 1,
            chains: 2,
            step_scale: 1.0,
            recheck_every: 1_000,
            snapshots: true,
        }
    }
}

impl SamplerSpec {
    pub fn beta_for(&self, n: usize) -> f64 {
        self.beta_table.get(&n.to_string()).copied().unwrap_or(self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactSpec {
    pub n: Vec<usize>,
    pub draws: usize,
    pub seed: u64,
    /// Outer radius of the tabulated profile, in units of the droplet radius.
    pub profile_extent: f64,
    pub profile_points: usize,
}

impl Default for ExactSpec {
    fn default() -> Self {
        Self { n: vec![128], draws: 2_000, seed: 1, profile_extent: 1.5, profile_points: 601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Constant `c` in the tail thresholds; must satisfy `0 < c < c₀`.
    pub c: f64,
    pub mu: f64,
    pub t_grid: Vec<f64>,
    /// Radii for the large-deviation tail; empty means `[max(r₀, 0.5)]`.
    pub r_grid: Vec<f64>,
    pub test_functions: Vec<TestFunction>,
    pub decay_window: [f64; 2],
    pub convergence_tol: f64,
    pub blocks: usize,
    /// Particle counts for the brute-force entropy check.
    pub entropy_n: Vec<usize>,
    pub entropy_beta: Vec<f64>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            c: 0.9,
            mu: 0.0,
            t_grid: (0..=12).map(|i| 0.25 * i as f64).collect(),
            r_grid: Vec::new(),
            test_functions: TestFunction::builtins(),
            decay_window: [0.02, 0.08],
            convergence_tol: 0.05,
            blocks: 20,
            entropy_n: vec![2],
            entropy_beta: vec![1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("cgas-out") }
    }
}

/// `β·n/log n` for each sampled `n`, with a warning when it is small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub n: usize,
    pub beta: f64,
    pub ratio: f64,
    pub warning: Option<String>,
}

/// Threshold below which `β·n/log n` is flagged as outside the localization regime.
pub const REGIME_WARN: f64 = 3.0;

impl ExperimentConfig {
    /// Parse a TOML document, apply overrides and validate.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err("<file>", e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut table, key, value)?;
        }
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(table).map_err(|e| {
            let field = e.path().to_string();
            config_err(if field == "." { "<root>" } else { &field }, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read `path` (or use defaults when `None`) with `CGAS_*` overrides from
    /// the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| config_err("<file>", format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, &env_overrides(std::env::vars()))
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.base()?;
        let g = &self.grid;
        if !(g.half_width > 0.0 && g.half_width.is_finite()) {
            return Err(config_err("grid.half_width", "must be positive"));
        }
        if g.resolution < 8 || !g.resolution.is_power_of_two() {
            return Err(config_err("grid.resolution", "must be a power of two, at least 8"));
        }
        if !(g.tol > 0.0) || g.max_iterations == 0 {
            return Err(config_err("grid.tol", "tolerance and iteration cap must be positive"));
        }
        let s = &self.sampler;
        if s.n.is_empty() || s.n.contains(&0) {
            return Err(config_err("sampler.n", "needs at least one positive particle count"));
        }
        for (k, b) in &s.beta_table {
            if k.parse::<usize>().map_or(true, |n| n == 0) {
                return Err(config_err(format!("sampler.beta_table.{k}"), "keys must be positive integers"));
            }
            if !(*b > 0.0 && b.is_finite()) {
                return Err(config_err(format!("sampler.beta_table.{k}"), "β must be positive"));
            }
        }
        if !(s.beta > 0.0 && s.beta.is_finite()) {
            return Err(config_err("sampler.beta", "must be positive"));
        }
        if s.thin == 0 || s.chains == 0 || s.recheck_every == 0 {
            return Err(config_err("sampler", "thin, chains and recheck_every must be positive"));
        }
        if s.sweeps < s.thin {
            return Err(config_err("sampler.sweeps", "must be at least `thin`"));
        }
        if !(s.step_scale > 0.0) {
            return Err(config_err("sampler.step_scale", "must be positive"));
        }
        let e = &self.exact;
        if e.n.contains(&0) {
            return Err(config_err("exact.n", "particle counts must be positive"));
        }
        if !(e.profile_extent > 1.0) || e.profile_points < 2 {
            return Err(config_err("exact.profile_extent", "extent must exceed 1 and points at least 2"));
        }
        let a = &self.analysis;
        if !(a.c > 0.0) {
            return Err(config_err("analysis.c", "must be positive"));
        }
        if a.mu < 0.0 {
            return Err(config_err("analysis.mu", "must be nonnegative"));
        }
        if a.t_grid.is_empty() || a.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(config_err("analysis.t_grid", "needs finite values"));
        }
        if !(0.0 < a.decay_window[0] && a.decay_window[0] < a.decay_window[1]) {
            return Err(config_err("analysis.decay_window", "needs 0 < lo < hi"));
        }
        if a.blocks < 2 {
            return Err(config_err("analysis.blocks", "needs at least 2 blocks"));
        }
        if a.entropy_n.iter().any(|n| !(1..=3).contains(n)) {
            return Err(config_err("analysis.entropy_n", "brute-force partition functions need n ≤ 3"));
        }
        Ok(())
    }

    pub fn sampling_box(&self) -> Rect {
        Rect::square(self.grid.half_width)
    }

    /// Regime report `β·n/log n` for the sampled particle counts.
    pub fn regime(&self) -> Vec<RegimeRow> {
        self.sampler
            .n
            .iter()
            .map(|&n| {
                let beta = self.sampler.beta_for(n);
                let ratio = if n > 1 { beta * n as f64 / (n as f64).ln() } else { f64::INFINITY };
                let warning = (ratio < REGIME_WARN).then(|| {
                    format!("β·n/log n = {ratio:.2} at n = {n} is small; localization bounds are asymptotic in this ratio")
                });
                RegimeRow { n, beta, ratio, warning }
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collect `CGAS_<SECTION>__<KEY>` variables as `(section.key, value)` pairs.
/// Variables without a `__` separator are ignored.
pub fn env_overrides(vars: impl Iterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix("CGAS_")?;
            if !rest.contains("__") {
                return None;
            }
            Some((rest.split("__").map(str::to_lowercase).collect::<Vec<_>>().join("."), v))
        })
        .collect();
    out.sort();
    out
}

/// Set a dotted key. The value is parsed as a TOML value when possible and
/// taken as a string otherwise.
pub fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(key, format!("`{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
