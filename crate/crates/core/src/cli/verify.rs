//! Self-checks run by `cgas verify`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::artifacts::Stage;
use super::commands::{solve, Context};
use super::config::SolveMethod;
use crate::analysis::{decay_fit, dn_tail, energy_continuous, entropy_check, PartitionQuadrature};
use crate::determinantal::{maximum_principle_suite, pointwise_suite, RadialEnsemble};
use crate::equilibrium::{lemma1_constants, EquilibriumResult};
use crate::error::Result;
use crate::potential::{check_growth, ExternalField, Rect};
use crate::sampler::{eval_lagrange, hamiltonian, run_chain, ChainParams, ChainState, Configuration};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Soft checks are reported but never fail the run.
    pub hard: bool,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.hard)
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn hard(&mut self, name: &str, passed: bool, detail: serde_json::Value) {
        self.push(name, passed, true, detail);
    }

    fn soft(&mut self, name: &str, passed: bool, detail: serde_json::Value) {
        self.push(name, passed, false, detail);
    }

    fn push(&mut self, name: &str, passed: bool, hard: bool, detail: serde_json::Value) {
        let tag = match (passed, hard) {
            (true, _) => "ok",
            (false, true) => "FAILED",
            (false, false) => "warn",
        };
        log::info!("verify {name}: {tag}");
        self.0.push(Check { name: name.to_string(), passed, hard, detail });
    }

    /// Record a check whose computation itself failed.
    fn error(&mut self, name: &str, err: crate::Error) {
        self.hard(name, false, json!({ "error": err.to_string() }));
    }
}

fn random_configuration(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn equilibrium_checks<P: ExternalField + ?Sized>(ctx: &Context, p: &P, eq: &EquilibriumResult, out: &mut Checks) {
    let cfg = &ctx.cfg;
    if p.is_radial() {
        match solve(cfg, SolveMethod::Radial) {
            Ok((_, exact)) => {
                let d_gamma = (eq.frostman_const - exact.frostman_const).abs();
                let d_robin = (eq.robin_const - exact.robin_const).abs();
                let d_c0 = (eq.c0 - exact.c0).abs() / exact.c0;
                out.hard(
                    "grid_vs_radial",
                    d_gamma <= 1e-2 && d_robin <= 1e-2 && d_c0 <= 0.05,
                    json!({ "frostman_diff": d_gamma, "robin_diff": d_robin, "c0_rel_diff": d_c0 }),
                );
            }
            Err(e) => out.error("grid_vs_radial", e),
        }
    }
    let mass = eq.total_mass();
    out.hard("total_mass", (mass - 1.0).abs() < 1e-6, json!({ "mass": mass }));
    let tol = eq.energy_tolerance();
    let min_eff = eq.q_eff.iter().copied().fold(f64::INFINITY, f64::min);
    out.hard("effective_potential_nonnegative", min_eff >= -tol, json!({ "min": min_eff, "tol": tol }));
    match lemma1_constants(eq, 0.9 * eq.c0) {
        Ok(f) => out.hard("quadratic_floor", f.violation_count == 0, serde_json::to_value(f).unwrap_or_default()),
        Err(e) => out.error("quadratic_floor", e),
    }
    let radius = eq.geometry.vertices().map(|z| z.norm()).fold(eq.droplet_radius.unwrap_or(0.0), f64::max);
    let g = check_growth(p, radius);
    out.hard("growth", g.passed, serde_json::to_value(g).unwrap_or_default());
    match energy_continuous(&eq.grid, &eq.sigma_weights, p) {
        Ok(e) => out.hard(
            "energy_identity",
            (e - eq.robin_const).abs() <= 1e-2,
            json!({ "energy": e, "robin_const": eq.robin_const }),
        ),
        Err(e) => out.error("energy_identity", e),
    }
}

fn exact_checks<P: ExternalField + ?Sized>(p: &P, eq: &EquilibriumResult, c: f64, out: &mut Checks) {
    if !p.is_radial() {
        out.soft("kernel_mass", true, json!({ "skipped": "non-radial potential" }));
        return;
    }
    for n in [8usize, 64] {
        let ens = match RadialEnsemble::build(p, n) {
            Ok(e) => e,
            Err(e) => {
                out.error(&format!("kernel_mass_n{n}"), e);
                continue;
            }
        };
        match ens.kernel_mass() {
            Ok(m) => out.hard(&format!("kernel_mass_n{n}"), (m - n as f64).abs() <= 1e-6 * n as f64, json!({ "mass": m })),
            Err(e) => out.error(&format!("kernel_mass_n{n}"), e),
        }
        let lh = ens.log_norms();
        let worst = lh.windows(3).map(|w| w[0] + w[2] - 2.0 * w[1]).fold(f64::INFINITY, f64::min);
        out.hard(&format!("norms_log_convex_n{n}"), lh.len() < 3 || worst >= -1e-9, json!({ "min_second_difference": worst }));
        if n == 64 {
            let radius = ens.radius();
            let pts: Vec<(f64, f64)> = (1..400)
                .map(|i| 0.2 * i as f64 / 400.0)
                .map(|d| (d, ens.one_point_exact(radius + d)))
                .collect();
            match decay_fit(&pts, (0.02, 0.08), n, 1.0, eq.c0) {
                Ok(f) => out.soft(
                    "decay_fit_n64",
                    f.verdict,
                    json!({ "c_hat": f.c_hat, "c0": eq.c0, "c": c, "rms_residual": f.rms_residual }),
                ),
                Err(e) => out.soft("decay_fit_n64", false, json!({ "error": e.to_string() })),
            }
        }
    }
}

fn polynomial_checks<P: ExternalField + ?Sized>(p: &P, eq: &EquilibriumResult, seed: u64, out: &mut Checks) {
    let n = 16;
    match maximum_principle_suite(p, eq, n, 100, seed) {
        Ok(r) => out.hard("maximum_principle", r.violations == 0, serde_json::to_value(r).unwrap_or_default()),
        Err(e) => out.error("maximum_principle", e),
    }
    for beta in [0.5, 1.0, 2.0] {
        let name = format!("pointwise_beta{beta}");
        match pointwise_suite(p, eq, n, beta, 100, 2, seed.wrapping_add(1)) {
            Ok(r) => out.hard(&name, r.violations == 0, serde_json::to_value(r).unwrap_or_default()),
            Err(e) => out.error(&name, e),
        }
    }
}

fn sampler_checks<P: ExternalField + ?Sized>(
    ctx: &Context,
    p: &P,
    eq: &EquilibriumResult,
    out: &mut Checks,
) -> Result<()> {
    let cfg = &ctx.cfg;
    let bx: Rect = cfg.sampling_box();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampler.seed);

    // incremental energy differences against full recomputation
    let pts = random_configuration(12, &mut rng);
    let state = ChainState::new(Configuration::new(pts.clone())?, p, 1.0, 1.0, bx)?;
    let mut worst = 0f64;
    for _ in 0..200 {
        let j = rng.random_range(0..pts.len());
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let mut moved = pts.clone();
        moved[j] = z;
        let full = hamiltonian(&moved, p, pts.len()) - state.energy();
        let inc = state.move_delta(p, j, z);
        worst = worst.max((full - inc).abs() / full.abs().max(1.0));
    }
    out.hard("move_delta", worst < 1e-10, json!({ "max_rel_error": worst }));

    let mut worst = 0f64;
    for j in 0..pts.len() {
        for (k, z) in pts.iter().enumerate() {
            let v = eval_lagrange(&pts, j, *z, p, 1.0);
            worst = worst.max((v - if j == k { 1.0 } else { 0.0 }).abs());
        }
    }
    out.hard("lagrange_interpolation", worst < 1e-12, json!({ "max_error": worst }));

    let n = 16;
    let params = ChainParams {
        n,
        beta: 2.0,
        sweeps: 2_000,
        burn_in: 500,
        seed: cfg.sampler.seed,
        recheck_every: 100,
        sampling_box: Some(bx),
        ..Default::default()
    };
    let a = run_chain(&params, p, eq)?;
    let b = run_chain(&params, p, eq)?;
    out.hard("determinism", a == b, json!({ "samples": a.len() }));
    out.hard("cache_drift", a.meta.max_cache_drift < 1e-9, json!({ "max_cache_drift": a.meta.max_cache_drift }));
    let a_cfg = &cfg.analysis;
    let c = a_cfg.c.min(0.9 * eq.c0);
    match dn_tail(&a.d_n, n, params.beta, eq.c0, c, a_cfg.mu, &a_cfg.t_grid) {
        Ok(r) => out.hard("short_chain_tail", r.passed(), serde_json::to_value(&r).unwrap_or_default()),
        Err(e) => out.error("short_chain_tail", e),
    }
    Ok(())
}

pub fn verify(ctx: &Context) -> Result<VerifyReport> {
    let cfg = &ctx.cfg;
    let mut stage = Stage::new(&ctx.out, "verify")?;
    let p = cfg.potential.base()?;
    let (_, eq) = solve(cfg, SolveMethod::Grid)?;
    let mut out = Checks(Vec::new());
    equilibrium_checks(ctx, &p, &eq, &mut out);
    exact_checks(&p, &eq, cfg.analysis.c, &mut out);
    polynomial_checks(&p, &eq, cfg.sampler.seed, &mut out);
    if let Err(e) = sampler_checks(ctx, &p, &eq, &mut out) {
        out.error("sampler", e);
    }
    for beta in [1.0, 2.0] {
        let name = format!("entropy_n2_beta{beta}");
        match entropy_check(&p, &eq, beta, 2, &PartitionQuadrature::default()) {
            Ok(e) => out.hard(&name, e.passed || e.degenerate, serde_json::to_value(&e).unwrap_or_default()),
            Err(e) => out.error(&name, e),
        }
    }
    let report = VerifyReport { config_hash: cfg.hash(), checks: out.0 };
    stage.json("verify_report.json", &report)?;
    stage.finish(&cfg.hash())?;
    Ok(report)
}
