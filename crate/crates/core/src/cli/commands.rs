use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::artifacts::{
    field_rows, load_equilibrium, read_csv, read_json, require, EquilibriumArtifact, Stage, EQUILIBRIUM_JSON,
    FIELDS_CSV, FIELDS_HEADER, SAMPLE_META,
};
use super::config::{ExperimentConfig, RegimeRow, SolveMethod};
use crate::analysis::{
    blocked_standard_error, decay_fit, dn_tail, energy_continuous, energy_discrete, entropy_check, ks_statistic,
    large_r_tail, localization_scaling, mean, median, split_rhat, DecayFit, EntropyCheck, LargeRReport,
    MeasureAccumulator, PartitionQuadrature, ScalingReport, TailReport,
};
use crate::determinantal::{gumbel_cdf, GumbelConstants, RadialEnsemble};
use crate::equilibrium::{lemma1_constants, solve_grid, solve_radial, EquilibriumResult, GridDomain, SolveOptions};
use crate::error::{Error, Result};
use crate::potential::{check_growth, ExternalField};
use crate::sampler::{run_chains, snapshot, stream_id, ChainParams, SampleMeta};

/// Resolved configuration together with the output directory.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, out: Option<PathBuf>) -> Self {
        let out = out.unwrap_or_else(|| cfg.output.dir.clone());
        Self { cfg, out }
    }

    fn warn_regime(&self) -> Vec<RegimeRow> {
        let rows = self.cfg.regime();
        for r in &rows {
            if let Some(w) = &r.warning {
                log::warn!("{w}");
            }
        }
        rows
    }
}

/// Solve for the equilibrium measure of the base potential.
pub fn solve(cfg: &ExperimentConfig, method: SolveMethod) -> Result<(String, EquilibriumResult)> {
    let p = cfg.potential.base()?;
    let grid = GridDomain::square(cfg.grid.half_width, cfg.grid.resolution)?;
    let method = match method {
        SolveMethod::Auto if p.is_radial() => SolveMethod::Radial,
        SolveMethod::Auto => SolveMethod::Grid,
        m => m,
    };
    match method {
        SolveMethod::Radial => Ok(("radial".into(), solve_radial(&p, grid)?.1)),
        _ => {
            let opts = SolveOptions { tol: cfg.grid.tol, max_iterations: cfg.grid.max_iterations, ..Default::default() };
            Ok(("grid".into(), solve_grid(&p, grid, &opts)?))
        }
    }
}

pub fn equilibrium(ctx: &Context) -> Result<EquilibriumResult> {
    let cfg = &ctx.cfg;
    let mut stage = Stage::new(&ctx.out, "equilibrium")?;
    let (method, eq) = solve(cfg, cfg.grid.method)?;
    let p = cfg.potential.base()?;
    let radius = eq.geometry.vertices().map(|z| z.norm()).fold(eq.droplet_radius.unwrap_or(0.0), f64::max);
    let growth = check_growth(&p, radius);
    if !growth.passed {
        log::warn!("growth margin {:.3} ≤ 1 on [{:.2}, {:.2}]", growth.margin, growth.r_start, growth.r_end);
    }
    let floor = lemma1_constants(&eq, 0.9 * eq.c0)?;
    let art = EquilibriumArtifact {
        method,
        config_hash: cfg.hash(),
        quadratic_floor: floor,
        summary: eq.summary(&p.label()),
    };
    stage.json(EQUILIBRIUM_JSON, &art)?;
    stage.csv(FIELDS_CSV, &FIELDS_HEADER, field_rows(&eq))?;
    stage.finish(&cfg.hash())?;
    log::info!(
        "equilibrium: γ = {:.6}, γ(Q) = {:.6}, c₀ = {:.6}, a₀ = {:.6}",
        eq.frostman_const,
        eq.robin_const,
        eq.c0,
        eq.a0
    );
    Ok(eq)
}

/// Contents of `sample_meta.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub config_hash: String,
    pub regime: Vec<RegimeRow>,
    pub chains: Vec<ChainRecord>,
    pub diagnostics: Vec<SampleDiagnostics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainRecord {
    pub meta: SampleMeta,
    pub csv: String,
    pub snapshot: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub n: usize,
    pub beta: f64,
    pub mean_energy: f64,
    pub energy_std_error: Option<f64>,
    /// Split-chain potential scale reduction of `D_n`; absent for one chain.
    pub rhat_dn: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChainRow {
    pub sample: usize,
    pub d_n: f64,
    pub energy: f64,
    pub acceptance: f64,
}

const CHAIN_HEADER: [&str; 4] = ["sample", "d_n", "energy", "acceptance"];

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn chain_id(n: usize, chain: u32) -> String {
    format!("n{n}_c{chain}")
}

pub fn sample(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let (_, eq) = load_equilibrium(&ctx.out)?;
    let regime = ctx.warn_regime();
    let mut stage = Stage::new(&ctx.out, "sample")?;
    let s = &cfg.sampler;
    let mut record = SampleRecord { config_hash: cfg.hash(), regime, chains: Vec::new(), diagnostics: Vec::new() };
    for &n in &s.n {
        let p = cfg.potential.field(n, cfg.sampling_box())?;
        let beta = s.beta_for(n);
        let params = ChainParams {
            n,
            beta,
            sweeps: s.sweeps,
            burn_in: s.burn_in,
            thin: s.thin,
            seed: s.seed,
            chain: 0,
            step_scale: s.step_scale,
            recheck_every: s.recheck_every,
            keep_configurations: s.snapshots,
            sampling_box: Some(cfg.sampling_box()),
            ..Default::default()
        };
        let batches = run_chains(&params, s.chains, &*p, &eq)?;
        for b in &batches {
            let id = chain_id(n, b.meta.chain);
            let csv = format!("chain_{id}.csv");
            stage.csv(
                &csv,
                &CHAIN_HEADER,
                (0..b.len()).map(|i| ChainRow { sample: i, d_n: b.d_n[i], energy: b.energies[i], acceptance: b.acceptance[i] }),
            )?;
            let snap = match &b.configurations {
                Some(cfgs) => {
                    let name = format!("chain_{id}.cgas");
                    stage.raw(&name, |w| {
                        let mut sw = snapshot::SnapshotWriter::new(w, n)?;
                        for c in cfgs {
                            sw.write_frame(c)?;
                        }
                        sw.finish()?;
                        Ok(())
                    })?;
                    Some(name)
                }
                None => None,
            };
            stage.stream(format!("sample:{id}"), s.seed, stream_id(n, b.meta.chain));
            record.chains.push(ChainRecord { meta: b.meta.clone(), csv, snapshot: snap });
        }
        let energies: Vec<f64> = batches.iter().flat_map(|b| b.energies.iter().copied()).collect();
        let dn: Vec<&[f64]> = batches.iter().map(|b| b.d_n.as_slice()).collect();
        record.diagnostics.push(SampleDiagnostics {
            n,
            beta,
            mean_energy: mean(&energies),
            energy_std_error: finite(blocked_standard_error(&energies, cfg.analysis.blocks)),
            rhat_dn: (dn.len() >= 2 && dn.iter().all(|d| d.len() >= 4)).then(|| split_rhat(&dn)),
        });
    }
    stage.json(SAMPLE_META, &record)?;
    stage.finish(&cfg.hash())?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileRow {
    pub n: usize,
    pub r: f64,
    pub one_point: f64,
    pub exterior_bound: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GumbelRow {
    pub n: usize,
    pub draw: usize,
    pub max_radius: f64,
    pub d_n: f64,
    /// Gumbel rescaling of the signed `max_radius − R`.
    pub omega: f64,
    /// KS distance of all draws at this `n` to the standard Gumbel law.
    pub ks: f64,
}

/// Per-`n` results of the exact channel, in `exact_summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactSummary {
    pub n: usize,
    pub radius: f64,
    pub c0: f64,
    pub max_rel_error: f64,
    pub kernel_mass: f64,
    pub seed: u64,
    pub draws: usize,
    pub mean_max_radius: f64,
    pub mean_max_radius_se: Option<f64>,
    pub predicted_mean_max_radius: Option<f64>,
    pub gumbel_ks: Option<f64>,
    /// Decay fit used for the exterior bound column.
    pub decay: Option<DecayFit>,
    pub bound_constant: Option<f64>,
}

/// Seed of the exact draws at particle count `n`.
pub fn exact_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_add((n as u64) << 32)
}

pub fn exact(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let e = &cfg.exact;
    let mut stage = Stage::new(&ctx.out, "exact")?;
    let mut profile = Vec::new();
    let mut law = Vec::new();
    let mut gumbel = Vec::new();
    let mut norms = Vec::new();
    let mut summaries = Vec::new();
    for &n in &e.n {
        let p = cfg.potential.field(n, cfg.sampling_box())?;
        let ens = RadialEnsemble::build(&*p, n).map_err(|err| match err {
            Error::UnsupportedPotential(m) => {
                Error::UnsupportedPotential(format!("the exact channel needs a radial potential: {m}"))
            }
            other => other,
        })?;
        let radius = ens.radius();
        let r_max = e.profile_extent * radius;
        let rs: Vec<f64> = (0..e.profile_points).map(|i| r_max * i as f64 / (e.profile_points - 1) as f64).collect();
        let values: Vec<f64> = rs.iter().map(|r| ens.one_point_exact(*r)).collect();
        let ext: Vec<(f64, f64)> =
            rs.iter().zip(&values).filter(|(r, _)| **r > radius).map(|(r, v)| (r - radius, *v)).collect();
        let w = cfg.analysis.decay_window;
        let decay = decay_fit(&ext, (w[0], w[1]), n, 1.0, ens.c0()).ok();
        let nf = n as f64;
        // bound C·n²·e^{−c n δ²} with C matched to the fitted intercept
        let bound_c = decay.as_ref().map(|d| (-d.intercept).exp() / (nf * nf));
        for (r, v) in rs.iter().zip(&values) {
            let delta = (r - radius).max(0.0);
            let bound = bound_c.map_or(f64::NAN, |c| c * nf * nf * (-cfg.analysis.c * nf * delta * delta).exp());
            profile.push(ProfileRow { n, r: *r, one_point: *v, exterior_bound: bound });
            law.push((n, *r, ens.radius_cdf(*r)));
        }
        for (k, lh) in ens.log_norms().iter().enumerate() {
            norms.push((n, k, *lh));
        }
        let seed = exact_seed(e.seed, n);
        let draws = ens.max_radius_draws(e.draws, seed)?;
        stage.stream(format!("exact:n{n}"), seed, 0);
        let gc = GumbelConstants::new(n, radius, ens.c0()).ok();
        let omegas: Vec<f64> = match &gc {
            Some(g) => draws.iter().map(|m| g.transform(m - radius)).collect(),
            None => vec![f64::NAN; draws.len()],
        };
        let ks = gc.as_ref().filter(|_| !draws.is_empty()).map(|_| ks_statistic(&omegas, gumbel_cdf));
        for (d, (m, om)) in draws.iter().zip(&omegas).enumerate() {
            gumbel.push(GumbelRow {
                n,
                draw: d,
                max_radius: *m,
                d_n: (m - radius).max(0.0),
                omega: *om,
                ks: ks.unwrap_or(f64::NAN),
            });
        }
        summaries.push(ExactSummary {
            n,
            radius,
            c0: ens.c0(),
            max_rel_error: ens.max_rel_error(),
            kernel_mass: ens.kernel_mass()?,
            seed,
            draws: draws.len(),
            mean_max_radius: mean(&draws),
            mean_max_radius_se: finite(blocked_standard_error(&draws, 20)),
            predicted_mean_max_radius: gc.as_ref().map(|g| g.predicted_mean_max_radius()),
            gumbel_ks: ks,
            decay,
            bound_constant: bound_c,
        });
    }
    stage.csv("kernel_profile.csv", &["n", "r", "one_point", "exterior_bound"], profile)?;
    stage.csv("radius_law.csv", &["n", "r", "cdf"], law)?;
    stage.csv("gumbel.csv", &["n", "draw", "max_radius", "d_n", "omega", "ks"], gumbel)?;
    stage.csv("norms.csv", &["n", "k", "log_h"], norms)?;
    stage.json("exact_summary.json", &summaries)?;
    stage.finish(&cfg.hash())?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCsvRow {
    pub source: String,
    pub n: usize,
    pub beta: f64,
    pub t: f64,
    pub threshold: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceCsvRow {
    pub n: usize,
    pub function: String,
    pub sigma: f64,
    pub mean: f64,
    pub std_error: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteEnergy {
    pub n: usize,
    pub samples: usize,
    pub mean: f64,
    pub std_error: Option<f64>,
}

/// Contents of `energy.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyArtifact {
    pub robin_const: f64,
    pub energy_continuous: f64,
    pub discrete: Vec<DiscreteEnergy>,
    pub entropy: Vec<EntropyCheck>,
}

/// Verdicts of `analyze`, in `analysis_summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub config_hash: String,
    pub c: f64,
    pub c0: f64,
    pub tails: Vec<TailReport>,
    pub large_r: Vec<LargeRReport>,
    pub localization: Option<ScalingReport>,
    pub exact_localization: Option<ScalingReport>,
    pub convergence_passed: Option<bool>,
    pub entropy_passed: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct GumbelIn {
    n: usize,
    d_n: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct ProfileIn {
    n: usize,
    r: f64,
    one_point: f64,
}

fn push_tail(rows: &mut Vec<TailCsvRow>, source: &str, rep: &TailReport) {
    for r in &rep.rows {
        rows.push(TailCsvRow {
            source: source.to_string(),
            n: rep.n,
            beta: rep.beta,
            t: r.t,
            threshold: r.threshold,
            p_hat: r.p_hat,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            bound: r.bound,
            pass: r.pass,
        });
    }
}

pub fn analyze(ctx: &Context) -> Result<AnalysisSummary> {
    let cfg = &ctx.cfg;
    let a = &cfg.analysis;
    let (_, eq) = load_equilibrium(&ctx.out)?;
    let record: SampleRecord = read_json(&ctx.out.join(SAMPLE_META), "run `cgas sample` with the same --out first")?;
    if !(a.c < eq.c0) {
        return Err(Error::Config {
            field: "analysis.c".into(),
            message: format!("must be below c₀ = {:.6} of this potential, got {}", eq.c0, a.c),
        });
    }
    let mut stage = Stage::new(&ctx.out, "analyze")?;
    let mut warnings = Vec::new();
    let base = cfg.potential.base()?;

    // group chains by n
    let mut by_n: BTreeMap<usize, Vec<&ChainRecord>> = BTreeMap::new();
    for c in &record.chains {
        by_n.entry(c.meta.n).or_default().push(c);
    }
    if by_n.is_empty() {
        return Err(Error::MissingArtifact {
            path: ctx.out.join(SAMPLE_META),
            hint: "no chains recorded; rerun `cgas sample`".into(),
        });
    }

    let mut tail_rows = Vec::new();
    let mut tails = Vec::new();
    let mut large_r = Vec::new();
    let mut medians = Vec::new();
    let mut conv_rows = Vec::new();
    let mut conv_pass: Option<bool> = None;
    let mut discrete = Vec::new();
    for (&n, chains) in &by_n {
        let beta = chains[0].meta.beta;
        let mut d_n = Vec::new();
        for c in chains {
            let rows: Vec<ChainRow> = read_csv(&ctx.out.join(&c.csv), "rerun `cgas sample`")?;
            d_n.extend(rows.iter().map(|r| r.d_n));
        }
        let rep = dn_tail(&d_n, n, beta, eq.c0, a.c, a.mu, &a.t_grid)?;
        warnings.extend(rep.warnings.iter().map(|w| format!("mcmc n = {n}: {w}")));
        push_tail(&mut tail_rows, "mcmc", &rep);
        tails.push(rep);
        let r0 = (eq.a0 / a.c).sqrt();
        let r_grid = if a.r_grid.is_empty() { vec![r0.max(0.5)] } else { a.r_grid.clone() };
        let p = cfg.potential.field(n, cfg.sampling_box())?;
        large_r.push(large_r_tail(&d_n, n, beta, &*p, &eq, a.c, &r_grid)?);
        medians.push((n, beta, median(&d_n)));

        let snaps: Vec<&String> = chains.iter().filter_map(|c| c.snapshot.as_ref()).collect();
        if snaps.len() == chains.len() {
            let mut acc = MeasureAccumulator::new(a.test_functions.clone());
            let mut energies = Vec::new();
            for s in snaps {
                let path = ctx.out.join(s);
                require(&path, "rerun `cgas sample` with sampler.snapshots = true")?;
                let frames = snapshot::read_file(&path)?;
                for f in &frames.frames {
                    acc.add(f);
                    if n >= 2 {
                        energies.push(energy_discrete(f, &*p)?);
                    }
                }
            }
            let rep = acc.finish(&eq, a.convergence_tol)?;
            conv_pass = Some(conv_pass.unwrap_or(true) && rep.passed());
            for r in rep.rows {
                conv_rows.push(ConvergenceCsvRow {
                    n,
                    function: r.function,
                    sigma: r.sigma,
                    mean: r.mean,
                    std_error: r.std_error,
                    difference: r.difference,
                    tolerance: r.tolerance,
                    pass: r.pass,
                });
            }
            if !energies.is_empty() {
                discrete.push(DiscreteEnergy {
                    n,
                    samples: energies.len(),
                    mean: mean(&energies),
                    std_error: finite(blocked_standard_error(&energies, a.blocks)),
                });
            }
        } else {
            warnings.push(format!("n = {n}: no snapshots, convergence and discrete energy skipped"));
        }
    }

    // exact channel, when present
    let mut exact_medians = Vec::new();
    let gpath = ctx.out.join("gumbel.csv");
    if gpath.is_file() {
        let rows: Vec<GumbelIn> = read_csv(&gpath, "")?;
        let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in rows {
            groups.entry(r.n).or_default().push(r.d_n);
        }
        for (n, d) in groups {
            let rep = dn_tail(&d, n, 1.0, eq.c0, a.c, a.mu, &a.t_grid)?;
            warnings.extend(rep.warnings.iter().map(|w| format!("exact n = {n}: {w}")));
            push_tail(&mut tail_rows, "exact", &rep);
            tails.push(rep);
            exact_medians.push((n, 1.0, median(&d)));
        }
    }
    let mut fits = Vec::new();
    let ppath = ctx.out.join("kernel_profile.csv");
    if ppath.is_file() {
        let rows: Vec<ProfileIn> = read_csv(&ppath, "")?;
        let radius = eq.droplet_radius;
        let mut groups: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for r in rows {
            let delta = match radius {
                Some(rad) => r.r - rad,
                None => eq.distance_to_droplet(Complex64::new(r.r, 0.0)),
            };
            if delta > 0.0 {
                groups.entry(r.n).or_default().push((delta, r.one_point));
            }
        }
        let w = a.decay_window;
        for (n, vals) in groups {
            match decay_fit(&vals, (w[0], w[1]), n, 1.0, eq.c0) {
                Ok(f) => fits.push((n, f)),
                Err(e) => warnings.push(format!("decay fit at n = {n}: {e}")),
            }
        }
    }

    let localization = (medians.len() >= 3).then(|| localization_scaling(&medians, eq.c0)).transpose()?;
    let exact_localization =
        (exact_medians.len() >= 3).then(|| localization_scaling(&exact_medians, eq.c0)).transpose()?;

    let mut entropy = Vec::new();
    for &n in &a.entropy_n {
        for &beta in &a.entropy_beta {
            entropy.push(entropy_check(&base, &eq, beta, n, &PartitionQuadrature::default())?);
        }
    }
    let energy = EnergyArtifact {
        robin_const: eq.robin_const,
        energy_continuous: energy_continuous(&eq.grid, &eq.sigma_weights, &base)?,
        discrete,
        entropy: entropy.clone(),
    };

    stage.csv(
        "tail_report.csv",
        &["source", "n", "beta", "t", "threshold", "p_hat", "ci_lo", "ci_hi", "bound", "pass"],
        tail_rows,
    )?;
    let fit_json: Vec<serde_json::Value> =
        fits.iter().map(|(n, f)| serde_json::json!({ "n": n, "fit": f })).collect();
    stage.json("decay_fit.json", &fit_json)?;
    stage.csv(
        "convergence.csv",
        &["n", "function", "sigma", "mean", "std_error", "difference", "tolerance", "pass"],
        conv_rows,
    )?;
    stage.json("energy.json", &energy)?;
    let summary = AnalysisSummary {
        config_hash: cfg.hash(),
        c: a.c,
        c0: eq.c0,
        tails,
        large_r,
        localization,
        exact_localization,
        convergence_passed: conv_pass,
        entropy_passed: entropy.iter().all(|e| e.passed || e.degenerate),
        warnings,
    };
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    stage.json("analysis_summary.json", &summary)?;
    stage.finish(&cfg.hash())?;
    Ok(summary)
}

/// Paths of the artifacts a stage depends on, for error messages.
pub fn upstream(stage: &str, out: &Path) -> Vec<PathBuf> {
    match stage {
        "sample" => vec![out.join(EQUILIBRIUM_JSON), out.join(FIELDS_CSV)],
        "analyze" => vec![out.join(EQUILIBRIUM_JSON), out.join(FIELDS_CSV), out.join(SAMPLE_META)],
        _ => Vec::new(),
    }
}
