//! Grid minimization of the discrete logarithmic energy
//! `Σ w_i w_j K_ij + Σ w_i Q_i` over the probability simplex.
//!
//! Spectral projected gradient: Barzilai–Borwein step lengths, exact
//! Euclidean projection onto the simplex each iteration, FFT kernel
//! multiplies, and coarse-to-fine warm starts.

use log::debug;

use super::kernel::{square_self_energy_constant, LogKernel};
use super::{
    box_margin, boundary_min_laplacian, coincidence_tolerance, lemma1_constants, marching_squares, DropletGeometry,
    EquilibriumResult, GridDomain, SolveDiagnostics,
};
use crate::error::{invalid, Error, Result};
use crate::potential::ExternalField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Stop when the Frostman residual is below `tol · (1 + |γ|)`.
    pub tol: f64,
    /// Warm-start from successively halved grids down to this resolution.
    pub coarsest: usize,
    /// Largest lattice offset treated with the exact cell-averaged kernel.
    pub near_field: usize,
    /// Minimum allowed distance from the droplet to the box edge.
    pub min_margin: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 20_000,
            tol: 1e-4,
            coarsest: 64,
            near_field: 3,
            min_margin: 0.5,
        }
    }
}

struct Problem {
    grid: GridDomain,
    kernel: LogKernel,
    q: Vec<f64>,
    lap: Vec<f64>,
}

struct Iterate {
    w: Vec<f64>,
    potential: Vec<f64>,
    gamma: f64,
    residual: f64,
    iterations: usize,
}

impl Problem {
    fn new<P: ExternalField + ?Sized>(p: &P, grid: GridDomain, near_field: usize) -> Result<Self> {
        let q: Vec<f64> = grid.centres().map(|z| p.value(z)).collect();
        if q.iter().any(|v| v.is_nan()) {
            return Err(invalid("potential evaluates to NaN on the grid"));
        }
        let lap = grid.centres().map(|z| p.laplacian(z)).collect();
        let kernel = LogKernel::new(grid.resolution, grid.h(), near_field);
        Ok(Problem { grid, kernel, q, lap })
    }

    /// Cells' density relative to `ΔQ`, clipped to `[0, 1]`.
    fn coverage(&self, w: &[f64]) -> Vec<f64> {
        let area = self.grid.cell_area();
        w.iter()
            .zip(&self.lap)
            .map(|(w, l)| {
                if *l > 0.0 {
                    (w / (l * area)).clamp(0.0, 1.0)
                } else if *w > 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Initial guess: `ΔQ` on the sublevel set of `Q` carrying unit mass.
    fn sublevel_start(&self) -> Vec<f64> {
        let area = self.grid.cell_area();
        let mut order: Vec<usize> = (0..self.q.len()).filter(|&i| self.q[i].is_finite()).collect();
        order.sort_by(|a, b| self.q[*a].total_cmp(&self.q[*b]));
        let mut w = vec![0.0; self.q.len()];
        let mut mass = 0.0;
        for &i in &order {
            let m = self.lap[i].max(1e-3) * area;
            w[i] = m;
            mass += m;
            if mass >= 1.0 {
                break;
            }
        }
        w.iter_mut().for_each(|v| *v /= mass);
        w
    }

    fn gradient(&self, potential: &[f64], out: &mut [f64]) {
        for ((o, u), q) in out.iter_mut().zip(potential).zip(&self.q) {
            *o = 2.0 * u + q;
        }
    }

    /// `γ` as the median of `Q + 2U` over interior droplet cells, and the
    /// complementarity residual `max_i max(γ − g_i, min(ρ_i, g_i − γ))`.
    fn frostman(&self, w: &[f64], g: &[f64]) -> (f64, f64) {
        let cov = self.coverage(w);
        let n = self.grid.resolution;
        let interior = |i: usize| {
            let (x, y) = (i % n, i / n);
            x > 0
                && y > 0
                && x + 1 < n
                && y + 1 < n
                && [i, i - 1, i + 1, i - n, i + n].iter().all(|&j| cov[j] > 0.5)
        };
        let mut vals: Vec<f64> = (0..w.len()).filter(|&i| interior(i)).map(|i| g[i]).collect();
        if vals.is_empty() {
            vals = (0..w.len()).filter(|&i| w[i] > 0.0).map(|i| g[i]).collect();
        }
        let mid = vals.len() / 2;
        let gamma = *vals.select_nth_unstable_by(mid, f64::total_cmp).1;
        let area = self.grid.cell_area();
        let residual = w
            .iter()
            .zip(g)
            .filter(|(_, g)| g.is_finite())
            .map(|(w, g)| {
                let gap = g - gamma;
                (-gap).max((w / area).min(gap))
            })
            .fold(0.0, f64::max);
        (gamma, residual)
    }

    fn solve(&self, start: Vec<f64>, opts: &SolveOptions) -> Result<Iterate> {
        let cells = self.q.len();
        let mut w = start;
        let mut u = vec![0.0; cells];
        self.kernel.apply(&w, &mut u);
        let mut g = vec![0.0; cells];
        self.gradient(&u, &mut g);
        let gmax = g.iter().filter(|v| v.is_finite()).fold(0.0_f64, |a, b| a.max(b.abs()));
        let mut step = 1.0 / gmax.max(1e-12);
        let mut w_new = vec![0.0; cells];
        let mut u_new = vec![0.0; cells];
        let mut g_new = vec![0.0; cells];
        let (mut gamma, mut residual) = self.frostman(&w, &g);
        for it in 0..opts.max_iterations {
            if residual <= opts.tol * (1.0 + gamma.abs()) {
                return Ok(Iterate {
                    w,
                    potential: u,
                    gamma,
                    residual,
                    iterations: it,
                });
            }
            for i in 0..cells {
                w_new[i] = if g[i].is_finite() { w[i] - step * g[i] } else { f64::NEG_INFINITY };
            }
            project_simplex(&mut w_new);
            self.kernel.apply(&w_new, &mut u_new);
            self.gradient(&u_new, &mut g_new);
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..cells {
                let s = w_new[i] - w[i];
                if s != 0.0 {
                    ss += s * s;
                    sy += s * (g_new[i] - g[i]);
                }
            }
            step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { 1e12_f64.min(step * 10.0) };
            std::mem::swap(&mut w, &mut w_new);
            std::mem::swap(&mut u, &mut u_new);
            std::mem::swap(&mut g, &mut g_new);
            (gamma, residual) = self.frostman(&w, &g);
            if it % 500 == 0 {
                debug!("grid {}: iter {it} residual {residual:.3e} gamma {gamma:.6}", self.grid.resolution);
            }
        }
        Err(Error::NonConvergence {
            what: "equilibrium grid solve",
            iterations: opts.max_iterations,
            residual,
        })
    }
}

/// Euclidean projection onto `{w ≥ 0, Σ w = 1}`; `−∞` entries map to 0.
pub(crate) fn project_simplex(v: &mut [f64]) {
    let mut sorted: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, x) in sorted.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter_mut().for_each(|x| *x = if x.is_finite() { (*x - theta).max(0.0) } else { 0.0 });
}

fn prolong(coarse: &[f64], nc: usize) -> Vec<f64> {
    let nf = 2 * nc;
    let mut fine = vec![0.0; nf * nf];
    for y in 0..nf {
        for x in 0..nf {
            fine[x + nf * y] = 0.25 * coarse[x / 2 + nc * (y / 2)];
        }
    }
    fine
}

fn solve_hierarchy<P: ExternalField + ?Sized>(p: &P, grid: GridDomain, opts: &SolveOptions) -> Result<(Problem, Iterate)> {
    let problem = Problem::new(p, grid, opts.near_field)?;
    let start = match grid.coarsen() {
        Some(coarse) if coarse.resolution >= opts.coarsest => {
            let (_, it) = solve_hierarchy(p, coarse, opts)?;
            prolong(&it.w, coarse.resolution)
        }
        _ => problem.sublevel_start(),
    };
    let it = problem.solve(start, opts)?;
    Ok((problem, it))
}

/// Minimize the discrete energy on `grid` and extract droplet, obstacle
/// function, effective potential and constants.
pub fn solve_grid<P: ExternalField + ?Sized>(p: &P, grid: GridDomain, opts: &SolveOptions) -> Result<EquilibriumResult> {
    if grid.resolution < 16 {
        return Err(invalid("grid resolution must be at least 16"));
    }
    let (problem, it) = solve_hierarchy(p, grid, opts)?;
    let Iterate {
        w,
        potential,
        gamma,
        residual,
        iterations,
    } = it;
    let cells = grid.cells();
    let n = grid.resolution;
    let h = grid.h();

    let coverage = problem.coverage(&w);
    let droplet_mask: Vec<bool> = coverage.iter().map(|c| *c > 0.5).collect();
    let edge_touch = (0..cells).any(|i| {
        let (x, y) = (i % n, i / n);
        droplet_mask[i] && (x == 0 || y == 0 || x + 1 == n || y + 1 == n)
    });
    if edge_touch {
        return Err(Error::BoxTooSmall);
    }
    let loops: Vec<_> = marching_squares(&coverage, n, grid.origin(), h, 0.5)
        .into_iter()
        .filter(|l| {
            let g = DropletGeometry::from_loops(vec![l.clone()]);
            g.loop_areas().first().copied().unwrap_or(0.0) >= 4.0 * h * h
        })
        .collect();
    let geometry = DropletGeometry::from_loops(loops);
    let margin = box_margin(&geometry, &grid.rect);
    if margin < opts.min_margin - 2.0 * h {
        return Err(Error::BoxTooSmall);
    }

    let q_eff: Vec<f64> = (0..cells)
        .map(|i| (2.0 * potential[i] + problem.q[i] - gamma).max(0.0))
        .collect();
    let q_check: Vec<f64> = (0..cells).map(|i| problem.q[i] - q_eff[i]).collect();
    let robin = w
        .iter()
        .zip(&potential)
        .zip(&problem.q)
        .filter(|((w, _), _)| **w > 0.0)
        .map(|((w, u), q)| w * (u + q))
        .sum();
    let sigma_q = w.iter().zip(&problem.q).filter(|(w, _)| **w > 0.0).map(|(w, q)| w * q).sum();
    let sigma_log_laplacian = w
        .iter()
        .zip(&problem.lap)
        .filter(|(w, l)| **w > 0.0 && **l > 0.0)
        .map(|(w, l)| w * l.ln())
        .sum();
    let c0 = boundary_min_laplacian(&geometry, p)?;
    let tol = coincidence_tolerance(h, c0);
    let coincidence_mask = q_eff.iter().map(|q| *q <= tol).collect();
    let mut result = EquilibriumResult {
        grid,
        sigma_weights: w,
        droplet_mask,
        coincidence_mask,
        q_check,
        q_eff,
        frostman_const: gamma,
        robin_const: robin,
        c0,
        a0: 0.0,
        sigma_q,
        sigma_log_laplacian,
        droplet_radius: None,
        geometry,
        diagnostics: SolveDiagnostics {
            method: "grid".into(),
            iterations,
            frostman_residual: residual,
            self_energy_constant: Some(square_self_energy_constant()),
            box_margin: margin,
        },
    };
    result.a0 = lemma1_constants(&result, 0.9 * c0)?.a0;
    Ok(result)
}
