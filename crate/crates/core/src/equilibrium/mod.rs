//! Equilibrium measure, droplet, obstacle function and the constants derived
//! from them.
//!
//! Two routes produce an [`EquilibriumResult`]: a closed-form radial solve
//! ([`solve_radial`]) and a convex energy minimization on a uniform grid
//! ([`solve_grid`]). Both fill the same per-cell fields so they can be
//! compared cell by cell.

mod geometry;
mod grid;
pub mod kernel;
mod radial;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use geometry::{marching_squares, DropletGeometry, Polyline};
pub use grid::{solve_grid, SolveOptions};
pub use radial::{radial_droplet_radius, solve_radial};

use crate::error::{invalid, Error, Result};
use crate::potential::{ExternalField, Rect};

/// Uniform square-cell grid over a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    pub rect: Rect,
    pub resolution: usize,
}

impl GridDomain {
    pub fn new(rect: Rect, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(invalid("grid resolution must be at least 2"));
        }
        if (rect.width() - rect.height()).abs() > 1e-12 * rect.width().abs() || rect.width() <= 0.0 {
            return Err(invalid("grid box must be a non-degenerate square"));
        }
        Ok(GridDomain { rect, resolution })
    }

    pub fn square(half_width: f64, resolution: usize) -> Result<Self> {
        Self::new(Rect::square(half_width), resolution)
    }

    pub fn h(&self) -> f64 {
        self.rect.width() / self.resolution as f64
    }

    pub fn cells(&self) -> usize {
        self.resolution * self.resolution
    }

    /// `dA` measure of one cell.
    pub fn cell_area(&self) -> f64 {
        self.h() * self.h() / std::f64::consts::PI
    }

    pub fn origin(&self) -> Complex64 {
        Complex64::new(self.rect.x_min, self.rect.y_min)
    }

    /// Centre of cell `x + n·y`.
    pub fn centre(&self, idx: usize) -> Complex64 {
        let n = self.resolution;
        let h = self.h();
        self.origin() + Complex64::new(((idx % n) as f64 + 0.5) * h, ((idx / n) as f64 + 0.5) * h)
    }

    pub fn centres(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.cells()).map(|i| self.centre(i))
    }

    /// Coarsened grid over the same box.
    pub fn coarsen(&self) -> Option<GridDomain> {
        (self.resolution % 2 == 0).then(|| GridDomain {
            rect: self.rect,
            resolution: self.resolution / 2,
        })
    }
}

/// How the result was produced, with the solver's convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub method: String,
    pub iterations: usize,
    pub frostman_residual: f64,
    /// Self-energy constant of a square cell; absent for closed-form solves.
    pub self_energy_constant: Option<f64>,
    pub box_margin: f64,
}

/// Equilibrium data sampled on a grid.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub grid: GridDomain,
    /// Mass of `σ` in each cell.
    pub sigma_weights: Vec<f64>,
    /// Cells belonging to the droplet `S`.
    pub droplet_mask: Vec<bool>,
    /// Cells of the coincidence set `S* = {Q_eff = 0}` (up to tolerance).
    pub coincidence_mask: Vec<bool>,
    pub q_check: Vec<f64>,
    pub q_eff: Vec<f64>,
    /// `γ` in `Q̌ = −2U^σ + γ`.
    pub frostman_const: f64,
    /// `γ(Q) = I_Q[σ]`.
    pub robin_const: f64,
    pub c0: f64,
    pub a0: f64,
    /// `σ(Q)`.
    pub sigma_q: f64,
    /// `∫_S ΔQ log ΔQ dA`.
    pub sigma_log_laplacian: f64,
    /// Disc radius when the droplet is known to be a centred disc.
    pub droplet_radius: Option<f64>,
    pub geometry: DropletGeometry,
    pub diagnostics: SolveDiagnostics,
}

impl EquilibriumResult {
    pub fn total_mass(&self) -> f64 {
        self.sigma_weights.iter().sum()
    }

    /// Tolerance used for the `Q_eff` comparisons: `1e−3 · max(1, |γ|)`.
    pub fn energy_tolerance(&self) -> f64 {
        1e-3 * self.frostman_const.abs().max(1.0)
    }

    pub fn distance_to_droplet(&self, z: Complex64) -> f64 {
        self.geometry.distance(z)
    }

    /// `Q_eff(ζ)` by bilinear interpolation of the cell values; outside the
    /// grid box the far-field form `Q − 2 log|ζ| − γ` is used. For a known disc
    /// droplet `|ζ| ≤ R` the exterior form is exact everywhere.
    pub fn effective_potential<P: ExternalField + ?Sized>(&self, p: &P, z: Complex64) -> f64 {
        if let Some(r) = self.droplet_radius {
            if z.norm() <= r {
                return 0.0;
            }
            return (p.value(z) - 2.0 * z.norm().ln() - self.frostman_const).max(0.0);
        }
        if !self.grid.rect.contains(z) {
            return (p.value(z) - 2.0 * z.norm().ln() - self.frostman_const).max(0.0);
        }
        bilinear(&self.q_eff, &self.grid, z).max(0.0)
    }

    /// `Q̌(ζ)` with the same interpolation conventions.
    pub fn obstacle<P: ExternalField + ?Sized>(&self, p: &P, z: Complex64) -> f64 {
        p.value(z) - self.effective_potential(p, z)
    }
}

fn bilinear(field: &[f64], g: &GridDomain, z: Complex64) -> f64 {
    let n = g.resolution;
    let h = g.h();
    let fx = ((z.re - g.rect.x_min) / h - 0.5).clamp(0.0, (n - 1) as f64);
    let fy = ((z.im - g.rect.y_min) / h - 0.5).clamp(0.0, (n - 1) as f64);
    let (x0, y0) = ((fx.floor() as usize).min(n - 2), (fy.floor() as usize).min(n - 2));
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let at = |x: usize, y: usize| field[x + n * y];
    (1.0 - tx) * (1.0 - ty) * at(x0, y0)
        + tx * (1.0 - ty) * at(x0 + 1, y0)
        + (1.0 - tx) * ty * at(x0, y0 + 1)
        + tx * ty * at(x0 + 1, y0 + 1)
}

/// `c₀ = min ΔQ` over the boundary polyline vertices.
pub fn boundary_min_laplacian<P: ExternalField + ?Sized>(geometry: &DropletGeometry, p: &P) -> Result<f64> {
    let c0 = geometry.vertices().map(|z| p.laplacian(z)).fold(f64::INFINITY, f64::min);
    if !c0.is_finite() {
        return Err(Error::UnsupportedPotential("droplet boundary is empty".into()));
    }
    if c0 <= 0.0 {
        return Err(Error::UnsupportedPotential(format!(
            "potential is not strictly subharmonic on the droplet boundary (min ΔQ = {c0})"
        )));
    }
    Ok(c0)
}

/// Quadratic-floor certificate for `Q_eff` outside the droplet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFloor {
    pub c: f64,
    pub a0: f64,
    /// Largest distance up to which `Q_eff ≥ 2cδ² − tol` holds cell-wise.
    pub delta0: f64,
    pub violation_count: usize,
    pub exterior_cells: usize,
}

/// Scan exterior cells for the floor `Q_eff ≥ 2 min{cδ², a₀}` and report
/// `a₀` together with the number of cells that violate it by more than the
/// energy tolerance.
pub fn lemma1_constants(eq: &EquilibriumResult, c: f64) -> Result<QuadraticFloor> {
    if !(c >= 0.0 && c < eq.c0) {
        return Err(invalid(format!("c must satisfy 0 ≤ c < c₀ = {}, got {c}", eq.c0)));
    }
    let tol = eq.energy_tolerance();
    let mut cells: Vec<(f64, f64)> = (0..eq.grid.cells())
        .filter(|&i| !eq.droplet_mask[i])
        .map(|i| (eq.distance_to_droplet(eq.grid.centre(i)), eq.q_eff[i]))
        .filter(|(d, _)| *d > 0.0)
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut delta0 = 0.0;
    let mut i = 0;
    while i < cells.len() {
        let d = cells[i].0;
        let mut j = i;
        let mut ok = true;
        while j < cells.len() && cells[j].0 == d {
            ok &= cells[j].1 >= 2.0 * c * d * d - tol;
            j += 1;
        }
        if !ok {
            break;
        }
        delta0 = d;
        i = j;
    }
    let a0 = 0.5
        * cells
            .iter()
            .filter(|(d, _)| *d >= delta0)
            .map(|(_, q)| *q)
            .fold(f64::INFINITY, f64::min);
    let a0 = if a0.is_finite() { a0 } else { 0.0 };
    let violation_count = cells
        .iter()
        .filter(|(d, q)| *q < 2.0 * (c * d * d).min(a0) - tol)
        .count();
    Ok(QuadraticFloor {
        c,
        a0,
        delta0,
        violation_count,
        exterior_cells: cells.len(),
    })
}

/// Serializable summary written next to the per-cell fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub potential: String,
    pub grid: GridDomain,
    pub frostman_const: f64,
    pub robin_const: f64,
    pub c0: f64,
    pub a0: f64,
    pub sigma_q: f64,
    pub sigma_log_laplacian: f64,
    pub droplet_radius: Option<f64>,
    pub total_mass: f64,
    pub diagnostics: SolveDiagnostics,
    pub boundary: Vec<Polyline>,
}

impl EquilibriumResult {
    pub fn summary(&self, potential: &str) -> EquilibriumSummary {
        EquilibriumSummary {
            potential: potential.to_string(),
            grid: self.grid,
            frostman_const: self.frostman_const,
            robin_const: self.robin_const,
            c0: self.c0,
            a0: self.a0,
            sigma_q: self.sigma_q,
            sigma_log_laplacian: self.sigma_log_laplacian,
            droplet_radius: self.droplet_radius,
            total_mass: self.total_mass(),
            diagnostics: self.diagnostics.clone(),
            boundary: self.geometry.polylines(),
        }
    }

    /// Rebuild a result from a summary and the per-cell field rows
    /// `(sigma, q_check, q_eff, droplet)`.
    pub fn from_parts(summary: EquilibriumSummary, rows: Vec<(f64, f64, f64, bool)>) -> Result<Self> {
        if rows.len() != summary.grid.cells() {
            return Err(invalid(format!(
                "field table has {} rows, grid has {} cells",
                rows.len(),
                summary.grid.cells()
            )));
        }
        let h = summary.grid.h();
        let sigma_weights = rows.iter().map(|r| r.0).collect();
        let q_check = rows.iter().map(|r| r.1).collect();
        let q_eff: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let droplet_mask = rows.iter().map(|r| r.3).collect();
        let coincidence_mask = q_eff.iter().map(|q| *q <= coincidence_tolerance(h, summary.c0)).collect();
        Ok(EquilibriumResult {
            grid: summary.grid,
            sigma_weights,
            droplet_mask,
            coincidence_mask,
            q_check,
            q_eff,
            frostman_const: summary.frostman_const,
            robin_const: summary.robin_const,
            c0: summary.c0,
            a0: summary.a0,
            sigma_q: summary.sigma_q,
            sigma_log_laplacian: summary.sigma_log_laplacian,
            droplet_radius: summary.droplet_radius,
            geometry: DropletGeometry::from_polylines(&summary.boundary),
            diagnostics: summary.diagnostics,
        })
    }
}

/// `Q_eff` threshold below which a cell counts as coincident: the value of
/// `2c₀δ²` half a cell away from the boundary.
pub(crate) fn coincidence_tolerance(h: f64, c0: f64) -> f64 {
    0.5 * c0.max(1e-12) * h * h
}

/// Distance from the droplet to the edge of the box.
pub(crate) fn box_margin(geometry: &DropletGeometry, rect: &Rect) -> f64 {
    geometry
        .vertices()
        .map(|z| {
            (z.re - rect.x_min)
                .min(rect.x_max - z.re)
                .min(z.im - rect.y_min)
                .min(rect.y_max - z.im)
        })
        .fold(f64::INFINITY, f64::min)
}
