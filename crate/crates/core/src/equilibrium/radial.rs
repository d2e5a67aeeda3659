use num_complex::Complex64;

use super::{box_margin, coincidence_tolerance, lemma1_constants, DropletGeometry, EquilibriumResult, GridDomain, SolveDiagnostics};
use crate::error::{Error, Result};
use crate::potential::{ExternalField, RadialValue};
use crate::quad;

const SUBSAMPLES: usize = 8;

fn profile<P: ExternalField + ?Sized>(p: &P, r: f64) -> Result<RadialValue> {
    p.radial(r)
        .ok_or_else(|| Error::UnsupportedPotential(format!("{} has no radial profile", p.label())))
}

/// Radius `R` of the disc droplet, solving `R·Q′(R) = 2` by bisection.
pub fn radial_droplet_radius<P: ExternalField + ?Sized>(p: &P) -> Result<f64> {
    let f = |r: f64| -> f64 { p.radial(r).map(|v| r * v.dq - 2.0).unwrap_or(f64::NAN) };
    let mut hi = 1.0;
    let mut guard = 0;
    while !(f(hi) > 0.0) {
        hi *= 2.0;
        guard += 1;
        if guard > 60 || f(hi).is_nan() {
            return Err(Error::UnsupportedPotential(format!(
                "r·Q′(r) − 2 has no sign change on (0, {hi}] for {}",
                p.label()
            )));
        }
    }
    let lo = 1e-300;
    if !(f(lo) < 0.0) {
        return Err(Error::UnsupportedPotential(format!(
            "r·Q′(r) does not start below 2 for {}",
            p.label()
        )));
    }
    quad::bisect(f, lo, hi, 1e-13).ok_or_else(|| Error::UnsupportedPotential("bisection failed".into()))
}

/// Closed-form equilibrium data for a radial potential whose droplet is the
/// disc `|ζ| ≤ R`, sampled on `grid`.
pub fn solve_radial<P: ExternalField + ?Sized>(p: &P, grid: GridDomain) -> Result<(f64, EquilibriumResult)> {
    profile(p, 1.0)?;
    let radius = radial_droplet_radius(p)?;
    let at_r = profile(p, radius)?;
    let gamma = at_r.q - 2.0 * radius.ln();
    let c0 = at_r.laplacian(radius);
    if c0 <= 0.0 {
        return Err(Error::UnsupportedPotential(format!("ΔQ(R) = {c0} is not positive")));
    }
    // σ(Q) and ∫ ΔQ log ΔQ over the disc, against 2r dr
    let lap = |r: f64| p.radial(r).map(|v| v.laplacian(r)).unwrap_or(f64::NAN);
    let sigma_q = quad::integrate(
        |r| {
            let v = p.radial(r).expect("radial");
            v.q * v.laplacian(r) * 2.0 * r
        },
        0.0,
        radius,
        1e-14,
        1e-12,
    )?
    .value;
    let sigma_log_laplacian = quad::integrate(
        |r| {
            let l = lap(r);
            if l > 0.0 {
                l * l.ln() * 2.0 * r
            } else {
                0.0
            }
        },
        0.0,
        radius,
        1e-14,
        1e-10,
    )?
    .value;
    let robin = 0.5 * gamma + 0.5 * sigma_q;

    let h = grid.h();
    let area = grid.cell_area();
    let mut sigma = vec![0.0; grid.cells()];
    let mut q_check = vec![0.0; grid.cells()];
    let mut q_eff = vec![0.0; grid.cells()];
    let mut droplet = vec![false; grid.cells()];
    for idx in 0..grid.cells() {
        let z = grid.centre(idx);
        let r = z.norm();
        let q = p.value(z);
        let qc = if r <= radius { q } else { at_r.q + 2.0 * (r / radius).ln() };
        q_check[idx] = qc;
        q_eff[idx] = (q - qc).max(0.0);
        droplet[idx] = r <= radius;
        // cells cut by the circle are integrated on a sub-lattice
        let cut = (r - radius).abs() < h;
        sigma[idx] = if !cut {
            if r <= radius {
                p.laplacian(z) * area
            } else {
                0.0
            }
        } else {
            let mut acc = 0.0;
            for a in 0..SUBSAMPLES {
                for b in 0..SUBSAMPLES {
                    let off = Complex64::new(
                        ((a as f64 + 0.5) / SUBSAMPLES as f64 - 0.5) * h,
                        ((b as f64 + 0.5) / SUBSAMPLES as f64 - 0.5) * h,
                    );
                    let w = z + off;
                    if w.norm() <= radius {
                        acc += p.laplacian(w);
                    }
                }
            }
            acc * area / (SUBSAMPLES * SUBSAMPLES) as f64
        };
    }
    let mass: f64 = sigma.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::UnsupportedPotential("droplet does not cover any grid cell".into()));
    }
    sigma.iter_mut().for_each(|w| *w /= mass);

    let geometry = DropletGeometry::circle(radius, 2048);
    let margin = box_margin(&geometry, &grid.rect);
    if margin <= 0.0 {
        return Err(Error::BoxTooSmall);
    }
    let tol = coincidence_tolerance(h, c0);
    let coincidence = q_eff.iter().map(|q| *q <= tol).collect();
    let mut result = EquilibriumResult {
        grid,
        sigma_weights: sigma,
        droplet_mask: droplet,
        coincidence_mask: coincidence,
        q_check,
        q_eff,
        frostman_const: gamma,
        robin_const: robin,
        c0,
        a0: 0.0,
        sigma_q,
        sigma_log_laplacian,
        droplet_radius: Some(radius),
        geometry,
        diagnostics: SolveDiagnostics {
            method: "radial".into(),
            iterations: 0,
            frostman_residual: 0.0,
            self_energy_constant: None,
            box_margin: margin,
        },
    };
    result.a0 = lemma1_constants(&result, 0.9 * c0)?.a0;
    Ok((radius, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn ginibre_closed_form() {
        let g = GridDomain::square(2.0, 64).unwrap();
        let (r, eq) = solve_radial(&Potential::ginibre(), g).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!((eq.c0 - 1.0).abs() < 1e-15);
        assert!((eq.frostman_const - 1.0).abs() < 1e-12);
        assert!((eq.robin_const - 0.75).abs() < 1e-12);
        assert!((eq.sigma_q - 0.5).abs() < 1e-12);
        assert!(eq.sigma_log_laplacian.abs() < 1e-14);
        assert!((eq.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_radius() {
        for b in [0.5, 1.0, 2.0, 3.0] {
            let p = Potential::power(b).unwrap();
            let r = radial_droplet_radius(&p).unwrap();
            assert!((r - b.powf(-1.0 / (2.0 * b))).abs() < 1e-12, "b={b}: {r}");
        }
    }

    #[test]
    fn power_two_c0() {
        let p = Potential::power(2.0).unwrap();
        let (r, eq) = solve_radial(&p, GridDomain::square(2.0, 64).unwrap()).unwrap();
        assert!((r - 2f64.powf(-0.25)).abs() < 1e-12);
        assert!((eq.c0 - 4.0 * 2f64.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_radial() {
        let p = Potential::elliptic(0.5).unwrap();
        assert!(solve_radial(&p, GridDomain::square(2.0, 32).unwrap()).is_err());
    }

    #[test]
    fn box_too_small() {
        let r = solve_radial(&Potential::ginibre(), GridDomain::square(0.9, 32).unwrap());
        assert!(matches!(r, Err(Error::BoxTooSmall)));
    }
}
