//! External fields `Q` confining the gas, their Laplacians, and perturbations
//! of the form `Q + u/n`.
//!
//! The Laplacian is always the normalized one, `∂∂̄ = (Q_xx + Q_yy)/4`, and
//! area integrals are taken against `dA = dx dy / π`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `Q`, `Q'` and `Q''` of a radial profile at some radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialValue {
    pub q: f64,
    pub dq: f64,
    pub d2q: f64,
}

impl RadialValue {
    /// `∂∂̄Q = (Q'' + Q'/r)/4` for a radial function.
    pub fn laplacian(&self, r: f64) -> f64 {
        0.25 * (self.d2q + self.dq / r)
    }
}

/// Anything that can act as an external potential.
///
/// Implementations must be pure; values are shared freely between threads.
pub trait ExternalField: Send + Sync {
    fn value(&self, z: Complex64) -> f64;

    /// Normalized Laplacian `∂∂̄Q`.
    fn laplacian(&self, z: Complex64) -> f64;

    /// Membership in `Σ = {Q < ∞}`.
    fn is_finite_at(&self, z: Complex64) -> bool {
        self.value(z).is_finite()
    }

    /// Radial profile `r ↦ (Q, Q', Q'')`, when the field is rotation invariant.
    fn radial(&self, _r: f64) -> Option<RadialValue> {
        None
    }

    fn is_radial(&self) -> bool {
        self.radial(1.0).is_some()
    }

    /// Claimed `liminf Q(ζ) / (2 log|ζ|)` as `|ζ| → ∞`.
    fn growth_exponent(&self) -> f64;

    fn label(&self) -> String;
}

impl<T: ExternalField + ?Sized> ExternalField for &T {
    fn value(&self, z: Complex64) -> f64 {
        (**self).value(z)
    }
    fn laplacian(&self, z: Complex64) -> f64 {
        (**self).laplacian(z)
    }
    fn is_finite_at(&self, z: Complex64) -> bool {
        (**self).is_finite_at(z)
    }
    fn radial(&self, r: f64) -> Option<RadialValue> {
        (**self).radial(r)
    }
    fn growth_exponent(&self) -> f64 {
        (**self).growth_exponent()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

impl<T: ExternalField + ?Sized> ExternalField for Arc<T> {
    fn value(&self, z: Complex64) -> f64 {
        (**self).value(z)
    }
    fn laplacian(&self, z: Complex64) -> f64 {
        (**self).laplacian(z)
    }
    fn is_finite_at(&self, z: Complex64) -> bool {
        (**self).is_finite_at(z)
    }
    fn radial(&self, r: f64) -> Option<RadialValue> {
        (**self).radial(r)
    }
    fn growth_exponent(&self) -> f64 {
        (**self).growth_exponent()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn square(half_width: f64) -> Self {
        Rect {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.x_min && z.re <= self.x_max && z.im >= self.y_min && z.im <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// `m × m` lattice of points covering the rectangle, corners included.
    pub fn lattice(&self, m: usize) -> impl Iterator<Item = Complex64> + '_ {
        let m = m.max(2);
        (0..m).flat_map(move |i| {
            (0..m).map(move |j| {
                Complex64::new(
                    self.x_min + self.width() * i as f64 / (m - 1) as f64,
                    self.y_min + self.height() * j as f64 / (m - 1) as f64,
                )
            })
        })
    }
}

/// The built-in potential families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    /// `Q = |ζ|²`.
    Ginibre,
    /// `Q = |ζ|^{2b}`.
    Power { b: f64 },
    /// `Q = (|ζ|² − τ Re ζ²) / (1 − τ²)`.
    Elliptic { tau: f64 },
}

/// A validated built-in potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    kind: Builtin,
}

impl Potential {
    pub fn ginibre() -> Self {
        Potential { kind: Builtin::Ginibre }
    }

    pub fn power(b: f64) -> Result<Self> {
        make_builtin(Builtin::Power { b })
    }

    pub fn elliptic(tau: f64) -> Result<Self> {
        make_builtin(Builtin::Elliptic { tau })
    }

    pub fn kind(&self) -> Builtin {
        self.kind
    }
}

/// Construct a built-in potential, checking its parameters.
pub fn make_builtin(kind: Builtin) -> Result<Potential> {
    match kind {
        Builtin::Ginibre => {}
        Builtin::Power { b } => {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid(format!("power exponent must be positive, got {b}")));
            }
        }
        Builtin::Elliptic { tau } => {
            if !(0.0..1.0).contains(&tau) {
                return Err(invalid(format!("elliptic tau must lie in [0, 1), got {tau}")));
            }
        }
    }
    Ok(Potential { kind })
}

impl ExternalField for Potential {
    fn value(&self, z: Complex64) -> f64 {
        match self.kind {
            Builtin::Ginibre => z.norm_sqr(),
            Builtin::Power { b } => z.norm_sqr().powf(b),
            Builtin::Elliptic { tau } => {
                let re2 = z.re * z.re - z.im * z.im;
                (z.norm_sqr() - tau * re2) / (1.0 - tau * tau)
            }
        }
    }

    fn laplacian(&self, z: Complex64) -> f64 {
        match self.kind {
            Builtin::Ginibre => 1.0,
            Builtin::Power { b } => b * b * z.norm_sqr().powf(b - 1.0),
            Builtin::Elliptic { tau } => 1.0 / (1.0 - tau * tau),
        }
    }

    fn radial(&self, r: f64) -> Option<RadialValue> {
        match self.kind {
            Builtin::Ginibre => Some(RadialValue {
                q: r * r,
                dq: 2.0 * r,
                d2q: 2.0,
            }),
            Builtin::Power { b } => {
                let e = 2.0 * b;
                Some(RadialValue {
                    q: r.powf(e),
                    dq: e * r.powf(e - 1.0),
                    d2q: e * (e - 1.0) * r.powf(e - 2.0),
                })
            }
            Builtin::Elliptic { tau } if tau == 0.0 => Some(RadialValue {
                q: r * r,
                dq: 2.0 * r,
                d2q: 2.0,
            }),
            Builtin::Elliptic { .. } => None,
        }
    }

    fn growth_exponent(&self) -> f64 {
        f64::INFINITY
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Builtin::Ginibre => write!(f, "ginibre"),
            Builtin::Power { b } => write!(f, "power(b={b})"),
            Builtin::Elliptic { tau } => write!(f, "elliptic(tau={tau})"),
        }
    }
}

/// A bounded function `u` added to a potential with weight `1/n`.
#[derive(Clone)]
pub enum Perturbation {
    Constant(f64),
    /// `amplitude · sin(frequency · Re ζ)`.
    Sinusoidal { amplitude: f64, frequency: f64 },
    /// `amplitude · exp(−|ζ − center|² / width²)`.
    GaussianBump {
        amplitude: f64,
        center: Complex64,
        width: f64,
    },
    Custom(Arc<dyn Fn(Complex64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::Constant(c) => write!(f, "Constant({c})"),
            Perturbation::Sinusoidal { amplitude, frequency } => {
                write!(f, "Sinusoidal({amplitude}, {frequency})")
            }
            Perturbation::GaussianBump {
                amplitude,
                center,
                width,
            } => write!(f, "GaussianBump({amplitude}, {center}, {width})"),
            Perturbation::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Perturbation {
    pub fn value(&self, z: Complex64) -> f64 {
        match self {
            Perturbation::Constant(c) => *c,
            Perturbation::Sinusoidal { amplitude, frequency } => amplitude * (frequency * z.re).sin(),
            Perturbation::GaussianBump {
                amplitude,
                center,
                width,
            } => amplitude * (-(z - center).norm_sqr() / (width * width)).exp(),
            Perturbation::Custom(u) => u(z),
        }
    }

    /// `∂∂̄u`; custom functions are treated as merely measurable and contribute 0.
    pub fn laplacian(&self, z: Complex64) -> f64 {
        match self {
            Perturbation::Constant(_) | Perturbation::Custom(_) => 0.0,
            Perturbation::Sinusoidal { amplitude, frequency } => {
                -0.25 * amplitude * frequency * frequency * (frequency * z.re).sin()
            }
            Perturbation::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let s = (z - center).norm_sqr() / (width * width);
                amplitude * (-s).exp() * (s - 1.0) / (width * width)
            }
        }
    }
}

/// `V = Q + u/n`. Its droplet and equilibrium measure are those of the base.
#[derive(Debug, Clone)]
pub struct PerturbedPotential<P = Potential> {
    base: P,
    u: Perturbation,
    sup_norm: f64,
    n: usize,
}

/// Attach a bounded perturbation to `base`, checking the declared sup-norm on
/// a sampling lattice over `sampling_box`.
pub fn perturb<P: ExternalField>(
    base: P,
    u: Perturbation,
    sup_norm: f64,
    n: usize,
    sampling_box: Rect,
) -> Result<PerturbedPotential<P>> {
    if n == 0 {
        return Err(invalid("particle count must be positive"));
    }
    if !(sup_norm >= 0.0 && sup_norm.is_finite()) {
        return Err(invalid(format!("sup norm must be finite and nonnegative, got {sup_norm}")));
    }
    let observed = sampling_box
        .lattice(97)
        .map(|z| u.value(z).abs())
        .fold(0.0_f64, f64::max);
    if observed > sup_norm * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "perturbation reaches |u| = {observed} on the sampling box, above the declared bound {sup_norm}"
        )));
    }
    Ok(PerturbedPotential {
        base,
        u,
        sup_norm,
        n,
    })
}

impl<P: ExternalField> PerturbedPotential<P> {
    pub fn base(&self) -> &P {
        &self.base
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.u
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl<P: ExternalField> ExternalField for PerturbedPotential<P> {
    fn value(&self, z: Complex64) -> f64 {
        let q = self.base.value(z);
        if q.is_finite() {
            q + self.u.value(z) / self.n as f64
        } else {
            q
        }
    }

    fn laplacian(&self, z: Complex64) -> f64 {
        self.base.laplacian(z) + self.u.laplacian(z) / self.n as f64
    }

    fn is_finite_at(&self, z: Complex64) -> bool {
        self.base.is_finite_at(z)
    }

    fn radial(&self, r: f64) -> Option<RadialValue> {
        match self.u {
            Perturbation::Constant(c) => self.base.radial(r).map(|v| RadialValue {
                q: v.q + c / self.n as f64,
                ..v
            }),
            _ => None,
        }
    }

    fn growth_exponent(&self) -> f64 {
        self.base.growth_exponent()
    }

    fn label(&self) -> String {
        format!("{} + u/{} ({:?})", self.base.label(), self.n, self.u)
    }
}

/// Minimum of `Q(ζ) / (2 log|ζ|)` over circles of the given radii (each > 1),
/// sampled at 64 angles. Points where `Q = +∞` are skipped; if every sample is
/// infinite the result is `−∞`, which flags a misconfigured `Σ`.
pub fn growth_margin<P: ExternalField + ?Sized>(p: &P, radii: &[f64]) -> f64 {
    const ANGLES: usize = 64;
    let mut margin = f64::INFINITY;
    let mut seen = false;
    for &r in radii.iter().filter(|r| **r > 1.0) {
        let denom = 2.0 * r.ln();
        for k in 0..ANGLES {
            let z = Complex64::from_polar(r, 2.0 * PI * k as f64 / ANGLES as f64);
            let q = p.value(z);
            if q.is_finite() {
                seen = true;
                margin = margin.min(q / denom);
            }
        }
    }
    if seen {
        margin
    } else {
        f64::NEG_INFINITY
    }
}

/// Outcome of the finite-radius growth check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub margin: f64,
    pub r_start: f64,
    pub r_end: f64,
    pub passed: bool,
}

/// Check `margin > 1` on `[R, 10R]` with `R = 5 × droplet_radius` (at least
/// `e`), sampled at 32 geometric radii.
pub fn check_growth<P: ExternalField + ?Sized>(p: &P, droplet_radius: f64) -> GrowthCheck {
    let r_start = (5.0 * droplet_radius).max(std::f64::consts::E);
    let r_end = 10.0 * r_start;
    let radii: Vec<f64> = (0..32)
        .map(|i| r_start * (r_end / r_start).powf(i as f64 / 31.0))
        .collect();
    let margin = growth_margin(p, &radii);
    GrowthCheck {
        margin,
        r_start,
        r_end,
        passed: margin > 1.0,
    }
}

/// Centered five-point estimate of `∂∂̄Q` with step `h`.
pub fn finite_difference_laplacian<P: ExternalField + ?Sized>(p: &P, z: Complex64, h: f64) -> f64 {
    let c = p.value(z);
    let s = p.value(z + h) + p.value(z - h) + p.value(z + Complex64::i() * h) + p.value(z - Complex64::i() * h);
    0.25 * (s - 4.0 * c) / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ginibre_point_values() {
        let p = Potential::ginibre();
        assert_eq!(p.value(c(1.0, 1.0)), 2.0);
        assert_eq!(p.laplacian(c(1.0, 1.0)), 1.0);
    }

    #[test]
    fn ginibre_laplacian_is_one_on_grid() {
        let p = Potential::ginibre();
        for z in Rect::square(3.0).lattice(10) {
            assert_eq!(p.laplacian(z), 1.0);
            let fd = finite_difference_laplacian(&p, z, 1e-4);
            assert!((fd - 1.0).abs() < 1e-5, "{z}: {fd}");
        }
    }

    #[test]
    fn degenerate_families_match_ginibre() {
        let g = Potential::ginibre();
        let p1 = Potential::power(1.0).unwrap();
        let e0 = Potential::elliptic(0.0).unwrap();
        for z in Rect::square(2.0).lattice(9) {
            assert!((p1.value(z) - g.value(z)).abs() < 1e-15 * (1.0 + g.value(z)));
            assert_eq!(e0.value(z), g.value(z));
            assert_eq!(e0.laplacian(z), 1.0);
            assert!((p1.laplacian(z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(Potential::power(0.0).is_err());
        assert!(Potential::power(-1.0).is_err());
        assert!(Potential::elliptic(1.0).is_err());
        assert!(Potential::elliptic(-0.1).is_err());
        assert!(Potential::elliptic(0.99).is_ok());
    }

    #[test]
    fn radial_profile_matches_evaluate() {
        for p in [Potential::ginibre(), Potential::power(2.0).unwrap(), Potential::power(0.75).unwrap()] {
            for k in 0..50 {
                let r = 0.05 + 0.06 * k as f64;
                let z = Complex64::from_polar(r, 0.37 * k as f64);
                let rv = p.radial(r).unwrap();
                assert!((rv.q - p.value(z)).abs() <= 1e-12 * (1.0 + rv.q));
                assert!((rv.laplacian(r) - p.laplacian(z)).abs() <= 1e-10 * (1.0 + rv.q));
            }
        }
        assert!(Potential::elliptic(0.5).unwrap().radial(1.0).is_none());
    }

    #[test]
    fn growth_margin_examples() {
        let g = Potential::ginibre();
        let m = growth_margin(&g, &[10.0, 100.0]);
        assert!(m >= 100.0 / (2.0 * 10f64.ln()) - 1e-12);
        assert!((m - 21.714724095162588).abs() < 1e-9);

        let weak = Potential::power(0.25).unwrap();
        // r^{1/2} / (2 log r) is e^{1/2}/2 at r = e and falls to e/4 at r = e²
        let m = growth_margin(&weak, &[E, E * E]);
        assert!((m - E / 4.0).abs() < 1e-12, "{m}");
        assert!(growth_margin(&weak, &[E]) - E.sqrt() / 2.0 < 1e-12);
        assert!(m < 1.0);

        let pert = perturb(g, Perturbation::Constant(1.0), 1.0, 10, Rect::square(100.0)).unwrap();
        let mp = growth_margin(&pert, &[10.0, 100.0]);
        let mg = growth_margin(&g, &[10.0, 100.0]);
        assert!((mp - mg).abs() <= 0.1 / (2.0 * 10f64.ln()) + 1e-12);
    }

    #[test]
    fn growth_margin_all_infinite_is_neg_inf() {
        struct Wall;
        impl ExternalField for Wall {
            fn value(&self, z: Complex64) -> f64 {
                if z.norm() < 2.0 {
                    z.norm_sqr()
                } else {
                    f64::INFINITY
                }
            }
            fn laplacian(&self, _: Complex64) -> f64 {
                1.0
            }
            fn growth_exponent(&self) -> f64 {
                f64::INFINITY
            }
            fn label(&self) -> String {
                "wall".into()
            }
        }
        assert_eq!(growth_margin(&Wall, &[5.0, 50.0]), f64::NEG_INFINITY);
        assert!(!Wall.is_finite_at(c(3.0, 0.0)));
    }

    #[test]
    fn check_growth_flags() {
        assert!(check_growth(&Potential::ginibre(), 1.0).passed);
        assert!(check_growth(&Potential::power(0.5).unwrap(), 1.0).passed);
        // |ζ|^{0.2} grows too slowly on any desk-scale window
        assert!(!check_growth(&Potential::power(0.1).unwrap(), 1.0).passed);
    }

    #[test]
    fn perturbation_examples() {
        let g = Potential::ginibre();
        let b = Rect::square(4.0);
        let zero = perturb(g, Perturbation::Constant(0.0), 0.0, 7, b).unwrap();
        for z in b.lattice(11) {
            assert_eq!(zero.value(z), g.value(z));
        }
        let cst = perturb(g, Perturbation::Constant(3.0), 3.0, 12, b).unwrap();
        for z in b.lattice(11) {
            assert!((cst.value(z) - g.value(z) - 0.25).abs() < 1e-12);
        }
        let sin = perturb(
            g,
            Perturbation::Sinusoidal {
                amplitude: 1.0,
                frequency: 1.0,
            },
            1.0,
            50,
            b,
        )
        .unwrap();
        let z = c(PI / 2.0, 0.0);
        assert!((sin.value(z) - g.value(z) - 0.02).abs() < 1e-14);
    }

    #[test]
    fn perturbation_sup_norm_rejected() {
        let g = Potential::ginibre();
        let r = perturb(g, Perturbation::Constant(2.0), 1.0, 10, Rect::square(1.0));
        assert!(r.is_err());
        let bump = Perturbation::GaussianBump {
            amplitude: 1.5,
            center: c(0.0, 0.0),
            width: 0.3,
        };
        assert!(perturb(g, bump.clone(), 1.0, 10, Rect::square(1.0)).is_err());
        assert!(perturb(g, bump, 1.5, 10, Rect::square(1.0)).is_ok());
    }

    #[test]
    fn perturbation_laplacians_match_finite_differences() {
        let g = Potential::ginibre();
        let b = Rect::square(2.0);
        for u in [
            Perturbation::Sinusoidal {
                amplitude: 0.7,
                frequency: 2.0,
            },
            Perturbation::GaussianBump {
                amplitude: 1.0,
                center: c(0.2, -0.1),
                width: 0.5,
            },
        ] {
            let v = perturb(g, u, 1.0, 3, b).unwrap();
            for z in b.lattice(7) {
                let fd = finite_difference_laplacian(&v, z, 1e-4);
                let an = v.laplacian(z);
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{z}: {fd} vs {an}");
            }
        }
    }

    fn arb_point() -> impl Strategy<Value = Complex64> {
        (-2.5f64..2.5, -2.5f64..2.5).prop_map(|(x, y)| c(x, y))
    }

    proptest! {
        #[test]
        fn laplacian_matches_finite_difference(z in arb_point(), which in 0usize..4) {
            let p = match which {
                0 => Potential::ginibre(),
                1 => Potential::power(2.0).unwrap(),
                2 => Potential::power(1.5).unwrap(),
                _ => Potential::elliptic(0.5).unwrap(),
            };
            prop_assume!(z.norm() > 0.05);
            let fd = finite_difference_laplacian(&p, z, 1e-4);
            let an = p.laplacian(z);
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs(), "{} vs {}", fd, an);
        }

        #[test]
        fn perturbation_identity(z in arb_point(), a in -1.0f64..1.0, n in 1usize..500) {
            let g = Potential::elliptic(0.3).unwrap();
            let u = Perturbation::Sinusoidal { amplitude: a, frequency: 1.3 };
            let v = perturb(g, u.clone(), a.abs(), n, Rect::square(3.0)).unwrap();
            prop_assert!((v.value(z) - g.value(z) - u.value(z) / n as f64).abs() <= 1e-12 * (1.0 + g.value(z)));
        }
    }
}
