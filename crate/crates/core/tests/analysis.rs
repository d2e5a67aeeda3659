use cgas::analysis::{
    dn_tail, energy_continuous, entropy_check, exterior_rate, ks_statistic, large_r_tail, partition_bruteforce,
    split_rhat, tail_threshold, wilson_interval, MeasureAccumulator, PartitionQuadrature, RadialHistogram,
    TestFunction, Z95,
};
use cgas::determinantal::RadialEnsemble;
use cgas::equilibrium::{solve_grid, solve_radial, GridDomain, SolveOptions};
use cgas::potential::Potential;
use cgas::sampler::{run_chain, ChainParams};
use cgas::Complex64;
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

/// `Z_2(β)` for the Ginibre field, by the centre-of-mass change of variables.
fn ginibre_z2(beta: f64) -> f64 {
    beta * 2f64.ln() + ln_gamma(beta + 1.0) - (beta + 1.0) * (2.0 * beta).ln() - (2.0 * beta).ln()
}

#[test]
fn two_particle_partition_functions() {
    let p = Potential::ginibre();
    let q = PartitionQuadrature::default();
    let z1 = partition_bruteforce(&p, 1.0, 2, &q).unwrap();
    assert!((z1.log_z + 4f64.ln()).abs() < 1e-4, "{}", z1.log_z);
    assert!((ginibre_z2(1.0) + 4f64.ln()).abs() < 1e-14);
    let z2 = partition_bruteforce(&p, 2.0, 2, &q).unwrap();
    assert!((z2.log_z + 32f64.ln()).abs() < 1e-4, "{}", z2.log_z);
    let z = partition_bruteforce(&p, 0.7, 2, &q).unwrap();
    assert!((z.log_z - ginibre_z2(0.7)).abs() < 1e-4);
}

#[test]
fn entropy_bound_for_two_ginibre_particles() {
    let p = Potential::ginibre();
    let (_, eq) = solve_radial(&p, GridDomain::square(2.0, 128).unwrap()).unwrap();
    for beta in [1.0, 2.0] {
        let chk = entropy_check(&p, &eq, beta, 2, &PartitionQuadrature::default()).unwrap();
        assert!((chk.rhs + beta * 5.0 / 8.0).abs() < 1e-3, "{}", chk.rhs);
        assert!(chk.passed, "{chk:?}");
        assert!(!chk.degenerate);
    }
}

#[test]
fn continuous_energy_of_sigma_is_the_robin_constant() {
    let p = Potential::ginibre();
    let eq = solve_grid(&p, GridDomain::square(2.0, 128).unwrap(), &SolveOptions::default()).unwrap();
    let e = energy_continuous(&eq.grid, &eq.sigma_weights, &p).unwrap();
    assert!((e - eq.robin_const).abs() < 0.01, "{e} vs {}", eq.robin_const);
    assert!((e - 0.75).abs() < 0.01);
}

#[test]
fn sigma_integrals_of_test_functions() {
    let p = Potential::ginibre();
    let (_, eq) = solve_radial(&p, GridDomain::square(2.0, 256).unwrap()).unwrap();
    let s = TestFunction::ModulusSquared { clip: 4.0 }.sigma(&eq);
    assert!((s - 0.5).abs() < 2e-3, "{s}");
    assert!((TestFunction::One.sigma(&eq) - 1.0).abs() < 1e-10);
    assert!(TestFunction::RealPart { clip: 2.0 }.sigma(&eq).abs() < 1e-10);
}

#[test]
fn empirical_measure_of_a_ginibre_chain() {
    let p = Potential::ginibre();
    let (_, eq) = solve_radial(&p, GridDomain::square(2.0, 128).unwrap()).unwrap();
    let params = ChainParams { n: 32, sweeps: 4_000, burn_in: 500, seed: 1, keep_configurations: true, ..Default::default() };
    let batch = run_chain(&params, &p, &eq).unwrap();
    let mut acc = MeasureAccumulator::new(TestFunction::builtins());
    for c in batch.configurations.as_ref().unwrap() {
        acc.add(c);
    }
    let rep = acc.finish(&eq, 0.05).unwrap();
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn exact_profile_matches_histogram_of_exact_radii() {
    let p = Potential::ginibre();
    let n = 64;
    let e = RadialEnsemble::build(&p, n).unwrap();
    let mut h = RadialHistogram::uniform(n, 1.5, 6).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(2);
    for _ in 0..20_000 {
        let radii = e.sample_radii(&mut rng).unwrap();
        let pts: Vec<Complex64> = radii.iter().map(|r| Complex64::new(*r, 0.0)).collect();
        h.add(&pts);
    }
    let prof = h.finish().unwrap();
    assert!((prof.total_mass() - n as f64).abs() < 0.01 * n as f64);
    for (i, d) in prof.density.iter().enumerate() {
        let (a, b) = (prof.edges[i], prof.edges[i + 1]);
        let exact: f64 =
            (0..200).map(|k| a + (b - a) * (k as f64 + 0.5) / 200.0).map(|r| e.one_point_exact(r) * 2.0 * r).sum::<f64>()
                * (b - a)
                / 200.0
                / (b * b - a * a);
        assert!((d - exact).abs() <= 4.0 * prof.std_error[i] + 1e-3 * exact, "bin {i}: {d} vs {exact}");
    }
}

#[test]
fn large_r_rate_for_ginibre() {
    let p = Potential::ginibre();
    let (_, eq) = solve_radial(&p, GridDomain::square(2.0, 64).unwrap()).unwrap();
    let k = exterior_rate(&p, &eq, 0.5);
    assert!((k - 0.5 * (2.25 - 2.0 * 1.5f64.ln() - 1.0)).abs() < 1e-12);
    assert!((k - 0.2195).abs() < 1e-4);
    let rep = large_r_tail(&[0.0; 100], 32, 2.0, &p, &eq, 0.9, &[0.5]).unwrap();
    assert!(rep.passed());
    assert!(large_r_tail(&[0.0; 100], 32, 2.0, &p, &eq, 0.9, &[1e-3]).is_err());
}

#[test]
fn rhat_of_identical_chains_is_near_one() {
    let a: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let b: Vec<f64> = (0..1000).map(|i| ((i * 104_729) % 1000) as f64 / 1000.0).collect();
    let r = split_rhat(&[&a, &b]);
    assert!((r - 1.0).abs() < 0.01, "{r}");
    let shifted: Vec<f64> = b.iter().map(|x| x + 5.0).collect();
    assert!(split_rhat(&[&a, &shifted]) > 1.5);
}

#[test]
fn ks_of_exact_uniform_quantiles_is_small() {
    let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
    assert!((d - 0.0005).abs() < 1e-12);
}

proptest! {
    #[test]
    fn tail_table_is_monotone(d in prop::collection::vec(0.0f64..0.5, 50..400), n in 4usize..2000) {
        let ts: Vec<f64> = (0..10).map(|i| 0.2 * i as f64).collect();
        let rep = dn_tail(&d, n, 1.0, 1.0, 0.9, 0.0, &ts).unwrap();
        for w in rep.rows.windows(2) {
            prop_assert!(w[1].threshold > w[0].threshold);
            prop_assert!(w[1].p_hat <= w[0].p_hat);
        }
        for r in &rep.rows {
            prop_assert!((r.threshold - tail_threshold(n, 1.0, 0.9, 0.0, r.t)).abs() < 1e-15);
            prop_assert!(r.ci_lo <= r.p_hat && r.p_hat <= r.ci_hi);
        }
    }

    #[test]
    fn wilson_interval_contains_estimate(k in 0usize..500, extra in 0usize..500) {
        let n = k + extra + 1;
        let (lo, hi) = wilson_interval(k, n, Z95);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}
