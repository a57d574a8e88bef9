use heatlab_core::estimates::{fit_power_law, weighted_sup_norm};
use heatlab_core::heat_flow::{
    evolve, linear_propagate, step, Coupling, CutoffSchedule, SolverConfig,
};
use heatlab_core::initial_data::{decompose, random_band_limited, sample_rough_radial, RoughDataSpec};
use heatlab_core::littlewood_paley::{bernstein_derivative_ratio, project, DyadicProjector, ProjectorMode};
use heatlab_core::spectral::{dealias, fractional_laplacian, lebesgue_norm, nonlinearity};
use heatlab_core::{Field, Grid};
use proptest::prelude::*;

fn grid2() -> Grid {
    Grid::new(2, 16.0, 32).unwrap()
}

fn rel(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().spectral_energy().sqrt() / b.spectral_energy().sqrt().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plancherel_and_round_trip(seed in 0u64..1000, k_hi in 0.5f64..5.0) {
        let f = random_band_limited(grid2(), k_hi, seed);
        let values = f.to_physical().unwrap();
        let l2 = lebesgue_norm(&f, 2.0).unwrap();
        prop_assert!((l2 - f.spectral_energy().sqrt()).abs() <= 1e-12 * l2.max(1e-300));
        let back = Field::from_physical(*f.grid(), &values).unwrap();
        prop_assert!(rel(&back, &f) < 1e-13 || l2 == 0.0);
    }

    #[test]
    fn projectors_are_complementary(seed in 0u64..1000, j in -2i32..3) {
        let f = random_band_limited(grid2(), 5.0, seed);
        let low = project(&f, &DyadicProjector::dyadic(j, ProjectorMode::Leq)).unwrap();
        let high = project(&f, &DyadicProjector::dyadic(j, ProjectorMode::Gt)).unwrap();
        prop_assert!(rel(&low.add(&high).unwrap(), &f) <= 1e-14);
        let lt = project(&f, &DyadicProjector::dyadic(j, ProjectorMode::Lt)).unwrap();
        let geq = project(&f, &DyadicProjector::dyadic(j, ProjectorMode::Geq)).unwrap();
        prop_assert!(rel(&lt.add(&geq).unwrap(), &f) <= 1e-14);
        // Projections do not increase L².
        prop_assert!(low.spectral_energy() <= f.spectral_energy() * (1.0 + 1e-14));
    }

    #[test]
    fn derivative_band_ratio_within_dyadic_bounds(seed in 0u64..1000, j in -1i32..3, s in -2.0f64..2.0) {
        let f = random_band_limited(grid2(), 5.0, seed);
        let r = bernstein_derivative_ratio(&f, 2f64.powi(j), s).unwrap();
        if r > 0.0 {
            let b = 2f64.powf(s.abs());
            prop_assert!(r >= 1.0 / b * (1.0 - 1e-12) && r <= b * (1.0 + 1e-12), "{}", r);
        }
    }

    #[test]
    fn heat_semigroup_and_contraction(seed in 0u64..1000, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let f = random_band_limited(grid2(), 4.0, seed);
        let composed = linear_propagate(&linear_propagate(&f, s).unwrap(), t).unwrap();
        let direct = linear_propagate(&f, s + t).unwrap();
        prop_assert!(rel(&composed, &direct) <= 1e-13 || direct.spectral_energy() == 0.0);
        prop_assert!(direct.spectral_energy() <= f.spectral_energy() * (1.0 + 1e-14));
    }

    #[test]
    fn fractional_laplacian_commutes_with_flow(seed in 0u64..1000, s in -1.0f64..1.5, t in 0.0f64..1.0) {
        let f = random_band_limited(grid2(), 4.0, seed);
        let a = fractional_laplacian(&linear_propagate(&f, t).unwrap(), s);
        let b = linear_propagate(&fractional_laplacian(&f, s), t).unwrap();
        prop_assert!(rel(&a, &b) <= 1e-12 || b.spectral_energy() == 0.0);
    }

    #[test]
    fn nonlinearity_is_real_and_dealiased(seed in 0u64..1000, amp in 0.1f64..3.0, d3 in proptest::bool::ANY) {
        let grid = if d3 { Grid::new(3, 8.0, 12).unwrap() } else { grid2() };
        let f = random_band_limited(grid, 3.0, seed).scaled(amp);
        let n = nonlinearity(&f, -1.0).unwrap();
        prop_assert!(n.symmetry_defect() < 1e-12);
        let mut again = n.clone();
        dealias(&mut again);
        prop_assert_eq!(again.coefficients(), n.coefficients());
    }

    #[test]
    fn defocusing_step_does_not_increase_mass(seed in 0u64..1000, amp in 0.01f64..0.5, dt in 1e-3f64..0.05) {
        let f = random_band_limited(grid2(), 3.0, seed).scaled(amp);
        // The nonlinear part is explicit; only steps inside its stability region qualify.
        let sup = lebesgue_norm(&f, f64::INFINITY).unwrap();
        prop_assume!(3.0 * sup * sup * dt <= 0.5);
        let cfg = SolverConfig::new(Coupling::Defocusing, 1.0);
        let next = step(&f, dt, &cfg).unwrap();
        prop_assert!(next.spectral_energy() <= f.spectral_energy() * (1.0 + 1e-10));
    }

    #[test]
    fn decomposition_reassembles(seed in 0u64..200, j in -1i32..3) {
        let g = Grid::new(2, 32.0, 64).unwrap();
        let h0 = sample_rough_radial(&RoughDataSpec::new(0.2, 2, 1.0, seed), &g).unwrap();
        let parts = decompose(&h0, 2f64.powi(j), 0.2).unwrap();
        prop_assert!(rel(&parts.v0.add(&parts.w0).unwrap(), &h0) <= 1e-14);
        prop_assert!(parts.v0.mean().abs() < 1e-15);
    }

    #[test]
    fn power_law_fit_recovers_exponent(a in 0.1f64..10.0, b in -2.0f64..2.0, n in 8usize..40) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let t = 1.0 + i as f64 * 0.7;
            (t, a * t.powf(b))
        }).collect();
        let fit = fit_power_law(&pts, (0.0, f64::INFINITY)).unwrap();
        prop_assert!((fit.slope - b).abs() < 1e-12);
        prop_assert!(fit.r_squared > 1.0 - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn defocusing_records_are_monotone_and_finite(seed in 0u64..1000, amp in 0.5f64..4.0) {
        let g = Grid::new(2, 32.0, 64).unwrap();
        let h0 = sample_rough_radial(&RoughDataSpec::new(0.1, 2, amp, seed), &g).unwrap();
        let traj = evolve(&h0, &SolverConfig::new(Coupling::Defocusing, 4.0), &CutoffSchedule::None).unwrap();
        prop_assert!(traj.is_completed());
        for w in traj.records.windows(2) {
            prop_assert!(w[1].l2 <= w[0].l2 + 1e-10);
            prop_assert!(w[1].is_finite());
        }
    }

    #[test]
    fn reweighting_on_late_windows(seed in 0u64..1000, a in 0.05f64..0.25, frac in 0.1f64..0.9) {
        let g = Grid::new(2, 32.0, 64).unwrap();
        let h0 = sample_rough_radial(&RoughDataSpec::new(0.2, 2, 1.0, seed), &g).unwrap();
        let traj = evolve(&h0, &SolverConfig::new(Coupling::Defocusing, 10.0), &CutoffSchedule::None).unwrap();
        let a_prime = a * frac;
        let t_end = 10.0;
        let y = weighted_sup_norm(&traj, a, (1.0, t_end)).value;
        let yp = weighted_sup_norm(&traj, a_prime, (1.0, t_end)).value;
        prop_assert!(yp <= 1f64.max(t_end.powf(0.5 * (a_prime - a))) * y * (1.0 + 1e-15));
    }
}
