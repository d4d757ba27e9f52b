//! Property tests of the structural invariants.

use std::f64::consts::PI;

use proptest::prelude::*;

use fhn_core::grid::{self, GridFunction, Parity, UniformGrid};
use fhn_core::model::{cubic_f, cubic_f_prime, stationary_solution, CProfile, Domain, ModelSpec};
use fhn_core::sim::{self, SimConfig};
use fhn_core::spectral::{self, CosineBasis, GalerkinSystem, SpectralState};
use fhn_core::stability::{self, ModeClass};

fn grid_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0_f64, n)
}

fn domain() -> impl Strategy<Value = Domain> {
    (-60.0..10.0_f64, 0.5..100.0_f64).prop_map(|(a, len)| Domain::new(a, a + len).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cubic_is_odd(u in -1e3..1e3_f64) {
        prop_assert_eq!(cubic_f(-u), -cubic_f(u));
    }

    #[test]
    fn well_profile_is_mirror_symmetric(d in domain(), p in 0.0..50.0_f64, n in 5usize..400) {
        let g = d.grid(n).unwrap();
        let c = CProfile::Well { p }.sample(&g).unwrap();
        let r = c.reflect();
        for (a, b) in c.values().iter().zip(r.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * p.max(1.0));
        }
    }

    #[test]
    fn constant_stationary_state_is_exact(c in -3.0..3.0_f64, d in domain(), n in 5usize..200) {
        let spec = ModelSpec::const_c(c, 0.1, 1.0, d);
        let st = stationary_solution(&spec, &d.grid(n).unwrap()).unwrap().state;
        prop_assert!(st.u.values().iter().all(|&u| u == c));
        prop_assert!(st.v.values().iter().all(|&v| v == cubic_f(c)));
    }

    #[test]
    fn planar_trace_is_f_prime_over_eps(c in -3.0..3.0_f64, eps in 0.01..10.0_f64) {
        let r = stability::ode_hopf_analysis(c, eps);
        prop_assert!((r.trace - cubic_f_prime(c) / eps).abs() <= 1e-12 * (1.0 + r.trace.abs()));
        prop_assert_eq!(r.hopf, c.abs() == 1.0);
    }

    #[test]
    fn laplacian_is_self_adjoint(f in grid_values(33), g in grid_values(33), h in 0.001..1.0_f64) {
        let grid = UniformGrid::new(0.0, 32.0 * h, 33).unwrap();
        let f = GridFunction::new(grid, f).unwrap();
        let g = GridFunction::new(grid, g).unwrap();
        let lf = grid::neumann_laplacian(&f).unwrap();
        let lg = grid::neumann_laplacian(&g).unwrap();
        let a = grid::quad(&g.zip_with(&lf, |x, y| x * y).unwrap());
        let b = grid::quad(&f.zip_with(&lg, |x, y| x * y).unwrap());
        let scale = 1e3 / h;
        prop_assert!((a - b).abs() <= 1e-12 * scale);
    }

    #[test]
    fn laplacian_is_dissipative(f in grid_values(41)) {
        let grid = UniformGrid::new(0.0, 1.0, 41).unwrap();
        let f = GridFunction::new(grid, f).unwrap();
        let lf = grid::neumann_laplacian(&f).unwrap();
        let q = grid::quad(&f.zip_with(&lf, |x, y| x * y).unwrap());
        let form = grid::dirichlet_form(f.values(), grid.h());
        prop_assert!(q <= 1e-9 * form.abs().max(1.0));
        prop_assert!((q + form).abs() <= 1e-9 * form.abs().max(1.0));
    }

    #[test]
    fn reflection_is_an_involution(f in grid_values(25)) {
        let grid = UniformGrid::new(0.0, 1.0, 25).unwrap();
        let f = GridFunction::new(grid, f).unwrap();
        prop_assert_eq!(f.reflect().reflect(), f.clone());
        let r = f.reflect();
        prop_assert_eq!(grid::symmetry_defect(&r, Parity::Odd), grid::symmetry_defect(&f, Parity::Odd));
        prop_assert_eq!(grid::symmetry_defect(&r, Parity::Even), grid::symmetry_defect(&f, Parity::Even));
    }

    #[test]
    fn vieta_relations(mu in -100.0..100.0_f64, eps in 1e-3..10.0_f64) {
        let m = stability::mode_eigenvalues(mu, eps);
        let prod = m.sigma1 * m.sigma2;
        let sum = m.sigma1 + m.sigma2;
        let scale = (1.0 / eps).max(1.0);
        prop_assert!((prod.re - 1.0 / eps).abs() <= 1e-12 * scale * (1.0 + (mu * mu / eps).abs()));
        prop_assert!(prod.im.abs() <= 1e-12 * scale * (1.0 + (mu * mu / eps).abs()));
        prop_assert!((sum.re - mu / eps).abs() <= 1e-12 * (mu / eps).abs().max(scale));
        prop_assert!(sum.im.abs() <= 1e-12 * scale);
    }

    #[test]
    fn toy_cascade_is_monotone_in_alpha(a in -5.0..500.0_f64, b in -5.0..500.0_f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let count = |alpha| stability::toy_cascade_report(alpha, 10, Domain::unit(), 1.0).unstable_count;
        prop_assert!(count(lo) <= count(hi));
    }

    #[test]
    fn toy_modes_flip_at_their_eigenvalue(k in 0usize..8) {
        let lk = (k as f64 * PI).powi(2);
        let before = stability::toy_cascade_report(lk - 1e-3, 8, Domain::unit(), 1.0);
        let after = stability::toy_cascade_report(lk + 1e-3, 8, Domain::unit(), 1.0);
        prop_assert_eq!(before.classes[k], ModeClass::Sink);
        prop_assert_eq!(after.classes[k], ModeClass::Source);
        let at = stability::mode_eigenvalues(0.0, 1.0);
        prop_assert!((at.sigma2.im - 1.0).abs() < 1e-12 && at.sigma2.re == 0.0);
    }

    #[test]
    fn nhfhn_growth_rates_obey_the_bound(lambda in -3.0..1e4_f64, eps in 0.01..10.0_f64) {
        let m = stability::mode_eigenvalues(-lambda, eps);
        prop_assert!(m.max_re() <= stability::growth_rate_bound(eps) + 1e-9);
    }

    #[test]
    fn linear_galerkin_modes_are_uncoupled(
        u in prop::collection::vec(-1.0..1.0_f64, 9),
        v in prop::collection::vec(-1.0..1.0_f64, 9),
        alpha in -5.0..50.0_f64,
        eps in 0.1..2.0_f64,
    ) {
        let basis = CosineBasis::unit();
        let sys = GalerkinSystem::new(basis, 8, alpha, eps, false).unwrap();
        let state = SpectralState::new(u.clone(), v.clone()).unwrap();
        let d = sys.rhs(&state).unwrap();
        for k in 0..=8 {
            let du = ((alpha - basis.eigenvalue(k)) * u[k] - v[k]) / eps;
            prop_assert!((d.u[k] - du).abs() <= 1e-12 * (1.0 + du.abs()));
            prop_assert!((d.v[k] - u[k]).abs() <= 1e-15);
        }
    }

    #[test]
    fn random_data_is_reproducible(seed in any::<u64>()) {
        let g = Domain::unit().grid(21).unwrap();
        prop_assert_eq!(
            sim::random_smooth_ic(&g, seed, 1.0, 3).unwrap(),
            sim::random_smooth_ic(&g, seed, 1.0, 3).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn triple_products_match_quadrature(k in 1usize..=8, m in 1usize..=8, n in 1usize..=8) {
        let q = spectral::product_quadrature(&[k, m, n], spectral::PRODUCT_QUADRATURE_NODES);
        prop_assert!((spectral::triple_product(k, m, n) - q).abs() <= 1e-10);
    }

    #[test]
    fn quadruple_predicate_matches_quadrature(k in 1usize..=6, l in 1usize..=6, m in 1usize..=6, n in 1usize..=6) {
        let q = spectral::quad_product_value(k, l, m, n);
        prop_assert_eq!(spectral::quad_product_nonzero(k, l, m, n), q.abs() > 1e-8);
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), alpha in -1.0..20.0_f64) {
        let g = Domain::unit().grid(21).unwrap();
        let ic = sim::random_smooth_ic(&g, seed, 0.5, 3).unwrap();
        let cfg = SimConfig::new(1e-4, 0.05, 50);
        let a = sim::simulate(&ModelSpec::toy(alpha), &ic, &cfg).unwrap();
        let b = sim::simulate(&ModelSpec::toy(alpha), &ic, &cfg).unwrap();
        prop_assert_eq!(a.final_state(), b.final_state());
        prop_assert_eq!(a.records, b.records);
    }

    #[test]
    fn negative_gain_energy_never_increases(seed in any::<u64>(), alpha in -3.0..-0.01_f64) {
        let g = Domain::unit().grid(21).unwrap();
        let ic = sim::random_smooth_ic(&g, seed, 1.0, 3).unwrap();
        let traj = sim::simulate(&ModelSpec::toy(alpha), &ic, &SimConfig::new(1e-4, 0.5, 100)).unwrap();
        prop_assert!(sim::energy_trace(&traj).max_increase <= 1e-12);
    }

    #[test]
    fn odd_and_even_data_keep_their_parity(seed in any::<u64>(), alpha in 0.0..20.0_f64) {
        let g = Domain::unit().grid(21).unwrap();
        let odd_modes: Vec<_> = [1usize, 3, 5].iter().enumerate()
            .map(|(i, &k)| (k, ((seed >> (8 * i)) & 0xff) as f64 / 255.0 - 0.5, 0.1)).collect();
        let even_modes: Vec<_> = [0usize, 2, 4].iter().enumerate()
            .map(|(i, &k)| (k, ((seed >> (8 * i + 24)) & 0xff) as f64 / 255.0 - 0.5, -0.1)).collect();
        let cfg = SimConfig { track_modes: 8, ..SimConfig::new(1e-4, 0.2, 100) };
        let spec = ModelSpec::toy(alpha);
        let odd = sim::symmetry_invariance_check(&spec, &sim::modes_ic(&g, &odd_modes).unwrap(), &cfg, Parity::Odd).unwrap();
        let even = sim::symmetry_invariance_check(&spec, &sim::modes_ic(&g, &even_modes).unwrap(), &cfg, Parity::Even).unwrap();
        prop_assert!(odd.within && even.within);
    }
}
