//! Integration tests across the solver modules, with independent oracles
//! written out here rather than borrowed from the library.

use std::f64::consts::PI;

use num_complex::Complex64;

use fhn_core::grid::{self, StateField};
use fhn_core::io;
use fhn_core::model::{cubic_f_prime, CProfile, Domain, ModelSpec};
use fhn_core::sim::{self, Backend, SimConfig};
use fhn_core::spectral::{self, SpectralState};
use fhn_core::stability::{self, WellFamily};
use fhn_core::sturm::{self, SlProblem};
use fhn_core::Error;

fn l2_distance(a: &StateField, b: &StateField) -> f64 {
    let du = grid::l2_norm(&a.u.zip_with(&b.u, |x, y| x - y).unwrap());
    let dv = grid::l2_norm(&a.v.zip_with(&b.v, |x, y| x - y).unwrap());
    (du * du + dv * dv).sqrt()
}

#[test]
fn rk4_error_drops_sixteenfold_when_dt_halves() {
    let g = Domain::unit().grid(11).unwrap();
    let ic = sim::modes_ic(&g, &[(0, 0.5, 0.1), (1, 0.4, -0.3), (3, 0.2, 0.1)]).unwrap();
    let spec = ModelSpec::toy_linear(2.0);
    let run = |dt: f64| sim::simulate(&spec, &ic, &SimConfig::new(dt, 0.5, 1_000_000)).unwrap().final_state().clone();
    let reference = run(1e-5);
    let coarse = l2_distance(&run(2e-3), &reference);
    let fine = l2_distance(&run(1e-3), &reference);
    let ratio = coarse / fine;
    assert!((13.0..19.0).contains(&ratio), "ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn linear_modes_follow_their_planar_flow() {
    // closed form of eps u'' - mu u' + u = 0 for a single mode
    let (alpha, eps) = (3.0, 1.0);
    let g = Domain::unit().grid(201).unwrap();
    let ic = sim::modes_ic(&g, &[(1, 0.3, 0.0)]).unwrap();
    let traj = sim::simulate(
        &ModelSpec::toy_linear(alpha),
        &ic,
        &SimConfig { backend: Backend::Galerkin(4), ..SimConfig::new(1e-4, 1.0, 10_000) },
    )
    .unwrap();
    let mu = alpha - PI * PI;
    let disc = Complex64::new(mu * mu - 4.0 * eps, 0.0).sqrt();
    let (s1, s2) = ((mu - disc) / (2.0 * eps), (mu + disc) / (2.0 * eps));
    // u(0) = 0.3, u'(0) = mu u(0) / eps since v(0) = 0
    let (u0, du0) = (0.3, mu * 0.3 / eps);
    let b = (du0 - s1 * u0) / (s2 - s1);
    let a = u0 - b;
    let exact = (a * s1.exp() + b * s2.exp()).re;
    let last = traj.last_record();
    // record stores the coefficient in the unit-domain basis
    let coeff = spectral::analyze(&traj.final_state().u, 2).unwrap()[1];
    assert!((coeff - exact).abs() < 1e-9, "{coeff} vs {exact}");
    assert!(last.tail_norm >= 0.0);
}

#[test]
fn galerkin_and_finite_differences_agree_at_t10() {
    let g = Domain::unit().grid(101).unwrap();
    let ic = sim::modes_ic(&g, &[(0, 0.3, 0.1), (1, 0.5, -0.2), (2, -0.3, 0.2), (4, 0.1, 0.1)]).unwrap();
    let spec = ModelSpec::toy(1.0);
    let fd = sim::simulate(&spec, &ic, &SimConfig::new(1e-5, 10.0, 100_000)).unwrap();
    let gal = sim::simulate(
        &spec,
        &ic,
        &SimConfig { backend: Backend::Galerkin(32), ..SimConfig::new(1e-5, 10.0, 100_000) },
    )
    .unwrap();
    let d = l2_distance(fd.final_state(), gal.final_state());
    assert!(d <= 1e-3, "distance {d:e}");
}

#[test]
fn mean_mode_data_below_the_first_eigenvalue_grows_to_the_planar_cycle() {
    let g = Domain::unit().grid(21).unwrap();
    let ic = sim::modes_ic(&g, &[(0, 0.1, 0.0)]).unwrap();
    let traj = sim::simulate(&ModelSpec::toy(1.0), &ic, &SimConfig::new(1e-4, 60.0, 100)).unwrap();
    let p = sim::detect_periodicity(&traj.times(), &traj.series(|r| r.mean_u), Some((30.0, 60.0))).unwrap();
    let planar = sim::mean_mode_cycle(1.0, 1.0, 1.0, 1e-3, 200.0).unwrap();
    assert!((p.amplitude - planar.amplitude).abs() < 0.02 * planar.amplitude);
    assert!(traj.last_record().std_u < 1e-12);
}

/// `u` collapses quickly; `v` keeps a slowly relaxing high-mode remnant.
#[test]
fn odd_data_below_the_first_eigenvalue_decays() {
    let g = Domain::unit().grid(21).unwrap();
    let ic = sim::step_ic(&g, 0.5, -0.5).unwrap();
    let traj = sim::simulate(&ModelSpec::toy(1.0), &ic, &SimConfig::new(1e-4, 60.0, 1000)).unwrap();
    assert!(traj.last_record().max_abs_u < 0.01);
    assert!(traj.records.windows(2).all(|w| w[1].norm <= w[0].norm));
}

/// Mode `k` of the toy model near the mean-mode rest state has a slow real
/// root close to `-1/(lambda_k - alpha)`: high modes relax on time scales
/// comparable to `lambda_k`.
#[test]
fn high_modes_relax_slowly() {
    let alpha = 1.0;
    for k in 1..=4 {
        let lk = (k as f64 * PI).powi(2);
        let m = stability::mode_eigenvalues(alpha - lk, 1.0);
        let slow = m.max_re();
        assert!((slow + 1.0 / (lk - alpha)).abs() < 1.0 / (lk - alpha).powi(3) * 2.0, "k={k}: {slow}");
    }
    // e^{slow * 100} for mode 4 leaves more than half the initial coefficient
    let slow4 = stability::mode_eigenvalues(alpha - 16.0 * PI * PI, 1.0).max_re();
    assert!((slow4 * 100.0).exp() > 0.5);
}

#[test]
fn tail_remainders_respect_their_bounds() {
    for seed in 0..20u64 {
        let mut u = vec![0.0; 9];
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        for c in u.iter_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *c = ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.2;
        }
        let state = SpectralState::new(u, vec![0.0; 9]).unwrap();
        let d = spectral::tail_bound_check(&state).unwrap();
        assert!(d.all_within(), "seed {seed}: {d:?}");
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let g = Domain::new(-2.0, 3.0).unwrap().grid(37).unwrap();
    let s = sim::random_smooth_ic(&g, 42, 1.7, 5).unwrap();
    let mut buf = Vec::new();
    io::write_state(&mut buf, &s).unwrap();
    assert_eq!(io::read_state(buf.as_slice()).unwrap(), s);

    let spectral = SpectralState::new(vec![0.1, -2.5e-9, 3.0], vec![1.0, 0.0, -1e300]).unwrap();
    let mut buf = Vec::new();
    io::write_spectral(&mut buf, &spectral).unwrap();
    assert_eq!(io::read_spectral(buf.as_slice()).unwrap(), spectral);
}

// ---------------------------------------------------------------------------
// Sturm-Liouville structure

fn well(p: f64, nodes: usize) -> SlProblem {
    let g = Domain::new(-50.0, 50.0).unwrap().grid(nodes).unwrap();
    SlProblem::from_profile(&CProfile::Well { p }, 1.0, &g).unwrap()
}

#[test]
fn well_spectrum_has_sturm_structure() {
    let problem = well(2.0, 1001);
    let spectrum = sturm::sl_spectrum(&problem, 8).unwrap();
    assert!(spectrum.checks.strictly_increasing && spectrum.checks.ground_bound);
    let h = problem.grid().h();
    for (j, a) in spectrum.pairs.iter().enumerate() {
        assert_eq!(sturm::sign_changes(a.phi.values()), a.k);
        for b in &spectrum.pairs[j + 1..] {
            let dot = grid::quad_zip(a.phi.values(), b.phi.values(), h, |x, y| x * y);
            assert!(dot.abs() <= 1e-6, "<phi_{}, phi_{}> = {dot:e}", a.k, b.k);
        }
    }
    // phase at the end of the interval increases through each eigenvalue
    for pair in &spectrum.pairs {
        let below = sturm::prufer_theta_end(&problem, pair.lambda - 1e-3).unwrap();
        let at = sturm::prufer_theta_end(&problem, pair.lambda).unwrap();
        let above = sturm::prufer_theta_end(&problem, pair.lambda + 1e-3).unwrap();
        assert!(below < at && at < above);
    }
    // growth rates agree with the roots of eps s^2 + lambda s + 1 = 0
    let eps = 0.1;
    let report = stability::unstable_mode_count_nhfhn(&spectrum, eps, 2.0);
    for (pair, m) in spectrum.pairs.iter().zip(&report.modes) {
        let disc = Complex64::new(pair.lambda * pair.lambda - 4.0 * eps, 0.0).sqrt();
        let roots = [(-pair.lambda - disc) / (2.0 * eps), (-pair.lambda + disc) / (2.0 * eps)];
        let got = [m.sigma1, m.sigma2];
        for r in roots {
            let close = got.iter().map(|s| (s - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(close <= 1e-9 * (1.0 + r.norm()), "{r} not in {got:?}");
        }
        assert!(m.max_re() <= stability::growth_rate_bound(eps) + 1e-9);
    }
}

/// Lowest eigenvalue of the ghost-node finite-difference operator
/// `-d D2 - diag(V)` by Sturm-sequence bisection on its symmetrization.
fn tridiagonal_ground_state(potential: &[f64], h: f64, d: f64) -> f64 {
    let n = potential.len();
    let k = d / (h * h);
    let diag: Vec<f64> = potential.iter().map(|v| 2.0 * k - v).collect();
    // interior couplings -k; the end couplings -2k and -k symmetrize to -sqrt(2) k
    let off: Vec<f64> = (0..n - 1)
        .map(|i| if i == 0 || i == n - 2 { -(2.0_f64).sqrt() * k } else { -k })
        .collect();
    let below = |lambda: f64| -> usize {
        let mut count = 0;
        let mut q = diag[0] - lambda;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let prev = if q == 0.0 { 1e-300 } else { q };
            q = diag[i] - lambda - off[i - 1] * off[i - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (-potential.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0, 4.0 * k + 1e6);
    while hi - lo > 1e-12 * (1.0 + lo.abs()) {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle_lambda0(p: f64, nodes: usize) -> f64 {
    let g = Domain::new(-50.0, 50.0).unwrap().grid(nodes).unwrap();
    let v: Vec<f64> = CProfile::Well { p }.sample(&g).unwrap().values().iter().map(|&c| cubic_f_prime(c)).collect();
    tridiagonal_ground_state(&v, g.h(), 1.0)
}

#[test]
fn oracle_reproduces_constant_potential_ground_state() {
    for c in [0.0, -1.5, -2.0] {
        let g = Domain::unit().grid(101).unwrap();
        let v = vec![cubic_f_prime(c); g.len()];
        assert!((tridiagonal_ground_state(&v, g.h(), 1.0) + cubic_f_prime(c)).abs() < 1e-9);
    }
}

/// The Well family keeps a negative ground eigenvalue over the whole
/// interval (0.5, 5): its first Hopf point lies at much larger p, so no
/// root of `lambda_0` exists in that bracket.
#[test]
fn ground_eigenvalue_stays_negative_across_the_unit_bracket() {
    let nodes = 2001;
    let mut previous = f64::NEG_INFINITY;
    for p in [0.5, 1.0, 1.1, 2.0, 3.0, 4.0, 5.0] {
        let l = oracle_lambda0(p, nodes);
        assert!(l < -2.9, "p = {p}: lambda_0 = {l}");
        assert!(l >= previous - 1e-9, "not monotone at p = {p}");
        previous = l;
    }
    for p in [0.5, 2.0, 5.0] {
        let pruefer = WellFamily { domain: Domain::new(-50.0, 50.0).unwrap(), d: 1.0, nodes }.ground_eigenvalue(p).unwrap();
        let oracle = oracle_lambda0(p, nodes);
        assert!((pruefer - oracle).abs() < 1e-3, "p = {p}: {pruefer} vs {oracle}");
    }
    // far beyond the bracket the ground state does turn stable
    assert!(oracle_lambda0(20_000.0, nodes) > 0.0);
    let err = stability::find_p_star(&WellFamily { domain: Domain::new(-50.0, 50.0).unwrap(), d: 1.0, nodes: 401 }, (0.5, 5.0));
    assert!(matches!(err, Err(Error::InvalidBracket(_))));
}
