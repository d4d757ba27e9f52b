//! Cross-module verification suites.

use rayon::prelude::*;
use serde::Serialize;

use fhn_core::grid::{self, GridFunction, Parity};
use fhn_core::model::{cubic_f_prime, Domain, ModelSpec};
use fhn_core::sim::{self, Backend, SimConfig};
use fhn_core::spectral::{self, CosineBasis, PRODUCT_QUADRATURE_NODES};
use fhn_core::sturm::{self, SlProblem};
use fhn_core::{Error, Result};

use crate::presets::Check;

pub const SUITES: [&str; 5] = ["lemmas", "sturm", "energy", "backends", "symmetry"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub suites: Vec<SuiteReport>,
}

pub fn run(suite: &str) -> Result<VerifyReport> {
    let names: Vec<&str> = match suite {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        other => {
            return Err(Error::Config(format!("unknown suite `{other}`; known: {}, all", SUITES.join(", "))))
        }
    };
    let suites = names
        .par_iter()
        .map(|&name| {
            let checks = match name {
                "lemmas" => lemmas(),
                "sturm" => sturm_suite(),
                "energy" => energy(),
                "backends" => backends(),
                _ => symmetry(),
            }?;
            Ok(SuiteReport { suite: name.into(), pass: checks.iter().all(|c| c.pass), checks })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport { pass: suites.iter().all(|s| s.pass), suites })
}

/// Closed-form product integrals against brute-force quadrature.
pub fn lemmas() -> Result<Vec<Check>> {
    let nodes = PRODUCT_QUADRATURE_NODES;
    let triples: Vec<(usize, usize, usize)> =
        (1..=8).flat_map(|k| (1..=8).flat_map(move |m| (1..=8).map(move |n| (k, m, n)))).collect();
    let (tri_err, tri_mismatch) = triples
        .par_iter()
        .map(|&(k, m, n)| {
            let q = spectral::product_quadrature(&[k, m, n], nodes);
            let v = spectral::triple_product(k, m, n);
            ((q - v).abs(), usize::from((q.abs() > 1e-8) != (v != 0.0)))
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    let nonzero_err = triples
        .iter()
        .map(|&(k, m, n)| spectral::triple_product(k, m, n))
        .filter(|v| *v != 0.0)
        .map(|v| (v - std::f64::consts::FRAC_1_SQRT_2).abs())
        .fold(0.0, f64::max);
    let quads: Vec<[usize; 4]> = (1..=6)
        .flat_map(|k| (1..=6).flat_map(move |l| (1..=6).flat_map(move |m| (1..=6).map(move |n| [k, l, m, n]))))
        .collect();
    let quad_mismatch: usize = quads
        .par_iter()
        .map(|&[k, l, m, n]| {
            let q = spectral::product_quadrature(&[k, l, m, n], nodes);
            usize::from((q.abs() > 1e-8) != spectral::quad_product_nonzero(k, l, m, n))
        })
        .sum();
    Ok(vec![
        Check::at_most("triple product |closed form - quadrature|", tri_err, 1e-8),
        Check::at_most("triple product predicate mismatches", tri_mismatch as f64, 0.0),
        Check::at_most("nonzero triple value |v - sqrt(2)/2|", nonzero_err, 1e-8),
        Check::at_most("quadruple product predicate mismatches", quad_mismatch as f64, 0.0),
    ])
}

/// Prüfer eigenpairs for constant potentials against cosines.
pub fn sturm_suite() -> Result<Vec<Check>> {
    let domain = Domain::unit();
    let mut checks = Vec::new();
    for c in [0.0, -1.5, -2.0] {
        let problem = SlProblem::constant(domain, 1001, cubic_f_prime(c), 1.0)?;
        let spectrum = sturm::sl_spectrum(&problem, 10)?;
        let basis = CosineBasis::new(domain, 1.0);
        let mut rel = 0.0_f64;
        let mut linf = 0.0_f64;
        for pair in &spectrum.pairs {
            let exact = basis.eigenvalue(pair.k) - cubic_f_prime(c);
            rel = rel.max((pair.lambda - exact).abs() / exact.abs().max(1.0));
            let cosine = basis.sample(pair.k, problem.grid());
            let sign = if grid::quad(&pair.phi.zip_with(&cosine, |a, b| a * b)?) < 0.0 { -1.0 } else { 1.0 };
            let diff = pair.phi.zip_with(&cosine, |a, b| a - sign * b)?;
            linf = linf.max(diff.max_abs());
        }
        checks.push(Check::at_most(&format!("c = {c}: eigenvalue relative error"), rel, 1e-6));
        checks.push(Check::at_most(&format!("c = {c}: eigenfunction sup error"), linf, 1e-5));
        checks.push(Check::flag(&format!("c = {c}: lambda_0 >= -3"), spectrum.pairs[0].lambda >= -3.0 - sturm::EIGENVALUE_TOL));
    }
    Ok(checks)
}

fn late_run(spec: &ModelSpec, ic: &fhn_core::grid::StateField, t_end: f64) -> Result<sim::Trajectory> {
    let cfg = SimConfig::new(1e-5, t_end, 1000);
    sim::simulate(spec, ic, &cfg)
}

/// Energy identity residuals on short reference runs.
pub fn energy() -> Result<Vec<Check>> {
    let grid = Domain::unit().grid(51)?;
    let runs = [
        ("alpha = 1, step 1/-0.5", ModelSpec::toy(1.0), sim::step_ic(&grid, 1.0, -0.5)?),
        ("alpha = -0.5, random", ModelSpec::toy(-0.5), sim::random_smooth_ic(&grid, 7, 1.0, 2)?),
    ];
    let mut checks = Vec::new();
    for (label, spec, ic) in runs {
        let traj = late_run(&spec, &ic, 5.0)?;
        let e = sim::energy_trace(&traj);
        let h1 = sim::h1_energy_trace(&traj);
        checks.push(Check::at_most(&format!("{label}: energy relative residual"), e.max_relative_residual, 1e-4));
        checks.push(Check::at_most(&format!("{label}: H1 relative residual"), h1.max_relative_residual, 1e-4));
        if spec.alpha < 0.0 {
            checks.push(Check::at_most(&format!("{label}: largest energy increase"), e.max_increase, 1e-12));
        }
    }
    Ok(checks)
}

/// Galerkin and finite-difference trajectories from a band-limited state.
pub fn backends() -> Result<Vec<Check>> {
    let grid = Domain::unit().grid(101)?;
    let ic = sim::modes_ic(&grid, &[(0, 0.3, 0.1), (1, 0.5, -0.2), (2, -0.3, 0.2), (3, 0.2, 0.1)])?;
    let spec = ModelSpec::toy(1.0);
    let fd_cfg = SimConfig::new(1e-5, 2.0, 1000);
    let gal_cfg = SimConfig { backend: Backend::Galerkin(32), ..fd_cfg.clone() };
    let (fd, gal) = rayon::join(|| sim::simulate(&spec, &ic, &fd_cfg), || sim::simulate(&spec, &ic, &gal_cfg));
    let (fd, gal) = (fd?, gal?);
    let dist = |a: &GridFunction, b: &GridFunction| -> Result<f64> {
        Ok(grid::l2_norm(&a.zip_with(b, |x, y| x - y)?))
    };
    let (a, b) = (fd.final_state(), gal.final_state());
    Ok(vec![
        Check::at_most("L2 distance of u", dist(&a.u, &b.u)?, 1e-3),
        Check::at_most("L2 distance of v", dist(&a.v, &b.v)?, 1e-3),
    ])
}

/// Parity preservation of odd and even initial data.
pub fn symmetry() -> Result<Vec<Check>> {
    let grid = Domain::unit().grid(51)?;
    let cfg = SimConfig { track_modes: 8, ..SimConfig::new(1e-5, 2.0, 1000) };
    let odd = sim::step_ic(&grid, 1.0, -1.0)?;
    let even = sim::modes_ic(&grid, &[(0, 0.2, 0.1), (2, 0.5, -0.3), (4, 0.1, 0.1)])?;
    let spec = ModelSpec::toy(15.0);
    let (o, e) = rayon::join(
        || sim::symmetry_invariance_check(&spec, &odd, &cfg, Parity::Odd),
        || sim::symmetry_invariance_check(&spec, &even, &cfg, Parity::Even),
    );
    let (o, e) = (o?, e?);
    Ok(vec![
        Check::at_most("odd data: forbidden coefficients", o.max_forbidden, sim::SYMMETRY_TOL),
        Check::at_most("odd data: reflection defect", o.max_defect, sim::SYMMETRY_TOL),
        Check::at_most("even data: forbidden coefficients", e.max_forbidden, sim::SYMMETRY_TOL),
        Check::at_most("even data: reflection defect", e.max_defect, sim::SYMMETRY_TOL),
    ])
}
