//! Mode-wise linear stability and Hopf crossings.
//!
//! Every linearized model projects onto planar systems
//! `eps u_k' = mu_k u_k - v_k`, `v_k' = u_k` whose growth rates solve
//! `eps sigma^2 - mu sigma + 1 = 0`. The mode gain is
//!
//! | model        | `mu_k`                  |
//! |--------------|-------------------------|
//! | toy          | `alpha - lambda_k`      |
//! | constant `c` | `f'(c) - d lambda_k`    |
//! | nhFHN        | `-lambda_k` (SL)        |
//!
//! Since the product of the roots is `1/eps > 0`, a mode destabilizes exactly
//! when `mu_k` changes sign, through a purely imaginary pair.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, UniformGrid};
use crate::model::{cubic_f_prime, CProfile, Domain};
use crate::spectral::cosine_eigenvalue;
use crate::sturm::{self, SlProblem, Spectrum};

/// Real parts at or below this magnitude classify as a center.
pub const CENTER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeEigenvalues {
    pub k: usize,
    pub mu: f64,
    pub epsilon: f64,
    #[serde(serialize_with = "ser_complex")]
    pub sigma1: Complex64,
    #[serde(serialize_with = "ser_complex")]
    pub sigma2: Complex64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

impl ModeEigenvalues {
    pub fn max_re(&self) -> f64 {
        self.sigma1.re.max(self.sigma2.re)
    }
}

/// Roots of `eps sigma^2 - mu sigma + 1 = 0`, `sigma1` being the one with the
/// minus sign in front of the square root.
pub fn mode_eigenvalues(mu: f64, epsilon: f64) -> ModeEigenvalues {
    mode_eigenvalues_k(0, mu, epsilon)
}

pub fn mode_eigenvalues_k(k: usize, mu: f64, epsilon: f64) -> ModeEigenvalues {
    let disc = mu * mu - 4.0 * epsilon;
    let (sigma1, sigma2) = if disc >= 0.0 {
        let root = disc.sqrt();
        if mu == 0.0 {
            // disc >= 0 with mu = 0 forces eps <= 0; keep the symmetric form
            let s = root / (2.0 * epsilon);
            (Complex64::new(-s, 0.0), Complex64::new(s, 0.0))
        } else {
            // q carries the larger magnitude root; the other follows from Vieta
            let q = 0.5 * (mu + mu.signum() * root);
            let big = q / epsilon;
            let small = 1.0 / q;
            let (lo, hi) = if big < small { (big, small) } else { (small, big) };
            (Complex64::new(lo, 0.0), Complex64::new(hi, 0.0))
        }
    } else {
        let re = mu / (2.0 * epsilon);
        let im = (-disc).sqrt() / (2.0 * epsilon);
        (Complex64::new(re, -im), Complex64::new(re, im))
    };
    ModeEigenvalues { k, mu, epsilon, sigma1, sigma2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeClass {
    Source,
    Sink,
    Center,
}

pub fn classify_mode(me: &ModeEigenvalues) -> ModeClass {
    let re = me.max_re();
    if re.abs() <= CENTER_TOL {
        ModeClass::Center
    } else if re > 0.0 {
        ModeClass::Source
    } else {
        ModeClass::Sink
    }
}

/// A parameter value at which mode `k` crosses the imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub k: usize,
    pub parameter: f64,
}

/// Per-mode stability at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    pub parameter: f64,
    pub modes: Vec<ModeEigenvalues>,
    pub classes: Vec<ModeClass>,
    pub unstable_count: usize,
    pub crossings: Vec<Crossing>,
    /// Set when the highest computed mode is still unstable.
    pub truncation_warning: bool,
}

impl CascadeReport {
    fn from_gains(parameter: f64, gains: impl Iterator<Item = (usize, f64)>, epsilon: f64) -> Self {
        let modes: Vec<ModeEigenvalues> = gains.map(|(k, mu)| mode_eigenvalues_k(k, mu, epsilon)).collect();
        let classes: Vec<ModeClass> = modes.iter().map(classify_mode).collect();
        let unstable_count = classes.iter().filter(|&&c| c == ModeClass::Source).count();
        let truncation_warning = classes.last() == Some(&ModeClass::Source);
        Self { parameter, modes, classes, unstable_count, crossings: Vec::new(), truncation_warning }
    }
}

/// Linear toy model at gain `alpha`: modes `0..=k_max` on `domain`.
pub fn toy_cascade_report(alpha: f64, k_max: usize, domain: Domain, d: f64) -> CascadeReport {
    CascadeReport::from_gains(
        alpha,
        (0..=k_max).map(|k| (k, alpha - cosine_eigenvalue(k, domain, d))),
        1.0,
    )
}

/// Hopf points `alpha = lambda_k` inside `(lo, hi)` for `k <= k_max`.
pub fn hopf_cascade_toy(alpha_range: (f64, f64), k_max: usize, domain: Domain, d: f64) -> Vec<Crossing> {
    let (lo, hi) = alpha_range;
    (0..=k_max)
        .map(|k| Crossing { k, parameter: cosine_eigenvalue(k, domain, d) })
        .filter(|c| c.parameter > lo && c.parameter < hi)
        .collect()
}

/// Counts unstable nhFHN modes from a Sturm-Liouville spectrum.
pub fn unstable_mode_count_nhfhn(spectrum: &Spectrum, epsilon: f64, parameter: f64) -> CascadeReport {
    CascadeReport::from_gains(
        parameter,
        spectrum.pairs.iter().map(|p| (p.k, -p.lambda)),
        epsilon,
    )
}

/// Upper bound `3/eps` on the real part of every nhFHN growth rate.
pub fn growth_rate_bound(epsilon: f64) -> f64 {
    3.0 / epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityCriterion {
    /// `int f'(u_bar) dx`.
    pub integral: f64,
    pub predicate: bool,
    /// Rayleigh quotient of the constant function, `-mean(f'(u_bar))`, an
    /// upper bound for `lambda_0`.
    pub lambda0_upper: f64,
}

/// `int f'(u_bar) > 0` forces `lambda_0 < 0`, hence an unstable ground mode.
pub fn integral_instability_criterion(problem: &SlProblem) -> Result<InstabilityCriterion> {
    let integral = grid::quad(&problem.potential);
    let ones = problem.grid().sample(|_| 1.0);
    let lambda0_upper = sturm::rayleigh_quotient(problem, &ones)?;
    Ok(InstabilityCriterion { integral, predicate: integral > 0.0, lambda0_upper })
}

/// Well-shaped excitability family `c(x; p)` for the `p*` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellFamily {
    pub domain: Domain,
    pub d: f64,
    pub nodes: usize,
}

impl WellFamily {
    pub fn problem(&self, p: f64) -> Result<SlProblem> {
        let grid = UniformGrid::new(self.domain.a, self.domain.b, self.nodes)?;
        SlProblem::from_profile(&CProfile::Well { p }, self.d, &grid)
    }

    pub fn ground_eigenvalue(&self, p: f64) -> Result<f64> {
        sturm::sl_eigenvalue(&self.problem(p)?, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PStar {
    pub p_star: f64,
    pub lambda0: f64,
    pub iterations: usize,
    /// `(p, lambda_0(p))` at the bracket ends and interior sample points.
    pub samples: Vec<(f64, f64)>,
    /// `lambda_0` was nondecreasing in `p` over the samples.
    pub monotone: bool,
}

/// Tolerance on `|lambda_0(p*)|`.
pub const P_STAR_TOL: f64 = 1e-6;

/// Bisection for the zero of `p -> lambda_0(p)`, the first Hopf point of the
/// stationary state.
pub fn find_p_star(family: &WellFamily, bracket: (f64, f64)) -> Result<PStar> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidBracket(format!("({lo}, {hi}) is not an interval of positive p")));
    }
    let mut llo = family.ground_eigenvalue(lo)?;
    let mut lhi = family.ground_eigenvalue(hi)?;
    if !(llo < 0.0 && lhi > 0.0) {
        return Err(Error::InvalidBracket(format!(
            "lambda_0({lo}) = {llo:.9}, lambda_0({hi}) = {lhi:.9}; need lambda_0(lo) < 0 < lambda_0(hi)"
        )));
    }

    let interior: Vec<f64> = (1..8).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect();
    let mut samples = vec![(lo, llo)];
    samples.extend(
        interior
            .par_iter()
            .map(|&p| family.ground_eigenvalue(p).map(|l| (p, l)))
            .collect::<Result<Vec<_>>>()?,
    );
    samples.push((hi, lhi));
    let monotone = samples.windows(2).all(|w| w[1].1 >= w[0].1 - sturm::EIGENVALUE_TOL);

    let mut iterations = 0;
    let mut mid = 0.5 * (lo + hi);
    let mut lmid = family.ground_eigenvalue(mid)?;
    while lmid.abs() > P_STAR_TOL && iterations < 200 {
        if lmid < 0.0 {
            lo = mid;
            llo = lmid;
        } else {
            hi = mid;
            lhi = lmid;
        }
        // regula falsi step, safeguarded by bisection
        let secant = lo - llo * (hi - lo) / (lhi - llo);
        let bisect = 0.5 * (lo + hi);
        mid = if secant > lo && secant < hi && iterations % 3 != 2 { secant } else { bisect };
        lmid = family.ground_eigenvalue(mid)?;
        iterations += 1;
    }
    Ok(PStar { p_star: mid, lambda0: lmid, iterations, samples, monotone })
}

/// Linearization of the planar FHN system at its fixed point `(c, f(c))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeHopfReport {
    pub c: f64,
    pub epsilon: f64,
    pub jacobian: [[f64; 2]; 2],
    pub trace: f64,
    pub determinant: f64,
    pub eigenvalues: ModeEigenvalues,
    pub stable: bool,
    /// `trace == 0`, which happens exactly at `|c| = 1`.
    pub hopf: bool,
}

pub fn ode_hopf_analysis(c: f64, epsilon: f64) -> OdeHopfReport {
    let fp = cubic_f_prime(c);
    let trace = fp / epsilon;
    OdeHopfReport {
        c,
        epsilon,
        jacobian: [[fp / epsilon, -1.0 / epsilon], [1.0, 0.0]],
        trace,
        determinant: 1.0 / epsilon,
        eigenvalues: mode_eigenvalues(fp, epsilon),
        stable: trace < 0.0,
        hopf: trace == 0.0,
    }
}
