//! Neumann Sturm-Liouville problems `L phi = -d phi'' - V(x) phi = lambda phi`
//! solved by Pruefer shooting.
//!
//! With `u = r sin(theta)`, `u' = r cos(theta)` the eigen-equation becomes
//!
//! ```text
//! theta' = cos^2 theta + q sin^2 theta,       q = (V + lambda) / d
//! (ln r)' = sin(2 theta) / 2 * (1 - q)
//! ```
//!
//! Starting from `theta(a) = pi/2` (zero slope), `lambda` is the `k`-th
//! eigenvalue exactly when `theta(b) = pi/2 + k pi`. The phase equation
//! decouples, `theta(b)` increases strictly with `lambda`, and the
//! eigenvalues are found by bisection on it.
//!
//! The shooting parameter `lambda` is the eigenvalue of `L` itself; the
//! eigenvalues increase to `+inf`, and `lambda_0 >= -sup V`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, GridFunction, UniformGrid};
use crate::model::{cubic_f_prime, CProfile, Domain, ModelSpec};

/// Eigenvalue tolerance of the bisection.
pub const EIGENVALUE_TOL: f64 = 1e-9;
/// Local RK4 error target per unit length.
const PHASE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SlProblem {
    pub d: f64,
    /// `V = f'(u_bar)` on the problem grid.
    pub potential: GridFunction,
}

impl SlProblem {
    pub fn new(d: f64, potential: GridFunction) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Domain(format!("diffusion d = {d} must be positive")));
        }
        Ok(Self { d, potential })
    }

    /// Linearization of an FHN model about `u_bar = c(x)`.
    pub fn from_spec(spec: &ModelSpec, grid: &UniformGrid) -> Result<Self> {
        let c = spec.c_profile.sample(grid)?;
        Self::new(spec.d, c.map(cubic_f_prime))
    }

    pub fn from_profile(profile: &CProfile, d: f64, grid: &UniformGrid) -> Result<Self> {
        Self::new(d, profile.sample(grid)?.map(cubic_f_prime))
    }

    /// Potential identically equal to `value`.
    pub fn constant(domain: Domain, nodes: usize, value: f64, d: f64) -> Result<Self> {
        let grid = domain.grid(nodes)?;
        Self::new(d, grid.sample(|_| value))
    }

    pub fn grid(&self) -> &UniformGrid {
        self.potential.grid()
    }

    pub fn domain(&self) -> Domain {
        let g = self.grid();
        Domain { a: g.a(), b: g.b() }
    }

    fn potential_range(&self) -> (f64, f64) {
        self.potential
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    fn potential_mean(&self) -> f64 {
        grid::quad(&self.potential) / self.domain().length()
    }

    /// Constant-potential estimate of the `k`-th eigenvalue.
    pub fn estimate(&self, k: usize) -> f64 {
        let len = self.domain().length();
        let kf = k as f64;
        self.d * kf * kf * PI * PI / (len * len) - self.potential_mean()
    }
}

/// Phase `theta` and log-amplitude `ln r` of the Pruefer variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruferState {
    pub theta: f64,
    pub logr: f64,
}

/// RK4 integrator of the Pruefer system on one grid cell, where the potential
/// is linear between the two node values.
struct Cell {
    width: f64,
    v0: f64,
    v1: f64,
}

impl Cell {
    fn q(&self, s: f64, lambda: f64, d: f64) -> f64 {
        let t = s / self.width;
        ((1.0 - t) * self.v0 + t * self.v1 + lambda) / d
    }
}

fn theta_rate(theta: f64, q: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    c * c + q * s * s
}

fn logr_rate(theta: f64, q: f64) -> f64 {
    0.5 * (2.0 * theta).sin() * (1.0 - q)
}

fn rk4_pair(cell: &Cell, lambda: f64, d: f64, s: f64, y: PruferState, h: f64, with_r: bool) -> PruferState {
    let f = |s: f64, th: f64| {
        let q = cell.q(s, lambda, d);
        (theta_rate(th, q), if with_r { logr_rate(th, q) } else { 0.0 })
    };
    let (a1, b1) = f(s, y.theta);
    let (a2, b2) = f(s + 0.5 * h, y.theta + 0.5 * h * a1);
    let (a3, b3) = f(s + 0.5 * h, y.theta + 0.5 * h * a2);
    let (a4, b4) = f(s + h, y.theta + h * a3);
    PruferState {
        theta: y.theta + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        logr: y.logr + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    }
}

/// Integrates across one cell with step doubling; returns the end state.
fn integrate_cell(cell: &Cell, lambda: f64, d: f64, start: PruferState, with_r: bool) -> PruferState {
    let qmax = cell.q(0.0, lambda, d).abs().max(cell.q(cell.width, lambda, d).abs());
    // initial guess: 20 steps per phase advance of pi
    let rate = qmax.sqrt().max(1.0);
    let mut h = cell.width.min(PI / (20.0 * rate));
    let mut s = 0.0;
    let mut y = start;
    let min_h = cell.width * 1e-12;
    while s < cell.width {
        let step = h.min(cell.width - s);
        let full = rk4_pair(cell, lambda, d, s, y, step, with_r);
        let mid = rk4_pair(cell, lambda, d, s, y, 0.5 * step, with_r);
        let half = rk4_pair(cell, lambda, d, s + 0.5 * step, mid, 0.5 * step, with_r);
        let err = ((half.theta - full.theta).abs() + (half.logr - full.logr).abs()) / 15.0;
        // below this the estimate is rounding noise in theta and ln r, not truncation
        let floor = 16.0 * f64::EPSILON * (1.0 + y.theta.abs() + y.logr.abs());
        if err <= PHASE_TOL * step + floor || step <= min_h {
            y = PruferState {
                theta: half.theta + (half.theta - full.theta) / 15.0,
                logr: half.logr + (half.logr - full.logr) / 15.0,
            };
            s += step;
            if err < 0.1 * PHASE_TOL * step + floor {
                h = step * 2.0;
            } else {
                h = step;
            }
        } else {
            h = 0.5 * step;
        }
    }
    y
}

fn shoot(problem: &SlProblem, lambda: f64, with_r: bool, mut visit: impl FnMut(usize, PruferState)) -> PruferState {
    let grid = problem.grid();
    let v = problem.potential.values();
    let mut y = PruferState { theta: FRAC_PI_2, logr: 0.0 };
    visit(0, y);
    for i in 0..grid.len() - 1 {
        let cell = Cell {
            width: grid.x(i + 1) - grid.x(i),
            v0: v[i],
            v1: v[i + 1],
        };
        y = integrate_cell(&cell, lambda, problem.d, y, with_r);
        visit(i + 1, y);
    }
    y
}

/// Largest phase advance per grid cell the potential grid is trusted for.
const MAX_PHASE_PER_CELL: f64 = PI / 20.0;

fn check_resolution(problem: &SlProblem, lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::Domain("non-finite spectral parameter".into()));
    }
    let (_, vmax) = problem.potential_range();
    let q = (vmax + lambda) / problem.d;
    let h = problem.grid().h();
    if q > 0.0 && q.sqrt() * h > MAX_PHASE_PER_CELL {
        return Err(Error::Resolution(format!(
            "lambda = {lambda} oscillates faster than the potential grid (h = {h}) resolves"
        )));
    }
    Ok(())
}

/// Terminal phase `theta(b; lambda)` for `theta(a) = pi/2`.
///
/// Fails when the eigenfunction would advance more than `pi/20` in phase per
/// grid cell of the sampled potential.
pub fn prufer_theta_end(problem: &SlProblem, lambda: f64) -> Result<f64> {
    check_resolution(problem, lambda)?;
    Ok(shoot(problem, lambda, false, |_, _| {}).theta)
}

/// `k`-th eigenvalue of `-d phi'' - V phi` with Neumann conditions.
pub fn sl_eigenvalue(problem: &SlProblem, k: usize) -> Result<f64> {
    let target = FRAC_PI_2 + k as f64 * PI;
    // Bracket probes may overshoot the resolved range; only the root is checked.
    let theta = |lambda: f64| -> Result<f64> {
        if !lambda.is_finite() {
            return Err(Error::Domain("non-finite spectral parameter".into()));
        }
        Ok(shoot(problem, lambda, false, |_, _| {}).theta)
    };
    let (vmin, vmax) = problem.potential_range();
    let centre = problem.estimate(k);
    let mut half = (vmax - vmin).max(1.0);

    let mut lo;
    let mut hi;
    let mut expansions = 0;
    loop {
        lo = centre - half;
        hi = centre + half;
        let (tl, th) = (theta(lo)?, theta(hi)?);
        if tl < target && th > target {
            break;
        }
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Bracket {
                k,
                report: format!(
                    "no sign change after {expansions} expansions: theta({lo:.6e}) = {tl:.6}, \
                     theta({hi:.6e}) = {th:.6}, target {target:.6}"
                ),
            });
        }
        half *= 2.0;
    }

    let (mut tlo, mut thi) = (theta(lo)?, theta(hi)?);
    while hi - lo > EIGENVALUE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let tm = theta(mid)?;
        if !(tlo <= tm && tm <= thi) {
            return Err(Error::Bracket {
                k,
                report: format!(
                    "phase not monotone on [{lo}, {hi}]: {tlo} / {tm} / {thi} at lo / mid / hi"
                ),
            });
        }
        if tm < target {
            lo = mid;
            tlo = tm;
        } else {
            hi = mid;
            thi = tm;
        }
    }
    let lambda = 0.5 * (lo + hi);
    check_resolution(problem, lambda)?;
    Ok(lambda)
}

/// Eigenvalue with its L2-normalized eigenfunction on the problem grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub k: usize,
    pub lambda: f64,
    pub phi: GridFunction,
}

/// Reconstructs `phi = r sin(theta)` for an eigenvalue from [`sl_eigenvalue`].
///
/// A single shot across a long forbidden region picks up the growing
/// solution, so the function is shot from both ends and the two halves are
/// joined where their combined amplitude peaks.
pub fn sl_eigenfunction(problem: &SlProblem, k: usize, lambda: f64) -> Result<EigenPair> {
    let grid = *problem.grid();
    let n = grid.len();
    let mut fwd = vec![PruferState { theta: 0.0, logr: 0.0 }; n];
    shoot(problem, lambda, true, |i, s| fwd[i] = s);
    let mut rev_potential = problem.potential.values().to_vec();
    rev_potential.reverse();
    let mirrored = SlProblem { d: problem.d, potential: GridFunction::new(grid, rev_potential)? };
    let mut bwd = vec![PruferState { theta: 0.0, logr: 0.0 }; n];
    shoot(&mirrored, lambda, true, |j, s| bwd[n - 1 - j] = s);

    let m = (0..n)
        .max_by(|&i, &j| (fwd[i].logr + bwd[i].logr).total_cmp(&(fwd[j].logr + bwd[j].logr)))
        .expect("grid is nonempty");
    // the mirrored derivative has the opposite sign
    let sign = if (fwd[m].theta + bwd[m].theta).cos() > 0.0 { -1.0 } else { 1.0 };
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            if i <= m {
                (fwd[i].logr - fwd[m].logr).exp() * fwd[i].theta.sin()
            } else {
                sign * (bwd[i].logr - bwd[m].logr).exp() * bwd[i].theta.sin()
            }
        })
        .collect();
    let raw = GridFunction::new(grid, raw)?;
    let norm = grid::l2_norm(&raw);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Domain(format!("eigenfunction {k} vanished")));
    }
    // theta(a) = pi/2 and r(a) > 0 give phi(a) > 0 already.
    Ok(EigenPair { k, lambda, phi: raw.map(|v| v / norm) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumChecks {
    pub strictly_increasing: bool,
    /// `lambda_0 >= -sup V` (and so `>= -3` for FHN potentials).
    pub ground_bound: bool,
    /// `lambda_k / (d k^2 pi^2 / (b - a)^2)` for `k >= 1`.
    pub weyl_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
    pub checks: SpectrumChecks,
}

impl Spectrum {
    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn weyl_ratio(&self, k: usize) -> Option<f64> {
        if k == 0 {
            return None;
        }
        self.checks.weyl_ratios.get(k - 1).copied()
    }
}

/// First `n_modes` eigenpairs, computed in parallel.
pub fn sl_spectrum(problem: &SlProblem, n_modes: usize) -> Result<Spectrum> {
    if n_modes == 0 {
        return Err(Error::Domain("n_modes must be at least 1".into()));
    }
    let pairs = (0..n_modes)
        .into_par_iter()
        .map(|k| sl_eigenvalue(problem, k).and_then(|l| sl_eigenfunction(problem, k, l)))
        .collect::<Result<Vec<_>>>()?;
    let (_, vmax) = problem.potential_range();
    let len = problem.domain().length();
    let checks = SpectrumChecks {
        strictly_increasing: pairs.windows(2).all(|w| w[1].lambda > w[0].lambda),
        ground_bound: pairs[0].lambda >= -vmax - EIGENVALUE_TOL,
        weyl_ratios: pairs
            .iter()
            .skip(1)
            .map(|p| {
                let k = p.k as f64;
                p.lambda / (problem.d * k * k * PI * PI / (len * len))
            })
            .collect(),
    };
    Ok(Spectrum { pairs, checks })
}

/// `(d |u'|^2 - int V u^2) / |u|^2`.
pub fn rayleigh_quotient(problem: &SlProblem, u: &GridFunction) -> Result<f64> {
    u.same_grid(&problem.potential)?;
    let n2 = grid::quad_map(u.values(), u.grid().h(), |v| v * v);
    if !(n2 > 0.0) {
        return Err(Error::Domain("Rayleigh quotient of the zero function".into()));
    }
    let grad = grid::h1_seminorm(u);
    let pot = grid::quad_zip(u.values(), problem.potential.values(), u.grid().h(), |a, v| v * a * a);
    Ok((problem.d * grad * grad - pot) / n2)
}

/// `|| -d phi'' - V phi - lambda phi ||` with the discrete Neumann Laplacian.
pub fn residual_norm(problem: &SlProblem, pair: &EigenPair) -> Result<f64> {
    let lap = grid::neumann_laplacian(&pair.phi)?;
    let v = problem.potential.values();
    let r: Vec<f64> = (0..v.len())
        .map(|i| -problem.d * lap.values()[i] - v[i] * pair.phi.values()[i] - pair.lambda * pair.phi.values()[i])
        .collect();
    Ok(grid::l2_norm(&GridFunction::new(*pair.phi.grid(), r)?))
}

/// Number of strict sign changes, skipping exact zeros.
pub fn sign_changes(values: &[f64]) -> usize {
    let mut last = 0.0_f64;
    let mut count = 0;
    for &v in values {
        if v != 0.0 {
            if last != 0.0 && (v > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = v;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinfStats {
    pub max_abs: Vec<f64>,
    /// `max_k max|phi_k| / max_{k<=5} max|phi_k|`.
    pub ratio: f64,
    /// Whether the sup-norms of the upper third of the modes exceed those of
    /// the lower third by more than half.
    pub growth_flag: bool,
}

pub fn linf_uniformity_stats(pairs: &[EigenPair]) -> Result<LinfStats> {
    if pairs.len() < 5 {
        return Err(Error::Domain(format!("need at least 5 eigenpairs, got {}", pairs.len())));
    }
    let max_abs: Vec<f64> = pairs.iter().map(|p| p.phi.max_abs()).collect();
    let head = max_abs.iter().take(6).cloned().fold(0.0, f64::max);
    let all = max_abs.iter().cloned().fold(0.0, f64::max);
    let third = (max_abs.len() / 3).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let growth_flag = mean(&max_abs[max_abs.len() - third..]) > 1.5 * mean(&max_abs[..third]);
    Ok(LinfStats { max_abs, ratio: all / head, growth_flag })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(value: f64) -> SlProblem {
        SlProblem::constant(Domain::unit(), 401, value, 1.0).unwrap()
    }

    #[test]
    fn phase_is_frozen_at_the_flat_ground_state() {
        // q = 0 everywhere: theta' = cos^2 theta vanishes at theta = pi/2
        let p = constant(3.0);
        let end = prufer_theta_end(&p, -3.0).unwrap();
        assert!((end - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn phase_advance_matches_cosine_closed_form() {
        // q = omega^2 with omega = k pi gives u = cos(k pi x): theta(b) = pi/2 + k pi
        let p = constant(0.5);
        for k in 1..4 {
            let omega2 = (k as f64 * PI).powi(2);
            let end = prufer_theta_end(&p, omega2 - 0.5).unwrap();
            assert!((end - FRAC_PI_2 - k as f64 * PI).abs() < 1e-8, "k={k}: {end}");
        }
    }

    #[test]
    fn constant_potential_eigenvalues() {
        let p = constant(cubic_f_prime(0.0));
        assert!((sl_eigenvalue(&p, 0).unwrap() + 3.0).abs() < 1e-8);
        let p = constant(cubic_f_prime(-1.5));
        assert!((sl_eigenvalue(&p, 0).unwrap() - 3.75).abs() < 1e-8);
        for k in 1..5 {
            let exact = (k as f64 * PI).powi(2) + 3.75;
            assert!((sl_eigenvalue(&p, k).unwrap() - exact).abs() < 1e-6 * exact);
        }
    }

    #[test]
    fn constant_potential_eigenfunctions() {
        let p = constant(1.2);
        let g = *p.grid();
        let ground = sl_eigenfunction(&p, 0, sl_eigenvalue(&p, 0).unwrap()).unwrap();
        assert!(ground.phi.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
        let l2 = sl_eigenvalue(&p, 2).unwrap();
        let pair = sl_eigenfunction(&p, 2, l2).unwrap();
        let err = g
            .nodes()
            .iter()
            .zip(pair.phi.values())
            .map(|(x, v)| (v - 2f64.sqrt() * (2.0 * PI * x).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert_eq!(sign_changes(pair.phi.values()), 2);
        assert!(residual_norm(&p, &pair).unwrap() < 1e-2);
    }

    #[test]
    fn high_modes_do_not_stall_on_rounding() {
        // theta ~ 12 pi: the step-doubling estimate bottoms out at a few ulps
        let p = SlProblem::constant(Domain::unit(), 1001, 3.0, 1.0).unwrap();
        let t = std::time::Instant::now();
        let l = sl_eigenvalue(&p, 12).unwrap();
        let pair = sl_eigenfunction(&p, 12, l).unwrap();
        assert!(t.elapsed().as_secs() < 20);
        assert!((l - ((12.0 * PI).powi(2) - 3.0)).abs() < 1e-6 * l);
        assert_eq!(sign_changes(pair.phi.values()), 12);
    }

    #[test]
    fn rayleigh_quotient_of_constant() {
        let g = Domain::unit().grid(201).unwrap();
        let p = SlProblem::new(1.0, g.sample(|x| 2.0 - x * x)).unwrap();
        let rq = rayleigh_quotient(&p, &g.sample(|_| 0.4)).unwrap();
        let mean = grid::quad(&p.potential);
        assert!((rq + mean).abs() < 1e-12);
        assert!(rayleigh_quotient(&p, &g.zeros()).is_err());
    }

    #[test]
    fn spectrum_rejects_zero_modes() {
        assert!(sl_spectrum(&constant(0.0), 0).is_err());
    }

    #[test]
    fn linf_stats_for_cosines() {
        let p = constant(0.0);
        let s = sl_spectrum(&p, 8).unwrap();
        let st = linf_uniformity_stats(&s.pairs).unwrap();
        assert!((st.ratio - 1.0).abs() < 1e-6);
        assert!((st.max_abs[0] - 1.0).abs() < 1e-8);
        assert!(st.max_abs[0] < st.max_abs[1]);
        assert!(!st.growth_flag);
        assert!(linf_uniformity_stats(&s.pairs[..3]).is_err());
    }

    #[test]
    fn sign_change_counter() {
        assert_eq!(sign_changes(&[1.0, 0.0, -1.0, -2.0, 0.0, 3.0]), 2);
        assert_eq!(sign_changes(&[0.0, 0.0]), 0);
    }
}
