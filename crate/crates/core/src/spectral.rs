//! Cosine eigenbasis of the Neumann Laplacian and the truncated Galerkin
//! system of the toy model.
//!
//! On `(a, b)` the basis is `phi_0 = 1/sqrt(b - a)` and
//! `phi_k = sqrt(2/(b - a)) cos(k pi (x - a)/(b - a))`, with
//! `-d phi_k'' = lambda_k phi_k`, `lambda_k = d k^2 pi^2 / (b - a)^2`.
//! On the unit interval this is the familiar `sqrt(2) cos(k pi x)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridFunction, UniformGrid};
use crate::model::Domain;

/// Node count of the reference quadrature used for product integrals.
pub const PRODUCT_QUADRATURE_NODES: usize = 4001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineBasis {
    pub domain: Domain,
    pub d: f64,
}

impl CosineBasis {
    pub fn new(domain: Domain, d: f64) -> Self {
        Self { domain, d }
    }

    pub fn unit() -> Self {
        Self { domain: Domain::unit(), d: 1.0 }
    }

    pub fn phi(&self, k: usize, x: f64) -> f64 {
        basis_eval(self.domain, k, x)
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        cosine_eigenvalue(k, self.domain, self.d)
    }

    pub fn sample(&self, k: usize, grid: &UniformGrid) -> GridFunction {
        grid.sample(|x| self.phi(k, x))
    }
}

pub fn basis_eval(domain: Domain, k: usize, x: f64) -> f64 {
    let len = domain.length();
    if k == 0 {
        1.0 / len.sqrt()
    } else {
        (2.0 / len).sqrt() * (k as f64 * PI * (x - domain.a) / len).cos()
    }
}

pub fn cosine_eigenvalue(k: usize, domain: Domain, d: f64) -> f64 {
    let kf = k as f64;
    d * kf * kf * PI * PI / (domain.length() * domain.length())
}

/// Coefficients `quad(f phi_k)` for `k = 0..=n_modes`.
pub fn analyze(f: &GridFunction, n_modes: usize) -> Result<Vec<f64>> {
    let grid = f.grid();
    if n_modes + 1 >= grid.len() {
        return Err(Error::Resolution(format!(
            "{} nodes cannot resolve mode {n_modes}",
            grid.len()
        )));
    }
    let domain = Domain::new(grid.a(), grid.b())?;
    let nodes = grid.nodes();
    let h = grid.h();
    Ok((0..=n_modes)
        .map(|k| {
            let phi: Vec<f64> = nodes.iter().map(|&x| basis_eval(domain, k, x)).collect();
            grid::quad_zip(f.values(), &phi, h, |a, b| a * b)
        })
        .collect())
}

/// `sum_k coeffs[k] phi_k` sampled on `grid`.
pub fn synthesize(coeffs: &[f64], grid: &UniformGrid) -> GridFunction {
    let domain = Domain { a: grid.a(), b: grid.b() };
    grid.sample(|x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * basis_eval(domain, k, x))
            .sum()
    })
}

/// Truncated coefficient vectors `(u_k, v_k)`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SpectralState {
    pub fn zeros(n_modes: usize) -> Self {
        Self { u: vec![0.0; n_modes + 1], v: vec![0.0; n_modes + 1] }
    }

    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() || u.is_empty() {
            return Err(Error::Size { min: u.len().max(1), got: v.len() });
        }
        if u.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite spectral coefficient".into()));
        }
        Ok(Self { u, v })
    }

    pub fn n_modes(&self) -> usize {
        self.u.len() - 1
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = self.u.clone();
        y.extend_from_slice(&self.v);
        y
    }

    pub fn from_flat(y: &[f64]) -> Self {
        let m = y.len() / 2;
        Self { u: y[..m].to_vec(), v: y[m..].to_vec() }
    }
}

/// Trapezoid value of `prod phi_{k_i}` over `(0, 1)` on `nodes` points.
pub fn product_quadrature(indices: &[usize], nodes: usize) -> f64 {
    let grid = UniformGrid::new(0.0, 1.0, nodes).expect("at least three nodes");
    let domain = Domain::unit();
    let f = grid.sample(|x| indices.iter().map(|&k| basis_eval(domain, k, x)).product());
    grid::quad(&f)
}

fn triple_conditions(k: usize, m: usize, n: usize) -> usize {
    [k + m == n, k + n == m, m + n == k].iter().filter(|&&c| c).count()
}

/// `int_0^1 phi_k phi_m phi_n`.
///
/// For positive indices the integral is `sqrt(2)/2` when one of
/// `k + m = n`, `k + n = m`, `m + n = k` holds and zero otherwise. Index 0
/// (and any multi-condition coincidence) is evaluated by quadrature.
pub fn triple_product(k: usize, m: usize, n: usize) -> f64 {
    if k == 0 || m == 0 || n == 0 {
        return product_quadrature(&[k, m, n], PRODUCT_QUADRATURE_NODES);
    }
    match triple_conditions(k, m, n) {
        0 => 0.0,
        1 => FRAC_1_SQRT_2,
        _ => product_quadrature(&[k, m, n], PRODUCT_QUADRATURE_NODES),
    }
}

/// Whether `int_0^1 phi_k phi_l phi_m phi_n` can be nonzero: one index is the
/// sum of the other three, or the indices split into two pairs of equal sum.
pub fn quad_product_nonzero(k: usize, l: usize, m: usize, n: usize) -> bool {
    k + l + m == n
        || k + l + n == m
        || k + m + n == l
        || l + m + n == k
        || k + l == m + n
        || k + n == l + m
        || k + m == n + l
}

/// Quadruple product integral, always evaluated by quadrature.
pub fn quad_product_value(k: usize, l: usize, m: usize, n: usize) -> f64 {
    product_quadrature(&[k, l, m, n], PRODUCT_QUADRATURE_NODES)
}

/// Truncated Galerkin system of the toy model,
/// `eps u_k' = (alpha - lambda_k) u_k - v_k - P_k(u^3)`, `v_k' = u_k`.
///
/// The cubic is evaluated pseudo-spectrally on a uniform grid with at least
/// `4N` nodes, where trapezoid quadrature of every product of a degree-`3N`
/// trigonometric cubic with `phi_k` is exact.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    basis: CosineBasis,
    n_modes: usize,
    alpha: f64,
    epsilon: f64,
    cubic: bool,
    points: usize,
    eigenvalues: Vec<f64>,
    /// `phi_k(x_i)`, row-major by mode.
    synth: Vec<f64>,
    /// `w_i phi_k(x_i)`, row-major by mode.
    proj: Vec<f64>,
    weights: Vec<f64>,
}

impl GalerkinSystem {
    pub fn new(basis: CosineBasis, n_modes: usize, alpha: f64, epsilon: f64, cubic: bool) -> Result<Self> {
        Self::with_points(basis, n_modes, alpha, epsilon, cubic, 4 * n_modes.max(1) + 1)
    }

    pub fn with_points(
        basis: CosineBasis,
        n_modes: usize,
        alpha: f64,
        epsilon: f64,
        cubic: bool,
        points: usize,
    ) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Resolution("Galerkin truncation needs N >= 1".into()));
        }
        if points < 4 * n_modes {
            return Err(Error::Resolution(format!(
                "dealiasing grid of {points} points is too coarse for N = {n_modes} (need >= {})",
                4 * n_modes
            )));
        }
        let grid = UniformGrid::new(basis.domain.a, basis.domain.b, points)?;
        let nodes = grid.nodes();
        let weights = grid.weights();
        let mut synth = Vec::with_capacity((n_modes + 1) * points);
        let mut proj = Vec::with_capacity((n_modes + 1) * points);
        for k in 0..=n_modes {
            for (x, w) in nodes.iter().zip(&weights) {
                let phi = basis.phi(k, *x);
                synth.push(phi);
                proj.push(w * phi);
            }
        }
        Ok(Self {
            basis,
            n_modes,
            alpha,
            epsilon,
            cubic,
            points,
            eigenvalues: (0..=n_modes).map(|k| basis.eigenvalue(k)).collect(),
            synth,
            proj,
            weights,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn basis(&self) -> &CosineBasis {
        &self.basis
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Trapezoid weights of the dealiasing grid.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Values of `sum u_k phi_k` on the dealiasing grid.
    pub fn synthesize_into(&self, u: &[f64], field: &mut [f64]) {
        let np = self.points;
        field.iter_mut().for_each(|f| *f = 0.0);
        for (k, &uk) in u.iter().enumerate().take(self.n_modes + 1) {
            if uk != 0.0 {
                let row = &self.synth[k * np..(k + 1) * np];
                for (f, p) in field.iter_mut().zip(row) {
                    *f += uk * p;
                }
            }
        }
    }

    /// Exact projection of `u^3` onto `phi_0..phi_N` for `u = sum u_k phi_k`.
    pub fn project_cube(&self, u: &[f64], field: &mut [f64], out: &mut [f64]) {
        let np = self.points;
        self.synthesize_into(u, field);
        for f in field.iter_mut() {
            *f = *f * *f * *f;
        }
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.proj[k * np..(k + 1) * np];
            *o = row.iter().zip(field.iter()).map(|(p, f)| p * f).sum();
        }
    }

    /// Derivative of the flat state `[u_0..u_N, v_0..v_N]`.
    ///
    /// `scratch` must hold at least `points + N + 1` values.
    pub fn rhs_into(&self, y: &[f64], dy: &mut [f64], scratch: &mut [f64]) {
        let m = self.n_modes + 1;
        let (u, v) = y.split_at(m);
        let (du, dv) = dy.split_at_mut(m);
        let (field, rest) = scratch.split_at_mut(self.points);
        let cube = &mut rest[..m];
        if self.cubic {
            self.project_cube(u, field, cube);
        } else {
            cube.iter_mut().for_each(|c| *c = 0.0);
        }
        let inv_eps = 1.0 / self.epsilon;
        for k in 0..m {
            du[k] = ((self.alpha - self.eigenvalues[k]) * u[k] - v[k] - cube[k]) * inv_eps;
            dv[k] = u[k];
        }
    }

    pub fn scratch_len(&self) -> usize {
        self.points + self.n_modes + 1
    }

    pub fn rhs(&self, state: &SpectralState) -> Result<SpectralState> {
        if state.n_modes() != self.n_modes {
            return Err(Error::Size { min: self.n_modes + 1, got: state.u.len() });
        }
        let y = state.to_flat();
        let mut dy = vec![0.0; y.len()];
        let mut scratch = vec![0.0; self.scratch_len()];
        self.rhs_into(&y, &mut dy, &mut scratch);
        Ok(SpectralState::from_flat(&dy))
    }
}

/// Time derivative of a truncated toy-model state (`eps = 1`).
pub fn galerkin_rhs(state: &SpectralState, alpha: f64, basis: &CosineBasis) -> Result<SpectralState> {
    GalerkinSystem::new(*basis, state.n_modes(), alpha, 1.0, true)?.rhs(state)
}

/// Measured nonlinear remainders of the mode equations against their bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailDiagnostics {
    /// `sum_{i>=1} |u_i|`.
    pub sum_abs: f64,
    /// `sum_{i>=1} u_i^2`.
    pub sum_sq: f64,
    /// `(3 sqrt(2)/2) sum|u_i| sum u_j^2`, the bound on `|g_0|`.
    pub bound_mean: f64,
    /// `(7/2) sum|u_i| sum u_j^2`, the bound on `|g_k|`, `k >= 1`.
    pub bound: f64,
    /// Measured `|g_k|` for `k = 0..=N`.
    pub g: Vec<f64>,
    pub within: Vec<bool>,
}

impl TailDiagnostics {
    pub fn all_within(&self) -> bool {
        self.within.iter().all(|&w| w)
    }
}

/// Splits the exact cubic projection into the explicit mode-coupling terms
/// and a remainder `g_k`, and compares `|g_k|` against the a-priori bounds.
///
/// Explicit terms: `u_0^3 + 3 u_0 sum u_i^2` for the mean mode and
/// `3 u_0^2 u_k + 9 (sqrt(2)/2) u_0 sum_i u_i u_{k+i}` for `k >= 1`.
pub fn tail_bound_check(state: &SpectralState) -> Result<TailDiagnostics> {
    let n = state.n_modes();
    let sys = GalerkinSystem::new(CosineBasis::unit(), n.max(1), 0.0, 1.0, true)?;
    let mut u = state.u.clone();
    u.resize(sys.n_modes() + 1, 0.0);
    let mut field = vec![0.0; sys.points()];
    let mut cube = vec![0.0; u.len()];
    sys.project_cube(&u, &mut field, &mut cube);

    let tail = &u[1..];
    let sum_abs: f64 = tail.iter().map(|c| c.abs()).sum();
    let sum_sq: f64 = tail.iter().map(|c| c * c).sum();
    let bound_mean = 3.0 * FRAC_1_SQRT_2 * sum_abs * sum_sq;
    let bound = 3.5 * sum_abs * sum_sq;
    let u0 = u[0];
    let slack = 1e-12 * (1.0 + u0.abs()).powi(3);

    let mut g = Vec::with_capacity(n + 1);
    let mut within = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let explicit = if k == 0 {
            u0 * u0 * u0 + 3.0 * u0 * sum_sq
        } else {
            let shifted: f64 = (1..u.len()).filter(|i| k + i < u.len()).map(|i| u[i] * u[k + i]).sum();
            3.0 * u0 * u0 * u[k] + 9.0 * FRAC_1_SQRT_2 * u0 * shifted
        };
        let gk = (cube[k] - explicit).abs();
        let limit = if k == 0 { bound_mean } else { bound };
        g.push(gk);
        within.push(gk <= limit + slack);
    }
    Ok(TailDiagnostics { sum_abs, sum_sq, bound_mean, bound, g, within })
}
