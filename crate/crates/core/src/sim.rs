//! Method-of-lines time integration and trajectory diagnostics.
//!
//! Two backends share the classical RK4 stepper: the finite-difference
//! discretization on the initial condition's grid, and the truncated cosine
//! Galerkin system of the toy model. Each recorded sample carries the energy
//! `E = 0.5 (eps |U|^2 + |V|^2)` in variables shifted to the relevant
//! equilibrium, its predicted rate of change, and the values of `E` one step
//! before and after, so that the energy identity can be checked with a
//! centered difference whose spacing is the integration step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridFunction, Parity, StateField, UniformGrid};
use crate::model::{cubic_f, stationary_solution, Domain, ModelKind, ModelSpec};
use crate::spectral::{self, basis_eval, CosineBasis, GalerkinSystem, SpectralState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    FiniteDifference,
    /// Cosine modes `0..=N`.
    Galerkin(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between diagnostic records.
    pub record_every: usize,
    /// Steps between stored snapshots; 0 keeps only the first and last.
    pub snapshot_every: usize,
    pub backend: Backend,
    /// Fraction of the explicit diffusion limit `eps h^2 / (2 d)` allowed.
    pub safety: f64,
    /// Points at which `u` is sampled at every record.
    pub probes: Vec<f64>,
    /// Number of cosine coefficients tracked per record.
    pub track_modes: usize,
    /// Integration stops (without error) once the state norm exceeds this.
    pub abort_norm: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            t_end: 1.0,
            record_every: 100,
            snapshot_every: 0,
            backend: Backend::FiniteDifference,
            safety: 0.9,
            probes: Vec::new(),
            track_modes: 0,
            abort_norm: 1e12,
        }
    }
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, record_every: usize) -> Self {
        Self { dt, t_end, record_every, ..Self::default() }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end = {} must be positive", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        let steps = (self.t_end / self.dt).round();
        if steps < 1.0 || steps > 1e12 {
            return Err(Error::Config(format!("t_end / dt = {steps} steps is out of range")));
        }
        Ok(steps as usize)
    }

    /// Largest stable step of the finite-difference backend.
    pub fn dt_limit(&self, spec: &ModelSpec, h: f64) -> f64 {
        self.safety * spec.epsilon * h * h / (2.0 * spec.d)
    }

    pub fn check_guard(&self, spec: &ModelSpec, h: f64) -> Result<()> {
        let limit = self.dt_limit(spec, h);
        if self.dt > limit {
            return Err(Error::Guard { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// Reusable RK4 stage storage.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    /// Advances `y` by one step of size `dt`. Fails if the result is not finite.
    pub fn step(
        &mut self,
        t: f64,
        y: &mut [f64],
        dt: f64,
        mut rhs: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<()> {
        let half = 0.5 * dt;
        rhs(y, &mut self.k1);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *t = y + half * k;
        }
        rhs(&self.tmp, &mut self.k2);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *t = y + half * k;
        }
        rhs(&self.tmp, &mut self.k3);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *t = y + dt * k;
        }
        rhs(&self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        let mut finite = true;
        for (i, y) in y.iter_mut().enumerate() {
            *y += sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
            finite &= y.is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::BlowUp { time: t + dt })
        }
    }
}

/// One RK4 step from `y` at time `t`.
pub fn rk4_step(t: f64, y: &[f64], dt: f64, rhs: impl FnMut(&[f64], &mut [f64])) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    Rk4::new(y.len()).step(t, &mut out, dt, rhs)?;
    Ok(out)
}

/// Semi-discrete finite-difference system on the flat `[u; v]` layout.
#[derive(Debug, Clone)]
struct FdSystem {
    n: usize,
    h: f64,
    inv_eps: f64,
    d: f64,
    alpha: f64,
    kind: ModelKind,
    /// Recovery target `c(x_i)` (FHN kinds).
    c: Vec<f64>,
}

impl FdSystem {
    fn new(spec: &ModelSpec, grid: &UniformGrid) -> Result<Self> {
        let c = match spec.kind {
            ModelKind::ConstCFhn | ModelKind::NhFhn => spec.c_profile.sample(grid)?.into_values(),
            _ => Vec::new(),
        };
        Ok(Self {
            n: grid.len(),
            h: grid.h(),
            inv_eps: 1.0 / spec.epsilon,
            d: spec.d,
            alpha: spec.alpha,
            kind: spec.kind,
            c,
        })
    }

    fn rhs_into(&self, y: &[f64], dy: &mut [f64], lap: &mut [f64]) {
        let n = self.n;
        let (u, v) = y.split_at(n);
        let (du, dv) = dy.split_at_mut(n);
        grid::laplacian_into(u, self.h, lap);
        match self.kind {
            ModelKind::ToyLinear => {
                for i in 0..n {
                    du[i] = (self.alpha * u[i] - v[i] + self.d * lap[i]) * self.inv_eps;
                    dv[i] = u[i];
                }
            }
            ModelKind::ToyNonlinear => {
                for i in 0..n {
                    let ui = u[i];
                    du[i] = (self.alpha * ui - ui * ui * ui - v[i] + self.d * lap[i]) * self.inv_eps;
                    dv[i] = ui;
                }
            }
            _ => {
                for i in 0..n {
                    du[i] = (cubic_f(u[i]) - v[i] + self.d * lap[i]) * self.inv_eps;
                    dv[i] = u[i] - self.c[i];
                }
            }
        }
    }
}

/// Reaction term in shifted variables, `N(U) = F(ubar + U) - F(ubar)`.
fn shifted_reaction(kind: ModelKind, alpha: f64, ubar: f64, du: f64) -> f64 {
    match kind {
        ModelKind::ToyLinear => alpha * du,
        ModelKind::ToyNonlinear => alpha * du - du * du * du,
        _ => cubic_f(ubar + du) - cubic_f(ubar),
    }
}

/// One diagnostic sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub step: usize,
    /// `sqrt(eps |U|^2 + |V|^2)` about the equilibrium.
    pub norm: f64,
    pub energy: f64,
    /// Predicted `dE/dt`.
    pub energy_rhs: f64,
    pub energy_minus: Option<f64>,
    pub energy_plus: Option<f64>,
    /// `0.5 (eps |U_x|^2 + |V_x|^2)`.
    pub h1: f64,
    pub h1_rhs: f64,
    pub h1_minus: Option<f64>,
    pub h1_plus: Option<f64>,
    pub mean_u: f64,
    pub std_u: f64,
    pub max_abs_u: f64,
    /// Norm of the state with its mean-mode component removed.
    pub tail_norm: f64,
    pub defect_odd: f64,
    pub defect_even: f64,
    pub probes: Vec<f64>,
    pub modes_u: Vec<f64>,
    pub modes_v: Vec<f64>,
}

impl Record {
    /// `|centered dE/dt - predicted|`, available once both neighbours exist.
    pub fn energy_residual(&self, dt: f64) -> Option<f64> {
        Some(((self.energy_plus? - self.energy_minus?) / (2.0 * dt) - self.energy_rhs).abs())
    }

    pub fn h1_residual(&self, dt: f64) -> Option<f64> {
        Some(((self.h1_plus? - self.h1_minus?) / (2.0 * dt) - self.h1_rhs).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: StateField,
    /// Mode coefficients, for the Galerkin backend.
    pub coeffs: Option<SpectralState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: ModelSpec,
    pub grid: UniformGrid,
    pub backend: Backend,
    pub dt: f64,
    pub probes: Vec<f64>,
    pub records: Vec<Record>,
    pub snapshots: Vec<Snapshot>,
    /// Time at which `abort_norm` stopped the run.
    pub aborted_at: Option<f64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn series(&self, f: impl Fn(&Record) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn last_record(&self) -> &Record {
        self.records.last().expect("trajectory has at least one record")
    }

    pub fn final_state(&self) -> &StateField {
        &self.snapshots.last().expect("trajectory has at least one snapshot").state
    }

    pub fn initial_state(&self) -> &StateField {
        &self.snapshots[0].state
    }

    /// Series of `u` at probe `x` (which must be one of the configured probes).
    pub fn probe_series(&self, x: f64) -> Result<Vec<f64>> {
        let tol = 1e-9 * self.grid.length().max(1.0);
        let j = self
            .probes
            .iter()
            .position(|p| (p - x).abs() <= tol)
            .ok_or_else(|| Error::Config(format!("x = {x} is not a recorded probe")))?;
        Ok(self.records.iter().map(|r| r.probes[j]).collect())
    }

    /// Least-squares slope of `ln norm` against `t` over the records in `window`.
    pub fn growth_rate(&self, window: (f64, f64)) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.t >= window.0 && r.t <= window.1 && r.norm > 0.0)
            .map(|r| (r.t, r.norm.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        (var > 0.0).then(|| cov / var)
    }
}

/// Computes diagnostics from the flat state of either backend.
trait Monitor {
    fn energies(&mut self, y: &[f64]) -> (f64, f64);
    fn record(&mut self, t: f64, step: usize, y: &[f64]) -> Record;
    fn snapshot(&self, t: f64, y: &[f64]) -> Result<Snapshot>;
}

struct FdMonitor {
    grid: UniformGrid,
    kind: ModelKind,
    alpha: f64,
    eps: f64,
    d: f64,
    ubar: Vec<f64>,
    vbar: Vec<f64>,
    probes: Vec<f64>,
    /// `w_i phi_k(x_i)` for the tracked modes.
    proj: Vec<Vec<f64>>,
    du: Vec<f64>,
    dv: Vec<f64>,
    lap: Vec<f64>,
}

impl FdMonitor {
    fn new(spec: &ModelSpec, grid: UniformGrid, probes: &[f64], track: usize) -> Result<Self> {
        let n = grid.len();
        let (ubar, vbar) = if spec.kind.is_fhn() {
            let st = stationary_solution(spec, &grid)?.state;
            (st.u.into_values(), st.v.into_values())
        } else {
            (vec![0.0; n], vec![0.0; n])
        };
        let domain = Domain::new(grid.a(), grid.b())?;
        let w = grid.weights();
        let nodes = grid.nodes();
        let proj = (0..track)
            .map(|k| nodes.iter().zip(&w).map(|(&x, w)| w * basis_eval(domain, k, x)).collect())
            .collect();
        Ok(Self {
            grid,
            kind: spec.kind,
            alpha: spec.alpha,
            eps: spec.epsilon,
            d: spec.d,
            ubar,
            vbar,
            probes: probes.to_vec(),
            proj,
            du: vec![0.0; n],
            dv: vec![0.0; n],
            lap: vec![0.0; n],
        })
    }

    fn shift(&mut self, y: &[f64]) {
        let n = self.grid.len();
        for i in 0..n {
            self.du[i] = y[i] - self.ubar[i];
            self.dv[i] = y[n + i] - self.vbar[i];
        }
    }

    fn energies_shifted(&self) -> (f64, f64) {
        let h = self.grid.h();
        let uu = grid::quad_map(&self.du, h, |x| x * x);
        let vv = grid::quad_map(&self.dv, h, |x| x * x);
        let du = grid::dirichlet_form(&self.du, h);
        let dv = grid::dirichlet_form(&self.dv, h);
        (0.5 * (self.eps * uu + vv), 0.5 * (self.eps * du + dv))
    }
}

impl Monitor for FdMonitor {
    fn energies(&mut self, y: &[f64]) -> (f64, f64) {
        self.shift(y);
        self.energies_shifted()
    }

    fn record(&mut self, t: f64, step: usize, y: &[f64]) -> Record {
        let n = self.grid.len();
        let h = self.grid.h();
        self.shift(y);
        let (energy, h1) = self.energies_shifted();
        grid::laplacian_into(&self.du, h, &mut self.lap);

        let (kind, alpha) = (self.kind, self.alpha);
        let mut reaction = vec![0.0; n];
        for i in 0..n {
            reaction[i] = shifted_reaction(kind, alpha, self.ubar[i], self.du[i]);
        }
        let energy_rhs = grid::quad_zip(&self.du, &reaction, h, |a, b| a * b) - self.d * grid::dirichlet_form(&self.du, h);
        let h1_rhs = -grid::quad_zip(&self.lap, &reaction, h, |a, b| a * b)
            - self.d * grid::quad_map(&self.lap, h, |l| l * l);

        let u = &y[..n];
        let v = &y[n..];
        let len = self.grid.length();
        let mean_u = grid::trapezoid(u, h) / len;
        let mean_v = grid::trapezoid(v, h) / len;
        let var_u = grid::quad_map(u, h, |x| (x - mean_u) * (x - mean_u));
        let var_v = grid::quad_map(v, h, |x| (x - mean_v) * (x - mean_v));
        let uf = GridFunction::new(self.grid, u.to_vec());
        let vf = GridFunction::new(self.grid, v.to_vec());
        let (defect_odd, defect_even) = match (&uf, &vf) {
            (Ok(uf), Ok(vf)) => {
                let pair = |p| {
                    let a = grid::symmetry_defect(uf, p);
                    let b = grid::symmetry_defect(vf, p);
                    (a * a + b * b).sqrt()
                };
                (pair(Parity::Odd), pair(Parity::Even))
            }
            _ => (f64::NAN, f64::NAN),
        };
        let probes = match &uf {
            Ok(uf) => self.probes.iter().map(|&x| uf.interpolate(x).unwrap_or(f64::NAN)).collect(),
            Err(_) => vec![f64::NAN; self.probes.len()],
        };
        let dot = |row: &Vec<f64>, f: &[f64]| row.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        Record {
            t,
            step,
            norm: (2.0 * energy).sqrt(),
            energy,
            energy_rhs,
            energy_minus: None,
            energy_plus: None,
            h1,
            h1_rhs,
            h1_minus: None,
            h1_plus: None,
            mean_u,
            std_u: (var_u / len).sqrt(),
            max_abs_u: u.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            tail_norm: (self.eps * var_u + var_v).sqrt(),
            defect_odd,
            defect_even,
            probes,
            modes_u: self.proj.iter().map(|r| dot(r, u)).collect(),
            modes_v: self.proj.iter().map(|r| dot(r, v)).collect(),
        }
    }

    fn snapshot(&self, t: f64, y: &[f64]) -> Result<Snapshot> {
        Ok(Snapshot { t, state: StateField::from_flat(self.grid, y)?, coeffs: None })
    }
}

struct GalerkinMonitor {
    sys: GalerkinSystem,
    grid: UniformGrid,
    kind: ModelKind,
    alpha: f64,
    eps: f64,
    d: f64,
    probes: Vec<f64>,
    track: usize,
    /// `lambda_k / d`.
    wave: Vec<f64>,
    field: Vec<f64>,
    cube: Vec<f64>,
}

impl GalerkinMonitor {
    fn modal_energies(&self, y: &[f64]) -> (f64, f64) {
        let m = self.sys.n_modes() + 1;
        let (u, v) = y.split_at(m);
        let mut e = 0.0;
        let mut h1 = 0.0;
        for k in 0..m {
            e += self.eps * u[k] * u[k] + v[k] * v[k];
            h1 += self.wave[k] * (self.eps * u[k] * u[k] + v[k] * v[k]);
        }
        (0.5 * e, 0.5 * h1)
    }
}

impl Monitor for GalerkinMonitor {
    fn energies(&mut self, y: &[f64]) -> (f64, f64) {
        self.modal_energies(y)
    }

    fn record(&mut self, t: f64, step: usize, y: &[f64]) -> Record {
        let m = self.sys.n_modes() + 1;
        let (u, v) = y.split_at(m);
        let (energy, h1) = self.modal_energies(y);
        let cubic = self.kind == ModelKind::ToyNonlinear;
        if cubic {
            self.sys.project_cube(u, &mut self.field, &mut self.cube);
        } else {
            self.cube.iter_mut().for_each(|c| *c = 0.0);
        }
        let mut energy_rhs = 0.0;
        let mut h1_rhs = 0.0;
        for k in 0..m {
            let reaction = self.alpha * u[k] - self.cube[k];
            energy_rhs += u[k] * reaction - self.d * self.wave[k] * u[k] * u[k];
            h1_rhs += self.wave[k] * (u[k] * reaction - self.d * self.wave[k] * u[k] * u[k]);
        }

        let domain = self.sys.basis().domain;
        let len = domain.length();
        let mean_u = u[0] / len.sqrt();
        let tail_u: f64 = u[1..].iter().map(|c| c * c).sum();
        let tail_v: f64 = v[1..].iter().map(|c| c * c).sum();
        // cos(k pi s) is even about the midpoint for even k and odd for odd k
        let mut odd_part = 0.0;
        let mut even_part = 0.0;
        for k in 0..m {
            let w = u[k] * u[k] + v[k] * v[k];
            if k % 2 == 0 {
                even_part += w;
            } else {
                odd_part += w;
            }
        }
        let uf = spectral::synthesize(u, &self.grid);
        let probes = self
            .probes
            .iter()
            .map(|&x| u.iter().enumerate().map(|(k, c)| c * basis_eval(domain, k, x)).sum())
            .collect();
        let pad = |c: &[f64]| (0..self.track).map(|k| c.get(k).copied().unwrap_or(0.0)).collect();
        Record {
            t,
            step,
            norm: (2.0 * energy).sqrt(),
            energy,
            energy_rhs,
            energy_minus: None,
            energy_plus: None,
            h1,
            h1_rhs,
            h1_minus: None,
            h1_plus: None,
            mean_u,
            std_u: (tail_u / len).sqrt(),
            max_abs_u: uf.max_abs(),
            tail_norm: (self.eps * tail_u + tail_v).sqrt(),
            // defect about the odd reflection is twice the even part, and vice versa
            defect_odd: 2.0 * even_part.sqrt(),
            defect_even: 2.0 * odd_part.sqrt(),
            probes,
            modes_u: pad(u),
            modes_v: pad(v),
        }
    }

    fn snapshot(&self, t: f64, y: &[f64]) -> Result<Snapshot> {
        let coeffs = SpectralState::from_flat(y);
        let state = StateField::new(
            spectral::synthesize(&coeffs.u, &self.grid),
            spectral::synthesize(&coeffs.v, &self.grid),
        )?;
        Ok(Snapshot { t, state, coeffs: Some(coeffs) })
    }
}

/// Integrates `spec` from `ic`, whose grid also carries the FD discretization
/// (or, for the Galerkin backend, the grid on which snapshots are sampled).
pub fn simulate(spec: &ModelSpec, ic: &StateField, cfg: &SimConfig) -> Result<Trajectory> {
    spec.validate()?;
    if spec.kind == ModelKind::OdeFhn {
        return Err(Error::Config("the planar system is integrated by simulate_ode".into()));
    }
    let grid = *ic.grid();
    if (grid.a() - spec.domain.a).abs() > 1e-9 * spec.domain.length()
        || (grid.b() - spec.domain.b).abs() > 1e-9 * spec.domain.length()
    {
        return Err(Error::Config(format!(
            "initial condition lives on ({}, {}) but the model domain is ({}, {})",
            grid.a(),
            grid.b(),
            spec.domain.a,
            spec.domain.b
        )));
    }
    for &x in &cfg.probes {
        if !grid.contains(x) {
            return Err(Error::Config(format!("probe x = {x} lies outside the domain")));
        }
    }
    let steps = cfg.steps()?;

    match cfg.backend {
        Backend::FiniteDifference => {
            cfg.check_guard(spec, grid.h())?;
            let sys = FdSystem::new(spec, &grid)?;
            let mut monitor = FdMonitor::new(spec, grid, &cfg.probes, cfg.track_modes)?;
            let mut lap = vec![0.0; grid.len()];
            let y0 = ic.to_flat();
            run(spec, grid, cfg, steps, y0, &mut monitor, move |y, dy| sys.rhs_into(y, dy, &mut lap))
        }
        Backend::Galerkin(n_modes) => {
            if !spec.kind.is_toy() {
                return Err(Error::Config("the Galerkin backend covers the toy models only".into()));
            }
            let basis = CosineBasis::new(spec.domain, spec.d);
            let cubic = spec.kind == ModelKind::ToyNonlinear;
            let sys = GalerkinSystem::new(basis, n_modes, spec.alpha, spec.epsilon, cubic)?;
            let u0 = spectral::analyze(&ic.u, n_modes)?;
            let v0 = spectral::analyze(&ic.v, n_modes)?;
            let y0 = SpectralState::new(u0, v0)?.to_flat();
            let wave = (0..=n_modes).map(|k| basis.eigenvalue(k) / spec.d).collect();
            let mut monitor = GalerkinMonitor {
                field: vec![0.0; sys.points()],
                cube: vec![0.0; n_modes + 1],
                sys: sys.clone(),
                grid,
                kind: spec.kind,
                alpha: spec.alpha,
                eps: spec.epsilon,
                d: spec.d,
                probes: cfg.probes.clone(),
                track: cfg.track_modes,
                wave,
            };
            let mut scratch = vec![0.0; sys.scratch_len()];
            run(spec, grid, cfg, steps, y0, &mut monitor, move |y, dy| sys.rhs_into(y, dy, &mut scratch))
        }
    }
}

fn run(
    spec: &ModelSpec,
    grid: UniformGrid,
    cfg: &SimConfig,
    steps: usize,
    mut y: Vec<f64>,
    monitor: &mut dyn Monitor,
    mut rhs: impl FnMut(&[f64], &mut [f64]),
) -> Result<Trajectory> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("initial condition has a non-finite entry at {i}")));
    }
    let every = cfg.record_every;
    let mut rk = Rk4::new(y.len());
    let mut records = vec![monitor.record(0.0, 0, &y)];
    let mut snapshots = vec![monitor.snapshot(0.0, &y)?];
    let mut pending_minus: Option<(usize, f64, f64)> = None;
    let mut aborted_at = None;

    for s in 0..steps {
        let t = s as f64 * cfg.dt;
        rk.step(t, &mut y, cfg.dt, &mut rhs)?;
        let step = s + 1;
        let t = step as f64 * cfg.dt;
        let is_record = step % every == 0 || step == steps;

        // neighbours of the previous record
        if let Some(last) = records.last_mut() {
            if last.step + 1 == step {
                let (e, h1) = monitor.energies(&y);
                last.energy_plus = Some(e);
                last.h1_plus = Some(h1);
            }
        }
        if is_record {
            let mut rec = monitor.record(t, step, &y);
            if let Some((ms, e, h1)) = pending_minus.take() {
                if ms + 1 == step {
                    rec.energy_minus = Some(e);
                    rec.h1_minus = Some(h1);
                }
            } else if records.last().map(|r| r.step + 1) == Some(step) {
                let prev = records.last().expect("checked above");
                rec.energy_minus = Some(prev.energy);
                rec.h1_minus = Some(prev.h1);
            }
            let norm = rec.norm;
            records.push(rec);
            let snap = (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0) || step == steps;
            if snap {
                snapshots.push(monitor.snapshot(t, &y)?);
            }
            if norm > cfg.abort_norm {
                if !snap {
                    snapshots.push(monitor.snapshot(t, &y)?);
                }
                aborted_at = Some(t);
                break;
            }
        } else if (step + 1) % every == 0 || step + 1 == steps {
            let (e, h1) = monitor.energies(&y);
            pending_minus = Some((step, e, h1));
        }
    }

    Ok(Trajectory {
        spec: spec.clone(),
        grid,
        backend: cfg.backend,
        dt: cfg.dt,
        probes: cfg.probes.clone(),
        records,
        snapshots,
        aborted_at,
    })
}

/// Solution of the planar system sampled every `record_every` steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeTrajectory {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn simulate_ode(spec: &ModelSpec, start: (f64, f64), dt: f64, t_end: f64, record_every: usize) -> Result<OdeTrajectory> {
    crate::model::ode_rhs(spec, start)?;
    let steps = SimConfig::new(dt, t_end, record_every.max(1)).steps()?;
    let mut y = [start.0, start.1];
    let mut rk = Rk4::new(2);
    let mut out = OdeTrajectory { t: vec![0.0], u: vec![y[0]], v: vec![y[1]] };
    let rhs = |y: &[f64], dy: &mut [f64]| {
        let (du, dv) = crate::model::ode_rhs(spec, (y[0], y[1])).expect("validated above");
        dy[0] = du;
        dy[1] = dv;
    };
    for s in 0..steps {
        rk.step(s as f64 * dt, &mut y, dt, rhs)?;
        let step = s + 1;
        if step % record_every.max(1) == 0 || step == steps {
            out.t.push(step as f64 * dt);
            out.u.push(y[0]);
            out.v.push(y[1]);
        }
    }
    Ok(out)
}

/// Limit cycle of the mean mode on its own, `eps u0' = alpha u0 - u0^3 / L - v0`,
/// `v0' = u0`, reported for the spatial mean `u0 / sqrt(L)`.
pub fn mean_mode_cycle(alpha: f64, epsilon: f64, length: f64, dt: f64, t_end: f64) -> Result<Periodicity> {
    let steps = SimConfig::new(dt, t_end, 1).steps()?;
    let scale = length.sqrt();
    let mut y = [scale, 0.0];
    let mut rk = Rk4::new(2);
    let mut t = Vec::with_capacity(steps / 2 + 1);
    let mut mean = Vec::with_capacity(steps / 2 + 1);
    for s in 0..steps {
        rk.step(s as f64 * dt, &mut y, dt, |y, dy| {
            dy[0] = (alpha * y[0] - y[0] * y[0] * y[0] / length - y[1]) / epsilon;
            dy[1] = y[0];
        })?;
        if 2 * (s + 1) >= steps {
            t.push((s + 1) as f64 * dt);
            mean.push(y[0] / scale);
        }
    }
    detect_periodicity(&t, &mean, None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `None` where a neighbouring step is missing (first and last record).
    pub residual: Vec<Option<f64>>,
    pub max_residual: f64,
    /// Largest `residual / max(1, |rhs|)`.
    pub max_relative_residual: f64,
    /// Largest increase of `E` between consecutive records.
    pub max_increase: f64,
    pub max_rhs: f64,
}

fn trace(
    traj: &Trajectory,
    value: impl Fn(&Record) -> f64,
    rhs: impl Fn(&Record) -> f64,
    residual: impl Fn(&Record) -> Option<f64>,
) -> EnergyTrace {
    let t = traj.times();
    let energy = traj.series(&value);
    let rhs_series = traj.series(&rhs);
    let residual: Vec<Option<f64>> = traj.records.iter().map(residual).collect();
    let mut max_residual = 0.0_f64;
    let mut max_rel = 0.0_f64;
    for (r, q) in residual.iter().zip(&rhs_series) {
        if let Some(r) = r {
            max_residual = max_residual.max(*r);
            max_rel = max_rel.max(r / q.abs().max(1.0));
        }
    }
    let max_increase = energy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let max_rhs = rhs_series.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    EnergyTrace {
        t,
        energy,
        rhs: rhs_series,
        residual,
        max_residual,
        max_relative_residual: max_rel,
        max_increase,
        max_rhs,
    }
}

/// `E = 0.5 (eps |U|^2 + |V|^2)` with
/// `dE/dt = int U N(U) - d |U_x|^2`, where `N` is the shifted reaction term.
pub fn energy_trace(traj: &Trajectory) -> EnergyTrace {
    let dt = traj.dt;
    trace(traj, |r| r.energy, |r| r.energy_rhs, |r| r.energy_residual(dt))
}

/// `H = 0.5 (eps |U_x|^2 + |V_x|^2)` with
/// `dH/dt = -int U_xx N(U) - d |U_xx|^2`.
pub fn h1_energy_trace(traj: &Trajectory) -> EnergyTrace {
    let dt = traj.dt;
    trace(traj, |r| r.h1, |r| r.h1_rhs, |r| r.h1_residual(dt))
}

/// Growth threshold for the parity-forbidden coefficients.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub parity: Parity,
    pub initial_defect: f64,
    /// Largest defect from `parity` over all records.
    pub max_defect: f64,
    /// Largest `|u_k|, |v_k|` over the modes forbidden by `parity`.
    pub max_forbidden: f64,
    pub within: bool,
}

/// Mode indices whose coefficients vanish for states of the given parity.
pub fn forbidden_modes(parity: Parity, track: usize) -> Vec<usize> {
    (0..track)
        .filter(|k| match parity {
            Parity::Odd => k % 2 == 0,
            Parity::Even => k % 2 == 1,
        })
        .collect()
}

pub fn symmetry_invariance_check(
    spec: &ModelSpec,
    ic: &StateField,
    cfg: &SimConfig,
    parity: Parity,
) -> Result<SymmetryReport> {
    let initial_defect = {
        let a = grid::symmetry_defect(&ic.u, parity);
        let b = grid::symmetry_defect(&ic.v, parity);
        (a * a + b * b).sqrt()
    };
    if initial_defect > 1e-12 {
        return Err(Error::Config(format!(
            "initial condition is not {parity:?} (defect {initial_defect:e})"
        )));
    }
    let mut cfg = cfg.clone();
    cfg.track_modes = cfg.track_modes.max(8);
    let traj = simulate(spec, ic, &cfg)?;
    Ok(symmetry_report(&traj, parity, initial_defect))
}

/// Parity diagnostics of an existing trajectory.
pub fn symmetry_report(traj: &Trajectory, parity: Parity, initial_defect: f64) -> SymmetryReport {
    let track = traj.records.first().map_or(0, |r| r.modes_u.len());
    let forbidden = forbidden_modes(parity, track);
    let mut max_defect = 0.0_f64;
    let mut max_forbidden = 0.0_f64;
    for r in &traj.records {
        max_defect = max_defect.max(match parity {
            Parity::Odd => r.defect_odd,
            Parity::Even => r.defect_even,
        });
        for &k in &forbidden {
            max_forbidden = max_forbidden.max(r.modes_u[k].abs()).max(r.modes_v[k].abs());
        }
    }
    SymmetryReport {
        parity,
        initial_defect,
        max_defect,
        max_forbidden,
        within: max_forbidden <= SYMMETRY_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Periodicity {
    pub period: f64,
    /// Mean half peak-to-trough range.
    pub amplitude: f64,
    /// Relative spread of the peak spacings.
    pub regularity: f64,
    /// Relative spread of the per-cycle amplitudes.
    pub amplitude_regularity: f64,
    pub peaks: Vec<f64>,
}

/// Vertex of the parabola through three equally spaced samples.
fn refine(t: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= y.len() {
        return (t[i], y[i]);
    }
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        return (t[i], b);
    }
    let off = (0.5 * (a - c) / denom).clamp(-1.0, 1.0);
    let step = 0.5 * (t[i + 1] - t[i - 1]);
    (t[i] + off * step, b - 0.25 * (a - c) * off)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Peak-based period and amplitude of `values(times)` restricted to `window`.
///
/// Extrema are detected with a hysteresis of a tenth of the window's range,
/// then refined by parabolic interpolation.
pub fn detect_periodicity(times: &[f64], values: &[f64], window: Option<(f64, f64)>) -> Result<Periodicity> {
    if times.len() != values.len() {
        return Err(Error::Size { min: times.len(), got: values.len() });
    }
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= lo && times[i] <= hi).collect();
    if idx.len() < 8 {
        return Err(Error::NoOscillation(format!("only {} samples in the window", idx.len())));
    }
    let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("series contains non-finite values".into()));
    }
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = ymax - ymin;
    if !(range > 1e-14 * ymax.abs().max(ymin.abs()).max(1e-300)) {
        return Err(Error::NoOscillation("series is constant over the window".into()));
    }
    let hyst = 0.1 * range;

    // alternating extrema: (index, is_max)
    let mut extrema: Vec<(usize, bool)> = Vec::new();
    let mut hi_i = 0;
    let mut lo_i = 0;
    let mut rising: Option<bool> = None;
    for i in 1..y.len() {
        if y[i] > y[hi_i] {
            hi_i = i;
        }
        if y[i] < y[lo_i] {
            lo_i = i;
        }
        match rising {
            None => {
                if y[i] >= y[lo_i] + hyst {
                    rising = Some(true);
                    hi_i = i;
                } else if y[i] <= y[hi_i] - hyst {
                    rising = Some(false);
                    lo_i = i;
                }
            }
            Some(true) => {
                if y[i] <= y[hi_i] - hyst {
                    extrema.push((hi_i, true));
                    rising = Some(false);
                    lo_i = i;
                }
            }
            Some(false) => {
                if y[i] >= y[lo_i] + hyst {
                    extrema.push((lo_i, false));
                    rising = Some(true);
                    hi_i = i;
                }
            }
        }
    }

    let peaks: Vec<(f64, f64)> = extrema.iter().filter(|e| e.1).map(|e| refine(&t, &y, e.0)).collect();
    if peaks.len() < 4 {
        return Err(Error::NoOscillation(format!("{} peaks in the window, need 4", peaks.len())));
    }
    let spacings: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let (period, sd) = mean_std(&spacings);

    let mut halves = Vec::new();
    for w in extrema.windows(2) {
        if w[0].1 && !w[1].1 {
            let top = refine(&t, &y, w[0].0).1;
            let bottom = refine(&t, &y, w[1].0).1;
            halves.push(0.5 * (top - bottom));
        }
    }
    if halves.is_empty() {
        return Err(Error::NoOscillation("no complete peak-trough pair".into()));
    }
    let (amplitude, asd) = mean_std(&halves);
    Ok(Periodicity {
        period,
        amplitude,
        regularity: sd / period,
        amplitude_regularity: asd / amplitude,
        peaks: peaks.iter().map(|p| p.0).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileStats {
    pub mean: f64,
    pub std: f64,
    pub max_abs: f64,
}

pub fn spatial_profile_stats(f: &GridFunction) -> ProfileStats {
    let len = f.grid().length();
    let mean = grid::quad(f) / len;
    let var = grid::quad_map(f.values(), f.grid().h(), |x| (x - mean) * (x - mean)) / len;
    ProfileStats { mean, std: var.sqrt(), max_abs: f.max_abs() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Propagation {
    pub x: f64,
    /// Oscillation amplitude, or half the range when no oscillation is found.
    pub amplitude: f64,
    pub period: Option<f64>,
    pub oscillating: bool,
}

pub fn propagation_metric(traj: &Trajectory, x_probe: f64, window: (f64, f64)) -> Result<Propagation> {
    let series = traj.probe_series(x_probe)?;
    let times = traj.times();
    match detect_periodicity(&times, &series, Some(window)) {
        Ok(p) => Ok(Propagation { x: x_probe, amplitude: p.amplitude, period: Some(p.period), oscillating: true }),
        Err(Error::NoOscillation(_)) => {
            let inside: Vec<f64> = times
                .iter()
                .zip(&series)
                .filter(|(t, _)| **t >= window.0 && **t <= window.1)
                .map(|(_, v)| *v)
                .collect();
            let lo = inside.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = inside.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let amplitude = if inside.is_empty() { 0.0 } else { 0.5 * (hi - lo) };
            Ok(Propagation { x: x_probe, amplitude, period: None, oscillating: false })
        }
        Err(e) => Err(e),
    }
}

/// `u = left` on the left half, `right` on the right half, the mean of the
/// two at the midpoint; `v` equal to `u`.
pub fn step_ic(grid: &UniformGrid, left: f64, right: f64) -> Result<StateField> {
    let mid = grid.midpoint();
    let tol = 1e-12 * grid.length();
    let u = grid.sample(|x| {
        if (x - mid).abs() <= tol {
            0.5 * (left + right)
        } else if x < mid {
            left
        } else {
            right
        }
    });
    StateField::new(u.clone(), u)
}

/// `sum_k (u_k phi_k, v_k phi_k)` over the listed modes.
pub fn modes_ic(grid: &UniformGrid, modes: &[(usize, f64, f64)]) -> Result<StateField> {
    let domain = Domain::new(grid.a(), grid.b())?;
    let u = grid.sample(|x| modes.iter().map(|&(k, a, _)| a * basis_eval(domain, k, x)).sum());
    let v = grid.sample(|x| modes.iter().map(|&(k, _, b)| b * basis_eval(domain, k, x)).sum());
    StateField::new(u, v)
}

/// Seeded random combination of the cosine modes `0..=max_mode` with
/// coefficients uniform in `(-amplitude, amplitude)`.
pub fn random_smooth_ic(grid: &UniformGrid, seed: u64, amplitude: f64, max_mode: usize) -> Result<StateField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(usize, f64, f64)> = (0..=max_mode)
        .map(|k| (k, amplitude * rng.gen_range(-1.0..1.0), amplitude * rng.gen_range(-1.0..1.0)))
        .collect();
    modes_ic(grid, &modes)
}

/// Stationary state plus `amplitude * phi_k` in `u`.
pub fn perturbed_stationary(spec: &ModelSpec, grid: &UniformGrid, k: usize, amplitude: f64) -> Result<StateField> {
    let st = stationary_solution(spec, grid)?.state;
    let domain = Domain::new(grid.a(), grid.b())?;
    let u = st.u.zip_with(&grid.sample(|x| basis_eval(domain, k, x)), |a, b| a + amplitude * b)?;
    StateField::new(u, st.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rk4_zero_rhs_and_exponential() {
        let y = [1.0, -2.0, 3.5];
        let out = rk4_step(0.0, &y, 0.3, |_, dy| dy.iter_mut().for_each(|d| *d = 0.0)).unwrap();
        assert_eq!(out, y);
        for dt in [0.1, 0.05] {
            let out = rk4_step(0.0, &[1.0], dt, |y, dy| dy[0] = -y[0]).unwrap();
            let taylor = 1.0 - dt + dt * dt / 2.0 - dt.powi(3) / 6.0 + dt.powi(4) / 24.0;
            assert!((out[0] - taylor).abs() < 1e-15);
            assert!((out[0] - (-dt).exp()).abs() < dt.powi(5) / 100.0);
        }
    }

    #[test]
    fn rk4_blow_up_reports_time() {
        let r = rk4_step(2.5, &[1.0], 0.1, |_, dy| dy[0] = f64::INFINITY);
        assert_eq!(r, Err(Error::BlowUp { time: 2.6 }));
    }

    #[test]
    fn guard_rejects_large_steps() {
        let g = UniformGrid::new(0.0, 1.0, 51).unwrap();
        let ic = step_ic(&g, 1.0, -1.0).unwrap();
        let cfg = SimConfig::new(1e-3, 0.01, 1);
        assert!(matches!(simulate(&ModelSpec::toy(1.0), &ic, &cfg), Err(Error::Guard { .. })));
    }

    #[test]
    fn periodicity_of_sine() {
        let t: Vec<f64> = (0..4000).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|t| (2.0 * PI * t / 5.0).sin()).collect();
        let p = detect_periodicity(&t, &y, None).unwrap();
        assert!((p.period - 5.0).abs() < 0.01);
        assert!((p.amplitude - 1.0).abs() < 1e-4);
        assert!(p.regularity < 1e-3);
        let decay: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        assert!(matches!(detect_periodicity(&t, &decay, None), Err(Error::NoOscillation(_))));
    }

    #[test]
    fn profile_stats() {
        let g = UniformGrid::new(0.0, 1.0, 1001).unwrap();
        let s = spatial_profile_stats(&g.sample(|_| 2.0));
        assert_eq!(s.std, 0.0);
        let s = spatial_profile_stats(&CosineBasis::unit().sample(1, &g));
        assert!(s.mean.abs() < 1e-12);
        assert!((s.std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stationary_state_is_fixed() {
        let dom = Domain::new(-5.0, 5.0).unwrap();
        let spec = ModelSpec::nh_fhn(crate::model::CProfile::Well { p: 2.0 }, 0.1, 1.0, dom);
        let g = dom.grid(101).unwrap();
        let ic = stationary_solution(&spec, &g).unwrap().state;
        let traj = simulate(&spec, &ic, &SimConfig::new(1e-4, 1.0, 1000)).unwrap();
        let end = traj.final_state();
        let drift = end.u.zip_with(&ic.u, |a, b| (a - b).abs()).unwrap().max_abs();
        assert!(drift <= 1e-8, "drift {drift}");
    }

    #[test]
    fn step_ic_is_odd() {
        let g = UniformGrid::new(0.0, 1.0, 51).unwrap();
        let ic = step_ic(&g, 1.0, -1.0).unwrap();
        assert_eq!(grid::symmetry_defect(&ic.u, Parity::Odd), 0.0);
        let ic = step_ic(&g, 1.0, -0.5).unwrap();
        assert!(grid::symmetry_defect(&ic.u, Parity::Odd) > 0.1);
    }
}
