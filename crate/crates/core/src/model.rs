//! Model family, cubic nonlinearity, excitability profiles and stationary
//! states.
//!
//! The FitzHugh-Nagumo variants share the reaction term `f(u) = -u^3 + 3u`:
//!
//! ```text
//! eps u_t = f(u) - v + d u_xx        v_t = u - c(x)
//! ```
//!
//! while the toy models replace `f` by `alpha u - u^3` (or `alpha u` in the
//! linear case) with `v_t = u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridFunction, StateField, UniformGrid};

pub fn cubic_f(u: f64) -> f64 {
    -u * u * u + 3.0 * u
}

pub fn cubic_f_prime(u: f64) -> f64 {
    -3.0 * u * u + 3.0
}

pub fn cubic_f_second(u: f64) -> f64 {
    -6.0 * u
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Diffusionless planar system `eps u' = f(u) - v`, `v' = u - c`.
    OdeFhn,
    ToyLinear,
    ToyNonlinear,
    ConstCFhn,
    NhFhn,
}

impl ModelKind {
    pub fn is_toy(self) -> bool {
        matches!(self, ModelKind::ToyLinear | ModelKind::ToyNonlinear)
    }

    pub fn is_fhn(self) -> bool {
        !self.is_toy()
    }
}

/// Open interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
}

impl Domain {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Domain(format!("interval ({a}, {b}) is empty")));
        }
        Ok(Self { a, b })
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    pub fn grid(&self, n: usize) -> Result<UniformGrid> {
        UniformGrid::new(self.a, self.b, n)
    }

    fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.length().max(1.0);
        x >= self.a - slack && x <= self.b + slack
    }
}

/// Recovery target `c(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CProfile {
    Constant(f64),
    /// `p (s^4 - 2 s^2)` in the normalized coordinate `s in [-1, 1]`.
    Well { p: f64 },
    Tabulated(GridFunction),
}

impl CProfile {
    /// Value at `x`; tabulated profiles are interpolated linearly.
    pub fn eval(&self, domain: Domain, x: f64) -> Result<f64> {
        if !domain.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                domain.a, domain.b
            )));
        }
        Ok(match self {
            CProfile::Constant(c) => *c,
            CProfile::Well { p } => {
                let s = (x - domain.midpoint()) / domain.half_width();
                let s2 = s * s;
                p * (s2 * s2 - 2.0 * s2)
            }
            CProfile::Tabulated(samples) => samples.interpolate(x)?,
        })
    }

    pub fn sample(&self, grid: &UniformGrid) -> Result<GridFunction> {
        let domain = Domain::new(grid.a(), grid.b())?;
        let values = grid
            .nodes()
            .into_iter()
            .map(|x| self.eval(domain, x))
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(*grid, values)
    }

    /// Same family member with a different excitability parameter.
    pub fn with_p(&self, p: f64) -> Option<CProfile> {
        match self {
            CProfile::Well { .. } => Some(CProfile::Well { p }),
            _ => None,
        }
    }
}

/// Pointwise `c(x)`; shorthand for [`CProfile::eval`].
pub fn c_eval(profile: &CProfile, domain: Domain, x: f64) -> Result<f64> {
    profile.eval(domain, x)
}

/// Shape conditions required of an nhFHN excitability profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CCondition {
    /// `c <= 0` on the interval.
    NonPositive,
    /// `c` vanishes at the midpoint.
    MidpointZero,
    /// Increasing on the left half, decreasing on the right half.
    Unimodal,
    /// `c'(a) = c'(b) = 0`.
    FlatEnds,
    /// Pointwise decreasing in `p` away from the midpoint.
    DecreasingInP,
    /// `c -> 0` as `p -> 0`.
    VanishesAsPToZero,
    /// `c -> -inf` as `p -> inf`.
    DivergesAsPToInfinity,
}

const VALIDATION_NODES: usize = 2001;

/// Lists every shape condition the profile violates on a 2001-node grid.
///
/// Conditions on the `p`-dependence are only checked for parametric
/// families; a constant or tabulated profile cannot violate them.
pub fn validate_c_profile(profile: &CProfile, domain: Domain) -> Result<Vec<CCondition>> {
    let grid = domain.grid(VALIDATION_NODES)?;
    let c = profile.sample(&grid)?;
    let v = c.values();
    let n = v.len();
    let h = grid.h();
    let scale = c.max_abs().max(1e-300);
    let value_tol = 1e-12 * scale.max(1.0);
    let slope_tol = (1e-4 * scale / domain.length()).max(1e-12);

    let mut violated = Vec::new();

    if v.iter().any(|&c| c > value_tol) {
        violated.push(CCondition::NonPositive);
    }

    let mid = profile.eval(domain, domain.midpoint())?;
    if mid.abs() > 1e-9 * scale.max(1.0) {
        violated.push(CCondition::MidpointZero);
    }

    let slope = grid::derivative(&c);
    let s = slope.values();
    let xm = domain.midpoint();
    let xs = grid.nodes();
    let half_h = 0.5 * h;
    let unimodal = (1..n - 1).all(|i| {
        if (xs[i] - xm).abs() <= half_h {
            true
        } else if xs[i] < xm {
            s[i] > 0.0
        } else {
            s[i] < 0.0
        }
    });
    if !unimodal {
        violated.push(CCondition::Unimodal);
    }

    if s[0].abs() > slope_tol || s[n - 1].abs() > slope_tol {
        violated.push(CCondition::FlatEnds);
    }

    if let CProfile::Well { p } = profile {
        let off_mid = |i: &usize| (xs[*i] - xm).abs() > half_h;
        let at = |q: f64| profile.with_p(q).expect("parametric").sample(&grid);
        let larger = at(p * 1.01)?;
        if (0..n).filter(off_mid).any(|i| larger.values()[i] >= v[i]) {
            violated.push(CCondition::DecreasingInP);
        }
        let tiny = at(p * 1e-9)?;
        if tiny.max_abs() > 1e-8 * scale {
            violated.push(CCondition::VanishesAsPToZero);
        }
        let huge = at(p * 1e9)?;
        // The divergence must be at least linear in p at every off-centre node.
        if (0..n).filter(off_mid).any(|i| !(v[i] < 0.0 && huge.values()[i] <= 1e8 * v[i])) {
            violated.push(CCondition::DivergesAsPToInfinity);
        }
    }

    Ok(violated)
}

/// Parameters of one member of the model family.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub epsilon: f64,
    pub d: f64,
    /// Linear gain of the toy models; ignored by the FHN variants.
    pub alpha: f64,
    pub domain: Domain,
    /// Recovery target of the FHN variants; ignored by the toy models.
    pub c_profile: CProfile,
}

impl ModelSpec {
    /// Nonlinear toy model on `(0, 1)` with `eps = d = 1`.
    pub fn toy(alpha: f64) -> Self {
        Self {
            kind: ModelKind::ToyNonlinear,
            epsilon: 1.0,
            d: 1.0,
            alpha,
            domain: Domain::unit(),
            c_profile: CProfile::Constant(0.0),
        }
    }

    pub fn toy_linear(alpha: f64) -> Self {
        Self { kind: ModelKind::ToyLinear, ..Self::toy(alpha) }
    }

    pub fn ode(c: f64, epsilon: f64) -> Self {
        Self {
            kind: ModelKind::OdeFhn,
            epsilon,
            d: 1.0,
            alpha: 0.0,
            domain: Domain::unit(),
            c_profile: CProfile::Constant(c),
        }
    }

    pub fn const_c(c: f64, epsilon: f64, d: f64, domain: Domain) -> Self {
        Self {
            kind: ModelKind::ConstCFhn,
            epsilon,
            d,
            alpha: 0.0,
            domain,
            c_profile: CProfile::Constant(c),
        }
    }

    pub fn nh_fhn(profile: CProfile, epsilon: f64, d: f64, domain: Domain) -> Self {
        Self {
            kind: ModelKind::NhFhn,
            epsilon,
            d,
            alpha: 0.0,
            domain,
            c_profile: profile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::Config(format!("d = {} must be positive", self.d)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be finite".into()));
        }
        Domain::new(self.domain.a, self.domain.b)?;
        match (&self.kind, &self.c_profile) {
            (ModelKind::OdeFhn | ModelKind::ConstCFhn, CProfile::Constant(c)) if !c.is_finite() => {
                Err(Error::Config("c must be finite".into()))
            }
            (ModelKind::OdeFhn | ModelKind::ConstCFhn, CProfile::Constant(_)) => Ok(()),
            (ModelKind::OdeFhn | ModelKind::ConstCFhn, _) => {
                Err(Error::Config(format!("{:?} requires a constant c profile", self.kind)))
            }
            (ModelKind::NhFhn, CProfile::Well { p }) if !(*p > 0.0 && p.is_finite()) => {
                Err(Error::Config(format!("well depth p = {p} must be positive")))
            }
            (ModelKind::NhFhn, CProfile::Tabulated(samples)) => {
                let g = samples.grid();
                if (g.a() - self.domain.a).abs() > 1e-9 || (g.b() - self.domain.b).abs() > 1e-9 {
                    return Err(Error::Config("tabulated profile does not span the model domain".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Constant recovery target, if the profile is constant.
    pub fn constant_c(&self) -> Option<f64> {
        match self.c_profile {
            CProfile::Constant(c) => Some(c),
            _ => None,
        }
    }
}

/// Stationary state together with any profile-shape warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub state: StateField,
    pub warnings: Vec<CCondition>,
}

/// `u = c(x)`, `v = f(u) + d lap(u)` with the simulator's discrete Laplacian,
/// so the result is an exact fixed point of the semi-discrete dynamics.
pub fn stationary_solution(spec: &ModelSpec, grid: &UniformGrid) -> Result<Stationary> {
    if !matches!(spec.kind, ModelKind::ConstCFhn | ModelKind::NhFhn) {
        return Err(Error::Config(format!(
            "stationary solution is defined for FHN reaction-diffusion models, not {:?}",
            spec.kind
        )));
    }
    spec.validate()?;
    let warnings = if spec.kind == ModelKind::NhFhn {
        validate_c_profile(&spec.c_profile, spec.domain)?
    } else {
        Vec::new()
    };
    let u = spec.c_profile.sample(grid)?;
    let lap = grid::neumann_laplacian(&u)?;
    let v = u.zip_with(&lap, |c, l| cubic_f(c) + spec.d * l)?;
    Ok(Stationary { state: StateField::new(u, v)?, warnings })
}

/// Right-hand side of the diffusionless system.
pub fn ode_rhs(spec: &ModelSpec, state: (f64, f64)) -> Result<(f64, f64)> {
    let c = match (spec.kind, spec.constant_c()) {
        (ModelKind::OdeFhn, Some(c)) => c,
        _ => return Err(Error::Config("ode_rhs needs an OdeFhn spec with constant c".into())),
    };
    let (u, v) = state;
    Ok(((cubic_f(u) - v) / spec.epsilon, u - c))
}
