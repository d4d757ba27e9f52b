//! TOML experiment configuration.
//!
//! ```toml
//! [model]
//! kind = "toy_nonlinear"
//! alpha = 1.0
//!
//! [sim]
//! nodes = 51
//! dt = 1e-5
//! t_end = 100.0
//!
//! [ic]
//! type = "step_pair"
//! left = 1.0
//! right = -0.5
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fhn_core::grid::{StateField, UniformGrid};
use fhn_core::model::{stationary_solution, CProfile, Domain, ModelKind, ModelSpec};
use fhn_core::sim::{self, Backend, SimConfig};
use fhn_core::{io, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub ic: IcSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bifurcate: Option<BifurcateSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub d: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default)]
    pub c: CSection,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CSection {
    Constant { value: f64 },
    Well { p: f64 },
    /// `x,value` CSV on the model domain.
    File { path: PathBuf },
}

impl Default for CSection {
    fn default() -> Self {
        CSection::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub nodes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub snapshot_every: usize,
    pub backend: Backend,
    pub safety: f64,
    pub probes: Vec<f64>,
    pub track_modes: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            nodes: 51,
            dt: d.dt,
            t_end: d.t_end,
            record_every: d.record_every,
            snapshot_every: d.snapshot_every,
            backend: d.backend,
            safety: d.safety,
            probes: d.probes,
            track_modes: d.track_modes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcSection {
    /// `u = v = left` on the left half, `right` on the right half.
    StepPair { left: f64, right: f64 },
    /// `(k, u_k, v_k)` cosine coefficients.
    Modes { modes: Vec<(usize, f64, f64)> },
    /// Stationary state, optionally with `amplitude * phi_k` added to `u`.
    Stationary {
        #[serde(default)]
        perturb_mode: usize,
        #[serde(default)]
        perturb_amplitude: f64,
    },
    /// `x,u,v` CSV.
    FromFile { path: PathBuf },
    Random {
        #[serde(default)]
        seed: u64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "four")]
        max_mode: usize,
    },
    /// Starting point of the planar system.
    Point { u: f64, v: f64 },
}

fn four() -> usize {
    4
}

impl Default for IcSection {
    fn default() -> Self {
        IcSection::StepPair { left: 1.0, right: -1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub snapshots: bool,
    pub diagnostics: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, snapshots: true, diagnostics: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub n_modes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcateSection {
    pub parameter: SweepParameter,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    /// Highest mode included in each report.
    #[serde(default = "twenty")]
    pub k_max: usize,
    #[serde(default)]
    pub find_p_star: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
}

fn twenty() -> usize {
    20
}

/// Initial data resolved against a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Field(StateField),
    Point(f64, f64),
}

/// A configuration turned into solver inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub spec: ModelSpec,
    pub grid: UniformGrid,
    pub ic: InitialData,
    pub sim: SimConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
            Error::Parse { line, message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.model.a, self.model.b)
    }

    pub fn grid(&self) -> Result<UniformGrid> {
        self.domain()?.grid(self.sim.nodes)
    }

    /// Model parameters; relative file paths are taken from `base`.
    pub fn model_spec(&self, base: &Path) -> Result<ModelSpec> {
        let m = &self.model;
        let domain = self.domain()?;
        let c_profile = match &m.c {
            CSection::Constant { value } => CProfile::Constant(*value),
            CSection::Well { p } => CProfile::Well { p: *p },
            CSection::File { path } => {
                let file = fs::File::open(base.join(path))
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                CProfile::Tabulated(io::read_grid_function(file)?)
            }
        };
        let spec = ModelSpec { kind: m.kind, epsilon: m.epsilon, d: m.d, alpha: m.alpha, domain, c_profile };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            dt: s.dt,
            t_end: s.t_end,
            record_every: s.record_every,
            snapshot_every: s.snapshot_every,
            backend: s.backend,
            safety: s.safety,
            probes: s.probes.clone(),
            track_modes: s.track_modes,
            ..SimConfig::default()
        }
    }

    pub fn resolve(&self, base: &Path) -> Result<Resolved> {
        let spec = self.model_spec(base)?;
        let sim = self.sim_config();
        sim.steps()?;
        if let Backend::Galerkin(0) = sim.backend {
            return Err(Error::Config("Galerkin backend needs at least one mode".into()));
        }
        let grid = self.grid()?;
        let ic = match (&self.ic, spec.kind) {
            (IcSection::Point { u, v }, ModelKind::OdeFhn) => InitialData::Point(*u, *v),
            (_, ModelKind::OdeFhn) => {
                return Err(Error::Config("the planar model takes a `point` initial condition".into()))
            }
            (IcSection::Point { .. }, _) => {
                return Err(Error::Config("`point` initial conditions are for the planar model".into()))
            }
            (IcSection::StepPair { left, right }, _) => InitialData::Field(sim::step_ic(&grid, *left, *right)?),
            (IcSection::Modes { modes }, _) => InitialData::Field(sim::modes_ic(&grid, modes)?),
            (IcSection::Stationary { perturb_mode, perturb_amplitude }, _) => {
                if *perturb_amplitude == 0.0 {
                    InitialData::Field(stationary_solution(&spec, &grid)?.state)
                } else {
                    InitialData::Field(sim::perturbed_stationary(&spec, &grid, *perturb_mode, *perturb_amplitude)?)
                }
            }
            (IcSection::FromFile { path }, _) => {
                let file = fs::File::open(base.join(path))
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let state = io::read_state(file)?;
                if state.grid() != &grid {
                    return Err(Error::Config(format!(
                        "initial condition grid ({}, {}, {} nodes) differs from the configured grid",
                        state.grid().a(),
                        state.grid().b(),
                        state.grid().len()
                    )));
                }
                InitialData::Field(state)
            }
            (IcSection::Random { seed, amplitude, max_mode }, _) => {
                InitialData::Field(sim::random_smooth_ic(&grid, *seed, *amplitude, *max_mode)?)
            }
        };
        Ok(Resolved { spec, grid, ic, sim })
    }

    /// Replaces the seed of a random initial condition.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let IcSection::Random { seed: s, .. } = &mut self.ic {
            *s = seed;
        }
        self
    }
}
