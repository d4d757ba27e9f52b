//! Subcommand implementations. Each returns a JSON summary and whether the
//! command's own checks passed; errors carry the exit code via [`crate::exit_code`].

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use fhn_core::model::{ModelKind, ModelSpec};
use fhn_core::sim::{self, OdeTrajectory, Trajectory};
use fhn_core::stability::{self, CascadeReport, WellFamily};
use fhn_core::sturm::{self, SlProblem};
use fhn_core::{io, Error, Result};

use crate::config::{ExperimentConfig, InitialData, SweepParameter};
use crate::presets::{self, PresetOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: Value,
    pub pass: bool,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, pass: true }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

/// Output directory: the command line wins over the config file.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parent directory of a config file, against which relative paths resolve.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub enum Run {
    Field(Trajectory),
    Ode(ModelSpec, OdeTrajectory),
}

/// Resolves and integrates an experiment, writing its CSV artifacts.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<Run> {
    let r = cfg.resolve(base)?;
    match r.ic {
        InitialData::Point(u, v) => {
            let traj = sim::simulate_ode(&r.spec, (u, v), r.sim.dt, r.sim.t_end, r.sim.record_every)?;
            io::write_ode(create(out, "ode.csv")?, &traj)?;
            Ok(Run::Ode(r.spec, traj))
        }
        InitialData::Field(ic) => {
            let traj = sim::simulate(&r.spec, &ic, &r.sim)?;
            if cfg.output.snapshots {
                io::write_snapshots(create(out, "snapshots.csv")?, &traj)?;
            }
            if cfg.output.diagnostics {
                io::write_diagnostics(create(out, "diagnostics.csv")?, &traj)?;
            }
            io::write_state(create(out, "final_state.csv")?, traj.final_state())?;
            Ok(Run::Field(traj))
        }
    }
}

fn trajectory_summary(traj: &Trajectory) -> Value {
    let energy = sim::energy_trace(traj);
    let h1 = sim::h1_energy_trace(traj);
    let last = traj.last_record();
    json!({
        "t_final": last.t,
        "records": traj.records.len(),
        "aborted_at": traj.aborted_at,
        "norm": last.norm,
        "max_abs_u": last.max_abs_u,
        "mean_u": last.mean_u,
        "std_u": last.std_u,
        "energy_max_relative_residual": energy.max_relative_residual,
        "energy_max_increase": energy.max_increase,
        "h1_max_relative_residual": h1.max_relative_residual,
    })
}

fn ode_summary(traj: &OdeTrajectory) -> Value {
    json!({
        "t_final": traj.t.last(),
        "u": traj.u.last(),
        "v": traj.v.last(),
    })
}

pub fn simulate(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let summary = match run_experiment(cfg, base, out)? {
        Run::Field(traj) => trajectory_summary(&traj),
        Run::Ode(_, traj) => ode_summary(&traj),
    };
    write_json(out, "summary.json", &summary)?;
    Ok(Outcome::ok(summary))
}

pub fn spectrum(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let spec = cfg.model_spec(base)?;
    if !matches!(spec.kind, ModelKind::NhFhn | ModelKind::ConstCFhn) {
        return Err(Error::Config("spectrum needs an FHN model with a recovery profile".into()));
    }
    let n_modes = cfg.spectrum.as_ref().map_or(10, |s| s.n_modes);
    if n_modes == 0 {
        return Err(Error::Config("spectrum.n_modes must be at least 1".into()));
    }
    let problem = SlProblem::from_spec(&spec, &cfg.grid()?)?;
    let spectrum = sturm::sl_spectrum(&problem, n_modes)?;
    io::write_spectrum(create(out, "spectrum.csv")?, &spectrum)?;
    io::write_eigenfunctions(create(out, "eigenfunctions.csv")?, &spectrum)?;

    let cascade = stability::unstable_mode_count_nhfhn(&spectrum, spec.epsilon, 0.0);
    let criterion = stability::integral_instability_criterion(&problem)?;
    let linf = if spectrum.pairs.len() >= 5 { Some(sturm::linf_uniformity_stats(&spectrum.pairs)?) } else { None };
    let bound = stability::growth_rate_bound(spec.epsilon);
    let max_re = cascade.modes.iter().map(|m| m.max_re()).fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "lambda_0": spectrum.pairs[0].lambda,
        "lambdas": spectrum.lambdas(),
        "unstable_count": cascade.unstable_count,
        "weyl_ratio_last": spectrum.checks.weyl_ratios.last(),
        "checks": spectrum.checks,
        "linf": linf,
        "integral_criterion": criterion,
        "max_growth_rate": max_re,
        "growth_rate_bound": bound,
    });
    write_json(out, "summary.json", &summary)?;
    let pass = spectrum.checks.strictly_increasing && spectrum.checks.ground_bound && max_re <= bound + 1e-9;
    Ok(Outcome { summary, pass })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn bifurcate(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let b = cfg
        .bifurcate
        .as_ref()
        .ok_or_else(|| Error::Config("missing [bifurcate] section".into()))?;
    if b.samples == 0 || !(b.hi >= b.lo) {
        return Err(Error::Config("sweep needs lo <= hi and at least one sample".into()));
    }
    let spec = cfg.model_spec(base)?;
    let params = linspace(b.lo, b.hi, b.samples);
    let mut summary = json!({ "parameter": b.parameter, "samples": params });

    let reports: Vec<CascadeReport> = match b.parameter {
        SweepParameter::Alpha => {
            if !spec.kind.is_toy() {
                return Err(Error::Config("alpha sweeps apply to the toy models".into()));
            }
            let reports: Vec<_> = params
                .iter()
                .map(|&a| stability::toy_cascade_report(a, b.k_max, spec.domain, spec.d))
                .collect();
            let crossings = if b.samples > 1 {
                stability::hopf_cascade_toy((b.lo, b.hi), b.k_max, spec.domain, spec.d)
            } else {
                Vec::new()
            };
            summary["crossings"] = json!(crossings);
            reports
        }
        SweepParameter::P => {
            if spec.kind != ModelKind::NhFhn {
                return Err(Error::Config("p sweeps apply to the nonhomogeneous FHN model".into()));
            }
            if b.k_max == 0 {
                return Err(Error::Config("bifurcate.k_max must be at least 1 for p sweeps".into()));
            }
            let family = WellFamily { domain: spec.domain, d: spec.d, nodes: cfg.sim.nodes };
            let reports = params
                .iter()
                .map(|&p| {
                    let spectrum = sturm::sl_spectrum(&family.problem(p)?, b.k_max)?;
                    Ok(stability::unstable_mode_count_nhfhn(&spectrum, spec.epsilon, p))
                })
                .collect::<Result<Vec<_>>>()?;
            let crossings: Vec<_> = reports
                .windows(2)
                .filter(|w| w[0].unstable_count != w[1].unstable_count)
                .map(|w| json!({ "between": [w[0].parameter, w[1].parameter], "unstable": [w[0].unstable_count, w[1].unstable_count] }))
                .collect();
            summary["crossings"] = json!(crossings);
            if b.find_p_star {
                io::write_cascade(create(out, "cascade.csv")?, &reports)?;
                let bracket = b.bracket.unwrap_or((b.lo, b.hi));
                let p_star = stability::find_p_star(&family, bracket)?;
                summary["p_star"] = json!(p_star);
            }
            reports
        }
    };
    io::write_cascade(create(out, "cascade.csv")?, &reports)?;
    summary["unstable_counts"] = json!(reports.iter().map(|r| r.unstable_count).collect::<Vec<_>>());
    summary["truncation_warning"] = json!(reports.iter().any(|r| r.truncation_warning));
    write_json(out, "summary.json", &summary)?;
    Ok(Outcome::ok(summary))
}

pub fn reproduce(name: &str, opts: PresetOptions, out: &Path) -> Result<Outcome> {
    let preset = presets::preset(name, opts)?;
    write_json(out, "config.json", &json!({ "preset": name, "toml": preset.config.to_toml() }))?;
    let verdict = match run_experiment(&preset.config, Path::new("."), out)? {
        Run::Field(traj) => presets::judge(&preset, &traj)?,
        Run::Ode(spec, traj) => presets::judge_ode(&preset, &spec, &traj)?,
    };
    let summary = serde_json::to_value(&verdict).map_err(|e| Error::Io(e.to_string()))?;
    write_json(out, "verdict.json", &summary)?;
    Ok(Outcome { summary, pass: verdict.pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 1), vec![0.0]);
        assert_eq!(linspace(-1.0, 1.0, 3), vec![-1.0, 0.0, 1.0]);
    }
}
