//! Named experiments and their pass/fail predicates.

use serde::Serialize;

use fhn_core::model::{cubic_f, ModelKind, ModelSpec};
use fhn_core::sim::{self, Backend, OdeTrajectory, Trajectory};
use fhn_core::stability;
use fhn_core::{Error, Result};

use crate::config::{CSection, ExperimentConfig, IcSection, ModelSection, OutputSection, SimSection};

pub const PRESETS: [&str; 8] = ["fig1", "fig2", "fig3", "fig4", "nhfhn_p1.1", "nhfhn_p2", "ode_c-1.5", "ode_c0"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PresetOptions {
    /// Half the spatial resolution and half the horizon.
    pub fast: bool,
    /// Extend the wave-propagation runs to the `(500, 600)` window.
    pub full_window: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub config: ExperimentConfig,
    /// Observation window for time-periodic verdicts.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, pass: measured <= threshold }
    }

    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, pass: measured >= threshold }
    }

    pub fn less(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, pass: measured < threshold }
    }

    pub fn greater(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, pass: measured > threshold }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self { name: name.into(), measured: f64::from(u8::from(ok)), threshold: 1.0, pass: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub preset: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn new(preset: &str, checks: Vec<Check>) -> Self {
        Self { preset: preset.into(), pass: checks.iter().all(|c| c.pass), checks }
    }
}

fn toy(alpha: f64, left: f64, right: f64, opts: PresetOptions) -> (ExperimentConfig, (f64, f64)) {
    let (nodes, t_end) = if opts.fast { (26, 50.0) } else { (51, 100.0) };
    let cfg = ExperimentConfig {
        model: ModelSection {
            kind: ModelKind::ToyNonlinear,
            epsilon: 1.0,
            d: 1.0,
            alpha,
            a: 0.0,
            b: 1.0,
            c: CSection::default(),
        },
        sim: SimSection {
            nodes,
            dt: 1e-5,
            t_end,
            record_every: 1000,
            snapshot_every: 1_000_000,
            backend: Backend::FiniteDifference,
            safety: 0.9,
            probes: vec![0.02, 0.98],
            track_modes: 8,
        },
        ic: IcSection::StepPair { left, right },
        output: OutputSection::default(),
        spectrum: None,
        bifurcate: None,
    };
    (cfg, (0.5 * t_end, t_end))
}

fn nhfhn(p: f64, opts: PresetOptions) -> (ExperimentConfig, (f64, f64)) {
    let (nodes, mut t_end) = if opts.fast { (1001, 100.0) } else { (2001, 200.0) };
    if opts.full_window {
        t_end = 600.0;
    }
    let window = if opts.full_window { (500.0, 600.0) } else { (0.5 * t_end, t_end) };
    let cfg = ExperimentConfig {
        model: ModelSection {
            kind: ModelKind::NhFhn,
            epsilon: 0.1,
            d: 1.0,
            alpha: 0.0,
            a: -50.0,
            b: 50.0,
            c: CSection::Well { p },
        },
        sim: SimSection {
            nodes,
            dt: 1e-4,
            t_end,
            record_every: 500,
            snapshot_every: 100_000,
            backend: Backend::FiniteDifference,
            safety: 0.9,
            probes: vec![-46.0, -39.0, -36.0, 0.0],
            track_modes: 0,
        },
        ic: IcSection::Stationary { perturb_mode: 0, perturb_amplitude: 0.1 },
        output: OutputSection::default(),
        spectrum: Some(crate::config::SpectrumSection { n_modes: 10 }),
        bifurcate: None,
    };
    (cfg, window)
}

fn ode(c: f64, start: (f64, f64), opts: PresetOptions) -> (ExperimentConfig, (f64, f64)) {
    let t_end = if opts.fast { 100.0 } else { 200.0 };
    let cfg = ExperimentConfig {
        model: ModelSection {
            kind: ModelKind::OdeFhn,
            epsilon: 0.1,
            d: 1.0,
            alpha: 0.0,
            a: 0.0,
            b: 1.0,
            c: CSection::Constant { value: c },
        },
        sim: SimSection {
            nodes: 51,
            dt: 1e-4,
            t_end,
            record_every: 10,
            snapshot_every: 0,
            backend: Backend::FiniteDifference,
            safety: 0.9,
            probes: Vec::new(),
            track_modes: 0,
        },
        ic: IcSection::Point { u: start.0, v: start.1 },
        output: OutputSection::default(),
        spectrum: None,
        bifurcate: None,
    };
    (cfg, (0.5 * t_end, t_end))
}

pub fn preset(name: &str, opts: PresetOptions) -> Result<Preset> {
    let (config, window) = match name {
        "fig1" => toy(1.0, 1.0, -1.0, opts),
        "fig2" => toy(1.0, 1.0, -0.5, opts),
        "fig3" => toy(15.0, 1.0, -1.0, opts),
        "fig4" => toy(15.0, 1.0, -0.5, opts),
        "nhfhn_p1.1" => nhfhn(1.1, opts),
        "nhfhn_p2" => nhfhn(2.0, opts),
        "ode_c-1.5" => ode(-1.5, (0.0, 0.0), opts),
        "ode_c0" => ode(0.0, (0.1, 0.0), opts),
        other => {
            return Err(Error::Config(format!("unknown preset `{other}`; known: {}", PRESETS.join(", "))))
        }
    };
    Ok(Preset { name: name.into(), config, window })
}

/// Parity-forbidden coefficients for an odd state: the even-index modes.
fn max_even_coefficient(traj: &Trajectory) -> f64 {
    sim::symmetry_report(traj, fhn_core::grid::Parity::Odd, 0.0).max_forbidden
}

fn late<'a>(traj: &'a Trajectory, from: f64) -> impl Iterator<Item = &'a fhn_core::sim::Record> {
    traj.records.iter().filter(move |r| r.t >= from)
}

fn half_range(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    0.5 * (hi - lo)
}

/// Predicate of a finished PDE preset run.
pub fn judge(preset: &Preset, traj: &Trajectory) -> Result<Verdict> {
    let t_end = preset.config.sim.t_end;
    // final 5% of the horizon; the spatial std of u keeps decaying slowly
    let late_from = 0.95 * t_end;
    let (w0, w1) = preset.window;
    let checks = match preset.name.as_str() {
        "fig1" => vec![
            Check::less("sup_x |u(x, T)|", traj.last_record().max_abs_u, 0.05),
            Check::at_most("max even-mode coefficient", max_even_coefficient(traj), 1e-8),
        ],
        "fig2" => {
            let std = late(traj, late_from).map(|r| r.std_u).fold(0.0, f64::max);
            let times = traj.times();
            let mean = traj.series(|r| r.mean_u);
            let p = sim::detect_periodicity(&times, &mean, Some((w0, w1)))?;
            let spec = &traj.spec;
            let planar = sim::mean_mode_cycle(spec.alpha, spec.epsilon, spec.domain.length(), 1e-3, 200.0)?;
            vec![
                Check::at_most("late spatial std of u", std, 1e-3),
                Check::at_most("mean(u) period regularity", p.regularity, 0.01),
                Check::at_most(
                    "relative mean-mode amplitude error vs planar cycle",
                    (p.amplitude - planar.amplitude).abs() / planar.amplitude,
                    0.02,
                ),
            ]
        }
        "fig3" => {
            // averaged over whole cycles: the profile flattens twice per period
            let stds: Vec<f64> = late(traj, w0).map(|r| r.std_u).collect();
            let mean_std = stds.iter().sum::<f64>() / stds.len().max(1) as f64;
            let p = sim::detect_periodicity(&traj.times(), &traj.probe_series(0.02)?, Some((w0, w1)))?;
            vec![
                Check::greater("late spatial std of u (time mean)", mean_std, 0.1),
                Check::at_most("u(0.02, t) period regularity", p.regularity, 0.02),
                Check::at_most("max even-mode coefficient", max_even_coefficient(traj), 1e-8),
            ]
        }
        "fig4" => {
            let std = late(traj, late_from).map(|r| r.std_u).fold(0.0, f64::max);
            let amp = half_range(late(traj, w0).map(|r| r.mean_u));
            vec![
                Check::at_most("late spatial std of u", std, 1e-2),
                Check::at_least("mean-mode half range", amp, 1.0),
            ]
        }
        "nhfhn_p1.1" => {
            let edge = sim::propagation_metric(traj, -46.0, (w0, w1))?;
            vec![
                Check::flag("oscillation detected at x = -46", edge.oscillating),
                Check::at_least("amplitude at x = -46", edge.amplitude, 1.0),
            ]
        }
        "nhfhn_p2" => {
            let edge = sim::propagation_metric(traj, -46.0, (w0, w1))?;
            let centre = sim::propagation_metric(traj, 0.0, (w0, w1))?;
            let quiet = !edge.oscillating || edge.amplitude <= 0.2;
            vec![
                Check { name: "amplitude at x = -46 (or no oscillation)".into(), measured: edge.amplitude, threshold: 0.2, pass: quiet },
                Check::flag("oscillation detected at x = 0", centre.oscillating),
                Check::at_least("amplitude at x = 0", centre.amplitude, 1.0),
            ]
        }
        other => return Err(Error::Config(format!("preset `{other}` is not a PDE experiment"))),
    };
    Ok(Verdict::new(&preset.name, checks))
}

/// Predicate of a finished planar preset run.
pub fn judge_ode(preset: &Preset, spec: &ModelSpec, traj: &OdeTrajectory) -> Result<Verdict> {
    let c = spec.constant_c().ok_or_else(|| Error::Config("planar presets use a constant c".into()))?;
    let report = stability::ode_hopf_analysis(c, spec.epsilon);
    let checks = match preset.name.as_str() {
        "ode_c-1.5" => {
            let (u, v) = (*traj.u.last().expect("nonempty"), *traj.v.last().expect("nonempty"));
            let dist = (u - c).abs().max((v - cubic_f(c)).abs());
            vec![
                Check::at_most("distance to (c, f(c)) at T", dist, 1e-6),
                Check::less("Jacobian trace", report.trace, 0.0),
            ]
        }
        "ode_c0" => {
            let t_end = *traj.t.last().expect("nonempty");
            let coarse = sim::detect_periodicity(&traj.t, &traj.u, Some(preset.window))?;
            let from = t_end - 20.0 * coarse.period;
            let p = sim::detect_periodicity(&traj.t, &traj.u, Some((from, t_end)))?;
            vec![
                Check::greater("Jacobian trace", report.trace, 0.0),
                Check::at_most("cycle amplitude regularity over the last 20 periods", p.amplitude_regularity, 0.005),
            ]
        }
        other => return Err(Error::Config(format!("preset `{other}` is not a planar experiment"))),
    };
    Ok(Verdict::new(&preset.name, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for name in PRESETS {
            for fast in [false, true] {
                let p = preset(name, PresetOptions { fast, full_window: false }).unwrap();
                p.config.resolve(std::path::Path::new(".")).unwrap();
                assert!(p.window.0 < p.window.1 && p.window.1 <= p.config.sim.t_end);
            }
        }
        assert!(preset("fig9", PresetOptions::default()).is_err());
    }

    #[test]
    fn fast_halves_resolution_and_horizon() {
        let full = preset("nhfhn_p2", PresetOptions::default()).unwrap();
        let fast = preset("nhfhn_p2", PresetOptions { fast: true, full_window: false }).unwrap();
        assert_eq!(fast.config.sim.nodes - 1, (full.config.sim.nodes - 1) / 2);
        assert_eq!(2.0 * fast.config.sim.t_end, full.config.sim.t_end);
        let long = preset("nhfhn_p2", PresetOptions { fast: false, full_window: true }).unwrap();
        assert_eq!(long.window, (500.0, 600.0));
    }
}
