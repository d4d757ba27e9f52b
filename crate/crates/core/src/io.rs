//! CSV import and export.
//!
//! Every file starts with a comment line `# fhnlab <schema> v1` naming the
//! column layout. Readers skip `#` lines and require a header row.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, StateField, UniformGrid};
use crate::sim::{OdeTrajectory, Trajectory};
use crate::spectral::SpectralState;
use crate::stability::CascadeReport;
use crate::sturm::{self, Spectrum};

pub const SCHEMA_VERSION: u32 = 1;

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse { line, message: e.to_string() },
    }
}

fn writer<W: Write>(mut w: W, schema: &str, header: &[&str]) -> Result<csv::Writer<W>> {
    writeln!(w, "# fhnlab {schema} v{SCHEMA_VERSION}")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    Ok(out)
}

fn num(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x:?}")
}

pub fn write_grid_function<W: Write>(w: W, f: &GridFunction) -> Result<()> {
    let mut out = writer(w, "grid_function", &["x", "value"])?;
    for (i, v) in f.values().iter().enumerate() {
        out.write_record([num(f.grid().x(i)), num(*v)]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_state<W: Write>(w: W, s: &StateField) -> Result<()> {
    let mut out = writer(w, "state", &["x", "u", "v"])?;
    for i in 0..s.grid().len() {
        out.write_record([num(s.grid().x(i)), num(s.u.values()[i]), num(s.v.values()[i])])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_spectral<W: Write>(w: W, s: &SpectralState) -> Result<()> {
    let mut out = writer(w, "spectral", &["k", "u_k", "v_k"])?;
    for k in 0..s.u.len() {
        out.write_record([k.to_string(), num(s.u[k]), num(s.v[k])]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Long format `t, x, u, v` over all stored snapshots.
pub fn write_snapshots<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = writer(w, "snapshots", &["t", "x", "u", "v"])?;
    for snap in &traj.snapshots {
        let g = snap.state.grid();
        for i in 0..g.len() {
            out.write_record([
                num(snap.t),
                num(g.x(i)),
                num(snap.state.u.values()[i]),
                num(snap.state.v.values()[i]),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_diagnostics<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut header: Vec<String> = [
        "t", "norm", "E", "residual", "std_u", "defect_odd", "defect_even", "E_rhs", "H1", "H1_rhs", "H1_residual",
        "mean_u", "max_abs_u", "tail_norm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(traj.probes.iter().map(|x| format!("u@{}", num(*x))));
    let track = traj.records.first().map_or(0, |r| r.modes_u.len());
    header.extend((0..track).map(|k| format!("u_{k}")));
    header.extend((0..track).map(|k| format!("v_{k}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = writer(w, "diagnostics", &refs)?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, num);
    for r in &traj.records {
        let mut row = vec![
            num(r.t),
            num(r.norm),
            num(r.energy),
            opt(r.energy_residual(traj.dt)),
            num(r.std_u),
            num(r.defect_odd),
            num(r.defect_even),
            num(r.energy_rhs),
            num(r.h1),
            num(r.h1_rhs),
            opt(r.h1_residual(traj.dt)),
            num(r.mean_u),
            num(r.max_abs_u),
            num(r.tail_norm),
        ];
        row.extend(r.probes.iter().map(|x| num(*x)));
        row.extend(r.modes_u.iter().map(|x| num(*x)));
        row.extend(r.modes_v.iter().map(|x| num(*x)));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_ode<W: Write>(w: W, traj: &OdeTrajectory) -> Result<()> {
    let mut out = writer(w, "ode", &["t", "u", "v"])?;
    for i in 0..traj.t.len() {
        out.write_record([num(traj.t[i]), num(traj.u[i]), num(traj.v[i])]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One row per eigenpair: `k, lambda, weyl_ratio, sign_changes, max_abs`.
pub fn write_spectrum<W: Write>(w: W, spectrum: &Spectrum) -> Result<()> {
    let mut out = writer(w, "spectrum", &["k", "lambda", "weyl_ratio", "sign_changes", "max_abs"])?;
    for p in &spectrum.pairs {
        let ratio = spectrum.weyl_ratio(p.k).map_or_else(String::new, num);
        out.write_record([
            p.k.to_string(),
            num(p.lambda),
            ratio,
            sturm::sign_changes(p.phi.values()).to_string(),
            num(p.phi.max_abs()),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Wide format `x, phi_0, phi_1, ...`.
pub fn write_eigenfunctions<W: Write>(w: W, spectrum: &Spectrum) -> Result<()> {
    let mut header = vec!["x".to_string()];
    header.extend(spectrum.pairs.iter().map(|p| format!("phi_{}", p.k)));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = writer(w, "eigenfunctions", &refs)?;
    if let Some(first) = spectrum.pairs.first() {
        let g = first.phi.grid();
        for i in 0..g.len() {
            let mut row = vec![num(g.x(i))];
            row.extend(spectrum.pairs.iter().map(|p| num(p.phi.values()[i])));
            out.write_record(&row).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_cascade<W: Write>(w: W, reports: &[CascadeReport]) -> Result<()> {
    let mut out = writer(w, "cascade", &["param", "k", "re_sigma1", "im_sigma1", "re_sigma2", "im_sigma2", "class"])?;
    for r in reports {
        for (m, c) in r.modes.iter().zip(&r.classes) {
            let class = match c {
                crate::stability::ModeClass::Source => "source",
                crate::stability::ModeClass::Sink => "sink",
                crate::stability::ModeClass::Center => "center",
            };
            out.write_record([
                num(r.parameter),
                m.k.to_string(),
                num(m.sigma1.re),
                num(m.sigma1.im),
                num(m.sigma2.re),
                num(m.sigma2.im),
                class.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rows of `width` numbers under the expected header, with 1-based line numbers.
fn read_table<R: Read>(r: R, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let found = rdr.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = found.iter().collect();
    if names != header {
        let line = found.position().map_or(1, |p| p.line() as usize);
        return Err(Error::Parse { line, message: format!("expected header {header:?}, found {names:?}") });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::Parse { line, message: format!("expected {} fields, found {}", header.len(), rec.len()) });
        }
        let mut vals = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("`{field}` is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("`{field}` is not finite") });
            }
            vals.push(v);
        }
        rows.push((line, vals));
    }
    Ok(rows)
}

/// Recovers the uniform grid behind a column of node positions.
fn grid_from_nodes(rows: &[(usize, Vec<f64>)]) -> Result<UniformGrid> {
    if rows.len() < 3 {
        return Err(Error::Parse { line: rows.last().map_or(1, |r| r.0), message: format!("need at least 3 nodes, found {}", rows.len()) });
    }
    let a = rows[0].1[0];
    let b = rows[rows.len() - 1].1[0];
    let grid = UniformGrid::new(a, b, rows.len()).map_err(|e| Error::Parse { line: rows[0].0, message: e.to_string() })?;
    let tol = 1e-6 * grid.h();
    for (i, (line, vals)) in rows.iter().enumerate() {
        if (vals[0] - grid.x(i)).abs() > tol {
            return Err(Error::Parse { line: *line, message: format!("x = {} breaks the uniform spacing", vals[0]) });
        }
    }
    Ok(grid)
}

pub fn read_grid_function<R: Read>(r: R) -> Result<GridFunction> {
    let rows = read_table(r, &["x", "value"])?;
    let grid = grid_from_nodes(&rows)?;
    GridFunction::new(grid, rows.into_iter().map(|r| r.1[1]).collect())
}

pub fn read_state<R: Read>(r: R) -> Result<StateField> {
    let rows = read_table(r, &["x", "u", "v"])?;
    let grid = grid_from_nodes(&rows)?;
    let u = rows.iter().map(|r| r.1[1]).collect();
    let v = rows.iter().map(|r| r.1[2]).collect();
    StateField::new(GridFunction::new(grid, u)?, GridFunction::new(grid, v)?)
}

pub fn read_spectral<R: Read>(r: R) -> Result<SpectralState> {
    let rows = read_table(r, &["k", "u_k", "v_k"])?;
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, message: "no modes".into() });
    }
    for (i, (line, vals)) in rows.iter().enumerate() {
        if vals[0] != i as f64 {
            return Err(Error::Parse { line: *line, message: format!("expected k = {i}, found {}", vals[0]) });
        }
    }
    SpectralState::new(rows.iter().map(|r| r.1[1]).collect(), rows.iter().map(|r| r.1[2]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_function_round_trip() {
        let g = UniformGrid::new(-1.0, 2.0, 31).unwrap();
        let f = g.sample(|x| (3.0 * x).sin() + 0.1);
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# fhnlab grid_function v1\nx,value\n"));
        assert_eq!(read_grid_function(&buf[..]).unwrap(), f);
    }

    #[test]
    fn state_and_spectral_round_trip() {
        let g = UniformGrid::new(0.0, 1.0, 11).unwrap();
        let s = StateField::new(g.sample(|x| x * x), g.sample(|x| -x)).unwrap();
        let mut buf = Vec::new();
        write_state(&mut buf, &s).unwrap();
        assert_eq!(read_state(&buf[..]).unwrap(), s);

        let sp = SpectralState::new(vec![0.1, -2.0, 3e-9], vec![0.0, 1.5, -0.25]).unwrap();
        let mut buf = Vec::new();
        write_spectral(&mut buf, &sp).unwrap();
        assert_eq!(read_spectral(&buf[..]).unwrap(), sp);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "x,value\n0,1\n0.5,2\n0.7,3\n";
        match read_grid_function(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_grid_function("x,value\n0,1\n1,nan\n2,3\n".as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_state("x,u\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(read_spectral("k,u_k,v_k\n1,0,0\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }
}
