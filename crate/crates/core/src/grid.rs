//! Uniform grids on an interval with Neumann semantics.
//!
//! Everything here is a pure function of immutable inputs. The discrete
//! Laplacian closes the boundary with ghost-node reflection, which keeps it
//! self-adjoint with respect to the trapezoid weights:
//!
//! ```text
//! quad(g * lap(f)) == quad(f * lap(g))
//! quad(f * lap(f)) == -dirichlet_form(f)
//! ```
//!
//! The energy monitors in [`crate::sim`] rely on that summation-by-parts
//! identity holding exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` equally spaced nodes `x_i = a + i h` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    a: f64,
    b: f64,
    n: usize,
}

impl UniformGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Domain(format!("interval ({a}, {b}) is empty")));
        }
        if n < 3 {
            return Err(Error::Size { min: 3, got: n });
        }
        Ok(Self { a, b, n })
    }

    /// Grid whose spacing is `h` (rounded so the nodes hit both endpoints).
    pub fn with_spacing(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("spacing {h} must be positive")));
        }
        let cells = ((b - a) / h).round();
        if !(cells >= 2.0) || cells > 1e9 {
            return Err(Error::Size { min: 3, got: cells.max(0.0) as usize + 1 });
        }
        Self::new(a, b, cells as usize + 1)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the node reflected through the midpoint.
    pub fn mirror(&self, i: usize) -> usize {
        self.n - 1 - i
    }

    /// Index of the node closest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.a) / self.h()).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.length().max(1.0);
        x >= self.a - slack && x <= self.b + slack
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: *self,
            values: self.nodes().into_iter().map(f).collect(),
        }
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction { grid: *self, values: vec![0.0; self.n] }
    }
}

/// Real samples on a [`UniformGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Size { min: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Domain("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Piecewise-linear interpolation; `x` must lie in `[a, b]`.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                self.grid.a, self.grid.b
            )));
        }
        let n = self.grid.len();
        let s = ((x - self.grid.a) / self.grid.h()).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        Ok((1.0 - t) * self.values[i] + t * self.values[i + 1])
    }

    /// Mirror image `x -> f(a + b - x)`.
    pub fn reflect(&self) -> GridFunction {
        let mut values = self.values.clone();
        values.reverse();
        GridFunction { grid: self.grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// The pair `(u, v)` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub u: GridFunction,
    pub v: GridFunction,
}

impl StateField {
    pub fn new(u: GridFunction, v: GridFunction) -> Result<Self> {
        u.same_grid(&v)?;
        Ok(Self { u, v })
    }

    pub fn grid(&self) -> &UniformGrid {
        self.u.grid()
    }

    /// Flat layout `[u_0 .. u_{n-1}, v_0 .. v_{n-1}]` used by the integrators.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = self.u.values.clone();
        y.extend_from_slice(&self.v.values);
        y
    }

    pub fn from_flat(grid: UniformGrid, y: &[f64]) -> Result<Self> {
        let n = grid.len();
        if y.len() != 2 * n {
            return Err(Error::Size { min: 2 * n, got: y.len() });
        }
        Ok(Self {
            u: GridFunction::new(grid, y[..n].to_vec())?,
            v: GridFunction::new(grid, y[n..].to_vec())?,
        })
    }
}

/// Symmetry class about the midpoint of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
}

/// Neumann Laplacian on raw node values, written into `out`.
///
/// Neighbour sums are formed before subtracting the centre so that the
/// stencil commutes exactly with the midpoint reflection in floating point.
pub fn laplacian_into(values: &[f64], h: f64, out: &mut [f64]) {
    let n = values.len();
    debug_assert!(n >= 3 && out.len() == n);
    let inv_h2 = 1.0 / (h * h);
    out[0] = 2.0 * (values[1] - values[0]) * inv_h2;
    for i in 1..n - 1 {
        out[i] = ((values[i - 1] + values[i + 1]) - 2.0 * values[i]) * inv_h2;
    }
    out[n - 1] = 2.0 * (values[n - 2] - values[n - 1]) * inv_h2;
}

pub fn neumann_laplacian(f: &GridFunction) -> Result<GridFunction> {
    let n = f.grid.len();
    if n < 3 {
        return Err(Error::Size { min: 3, got: n });
    }
    let mut out = vec![0.0; n];
    laplacian_into(&f.values, f.grid.h(), &mut out);
    Ok(GridFunction { grid: f.grid, values: out })
}

/// Composite trapezoid rule on raw node values.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n - 1]))
}

pub fn quad(f: &GridFunction) -> f64 {
    trapezoid(&f.values, f.grid.h())
}

/// Trapezoid value of `integrand(values[i])` without allocating.
pub fn quad_map(values: &[f64], h: f64, integrand: impl Fn(f64) -> f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().map(|&v| integrand(v)).sum();
    h * (inner + 0.5 * (integrand(values[0]) + integrand(values[n - 1])))
}

/// Trapezoid value of `integrand(a[i], b[i])`.
pub fn quad_zip(a: &[f64], b: &[f64], h: f64, integrand: impl Fn(f64, f64) -> f64) -> f64 {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let inner: f64 = (1..n - 1).map(|i| integrand(a[i], b[i])).sum();
    h * (inner + 0.5 * (integrand(a[0], b[0]) + integrand(a[n - 1], b[n - 1])))
}

pub fn l2_norm(f: &GridFunction) -> f64 {
    quad_map(&f.values, f.grid.h(), |v| v * v).sqrt()
}

/// Second-order derivative: centered in the interior, one-sided at the ends.
pub fn derivative(f: &GridFunction) -> GridFunction {
    let v = &f.values;
    let n = v.len();
    let h = f.grid.h();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    GridFunction { grid: f.grid, values: d }
}

pub fn h1_seminorm(f: &GridFunction) -> f64 {
    l2_norm(&derivative(f))
}

/// `sum (f_{i+1} - f_i)^2 / h`, the exact negative of `quad(f * lap f)`.
pub fn dirichlet_form(values: &[f64], h: f64) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>() / h
}

/// `sqrt(eps ||u||^2 + ||v||^2)`.
pub fn state_norm(s: &StateField, epsilon: f64) -> f64 {
    let u = l2_norm(&s.u);
    let v = l2_norm(&s.v);
    (epsilon * u * u + v * v).sqrt()
}

/// L2 distance of `f` from its odd (or even) mirror image.
pub fn symmetry_defect(f: &GridFunction, parity: Parity) -> f64 {
    let n = f.grid.len();
    let v = &f.values;
    let h = f.grid.h();
    let w = |i: usize| -> f64 {
        let j = n - 1 - i;
        match parity {
            Parity::Odd => v[i] + v[j],
            Parity::Even => v[i] - v[j],
        }
    };
    let inner: f64 = (1..n - 1).map(|i| w(i) * w(i)).sum();
    (h * (inner + 0.5 * (w(0) * w(0) + w(n - 1) * w(n - 1)))).sqrt()
}
