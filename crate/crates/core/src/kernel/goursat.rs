use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::surface::{KernelSurface, Scheme, SurfaceMeta};
use crate::kernel::sweep::{sweep, CellSystem};

/// Coefficient `α` of `∂²u/∂s∂t = α u`.
#[derive(Debug, Clone, PartialEq)]
pub enum GoursatAlpha {
    /// Values at the grid nodes, row-major over `(s, t)`.
    Nodes(Vec<f64>),
    /// One value per cell, row-major over `(s, t)`; use for piecewise-constant `α`.
    Cells(Vec<f64>),
    /// `α(s, t) = f(s) g(t)` from node values.
    Separable { f: Vec<f64>, g: Vec<f64> },
}

impl GoursatAlpha {
    /// Samples `alpha` at the nodes of both grids.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(s_grid: &Grid, t_grid: &Grid, alpha: F) -> Self {
        let mut out = Vec::with_capacity(s_grid.points().len() * t_grid.points().len());
        for &s in s_grid.points() {
            for &t in t_grid.points() {
                out.push(alpha(s, t));
            }
        }
        GoursatAlpha::Nodes(out)
    }

    pub fn separable<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(s_grid: &Grid, t_grid: &Grid, f: F, g: G) -> Self {
        GoursatAlpha::Separable {
            f: s_grid.points().iter().map(|&s| f(s)).collect(),
            g: t_grid.points().iter().map(|&t| g(t)).collect(),
        }
    }

    fn validate(&self, ns: usize, nt: usize) -> Result<()> {
        let (values, expected): (Vec<&[f64]>, Vec<usize>) = match self {
            GoursatAlpha::Nodes(v) => (vec![v], vec![ns * nt]),
            GoursatAlpha::Cells(v) => (vec![v], vec![(ns - 1) * (nt - 1)]),
            GoursatAlpha::Separable { f, g } => (vec![f, g], vec![ns, nt]),
        };
        for (v, n) in values.iter().zip(expected) {
            if v.len() != n {
                return Err(Error::GridMismatch(format!(
                    "alpha has {} values, the grid needs {n}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("alpha must be finite".into()));
            }
        }
        Ok(())
    }
}

struct ScalarSystem<'a> {
    alpha: &'a GoursatAlpha,
    cols: usize,
}

impl CellSystem for ScalarSystem<'_> {
    fn f_len(&self) -> usize {
        0
    }

    fn ft_len(&self) -> usize {
        0
    }

    fn w_rate(&self, cell: (usize, usize), node: (usize, usize), w: f64, _: &[f64], _: &[f64]) -> f64 {
        let a = match self.alpha {
            GoursatAlpha::Nodes(v) => v[node.0 * self.cols + node.1],
            GoursatAlpha::Cells(v) => v[cell.0 * (self.cols - 1) + cell.1],
            GoursatAlpha::Separable { f, g } => f[node.0] * g[node.1],
        };
        a * w
    }

    fn f_rate(&self, _: usize, _: f64, _: &[f64], _: &[f64], _: &mut [f64]) {}

    fn ft_rate(&self, _: usize, _: f64, _: &[f64], _: &[f64], _: &mut [f64]) {}
}

fn cumulative_trapezoid(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for i in 1..v.len() {
        out[i] = out[i - 1] + 0.5 * grid.step(i - 1) * (v[i - 1].abs() + v[i].abs());
    }
    out
}

/// Solves `u(s,t) = 1 + ∫∫ α u` on the product grid.
pub fn solve_goursat_scalar(alpha: &GoursatAlpha, s_grid: &Grid, t_grid: &Grid) -> Result<KernelSurface> {
    let ns = s_grid.points().len();
    let nt = t_grid.points().len();
    alpha.validate(ns, nt)?;
    let sys = ScalarSystem { alpha, cols: nt };
    let res = sweep(&sys, s_grid, t_grid);
    let (mass_s, mass_t) = match alpha {
        GoursatAlpha::Separable { f, g } => (cumulative_trapezoid(s_grid, f), cumulative_trapezoid(t_grid, g)),
        GoursatAlpha::Nodes(v) | GoursatAlpha::Cells(v) => {
            let root = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).sqrt();
            (
                s_grid.points().iter().map(|s| root * s).collect(),
                t_grid.points().iter().map(|t| root * t).collect(),
            )
        }
    };
    let meta = SurfaceMeta {
        levels: None,
        scheme: Scheme::Heun,
        certificate: None,
        mass_s,
        mass_t,
    };
    KernelSurface::new(s_grid.clone(), t_grid.clone(), res.w, None, None, meta)
}
