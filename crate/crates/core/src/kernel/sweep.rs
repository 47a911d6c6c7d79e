//! Lexicographic predictor–corrector sweep shared by all Goursat-type systems.
//!
//! The unknowns are a scalar `w`, a vector `f` integrated in `s` and a vector
//! `f̃` integrated in `t`:
//!
//! ```text
//! w(s,t) = 1 + ∫∫ G(w, f, f̃)      f(s,t) = ∫_0^s F(w, f, f̃)      f̃(s,t) = ∫_0^t F̃(w, f, f̃)
//! ```
//!
//! Each cell is advanced with a rectangle-rule predictor followed by one
//! trapezoidal corrector, which is second order for smooth data.

use crate::grid::Grid;

pub(crate) trait CellSystem {
    fn f_len(&self) -> usize;
    fn ft_len(&self) -> usize;
    /// Integrand of `w` at grid node `node`, seen from cell `cell`.
    fn w_rate(&self, cell: (usize, usize), node: (usize, usize), w: f64, f: &[f64], ft: &[f64]) -> f64;
    /// `∂_s f` on the s-interval `i`.
    fn f_rate(&self, i: usize, w: f64, f: &[f64], ft: &[f64], out: &mut [f64]);
    /// `∂_t f̃` on the t-interval `j`.
    fn ft_rate(&self, j: usize, w: f64, f: &[f64], ft: &[f64], out: &mut [f64]);
}

pub(crate) struct SweepResult {
    pub w: Vec<f64>,
    pub f: Vec<f64>,
    pub ft: Vec<f64>,
}

pub(crate) fn sweep<S: CellSystem>(sys: &S, s_grid: &Grid, t_grid: &Grid) -> SweepResult {
    let ns = s_grid.n_intervals();
    let nt = t_grid.n_intervals();
    let cols = nt + 1;
    let p = sys.f_len();
    let q = sys.ft_len();
    let nodes = (ns + 1) * cols;
    let mut w = vec![1.0; nodes];
    let mut f = vec![0.0; nodes * p];
    let mut ft = vec![0.0; nodes * q];

    let zero_p = vec![0.0; p];
    let zero_q = vec![0.0; q];
    let mut k1p = vec![0.0; p];
    let mut k2p = vec![0.0; p];
    let mut k1q = vec![0.0; q];
    let mut k2q = vec![0.0; q];
    let mut pred_p = vec![0.0; p];
    let mut pred_q = vec![0.0; q];

    // t = 0 row: f' = F(1, f, 0)
    for i in 0..ns {
        let ds = s_grid.step(i);
        let cur = &f[i * cols * p..(i * cols + 1) * p];
        sys.f_rate(i, 1.0, cur, &zero_q, &mut k1p);
        for k in 0..p {
            pred_p[k] = cur[k] + ds * k1p[k];
        }
        sys.f_rate(i, 1.0, &pred_p, &zero_q, &mut k2p);
        let next: Vec<f64> = (0..p).map(|k| cur[k] + 0.5 * ds * (k1p[k] + k2p[k])).collect();
        f[(i + 1) * cols * p..((i + 1) * cols + 1) * p].copy_from_slice(&next);
    }
    // s = 0 column: f̃' = F̃(1, 0, f̃)
    for j in 0..nt {
        let dt = t_grid.step(j);
        let cur = &ft[j * q..(j + 1) * q];
        sys.ft_rate(j, 1.0, &zero_p, cur, &mut k1q);
        for k in 0..q {
            pred_q[k] = cur[k] + dt * k1q[k];
        }
        sys.ft_rate(j, 1.0, &zero_p, &pred_q, &mut k2q);
        let next: Vec<f64> = (0..q).map(|k| cur[k] + 0.5 * dt * (k1q[k] + k2q[k])).collect();
        ft[(j + 1) * q..(j + 2) * q].copy_from_slice(&next);
    }

    let mut new_p = vec![0.0; p];
    let mut new_q = vec![0.0; q];
    for i in 0..ns {
        let ds = s_grid.step(i);
        for j in 0..nt {
            let dt = t_grid.step(j);
            let n00 = i * cols + j;
            let n01 = n00 + 1;
            let n10 = n00 + cols;
            let n11 = n10 + 1;
            let cell = (i, j);
            let (f00, f01, f10) = (&f[n00 * p..][..p], &f[n01 * p..][..p], &f[n10 * p..][..p]);
            let (g00, g01, g10) = (&ft[n00 * q..][..q], &ft[n01 * q..][..q], &ft[n10 * q..][..q]);

            let r00 = sys.w_rate(cell, (i, j), w[n00], f00, g00);
            let r10 = sys.w_rate(cell, (i + 1, j), w[n10], f10, g10);
            let r01 = sys.w_rate(cell, (i, j + 1), w[n01], f01, g01);
            let base = w[n10] + w[n01] - w[n00];
            let area = ds * dt;

            // predictor
            sys.f_rate(i, w[n01], f01, g01, &mut k1p);
            sys.ft_rate(j, w[n10], f10, g10, &mut k1q);
            for k in 0..p {
                pred_p[k] = f01[k] + ds * k1p[k];
            }
            for k in 0..q {
                pred_q[k] = g10[k] + dt * k1q[k];
            }
            let w_pred = base + 0.5 * area * (r10 + r01);
            let r11 = sys.w_rate(cell, (i + 1, j + 1), w_pred, &pred_p, &pred_q);

            // corrector
            let w11 = base + 0.25 * area * (r00 + r10 + r01 + r11);
            sys.f_rate(i, w11, &pred_p, &pred_q, &mut k2p);
            sys.ft_rate(j, w11, &pred_p, &pred_q, &mut k2q);
            for k in 0..p {
                new_p[k] = f01[k] + 0.5 * ds * (k1p[k] + k2p[k]);
            }
            for k in 0..q {
                new_q[k] = g10[k] + 0.5 * dt * (k1q[k] + k2q[k]);
            }
            w[n11] = w11;
            f[n11 * p..(n11 + 1) * p].copy_from_slice(&new_p);
            ft[n11 * q..(n11 + 1) * q].copy_from_slice(&new_q);
        }
    }
    SweepResult { w, f, ft }
}

/// Dense linear right-hand side of one side (s or t) of a system.
#[derive(Debug, Clone)]
pub(crate) struct SideOps {
    /// Coefficient of `w`.
    pub y: Vec<f64>,
    /// Acting on the own unknown, row-major `len x len`.
    pub own: Vec<f64>,
    /// Acting on the other side's unknown, row-major `len x other_len`.
    pub cross: Vec<f64>,
}

impl SideOps {
    fn apply(&self, w: f64, own: &[f64], other: &[f64], out: &mut [f64]) {
        let n = out.len();
        let m = other.len();
        for (r, o) in out.iter_mut().enumerate() {
            let a = &self.own[r * n..(r + 1) * n];
            let b = &self.cross[r * m..(r + 1) * m];
            *o = w * self.y[r]
                + a.iter().zip(own).map(|(x, y)| x * y).sum::<f64>()
                + b.iter().zip(other).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// Coefficients of the `w` integrand for one pair of velocity pieces.
#[derive(Debug, Clone)]
pub(crate) struct PairCoeffs {
    pub c: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// A linear system whose coefficients are constant on velocity pieces.
pub(crate) struct LinearSystem {
    pub p: usize,
    pub q: usize,
    pub s_ops: Vec<SideOps>,
    pub t_ops: Vec<SideOps>,
    pub s_piece: Vec<usize>,
    pub t_piece: Vec<usize>,
    /// Indexed `[s_piece * t_ops.len() + t_piece]`.
    pub pairs: Vec<PairCoeffs>,
}

impl CellSystem for LinearSystem {
    fn f_len(&self) -> usize {
        self.p
    }

    fn ft_len(&self) -> usize {
        self.q
    }

    fn w_rate(&self, cell: (usize, usize), _node: (usize, usize), w: f64, f: &[f64], ft: &[f64]) -> f64 {
        let pc = &self.pairs[self.s_piece[cell.0] * self.t_ops.len() + self.t_piece[cell.1]];
        w * pc.c
            + pc.a.iter().zip(f).map(|(x, y)| x * y).sum::<f64>()
            + pc.b.iter().zip(ft).map(|(x, y)| x * y).sum::<f64>()
    }

    fn f_rate(&self, i: usize, w: f64, f: &[f64], ft: &[f64], out: &mut [f64]) {
        self.s_ops[self.s_piece[i]].apply(w, f, ft, out);
    }

    fn ft_rate(&self, j: usize, w: f64, f: &[f64], ft: &[f64], out: &mut [f64]) {
        self.t_ops[self.t_piece[j]].apply(w, ft, f, out);
    }
}
