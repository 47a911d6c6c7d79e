use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::bessel::apriori_psi;
use crate::tensor::{tensor_len, TruncatedTensor};

/// How a surface was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Predictor–corrector sweep, second order.
    Heun,
    /// Heun on a grid and its halving, combined by Richardson extrapolation.
    HeunRichardson,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::Heun => 2,
            Scheme::HeunRichardson => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMeta {
    /// Truncation levels `(M, N)` of the velocities, if any.
    pub levels: Option<(usize, usize)>,
    pub scheme: Scheme,
    pub certificate: Option<f64>,
    /// `C_s` of the a priori bound at every s node.
    pub mass_s: Vec<f64>,
    /// `C̃_t` of the a priori bound at every t node.
    pub mass_t: Vec<f64>,
}

/// Tensor-valued unknown stored node by node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTensors {
    dim: usize,
    depth: usize,
    data: Vec<f64>,
}

impl NodeTensors {
    pub(crate) fn new(dim: usize, depth: usize, data: Vec<f64>) -> Self {
        Self { dim, depth, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn len(&self) -> usize {
        tensor_len(self.dim, self.depth)
    }

    fn at(&self, node: usize) -> TruncatedTensor {
        let n = self.len();
        TruncatedTensor::from_flat(self.dim, self.depth, self.data[node * n..(node + 1) * n].to_vec())
            .expect("stored shape is consistent")
    }
}

/// Values of `(w, f, f̃)` on a tensor-product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSurface {
    s_grid: Grid,
    t_grid: Grid,
    w: Vec<f64>,
    f: Option<NodeTensors>,
    ft: Option<NodeTensors>,
    meta: SurfaceMeta,
}

impl KernelSurface {
    pub(crate) fn new(
        s_grid: Grid,
        t_grid: Grid,
        w: Vec<f64>,
        f: Option<NodeTensors>,
        ft: Option<NodeTensors>,
        meta: SurfaceMeta,
    ) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalInconsistency(
                "kernel surface contains non-finite values".into(),
            ));
        }
        Ok(Self {
            s_grid,
            t_grid,
            w,
            f,
            ft,
            meta,
        })
    }

    pub fn s_grid(&self) -> &Grid {
        &self.s_grid
    }

    pub fn t_grid(&self) -> &Grid {
        &self.t_grid
    }

    /// Number of nodes `(s, t)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.s_grid.points().len(), self.t_grid.points().len())
    }

    fn node(&self, i: usize, j: usize) -> usize {
        i * self.t_grid.points().len() + j
    }

    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.w[self.node(i, j)]
    }

    /// Row-major node values of `w`.
    pub fn w_values(&self) -> &[f64] {
        &self.w
    }

    /// `w` at the far corner `(S, T)`.
    pub fn w_end(&self) -> f64 {
        *self.w.last().expect("non-empty surface")
    }

    pub fn f(&self, i: usize, j: usize) -> Option<TruncatedTensor> {
        self.f.as_ref().map(|f| f.at(self.node(i, j)))
    }

    pub fn ft(&self, i: usize, j: usize) -> Option<TruncatedTensor> {
        self.ft.as_ref().map(|f| f.at(self.node(i, j)))
    }

    pub fn meta(&self) -> &SurfaceMeta {
        &self.meta
    }

    pub fn with_certificate(mut self, certificate: f64) -> Self {
        self.meta.certificate = Some(certificate);
        self
    }

    /// `ψ(C_s, C̃_t)` at node `(i, j)`.
    pub fn apriori_bound(&self, i: usize, j: usize) -> f64 {
        apriori_psi(self.meta.mass_s[i], self.meta.mass_t[j]).expect("masses are non-negative")
    }

    /// `max |w| / ψ(C_s, C̃_t)` over all nodes; at most 1 when the a priori bound holds.
    pub fn max_apriori_ratio(&self) -> f64 {
        let (ns, nt) = self.shape();
        let mut worst: f64 = 0.0;
        for i in 0..ns {
            for j in 0..nt {
                worst = worst.max(self.w(i, j).abs() / self.apriori_bound(i, j));
            }
        }
        worst
    }

    pub fn satisfies_apriori(&self) -> bool {
        self.max_apriori_ratio() <= 1.0 + 1e-12
    }

    /// The surface with the roles of `s` and `t` exchanged.
    pub fn transpose(&self) -> KernelSurface {
        let (ns, nt) = self.shape();
        let perm = |data: &[f64], len: usize| -> Vec<f64> {
            let mut out = vec![0.0; data.len()];
            for i in 0..ns {
                for j in 0..nt {
                    let src = (i * nt + j) * len;
                    let dst = (j * ns + i) * len;
                    out[dst..dst + len].copy_from_slice(&data[src..src + len]);
                }
            }
            out
        };
        let tens = |t: &Option<NodeTensors>| {
            t.as_ref().map(|t| NodeTensors::new(t.dim, t.depth, perm(&t.data, t.len())))
        };
        KernelSurface {
            s_grid: self.t_grid.clone(),
            t_grid: self.s_grid.clone(),
            w: perm(&self.w, 1),
            f: tens(&self.ft),
            ft: tens(&self.f),
            meta: SurfaceMeta {
                levels: self.meta.levels.map(|(m, n)| (n, m)),
                scheme: self.meta.scheme,
                certificate: self.meta.certificate,
                mass_s: self.meta.mass_t.clone(),
                mass_t: self.meta.mass_s.clone(),
            },
        }
    }

    /// Writes `s,t,w` rows, optionally followed by the level norms of `f` and `f̃`.
    pub fn write_csv<W: Write>(&self, out: &mut W, with_levels: bool) -> std::io::Result<()> {
        let f_depth = self.f.as_ref().filter(|_| with_levels).map(|f| f.depth);
        let ft_depth = self.ft.as_ref().filter(|_| with_levels).map(|f| f.depth);
        write!(out, "s,t,w")?;
        for n in 0..=f_depth.map_or(-1, |d| d as i64) {
            write!(out, ",f_{n}")?;
        }
        for n in 0..=ft_depth.map_or(-1, |d| d as i64) {
            write!(out, ",ftilde_{n}")?;
        }
        writeln!(out)?;
        let (ns, nt) = self.shape();
        for i in 0..ns {
            for j in 0..nt {
                let s = self.s_grid.points()[i];
                let t = self.t_grid.points()[j];
                write!(out, "{s},{t},{}", self.w(i, j))?;
                if f_depth.is_some() {
                    for v in self.f(i, j).expect("present").level_norms().values() {
                        write!(out, ",{v}")?;
                    }
                }
                if ft_depth.is_some() {
                    for v in self.ft(i, j).expect("present").level_norms().values() {
                        write!(out, ",{v}")?;
                    }
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Richardson extrapolation `(4 fine - coarse) / 3` at the coarse nodes, where
/// `fine` was computed on both grids subdivided once.
pub fn richardson(coarse: &KernelSurface, fine: &KernelSurface) -> Result<KernelSurface> {
    if fine.s_grid != coarse.s_grid.subdivide(2) || fine.t_grid != coarse.t_grid.subdivide(2) {
        return Err(Error::GridMismatch(
            "Richardson extrapolation needs the halved grids".into(),
        ));
    }
    let (ns, nt) = coarse.shape();
    let fine_cols = fine.shape().1;
    let combine = |c: &[f64], f: &[f64], len: usize| -> Vec<f64> {
        let mut out = vec![0.0; c.len()];
        for i in 0..ns {
            for j in 0..nt {
                let src = (2 * i * fine_cols + 2 * j) * len;
                let dst = (i * nt + j) * len;
                for k in 0..len {
                    out[dst + k] = (4.0 * f[src + k] - c[dst + k]) / 3.0;
                }
            }
        }
        out
    };
    let tens = |c: &Option<NodeTensors>, f: &Option<NodeTensors>| match (c, f) {
        (Some(c), Some(f)) => Some(NodeTensors::new(c.dim, c.depth, combine(&c.data, &f.data, c.len()))),
        _ => None,
    };
    KernelSurface::new(
        coarse.s_grid.clone(),
        coarse.t_grid.clone(),
        combine(&coarse.w, &fine.w, 1),
        tens(&coarse.f, &fine.f),
        tens(&coarse.ft, &fine.ft),
        SurfaceMeta {
            scheme: Scheme::HeunRichardson,
            ..coarse.meta.clone()
        },
    )
}
