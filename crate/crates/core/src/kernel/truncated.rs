use crate::characteristics::PiecewiseVelocity;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::surface::{KernelSurface, NodeTensors, Scheme, SurfaceMeta};
use crate::kernel::sweep::{sweep, LinearSystem, PairCoeffs, SideOps};
use crate::tensor::{tensor_len, TruncatedTensor};

/// Cumulative `∫_0^{t_i} ||y||_1` at the nodes of `grid`.
pub(crate) fn node_masses(v: &PiecewiseVelocity, grid: &Grid) -> Result<Vec<f64>> {
    grid.points().iter().map(|&t| v.mass(0.0, t)).collect()
}

/// Operators of one side for velocity `y` truncated at `own` (the side's level, `M` for s)
/// with unknown in `T^{other - 1}` and the opposite unknown in `T^{own - 1}`.
fn side_ops(y: &TruncatedTensor, own: usize, other: usize) -> SideOps {
    let dim = y.dim();
    let y_own = y.with_depth(own);
    // π_(0,other-1) y^own = y^{min(own, other-1)}
    let y_short = y_own.with_depth(other - 1);
    let p = tensor_len(dim, other - 1);
    let q = tensor_len(dim, own - 1);
    let mut own_op = vec![0.0; p * p];
    let mut cross = vec![0.0; p * q];
    for k in 0..p {
        let mut basis = vec![0.0; p];
        basis[k] = 1.0;
        let e = TruncatedTensor::from_flat(dim, other - 1, basis).expect("shape");
        let col = e.mul(&y_short, other - 1).expect("same dim");
        for (r, v) in col.as_slice().iter().enumerate() {
            own_op[r * p + k] = *v;
        }
    }
    for k in 0..q {
        let mut basis = vec![0.0; q];
        basis[k] = 1.0;
        let e = TruncatedTensor::from_flat(dim, own - 1, basis).expect("shape");
        let col = e
            .adjoint_left_zero(&y_own)
            .expect("same dim")
            .with_depth(other - 1);
        for (r, v) in col.as_slice().iter().enumerate() {
            cross[r * q + k] = *v;
        }
    }
    SideOps {
        y: y_short.into_vec(),
        own: own_op,
        cross,
    }
}

/// `(c, A, B)` of the `w` integrand for velocity pieces `y` (s side) and `yt` (t side).
fn pair_coeffs(y: &TruncatedTensor, yt: &TruncatedTensor, m: usize, n: usize) -> PairCoeffs {
    let y_m = y.with_depth(m);
    let yt_n = yt.with_depth(n);
    let c = y_m.inner(&yt_n).expect("same dim");
    let a = y_m
        .with_depth(n - 1)
        .adjoint_right_zero(&yt_n)
        .expect("same dim")
        .with_depth(n - 1);
    let b = yt_n
        .with_depth(m - 1)
        .adjoint_right_zero(&y_m)
        .expect("same dim")
        .with_depth(m - 1);
    PairCoeffs {
        c,
        a: a.into_vec(),
        b: b.into_vec(),
    }
}

/// Solves the truncated system for `(w, f, f̃)` with `f ∈ T^{N-1}`, `f̃ ∈ T^{M-1}`.
///
/// `w(s, t)` approximates `<S(π_(0,M) y)_s, S(π_(0,N) ỹ)_t>`. Both grids must
/// contain the breakpoints of the respective velocity.
pub fn solve_truncated_system(
    v: &PiecewiseVelocity,
    vt: &PiecewiseVelocity,
    m: usize,
    n: usize,
    s_grid: &Grid,
    t_grid: &Grid,
) -> Result<KernelSurface> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "truncation levels must be at least 1 (M = {m}, N = {n})"
        )));
    }
    if v.dim() != vt.dim() {
        return Err(Error::DimMismatch {
            left: v.dim(),
            right: vt.dim(),
        });
    }
    let dim = v.dim();
    let s_piece = v.cell_pieces(s_grid)?;
    let t_piece = vt.cell_pieces(t_grid)?;
    let s_ops: Vec<SideOps> = v.pieces().iter().map(|y| side_ops(y, m, n)).collect();
    let t_ops: Vec<SideOps> = vt.pieces().iter().map(|y| side_ops(y, n, m)).collect();
    let mut pairs = Vec::with_capacity(s_ops.len() * t_ops.len());
    for y in v.pieces() {
        for yt in vt.pieces() {
            pairs.push(pair_coeffs(y, yt, m, n));
        }
    }
    let system = LinearSystem {
        p: tensor_len(dim, n - 1),
        q: tensor_len(dim, m - 1),
        s_ops,
        t_ops,
        s_piece,
        t_piece,
        pairs,
    };
    let res = sweep(&system, s_grid, t_grid);
    let meta = SurfaceMeta {
        levels: Some((m, n)),
        scheme: Scheme::Heun,
        certificate: None,
        mass_s: node_masses(&v.truncate(m), s_grid)?,
        mass_t: node_masses(&vt.truncate(n), t_grid)?,
    };
    KernelSurface::new(
        s_grid.clone(),
        t_grid.clone(),
        res.w,
        Some(NodeTensors::new(dim, n - 1, res.f)),
        Some(NodeTensors::new(dim, m - 1, res.ft)),
        meta,
    )
}
