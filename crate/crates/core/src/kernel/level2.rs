use crate::characteristics::{characteristic_velocity, LevyTriplet, TripletPiece};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::surface::{KernelSurface, NodeTensors, Scheme, SurfaceMeta};
use crate::kernel::sweep::{sweep, LinearSystem, PairCoeffs, SideOps};
use crate::kernel::truncated::node_masses;

/// Drift vector `b`, area `𝔞` and covariance `a` of one piece, all dense.
struct Parts {
    b: Vec<f64>,
    area: Vec<f64>,
    cov: Vec<f64>,
    /// `c = ½a − 𝔞`, row-major.
    c: Vec<f64>,
}

fn parts(piece: &TripletPiece, d: usize) -> Parts {
    let b = piece.drift.level(1).to_vec();
    let area = if piece.drift.depth() >= 2 {
        piece.drift.level(2).to_vec()
    } else {
        vec![0.0; d * d]
    };
    let cov: Vec<f64> = (0..d * d).map(|k| piece.covariance[(k / d, k % d)]).collect();
    let c = cov.iter().zip(&area).map(|(a, g)| 0.5 * a - g).collect();
    Parts { b, area, cov, c }
}

fn side(p: &Parts, d: usize) -> SideOps {
    let len = d + 1;
    let mut y = vec![0.0; len];
    y[1..].copy_from_slice(&p.b);
    let mut cross = vec![0.0; len * len];
    for i in 0..d {
        for j in 0..d {
            cross[(1 + i) * len + 1 + j] = p.c[i * d + j];
        }
    }
    SideOps {
        y,
        own: vec![0.0; len * len],
        cross,
    }
}

fn pair(p: &Parts, pt: &Parts, d: usize) -> PairCoeffs {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let c = dot(&p.b, &pt.b) + dot(&p.area, &pt.area) + 0.25 * dot(&p.cov, &pt.cov);
    let mut a = vec![0.0; d + 1];
    let mut b = vec![0.0; d + 1];
    for j in 0..d {
        for i in 0..d {
            a[1 + j] += pt.c[i * d + j] * p.b[i];
            b[1 + j] += p.c[i * d + j] * pt.b[i];
        }
    }
    PairCoeffs { c, a, b }
}

/// Kernel of two continuous triplets with state depth at most 2.
///
/// `f` and `f̃` are `V`-valued and stored as depth-1 tensors with zero scalar part.
pub fn solve_level2_system(
    triplet: &LevyTriplet,
    triplet_t: &LevyTriplet,
    s_grid: &Grid,
    t_grid: &Grid,
) -> Result<KernelSurface> {
    if triplet.dim() != triplet_t.dim() {
        return Err(Error::DimMismatch {
            left: triplet.dim(),
            right: triplet_t.dim(),
        });
    }
    if !triplet.is_continuous() || !triplet_t.is_continuous() {
        return Err(Error::Unsupported(
            "the second-level system needs triplets without jumps".into(),
        ));
    }
    let d = triplet.dim();
    let s_piece = triplet.grid().cell_map(s_grid)?;
    let t_piece = triplet_t.grid().cell_map(t_grid)?;
    let ps: Vec<Parts> = triplet.pieces().iter().map(|p| parts(p, d)).collect();
    let pt: Vec<Parts> = triplet_t.pieces().iter().map(|p| parts(p, d)).collect();
    let mut pairs = Vec::with_capacity(ps.len() * pt.len());
    for x in &ps {
        for y in &pt {
            pairs.push(pair(x, y, d));
        }
    }
    let system = LinearSystem {
        p: d + 1,
        q: d + 1,
        s_ops: ps.iter().map(|p| side(p, d)).collect(),
        t_ops: pt.iter().map(|p| side(p, d)).collect(),
        s_piece,
        t_piece,
        pairs,
    };
    let res = sweep(&system, s_grid, t_grid);
    let meta = SurfaceMeta {
        levels: Some((2, 2)),
        scheme: Scheme::Heun,
        certificate: None,
        mass_s: node_masses(&characteristic_velocity(triplet, 2)?, s_grid)?,
        mass_t: node_masses(&characteristic_velocity(triplet_t, 2)?, t_grid)?,
    };
    KernelSurface::new(
        s_grid.clone(),
        t_grid.clone(),
        res.w,
        Some(NodeTensors::new(d, 1, res.f)),
        Some(NodeTensors::new(d, 1, res.ft)),
        meta,
    )
}
