//! Signature MMD between an empirical measure of area-augmented paths and a
//! time-inhomogeneous Wiener measure.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::characteristics::{covariance_from_factors, LevyTriplet, TripletPiece};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{solve_goursat_scalar, solve_level2_system, GoursatAlpha, KernelSurface};
use crate::tensor::TruncatedTensor;

/// Radicands down to `-RADICAND_TOL` are clipped to zero.
pub const RADICAND_TOL: f64 = 1e-8;

/// Paths `γ_k = ∫(b_k + 𝔞_k)` with piecewise-constant derivatives on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPathEnsemble {
    dim: usize,
    grid: Grid,
    paths: Vec<LevyTriplet>,
}

impl AugmentedPathEnsemble {
    /// `paths[k][i]` is the derivative of path `k` on interval `i`: a tensor of depth
    /// at most 2 with zero scalar part and antisymmetric level 2.
    pub fn new(grid: Grid, paths: Vec<Vec<TruncatedTensor>>) -> Result<Self> {
        let dim = paths
            .first()
            .and_then(|p| p.first())
            .map(TruncatedTensor::dim)
            .ok_or_else(|| Error::InvalidParameter("an ensemble needs at least one path".into()))?;
        let paths = paths
            .into_iter()
            .map(|p| {
                let p = p.into_iter().map(|x| x.with_depth(2)).collect();
                LevyTriplet::new(dim, 2, grid.clone(), p_pieces(p))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, grid, paths })
    }

    /// Piecewise-linear interpolation of observed values `values[k][i] = γ_k(t_i)`, without area.
    pub fn from_values(grid: Grid, values: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut paths = Vec::with_capacity(values.len());
        for path in values {
            if path.len() != grid.points().len() {
                return Err(Error::GridMismatch(format!(
                    "{} observations for {} grid points",
                    path.len(),
                    grid.points().len()
                )));
            }
            let dim = path[0].len();
            let mut pieces = Vec::with_capacity(grid.n_intervals());
            for i in 0..grid.n_intervals() {
                if path[i + 1].len() != dim {
                    return Err(Error::DimMismatch {
                        left: dim,
                        right: path[i + 1].len(),
                    });
                }
                let dt = grid.step(i);
                let b: Vec<f64> = (0..dim).map(|k| (path[i + 1][k] - path[i][k]) / dt).collect();
                pieces.push(TruncatedTensor::from_levels(dim, vec![vec![0.0], b])?);
            }
            paths.push(pieces);
        }
        Self::new(grid, paths)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn horizon(&self) -> f64 {
        self.grid.end()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Path `k` as a deterministic triplet of state depth 2.
    pub fn path(&self, k: usize) -> &LevyTriplet {
        &self.paths[k]
    }

    /// The ensemble with its paths reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            dim: self.dim,
            grid: self.grid.clone(),
            paths: perm.iter().map(|&k| self.paths[k].clone()).collect(),
        }
    }
}

fn p_pieces(drifts: Vec<TruncatedTensor>) -> Vec<TripletPiece> {
    drifts.into_iter().map(TripletPiece::drift_only).collect()
}

/// Wiener measure with piecewise-constant covariance `a(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerSpec {
    triplet: LevyTriplet,
}

impl WienerSpec {
    pub fn new(grid: Grid, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        let dim = covariances
            .first()
            .map(|c| c.nrows())
            .ok_or_else(|| Error::InvalidParameter("no covariance pieces".into()))?;
        let pieces = covariances.into_iter().map(TripletPiece::brownian).collect();
        Ok(Self {
            triplet: LevyTriplet::new(dim, 1, grid, pieces)?,
        })
    }

    /// `a = Σ σ_i σ_iᵀ` per interval from the factor lists `factors[interval]`.
    pub fn from_factors(grid: Grid, dim: usize, factors: &[Vec<Vec<f64>>]) -> Result<Self> {
        let cov = factors
            .iter()
            .map(|f| covariance_from_factors(dim, f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, cov)
    }

    /// Standard Brownian motion on `[0, horizon]`.
    pub fn standard(dim: usize, horizon: f64) -> Result<Self> {
        Self::new(Grid::new(vec![0.0, horizon])?, vec![DMatrix::identity(dim, dim)])
    }

    pub fn dim(&self) -> usize {
        self.triplet.dim()
    }

    pub fn triplet(&self) -> &LevyTriplet {
        &self.triplet
    }
}

/// `⟨E Sig(W)_s, E Sig(W)_t⟩` from the scalar Goursat equation with `α = ¼⟨a(s), a(t)⟩`.
pub fn wiener_kernel(wiener: &WienerSpec, grid: &Grid) -> Result<KernelSurface> {
    let tri = wiener.triplet();
    let cells = tri.grid().cell_map(grid)?;
    let n = grid.n_intervals();
    let cov: Vec<&DMatrix<f64>> = tri.pieces().iter().map(|p| &p.covariance).collect();
    let mut alpha = Vec::with_capacity(n * n);
    for &i in &cells {
        for &j in &cells {
            alpha.push(0.25 * cov[i].dot(cov[j]));
        }
    }
    solve_goursat_scalar(&GoursatAlpha::Cells(alpha), grid, grid)
}

/// `v_k(s,t) = ⟨Sig(γ_k)_s, E Sig(W)_t⟩`.
pub fn cross_kernel(ensemble: &AugmentedPathEnsemble, k: usize, wiener: &WienerSpec, grid: &Grid) -> Result<KernelSurface> {
    check_dims(ensemble, wiener)?;
    solve_level2_system(ensemble.path(k), wiener.triplet(), grid, grid)
}

/// `w_{j,k}(s,t) = ⟨Sig(γ_j)_s, Sig(γ_k)_t⟩`.
pub fn pair_kernel(ensemble: &AugmentedPathEnsemble, j: usize, k: usize, grid: &Grid) -> Result<KernelSurface> {
    solve_level2_system(ensemble.path(j), ensemble.path(k), grid, grid)
}

fn check_dims(ensemble: &AugmentedPathEnsemble, wiener: &WienerSpec) -> Result<()> {
    if ensemble.dim() != wiener.dim() {
        return Err(Error::DimMismatch {
            left: ensemble.dim(),
            right: wiener.dim(),
        });
    }
    Ok(())
}

/// Terminal values of every solve behind an MMD evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdReport {
    /// `u_α(T, T)`.
    pub wiener: f64,
    /// `v_k(T, T)` in path order.
    pub cross: Vec<f64>,
    /// `w_{j,k}(T, T)` for `j <= k`, sorted by `(j, k)`.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Radicand before clipping.
    pub mmd2: f64,
    pub mmd: f64,
    /// True when a slightly negative radicand was clipped to zero.
    pub clipped: bool,
}

impl MmdReport {
    /// Rows `kind,j,k,value`, then `mmd` and `mmd2` summary rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "kind,j,k,value")?;
        writeln!(out, "u,,,{}", self.wiener)?;
        for (k, v) in self.cross.iter().enumerate() {
            writeln!(out, "v,{k},,{v}")?;
        }
        for (j, k, v) in &self.pairs {
            writeln!(out, "w,{j},{k},{v}")?;
        }
        writeln!(out, "mmd,,,{}", self.mmd)?;
        writeln!(out, "mmd2,,,{}", self.mmd2)?;
        Ok(())
    }
}

enum Job {
    Wiener,
    Cross(usize),
    Pair(usize, usize),
}

/// `MMD(P̂, W)` for the empirical measure `P̂` of the ensemble, solved on `grid` in both variables.
///
/// The solves run in parallel and are combined in a fixed order, so the result
/// does not depend on scheduling.
pub fn mmd_to_wiener(ensemble: &AugmentedPathEnsemble, wiener: &WienerSpec, grid: &Grid) -> Result<(f64, MmdReport)> {
    check_dims(ensemble, wiener)?;
    let m = ensemble.len();
    let mut jobs = vec![Job::Wiener];
    jobs.extend((0..m).map(Job::Cross));
    for j in 0..m {
        jobs.extend((j..m).map(|k| Job::Pair(j, k)));
    }
    let values = jobs
        .par_iter()
        .map(|job| {
            let surf = match *job {
                Job::Wiener => wiener_kernel(wiener, grid)?,
                Job::Cross(k) => cross_kernel(ensemble, k, wiener, grid)?,
                Job::Pair(j, k) => pair_kernel(ensemble, j, k, grid)?,
            };
            Ok(surf.w_end())
        })
        .collect::<Result<Vec<f64>>>()?;

    let u = values[0];
    let cross = values[1..=m].to_vec();
    let mut pairs = Vec::with_capacity(m * (m + 1) / 2);
    let mut pair_sum = 0.0;
    for (job, &v) in jobs.iter().zip(&values).skip(m + 1) {
        if let Job::Pair(j, k) = *job {
            pair_sum += if j == k { v } else { 2.0 * v };
            pairs.push((j, k, v));
        }
    }
    let mf = m as f64;
    let mmd2 = u - 2.0 / mf * cross.iter().sum::<f64>() + pair_sum / (mf * mf);
    if mmd2 < -RADICAND_TOL {
        return Err(Error::NumericalInconsistency(format!(
            "squared MMD {mmd2} is negative beyond tolerance"
        )));
    }
    let clipped = mmd2 < 0.0;
    if clipped {
        log::warn!("clipping squared MMD {mmd2} to zero");
    }
    let mmd = mmd2.max(0.0).sqrt();
    Ok((
        mmd,
        MmdReport {
            wiener: u,
            cross,
            pairs,
            mmd2,
            mmd,
            clipped,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::{area_tensor, characteristic_velocity};
    use crate::development::develop;
    use crate::kernel::bessel_i0;

    fn vector(b: &[f64]) -> TruncatedTensor {
        TruncatedTensor::from_levels(b.len(), vec![vec![0.0], b.to_vec()]).unwrap()
    }

    fn augmented(b: &[f64], area: f64) -> TruncatedTensor {
        vector(b).with_depth(2).add(&area_tensor(b.len(), &[(1, 2, area)]).unwrap()).unwrap()
    }

    fn signature(t: &LevyTriplet, depth: usize) -> TruncatedTensor {
        develop(&characteristic_velocity(t, 2).unwrap(), 0.0, t.horizon(), depth).unwrap()
    }

    #[test]
    fn zero_path_against_brownian_motion() {
        let grid = Grid::uniform(1.0, 128).unwrap();
        let ens = AugmentedPathEnsemble::new(Grid::uniform(1.0, 1).unwrap(), vec![vec![vector(&[0.0])]]).unwrap();
        let (mmd, rep) = mmd_to_wiener(&ens, &WienerSpec::standard(1, 1.0).unwrap(), &grid).unwrap();
        let expected = bessel_i0(1.0).unwrap() - 1.0;
        assert!((rep.mmd2 - expected).abs() < 1e-4);
        assert_eq!(rep.cross, vec![1.0]);
        assert!((mmd - expected.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn pure_area_paths_have_unit_cross_kernels() {
        let g = Grid::uniform(1.0, 2).unwrap();
        let ens = AugmentedPathEnsemble::new(
            g.clone(),
            vec![
                vec![augmented(&[0.0, 0.0], 0.7), augmented(&[0.0, 0.0], -0.2)],
                vec![augmented(&[0.0, 0.0], 0.1), augmented(&[0.0, 0.0], 1.1)],
            ],
        )
        .unwrap();
        let wiener = WienerSpec::standard(2, 1.0).unwrap();
        let grid = Grid::uniform(1.0, 32).unwrap();
        for k in 0..2 {
            let v = cross_kernel(&ens, k, &wiener, &grid).unwrap();
            assert!(v.w_values().iter().all(|&x| (x - 1.0).abs() < 1e-14));
        }
        let (_, rep) = mmd_to_wiener(&ens, &wiener, &grid).unwrap();
        let u = wiener_kernel(&wiener, &grid).unwrap().w_end();
        let w: f64 = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(j, k)| pair_kernel(&ens, j, k, &grid).unwrap().w_end())
            .sum();
        assert!((rep.mmd2 - (u - 2.0 + w / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_wiener_part() {
        let g = Grid::uniform(1.0, 1).unwrap();
        let ens = AugmentedPathEnsemble::new(g.clone(), vec![vec![augmented(&[0.4, -1.0], 0.3)]]).unwrap();
        let wiener = WienerSpec::new(g, vec![DMatrix::zeros(2, 2)]).unwrap();
        let v = cross_kernel(&ens, 0, &wiener, &Grid::uniform(1.0, 16).unwrap()).unwrap();
        assert!(v.w_values().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn cross_kernel_matches_development() {
        let g = Grid::uniform(1.0, 1).unwrap();
        let ens = AugmentedPathEnsemble::new(g, vec![vec![vector(&[1.0])]]).unwrap();
        let wiener = WienerSpec::standard(1, 1.0).unwrap();
        let v = cross_kernel(&ens, 0, &wiener, &Grid::uniform(1.0, 128).unwrap()).unwrap();
        let exact = signature(ens.path(0), 12)
            .inner(&signature(wiener.triplet(), 12))
            .unwrap();
        assert!((v.w_end() / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn pair_kernel_symmetry_and_oracle() {
        let g = Grid::uniform(1.0, 2).unwrap();
        let ens = AugmentedPathEnsemble::new(
            g,
            vec![
                vec![augmented(&[0.5, -0.3], 0.4), augmented(&[-0.2, 0.8], -0.1)],
                vec![augmented(&[0.1, 0.6], -0.5), augmented(&[0.9, 0.0], 0.2)],
            ],
        )
        .unwrap();
        let grid = Grid::uniform(1.0, 64).unwrap();
        let a = pair_kernel(&ens, 0, 1, &grid).unwrap();
        let b = pair_kernel(&ens, 1, 0, &grid).unwrap().transpose();
        for (x, y) in a.w_values().iter().zip(b.w_values()) {
            assert!((x - y).abs() < 1e-12);
        }
        let exact = signature(ens.path(0), 12).inner(&signature(ens.path(1), 12)).unwrap();
        assert!((a.w_end() / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn matches_direct_expansion_and_is_permutation_invariant() {
        let g = Grid::uniform(1.0, 2).unwrap();
        let ens = AugmentedPathEnsemble::new(
            g.clone(),
            vec![
                vec![augmented(&[0.5, -0.3], 0.4), augmented(&[-0.2, 0.8], -0.1)],
                vec![augmented(&[0.1, 0.6], -0.5), augmented(&[0.9, 0.0], 0.2)],
                vec![augmented(&[-0.7, 0.2], 0.0), augmented(&[0.3, 0.3], 0.6)],
            ],
        )
        .unwrap();
        let wiener = WienerSpec::new(
            g,
            vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
                DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.8]),
            ],
        )
        .unwrap();
        let grid = Grid::uniform(1.0, 128).unwrap();
        let (_, rep) = mmd_to_wiener(&ens, &wiener, &grid).unwrap();
        let mut mean = TruncatedTensor::zeros(2, 12);
        for k in 0..ens.len() {
            mean = mean.axpy(1.0 / 3.0, &signature(ens.path(k), 12)).unwrap();
        }
        let diff = mean.sub(&signature(wiener.triplet(), 12)).unwrap();
        let direct = diff.inner(&diff).unwrap();
        assert!((rep.mmd2 / direct - 1.0).abs() < 1e-2, "{} vs {direct}", rep.mmd2);

        let (_, perm) = mmd_to_wiener(&ens.permuted(&[2, 0, 1]), &wiener, &grid).unwrap();
        assert!((perm.mmd2 - rep.mmd2).abs() < 1e-12);
    }

    #[test]
    fn report_csv_layout() {
        let g = Grid::uniform(1.0, 1).unwrap();
        let ens = AugmentedPathEnsemble::new(g, vec![vec![vector(&[0.3])], vec![vector(&[-0.1])]]).unwrap();
        let (_, rep) = mmd_to_wiener(&ens, &WienerSpec::standard(1, 1.0).unwrap(), &Grid::uniform(1.0, 8).unwrap()).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "kind,j,k,value");
        assert_eq!(lines.len(), 1 + 1 + 2 + 3 + 2);
        assert!(lines[lines.len() - 1].starts_with("mmd2,,,"));
    }
}
