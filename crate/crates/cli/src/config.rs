//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use levy_sigkernel::characteristics::{area_tensor, JumpSpec, LevyTriplet, TripletPiece};
use levy_sigkernel::mmd::{AugmentedPathEnsemble, WienerSpec};
use levy_sigkernel::{Grid, TruncatedTensor};
use nalgebra::DMatrix;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Kernel,
    Mmd,
    Validate,
    Bounds,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(default)]
    pub triplets: Vec<TripletConfig>,
    pub grid: GridConfig,
    pub levels: Option<Levels>,
    pub mc: Option<McConfig>,
    pub output_dir: Option<PathBuf>,
    pub ensemble: Option<EnsembleConfig>,
    pub wiener: Option<WienerConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Number of uniform intervals in `s`; velocity breakpoints are added on top.
    pub s_points: usize,
    pub t_points: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Levels {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Depth of the velocities used as the untruncated reference.
    pub reference_depth: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletConfig {
    pub dim: usize,
    #[serde(default = "one")]
    pub state_depth: usize,
    /// Interval endpoints starting at 0; defaults to `[0, T]`.
    pub breakpoints: Option<Vec<f64>>,
    pub pieces: Vec<PieceConfig>,
}

fn one() -> usize {
    1
}

/// Antisymmetric level-2 entries `(i, j, v)`, meaning `v (e_ij − e_ji)`, letters from 1.
type AreaEntries = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    #[serde(default)]
    pub drift: Vec<f64>,
    #[serde(default)]
    pub area: AreaEntries,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub jumps: Option<JumpConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum JumpConfig {
    Gaussian {
        intensity: f64,
        covariance: Vec<Vec<f64>>,
    },
    Atomic {
        atoms: Vec<AtomConfig>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub weight: f64,
    pub vector: Vec<f64>,
    #[serde(default)]
    pub area: AreaEntries,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub breakpoints: Option<Vec<f64>>,
    /// `paths[k][i]`: derivative of path `k` on interval `i`.
    pub paths: Vec<Vec<PathPieceConfig>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathPieceConfig {
    pub drift: Vec<f64>,
    #[serde(default)]
    pub area: AreaEntries,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerConfig {
    pub breakpoints: Option<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("config error at `{path}`: {}", e.into_inner())
    })
}

impl Config {
    pub fn levels(&self) -> Result<&Levels> {
        self.levels
            .as_ref()
            .ok_or_else(|| anyhow!("config error: missing field `levels` required by this experiment"))
    }

    pub fn triplet(&self, k: usize) -> Result<LevyTriplet> {
        let cfg = self
            .triplets
            .get(k)
            .ok_or_else(|| anyhow!("config error: `triplets` needs at least {} entries", k + 1))?;
        cfg.build(self.grid.horizon)
            .with_context(|| format!("config error at `triplets[{k}]`"))
    }

    pub fn s_grid(&self) -> Result<Grid> {
        Ok(Grid::uniform(self.grid.horizon, self.grid.s_points)?)
    }

    pub fn t_grid(&self) -> Result<Grid> {
        Ok(Grid::uniform(self.grid.horizon, self.grid.t_points)?)
    }

    pub fn ensemble(&self) -> Result<AugmentedPathEnsemble> {
        let cfg = self
            .ensemble
            .as_ref()
            .ok_or_else(|| anyhow!("config error: missing field `ensemble`"))?;
        let grid = breakpoint_grid(&cfg.breakpoints, self.grid.horizon)?;
        let paths = cfg
            .paths
            .iter()
            .enumerate()
            .map(|(k, p)| {
                p.iter()
                    .enumerate()
                    .map(|(i, piece)| {
                        lie_element(&piece.drift, &piece.area, piece.drift.len(), 2)
                            .with_context(|| format!("config error at `ensemble.paths[{k}][{i}]`"))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        AugmentedPathEnsemble::new(grid, paths).context("config error at `ensemble`")
    }

    pub fn wiener(&self) -> Result<WienerSpec> {
        let cfg = self
            .wiener
            .as_ref()
            .ok_or_else(|| anyhow!("config error: missing field `wiener`"))?;
        let grid = breakpoint_grid(&cfg.breakpoints, self.grid.horizon)?;
        let cov = cfg
            .covariances
            .iter()
            .enumerate()
            .map(|(i, c)| matrix(c).with_context(|| format!("config error at `wiener.covariances[{i}]`")))
            .collect::<Result<Vec<_>>>()?;
        WienerSpec::new(grid, cov).context("config error at `wiener`")
    }
}

fn breakpoint_grid(points: &Option<Vec<f64>>, horizon: f64) -> Result<Grid> {
    Ok(match points {
        Some(p) => Grid::new(p.clone())?,
        None => Grid::new(vec![0.0, horizon])?,
    })
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        bail!("matrix must be square");
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn lie_element(vector: &[f64], area: &AreaEntries, dim: usize, depth: usize) -> Result<TruncatedTensor> {
    let mut x = TruncatedTensor::zeros(dim, depth);
    if !vector.is_empty() {
        if vector.len() != dim {
            bail!("expected {dim} vector components, found {}", vector.len());
        }
        x.level_mut(1).copy_from_slice(vector);
    }
    if !area.is_empty() {
        if depth < 2 {
            bail!("area entries need state_depth 2");
        }
        x = x.add(&area_tensor(dim, area)?)?;
    }
    Ok(x)
}

impl TripletConfig {
    pub fn build(&self, horizon: f64) -> Result<LevyTriplet> {
        let grid = breakpoint_grid(&self.breakpoints, horizon)?;
        let d = self.dim;
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (i, p) in self.pieces.iter().enumerate() {
            let ctx = || format!("pieces[{i}]");
            let drift = lie_element(&p.drift, &p.area, d, self.state_depth).with_context(ctx)?;
            let covariance = match &p.covariance {
                Some(c) => matrix(c).with_context(ctx)?,
                None => DMatrix::zeros(d, d),
            };
            let jumps = match &p.jumps {
                None => JumpSpec::None,
                Some(JumpConfig::Gaussian {
                    intensity,
                    covariance,
                }) => JumpSpec::GaussianCP {
                    intensity: *intensity,
                    covariance: matrix(covariance).with_context(ctx)?,
                },
                Some(JumpConfig::Atomic { atoms }) => JumpSpec::Atomic(
                    atoms
                        .iter()
                        .map(|a| Ok((a.weight, lie_element(&a.vector, &a.area, d, self.state_depth)?)))
                        .collect::<Result<Vec<_>>>()
                        .with_context(ctx)?,
                ),
            };
            pieces.push(TripletPiece::new(drift, covariance, jumps));
        }
        Ok(LevyTriplet::new(d, self.state_depth, grid, pieces)?)
    }
}
