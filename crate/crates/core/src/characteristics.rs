//! Differential triplets `(b, a, K)` of inhomogeneous Lévy processes and
//! their characteristic velocities.
//!
//! Everything is piecewise constant in time on a [`Grid`], which keeps every
//! time integral exact.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::special::{gauss_legendre, integrate, ln_gamma_half};
use crate::tensor::{word_index, TruncatedTensor};

const SYM_TOL: f64 = 1e-12;

/// A time grid with one velocity tensor per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseVelocity {
    grid: Grid,
    pieces: Vec<TruncatedTensor>,
}

impl PiecewiseVelocity {
    pub fn new(grid: Grid, pieces: Vec<TruncatedTensor>) -> Result<Self> {
        if pieces.len() != grid.n_intervals() {
            return Err(Error::InvalidParameter(format!(
                "{} velocity pieces for {} intervals",
                pieces.len(),
                grid.n_intervals()
            )));
        }
        let dim = pieces[0].dim();
        let depth = pieces.iter().map(TruncatedTensor::depth).max().unwrap_or(0);
        let mut padded = Vec::with_capacity(pieces.len());
        for p in pieces {
            if p.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
            if p.scalar_part().abs() > 1e-12 {
                return Err(Error::ScalarPartError {
                    expected: 0.0,
                    found: p.scalar_part(),
                });
            }
            if !p.is_finite() {
                return Err(Error::InvalidParameter(
                    "velocity coefficients must be finite".into(),
                ));
            }
            let mut p = p.with_depth(depth);
            p.as_mut_slice()[0] = 0.0;
            padded.push(p);
        }
        Ok(Self {
            grid,
            pieces: padded,
        })
    }

    /// Constant velocity `x` on `[0, horizon]`.
    pub fn constant(x: TruncatedTensor, horizon: f64) -> Result<Self> {
        Self::new(Grid::new(vec![0.0, horizon])?, vec![x])
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn depth(&self) -> usize {
        self.pieces[0].depth()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pieces(&self) -> &[TruncatedTensor] {
        &self.pieces
    }

    pub fn horizon(&self) -> f64 {
        self.grid.end()
    }

    /// Piecewise `pi_(0,n)`.
    pub fn truncate(&self, n: usize) -> Self {
        self.map(|p| p.truncate(n))
    }

    /// Pads or truncates every piece to `depth`.
    pub fn with_depth(&self, depth: usize) -> Self {
        self.map(|p| p.with_depth(depth))
    }

    pub fn dilate(&self, lambda: f64) -> Self {
        self.map(|p| p.dilate(lambda))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|p| p.scale(alpha))
    }

    fn map<F: Fn(&TruncatedTensor) -> TruncatedTensor>(&self, f: F) -> Self {
        Self {
            grid: self.grid.clone(),
            pieces: self.pieces.iter().map(f).collect(),
        }
    }

    pub(crate) fn check_span(&self, s: f64, t: f64) -> Result<()> {
        let tol = 1e-12 * self.horizon().max(1.0);
        if !(s >= 0.0 && s <= t && t <= self.horizon() + tol) {
            return Err(Error::OutOfRange {
                s,
                t,
                start: 0.0,
                end: self.horizon(),
            });
        }
        Ok(())
    }

    /// Pieces overlapping `[s, t]` with the overlap lengths, in time order.
    pub fn segments(&self, s: f64, t: f64) -> Result<Vec<(f64, &TruncatedTensor)>> {
        self.check_span(s, t)?;
        let pts = self.grid.points();
        Ok(self
            .pieces
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let lo = pts[i].max(s);
                let hi = pts[i + 1].min(t);
                (hi > lo).then_some((hi - lo, p))
            })
            .collect())
    }

    /// `∫_s^t g(y(u)) du`, exact for piecewise-constant velocities.
    pub fn integrate<F: Fn(&TruncatedTensor) -> f64>(&self, s: f64, t: f64, g: F) -> Result<f64> {
        Ok(self.segments(s, t)?.into_iter().map(|(dt, p)| dt * g(p)).sum())
    }

    /// `∫_s^t ||y||_1`.
    pub fn mass(&self, s: f64, t: f64) -> Result<f64> {
        self.integrate(s, t, TruncatedTensor::norm1)
    }

    /// For each interval of `grid`, the index of the velocity piece active on it.
    pub fn cell_pieces(&self, grid: &Grid) -> Result<Vec<usize>> {
        self.grid.cell_map(grid)
    }
}

/// Jump part of one interval of a triplet.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpSpec {
    None,
    /// Finitely many atoms `(weight, jump)`.
    Atomic(Vec<(f64, TruncatedTensor)>),
    /// Compound Poisson with centred Gaussian jumps on `V`.
    GaussianCP {
        intensity: f64,
        covariance: DMatrix<f64>,
    },
}

impl JumpSpec {
    pub fn is_none(&self) -> bool {
        match self {
            JumpSpec::None => true,
            JumpSpec::Atomic(atoms) => atoms.iter().all(|(w, _)| *w == 0.0),
            JumpSpec::GaussianCP { intensity, .. } => *intensity == 0.0,
        }
    }
}

/// Characteristics of a single interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletPiece {
    /// `b`, or `b + 𝔞` when the state depth is 2.
    pub drift: TruncatedTensor,
    /// Covariance of the Brownian part on `V`.
    pub covariance: DMatrix<f64>,
    pub jumps: JumpSpec,
}

impl TripletPiece {
    pub fn new(drift: TruncatedTensor, covariance: DMatrix<f64>, jumps: JumpSpec) -> Self {
        Self {
            drift,
            covariance,
            jumps,
        }
    }

    pub fn drift_only(drift: TruncatedTensor) -> Self {
        let d = drift.dim();
        Self::new(drift, DMatrix::zeros(d, d), JumpSpec::None)
    }

    pub fn brownian(covariance: DMatrix<f64>) -> Self {
        let d = covariance.nrows();
        Self::new(TruncatedTensor::zeros(d, 1), covariance, JumpSpec::None)
    }
}

/// `a = sum_k sigma_k sigma_k^T`.
pub fn covariance_from_factors(dim: usize, factors: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(dim, dim);
    for sigma in factors {
        if sigma.len() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: sigma.len(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(sigma);
        a += &v * v.transpose();
    }
    Ok(a)
}

fn check_psd(m: &DMatrix<f64>, dim: usize, what: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::InvalidTriplet(format!(
            "{what} must be {dim}x{dim}, found {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidTriplet(format!("{what} is not finite")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > SYM_TOL * scale {
        return Err(Error::InvalidTriplet(format!("{what} is not symmetric")));
    }
    let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-10 * scale {
        return Err(Error::InvalidTriplet(format!(
            "{what} is not positive semidefinite (eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

/// Checks that `x` lives in `T^{depth}` with zero scalar part and antisymmetric level 2.
fn check_lie(x: &TruncatedTensor, dim: usize, depth: usize, what: &str) -> Result<TruncatedTensor> {
    if x.dim() != dim {
        return Err(Error::DimMismatch {
            left: dim,
            right: x.dim(),
        });
    }
    if !x.is_finite() {
        return Err(Error::InvalidTriplet(format!("{what} is not finite")));
    }
    if x.scalar_part().abs() > SYM_TOL {
        return Err(Error::InvalidTriplet(format!(
            "{what} must have zero scalar part"
        )));
    }
    if (depth + 1..=x.depth()).any(|n| x.level(n).iter().any(|&c| c != 0.0)) {
        return Err(Error::InvalidTriplet(format!(
            "{what} has levels above the state depth {depth}"
        )));
    }
    let y = x.with_depth(depth);
    if depth >= 2 {
        let l2 = y.level(2);
        let scale = l2.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in 0..dim {
                if (l2[i * dim + j] + l2[j * dim + i]).abs() > SYM_TOL * scale {
                    return Err(Error::InvalidTriplet(format!(
                        "level 2 of {what} is not antisymmetric"
                    )));
                }
            }
        }
    }
    Ok(y)
}

/// Differential characteristics of an inhomogeneous Lévy process in `𝔤^{N0}(R^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriplet {
    dim: usize,
    state_depth: usize,
    grid: Grid,
    pieces: Vec<TripletPiece>,
}

impl LevyTriplet {
    pub fn new(dim: usize, state_depth: usize, grid: Grid, pieces: Vec<TripletPiece>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTriplet("dimension must be positive".into()));
        }
        if !(1..=2).contains(&state_depth) {
            return Err(Error::InvalidTriplet(format!(
                "state depth {state_depth} not in {{1, 2}}"
            )));
        }
        if pieces.len() != grid.n_intervals() {
            return Err(Error::InvalidTriplet(format!(
                "{} pieces for {} intervals",
                pieces.len(),
                grid.n_intervals()
            )));
        }
        let mut checked = Vec::with_capacity(pieces.len());
        for p in pieces {
            let drift = check_lie(&p.drift, dim, state_depth, "drift")?;
            check_psd(&p.covariance, dim, "diffusion covariance")?;
            let jumps = match p.jumps {
                JumpSpec::None => JumpSpec::None,
                JumpSpec::Atomic(atoms) => {
                    let mut out = Vec::with_capacity(atoms.len());
                    for (w, x) in atoms {
                        if !(w >= 0.0 && w.is_finite()) {
                            return Err(Error::InvalidTriplet(format!(
                                "atom weight {w} must be finite and non-negative"
                            )));
                        }
                        out.push((w, check_lie(&x, dim, state_depth, "jump")?));
                    }
                    JumpSpec::Atomic(out)
                }
                JumpSpec::GaussianCP {
                    intensity,
                    covariance,
                } => {
                    if !(intensity >= 0.0 && intensity.is_finite()) {
                        return Err(Error::InvalidTriplet(format!(
                            "jump intensity {intensity} must be finite and non-negative"
                        )));
                    }
                    check_psd(&covariance, dim, "jump covariance")?;
                    JumpSpec::GaussianCP {
                        intensity,
                        covariance,
                    }
                }
            };
            checked.push(TripletPiece {
                drift,
                covariance: p.covariance,
                jumps,
            });
        }
        Ok(Self {
            dim,
            state_depth,
            grid,
            pieces: checked,
        })
    }

    /// The zero process on `[0, horizon]`.
    pub fn zero(dim: usize, horizon: f64) -> Result<Self> {
        Self::new(
            dim,
            1,
            Grid::new(vec![0.0, horizon])?,
            vec![TripletPiece::drift_only(TruncatedTensor::zeros(dim, 1))],
        )
    }

    /// Brownian motion with constant covariance on `[0, horizon]`.
    pub fn brownian(covariance: DMatrix<f64>, horizon: f64) -> Result<Self> {
        let dim = covariance.nrows();
        Self::new(
            dim,
            1,
            Grid::new(vec![0.0, horizon])?,
            vec![TripletPiece::brownian(covariance)],
        )
    }

    /// A deterministic path with piecewise-constant derivative.
    pub fn deterministic(grid: Grid, drifts: Vec<TruncatedTensor>) -> Result<Self> {
        let dim = drifts
            .first()
            .map(TruncatedTensor::dim)
            .ok_or_else(|| Error::InvalidTriplet("no drift pieces".into()))?;
        let depth = drifts.iter().map(|d| d.depth()).max().unwrap_or(1).clamp(1, 2);
        let pieces = drifts.into_iter().map(TripletPiece::drift_only).collect();
        Self::new(dim, depth, grid, pieces)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state_depth(&self) -> usize {
        self.state_depth
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pieces(&self) -> &[TripletPiece] {
        &self.pieces
    }

    pub fn horizon(&self) -> f64 {
        self.grid.end()
    }

    pub fn is_continuous(&self) -> bool {
        self.pieces.iter().all(|p| p.jumps.is_none())
    }
}

/// `E[xi^{⊗n}]` for `xi ~ N(0, cov)` as a flat level-`n` array, via the Isserlis pairing recursion.
pub fn gaussian_moment(cov: &DMatrix<f64>, n: usize) -> Vec<f64> {
    let d = cov.nrows();
    let mut prev = vec![1.0]; // level n-2
    if n % 2 == 1 {
        return vec![0.0; d.pow(n as u32)];
    }
    let mut letters = vec![0usize; n];
    for m in (2..=n).step_by(2) {
        let len = d.pow(m as u32);
        let mut cur = vec![0.0; len];
        for (idx, slot) in cur.iter_mut().enumerate() {
            let mut rem = idx;
            for l in letters[..m].iter_mut().rev() {
                *l = rem % d;
                rem /= d;
            }
            let last = letters[m - 1];
            let mut acc = 0.0;
            for k in 0..m - 1 {
                let c = cov[(letters[k], last)];
                if c == 0.0 {
                    continue;
                }
                let reduced = letters[..m - 1]
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .fold(0usize, |a, (_, &l)| a * d + l);
                acc += c * prev[reduced];
            }
            *slot = acc;
        }
        prev = cur;
    }
    prev
}

fn piece_velocity(piece: &TripletPiece, dim: usize, depth: usize) -> TruncatedTensor {
    let mut y = piece.drift.with_depth(depth);
    if depth >= 2 {
        let lvl = y.level_mut(2);
        for i in 0..dim {
            for j in 0..dim {
                lvl[i * dim + j] += 0.5 * piece.covariance[(i, j)];
            }
        }
    }
    match &piece.jumps {
        JumpSpec::None => {}
        JumpSpec::Atomic(atoms) => {
            for (w, x) in atoms {
                if *w == 0.0 {
                    continue;
                }
                let mut e = x.exp_to(depth).expect("jumps have zero scalar part");
                e.as_mut_slice()[0] -= 1.0;
                if x.norm_max() <= 1.0 {
                    e = e.sub(x).expect("same dimension");
                }
                y = y.axpy(*w, &e).expect("same dimension");
            }
        }
        JumpSpec::GaussianCP {
            intensity,
            covariance,
        } => {
            let mut factorial = 1.0;
            for n in 1..=depth {
                factorial *= n as f64;
                if n % 2 == 1 {
                    continue;
                }
                let moment = gaussian_moment(covariance, n);
                for (c, m) in y.level_mut(n).iter_mut().zip(moment) {
                    *c += intensity * m / factorial;
                }
            }
        }
    }
    y
}

/// Characteristic velocity `b + a/2 + ∫(exp(x) - 1 - x 1{|x| <= 1}) K(dx)`, truncated at depth `depth`.
pub fn characteristic_velocity(triplet: &LevyTriplet, depth: usize) -> Result<PiecewiseVelocity> {
    if depth < triplet.state_depth {
        return Err(Error::DepthTooSmall {
            depth,
            required: triplet.state_depth,
        });
    }
    let pieces = triplet
        .pieces
        .iter()
        .map(|p| piece_velocity(p, triplet.dim, depth))
        .collect();
    PiecewiseVelocity::new(triplet.grid.clone(), pieces)
}

/// `E[1{|xi| > 1} (e^{lambda |xi|} - 1)]` for `xi ~ N(0, cov)`.
///
/// Writing `xi = Q diag(sqrt(mu)) R theta` with `R` chi distributed and `theta`
/// uniform on the sphere reduces this to a radial integral averaged over
/// directions. The directional average is exact in one dimension, uses a
/// spectral trapezoid rule in two and a product rule in three; for anisotropic
/// covariances in higher dimension the largest eigenvalue is used, which gives an
/// upper bound.
pub fn gaussian_large_jump_moment(cov: &DMatrix<f64>, lambda: f64) -> f64 {
    let d = cov.nrows();
    let mu: Vec<f64> = cov
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|m| m.max(0.0))
        .collect();
    let mu_max = mu.iter().copied().fold(0.0, f64::max);
    if mu_max == 0.0 {
        return 0.0;
    }
    let rule = gauss_legendre(16);
    let ln_norm = (d as f64 / 2.0 - 1.0) * 2f64.ln() + ln_gamma_half(d);
    let radial = |scale: f64| -> f64 {
        if scale <= 0.0 {
            return 0.0;
        }
        let lo = 1.0 / scale;
        let hi = lo.max(lambda * scale) + 40.0;
        let panels = ((hi - lo) / 0.5).ceil().max(1.0) as usize;
        integrate(
            |r| {
                (lambda * r * scale).exp_m1()
                    * ((d as f64 - 1.0) * r.ln() - 0.5 * r * r - ln_norm).exp()
            },
            lo,
            hi,
            panels,
            &rule,
        )
    };
    let isotropic = mu.iter().all(|m| (m - mu_max).abs() <= 1e-12 * mu_max);
    if d == 1 || isotropic {
        return radial(mu_max.sqrt());
    }
    let n_phi = 64;
    let phis: Vec<f64> = (0..n_phi)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n_phi as f64)
        .collect();
    match d {
        2 => {
            phis.iter()
                .map(|p| radial((mu[0] * p.cos().powi(2) + mu[1] * p.sin().powi(2)).sqrt()))
                .sum::<f64>()
                / n_phi as f64
        }
        3 => {
            let (xs, ws) = gauss_legendre(32);
            let mut total = 0.0;
            for (u, wu) in xs.iter().zip(&ws) {
                let sin2 = 1.0 - u * u;
                let inner: f64 = phis
                    .iter()
                    .map(|p| {
                        radial(
                            (mu[0] * sin2 * p.cos().powi(2)
                                + mu[1] * sin2 * p.sin().powi(2)
                                + mu[2] * u * u)
                                .sqrt(),
                        )
                    })
                    .sum();
                total += 0.5 * wu * inner / n_phi as f64;
            }
            total
        }
        _ => radial(mu_max.sqrt()),
    }
}

/// `∫_0^T sum_i λ_i 1{|x_i| > 1} (e^{||δ_λ x_i||_1} - 1) dt` over the triplet's jump measure.
///
/// Returns `+inf` if the integrand overflows.
pub fn exponential_moment_value(triplet: &LevyTriplet, lambda: f64, horizon: f64) -> f64 {
    let pts = triplet.grid.points();
    let mut total = 0.0;
    for (i, piece) in triplet.pieces.iter().enumerate() {
        let dt = (pts[i + 1].min(horizon) - pts[i]).max(0.0);
        if dt == 0.0 {
            continue;
        }
        let rate = match &piece.jumps {
            JumpSpec::None => 0.0,
            JumpSpec::Atomic(atoms) => atoms
                .iter()
                .filter(|(_, x)| x.norm_max() > 1.0)
                .map(|(w, x)| w * x.dilate(lambda).norm1().exp_m1())
                .sum(),
            JumpSpec::GaussianCP {
                intensity,
                covariance,
            } => {
                if *intensity == 0.0 {
                    0.0
                } else {
                    intensity * gaussian_large_jump_moment(covariance, lambda)
                }
            }
        };
        total += dt * rate;
    }
    total
}

/// The triplet of `δ_λ γ`.
pub fn dilate_triplet(triplet: &LevyTriplet, lambda: f64) -> Result<LevyTriplet> {
    let mut pieces = Vec::with_capacity(triplet.pieces.len());
    for p in &triplet.pieces {
        let mut drift = p.drift.clone();
        let jumps = match &p.jumps {
            JumpSpec::None => JumpSpec::None,
            JumpSpec::Atomic(atoms) => {
                let mut out = Vec::with_capacity(atoms.len());
                for (w, x) in atoms {
                    let dx = x.dilate(lambda);
                    let before = (x.norm_max() <= 1.0) as i32 as f64;
                    let after = (dx.norm_max() <= 1.0) as i32 as f64;
                    // the truncation function moves x between the small and large regimes
                    drift = drift.axpy(w * (after - before), x)?;
                    out.push((*w, dx));
                }
                JumpSpec::Atomic(out)
            }
            JumpSpec::GaussianCP {
                intensity,
                covariance,
            } => {
                if triplet.state_depth != 1 {
                    return Err(Error::Unsupported(
                        "dilating Gaussian jumps with state depth 2".into(),
                    ));
                }
                // the compensator correction vanishes by symmetry
                JumpSpec::GaussianCP {
                    intensity: *intensity,
                    covariance: covariance * (lambda * lambda),
                }
            }
        };
        pieces.push(TripletPiece {
            drift: drift.dilate(lambda),
            covariance: &p.covariance * (lambda * lambda),
            jumps,
        });
    }
    LevyTriplet::new(triplet.dim, triplet.state_depth, triplet.grid.clone(), pieces)
}

/// Level-2 antisymmetric tensor `sum_{i<j} v_ij (e_ij - e_ji)` helper used by tests and the CLI.
pub fn area_tensor(dim: usize, entries: &[(usize, usize, f64)]) -> Result<TruncatedTensor> {
    let mut t = TruncatedTensor::zeros(dim, 2);
    for &(i, j, v) in entries {
        let ij = word_index(&[i, j], dim)?;
        let ji = word_index(&[j, i], dim)?;
        let lvl = t.level_mut(2);
        lvl[ij] += v;
        lvl[ji] -= v;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(word: &[usize], dim: usize, depth: usize) -> TruncatedTensor {
        TruncatedTensor::basis(dim, depth, word).unwrap()
    }

    fn one_by_one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn brownian_velocity_is_half_the_covariance() {
        let t = LevyTriplet::brownian(one_by_one(1.0), 1.0).unwrap();
        let v = characteristic_velocity(&t, 2).unwrap();
        assert_eq!(v.pieces()[0], e(&[1, 1], 1, 2).scale(0.5));
    }

    #[test]
    fn smooth_path_velocity_is_the_derivative() {
        let b = e(&[1], 2, 1).axpy(-0.5, &e(&[2], 2, 1)).unwrap();
        let t = LevyTriplet::deterministic(Grid::uniform(1.0, 1).unwrap(), vec![b.clone()]).unwrap();
        let v = characteristic_velocity(&t, 3).unwrap();
        assert_eq!(v.pieces()[0], b.with_depth(3));
    }

    #[test]
    fn gaussian_jump_velocity_levels() {
        let piece = TripletPiece::new(
            TruncatedTensor::zeros(1, 1),
            one_by_one(0.0),
            JumpSpec::GaussianCP {
                intensity: 1.0,
                covariance: one_by_one(1.0),
            },
        );
        let t = LevyTriplet::new(1, 1, Grid::uniform(1.0, 1).unwrap(), vec![piece]).unwrap();
        let v = characteristic_velocity(&t, 4).unwrap();
        let expected = [0.0, 0.0, 0.5, 0.0, 0.125];
        for (a, b) in v.pieces()[0].as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn isserlis_matches_brute_force_pairings() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m4 = gaussian_moment(&cov, 4);
        // E[x1 x2 x1 x2] = s11 s22 + 2 s12^2
        let idx = word_index(&[1, 2, 1, 2], 2).unwrap();
        assert!((m4[idx] - (2.0 * 1.0 + 2.0 * 0.09)).abs() < 1e-14);
        // E[x1^4] = 3 s11^2
        assert!((m4[0] - 12.0).abs() < 1e-14);
        assert!(gaussian_moment(&cov, 3).iter().all(|&c| c == 0.0));
    }

    #[test]
    fn depth_and_covariance_validation() {
        let area = area_tensor(2, &[(1, 2, 1.0)]).unwrap();
        let t = LevyTriplet::deterministic(Grid::uniform(1.0, 1).unwrap(), vec![area]).unwrap();
        assert_eq!(
            characteristic_velocity(&t, 1),
            Err(Error::DepthTooSmall {
                depth: 1,
                required: 2
            })
        );
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            LevyTriplet::brownian(bad, 1.0),
            Err(Error::InvalidTriplet(_))
        ));
        let sym = e(&[1, 1], 2, 2);
        assert!(LevyTriplet::deterministic(Grid::uniform(1.0, 1).unwrap(), vec![sym]).is_err());
    }

    #[test]
    fn exponential_moment_examples() {
        let z = LevyTriplet::zero(1, 1.0).unwrap();
        assert_eq!(exponential_moment_value(&z, 1.0, 1.0), 0.0);

        let atom = |x: f64| {
            let p = TripletPiece::new(
                TruncatedTensor::zeros(1, 1),
                one_by_one(0.0),
                JumpSpec::Atomic(vec![(1.0, e(&[1], 1, 1).scale(x))]),
            );
            LevyTriplet::new(1, 1, Grid::uniform(1.0, 1).unwrap(), vec![p]).unwrap()
        };
        let v = exponential_moment_value(&atom(2.0), 1.0, 1.0);
        assert!((v - (2f64.exp() - 1.0)).abs() < 1e-14);
        assert_eq!(exponential_moment_value(&atom(0.9), 1.0, 1.0), 0.0);
    }

    #[test]
    fn gaussian_large_jump_moment_quadrature() {
        // d = 1: 2 ∫_1^∞ (e^{λx} - 1) φ(x) dx in closed form
        let lambda: f64 = 0.7;
        let phi_tail = |a: f64| 0.5 * libm_erfc(a / 2f64.sqrt());
        let exact = 2.0 * ((0.5 * lambda * lambda).exp() * phi_tail(1.0 - lambda) - phi_tail(1.0));
        let got = gaussian_large_jump_moment(&one_by_one(1.0), lambda);
        assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");

        // an anisotropic 2-d covariance lies between its isotropic envelopes
        let lo = gaussian_large_jump_moment(&DMatrix::from_diagonal_element(2, 2, 0.5), 1.0);
        let hi = gaussian_large_jump_moment(&DMatrix::from_diagonal_element(2, 2, 2.0), 1.0);
        let mid = gaussian_large_jump_moment(
            &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]),
            1.0,
        );
        assert!(lo < mid && mid < hi);

        // the 3-d product rule agrees with the isotropic radial formula
        let iso = gaussian_large_jump_moment(&DMatrix::from_diagonal_element(3, 3, 1.0), 1.0);
        let near = gaussian_large_jump_moment(
            &DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0 + 1e-9, 0.0, 0.0, 0.0, 1.0]),
            1.0,
        );
        assert!((iso - near).abs() < 1e-7 * iso);
    }

    /// Complementary error function by direct quadrature.
    fn libm_erfc(x: f64) -> f64 {
        let rule = gauss_legendre(16);
        let tail = integrate(
            |t| (-t * t).exp(),
            x,
            x.max(0.0) + 30.0,
            400,
            &rule,
        );
        2.0 / std::f64::consts::PI.sqrt() * tail
    }

    #[test]
    fn dilation_examples() {
        let t = LevyTriplet::brownian(one_by_one(0.3), 1.0).unwrap();
        let d = dilate_triplet(&t, 2.0).unwrap();
        assert!((d.pieces()[0].covariance[(0, 0)] - 1.2).abs() < 1e-15);
        assert_eq!(dilate_triplet(&t, 1.0).unwrap(), t);

        let p = TripletPiece::new(
            TruncatedTensor::zeros(1, 1),
            one_by_one(0.0),
            JumpSpec::Atomic(vec![(1.0, e(&[1], 1, 1).scale(0.8))]),
        );
        let t = LevyTriplet::new(1, 1, Grid::uniform(1.0, 1).unwrap(), vec![p]).unwrap();
        let d = dilate_triplet(&t, 2.0).unwrap();
        // 0.8 was small and 1.6 is large: the compensator δ_2(0.8 e_1) moves into the drift
        assert!((d.pieces()[0].drift.coeff(&[1]).unwrap() + 1.6).abs() < 1e-15);
        let JumpSpec::Atomic(atoms) = &d.pieces()[0].jumps else {
            panic!("atomic jumps expected")
        };
        assert!((atoms[0].1.coeff(&[1]).unwrap() - 1.6).abs() < 1e-15);
        let lhs = characteristic_velocity(&d, 5).unwrap();
        let rhs = characteristic_velocity(&t, 5).unwrap().dilate(2.0);
        assert!(lhs.pieces()[0].max_abs_diff(&rhs.pieces()[0]) < 1e-12);
    }

    #[test]
    fn gaussian_dilation_needs_state_depth_one() {
        let p = TripletPiece::new(
            TruncatedTensor::zeros(2, 2),
            DMatrix::zeros(2, 2),
            JumpSpec::GaussianCP {
                intensity: 1.0,
                covariance: DMatrix::identity(2, 2),
            },
        );
        let t = LevyTriplet::new(2, 2, Grid::uniform(1.0, 1).unwrap(), vec![p]).unwrap();
        assert!(matches!(dilate_triplet(&t, 2.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cell_pieces_require_refinement() {
        let v = PiecewiseVelocity::new(
            Grid::new(vec![0.0, 0.5, 1.0]).unwrap(),
            vec![e(&[1], 1, 1), e(&[1], 1, 1).scale(2.0)],
        )
        .unwrap();
        assert_eq!(
            v.cell_pieces(&Grid::uniform(1.0, 4).unwrap()).unwrap(),
            vec![0, 0, 1, 1]
        );
        assert!(matches!(
            v.cell_pieces(&Grid::uniform(1.0, 3).unwrap()),
            Err(Error::GridMismatch(_))
        ));
        assert!((v.mass(0.25, 1.0).unwrap() - 1.25).abs() < 1e-15);
    }
}
