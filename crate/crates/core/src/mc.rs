//! Monte Carlo ground truth for expected signatures and kernels.
//!
//! Paths are simulated as sequences of Lie-algebra increments and their
//! signatures are the ordered products of the increment exponentials, which is
//! the Marcus rule for jumps and a geometric scheme for the continuous part.
//!
//! Randomness comes from `ChaCha8Rng` seeded with the user seed. Path `p` uses
//! stream `p`, and interval `i` of the triplet grid starts at word position
//! `i << 32`, so every `(path, interval)` pair owns a fixed block of the key
//! stream. Estimates are therefore identical for any number of threads.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;

use crate::characteristics::{JumpSpec, LevyTriplet};
use crate::error::{Error, Result};
use crate::tensor::{tensor_len, word_from_index, LevelNorms, TruncatedTensor};

/// More expected jumps than this on one interval is rejected.
const MAX_EXPECTED_JUMPS: f64 = 1e6;

/// Seed offset separating the two processes in [`estimate_kernel`].
const SECOND_PROCESS_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Simulated increments, one sequence per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub dim: usize,
    pub paths: Vec<Vec<TruncatedTensor>>,
}

fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Per-interval simulation data.
struct PieceSampler {
    /// Drift with the small-jump compensator removed.
    drift: TruncatedTensor,
    diffusion: DMatrix<f64>,
    rate: f64,
    jumps: JumpSampler,
}

enum JumpSampler {
    None,
    Atomic { cumulative: Vec<f64>, atoms: Vec<TruncatedTensor> },
    Gaussian(DMatrix<f64>),
}

fn samplers(triplet: &LevyTriplet) -> Vec<PieceSampler> {
    let depth = triplet.state_depth();
    triplet
        .pieces()
        .iter()
        .map(|p| {
            let mut drift = p.drift.with_depth(depth);
            let (rate, jumps) = match &p.jumps {
                JumpSpec::None => (0.0, JumpSampler::None),
                JumpSpec::Atomic(atoms) => {
                    let mut cumulative = Vec::with_capacity(atoms.len());
                    let mut total = 0.0;
                    for (w, x) in atoms {
                        total += w;
                        cumulative.push(total);
                        if x.norm_max() <= 1.0 {
                            drift = drift.axpy(-w, &x.with_depth(depth)).expect("same dim");
                        }
                    }
                    let atoms = atoms.iter().map(|(_, x)| x.with_depth(depth)).collect();
                    (total, JumpSampler::Atomic { cumulative, atoms })
                }
                JumpSpec::GaussianCP {
                    intensity,
                    covariance,
                } => (*intensity, JumpSampler::Gaussian(sqrt_psd(covariance))),
            };
            PieceSampler {
                drift,
                diffusion: sqrt_psd(&p.covariance),
                rate,
                jumps,
            }
        })
        .collect()
}

fn gaussian_vector(rng: &mut ChaCha8Rng, factor: &DMatrix<f64>, scale: f64, out: &mut [f64]) {
    let d = factor.nrows();
    let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    for (i, o) in out.iter_mut().enumerate() {
        *o += scale * (0..d).map(|k| factor[(i, k)] * xi[k]).sum::<f64>();
    }
}

struct Simulator<'a> {
    triplet: &'a LevyTriplet,
    samplers: Vec<PieceSampler>,
    horizon: f64,
    steps: usize,
    seed: u64,
}

impl<'a> Simulator<'a> {
    fn new(triplet: &'a LevyTriplet, horizon: f64, steps: usize, seed: u64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("steps per interval must be positive".into()));
        }
        if !(horizon > 0.0) || horizon > triplet.horizon() * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                s: 0.0,
                t: horizon,
                start: 0.0,
                end: triplet.horizon(),
            });
        }
        let samplers = samplers(triplet);
        let pts = triplet.grid().points();
        for (i, s) in samplers.iter().enumerate() {
            if s.rate * (pts[i + 1] - pts[i]) > MAX_EXPECTED_JUMPS {
                return Err(Error::Unsupported(format!(
                    "jump intensity {} is too large to simulate",
                    s.rate
                )));
            }
        }
        Ok(Self {
            triplet,
            samplers,
            horizon,
            steps,
            seed,
        })
    }

    fn continuous(&self, rng: &mut ChaCha8Rng, s: &PieceSampler, h: f64) -> TruncatedTensor {
        let mut inc = s.drift.scale(h);
        gaussian_vector(rng, &s.diffusion, h.sqrt(), inc.level_mut(1));
        inc
    }

    fn jump(&self, rng: &mut ChaCha8Rng, s: &PieceSampler) -> TruncatedTensor {
        match &s.jumps {
            JumpSampler::None => unreachable!("no jumps at zero rate"),
            JumpSampler::Atomic { cumulative, atoms } => {
                let u = rng.random::<f64>() * s.rate;
                let k = cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[k].clone()
            }
            JumpSampler::Gaussian(factor) => {
                let mut x = TruncatedTensor::zeros(self.triplet.dim(), self.triplet.state_depth());
                gaussian_vector(rng, factor, 1.0, x.level_mut(1));
                x
            }
        }
    }

    /// Calls `emit` on every increment of path `index`, in time order.
    fn run<F: FnMut(TruncatedTensor)>(&self, index: usize, mut emit: F) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let pts = self.triplet.grid().points();
        for (i, s) in self.samplers.iter().enumerate() {
            let start = pts[i];
            if start >= self.horizon {
                break;
            }
            rng.set_word_pos((i as u128) << 32);
            let len = pts[i + 1].min(self.horizon) - start;
            let mut jump_times = Vec::new();
            if s.rate > 0.0 {
                let exp = Exp::new(s.rate).expect("positive rate");
                let mut clock: f64 = rng.sample(exp);
                while clock < len {
                    jump_times.push(clock);
                    clock += rng.sample(exp);
                }
            }
            let h = len / self.steps as f64;
            let mut next_jump = 0;
            for k in 0..self.steps {
                let mut at = k as f64 * h;
                let end = if k + 1 == self.steps { len } else { (k + 1) as f64 * h };
                while next_jump < jump_times.len() && jump_times[next_jump] < end {
                    let tj = jump_times[next_jump];
                    emit(self.continuous(&mut rng, s, tj - at));
                    emit(self.jump(&mut rng, s));
                    at = tj;
                    next_jump += 1;
                }
                emit(self.continuous(&mut rng, s, end - at));
            }
        }
    }

    fn signature(&self, index: usize, depth: usize) -> TruncatedTensor {
        let mut sig = TruncatedTensor::one(self.triplet.dim(), depth);
        self.run(index, |x| {
            let step = x.exp_to(depth).expect("increments have zero scalar part");
            sig = sig.mul(&step, depth).expect("same dim");
        });
        sig
    }
}

/// Simulates `n_paths` paths of `triplet` over its whole horizon.
pub fn simulate_paths(triplet: &LevyTriplet, n_paths: usize, steps_per_interval: usize, seed: u64) -> Result<PathSet> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    let sim = Simulator::new(triplet, triplet.horizon(), steps_per_interval, seed)?;
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut incs = Vec::new();
            sim.run(p, |x| incs.push(x));
            incs
        })
        .collect();
    Ok(PathSet {
        dim: triplet.dim(),
        paths,
    })
}

/// Ordered product of `exp(x)` over the increments, truncated at `depth`.
pub fn path_signature(increments: &[TruncatedTensor], dim: usize, depth: usize) -> Result<TruncatedTensor> {
    let mut sig = TruncatedTensor::one(dim, depth);
    for x in increments {
        if x.dim() != dim {
            return Err(Error::DimMismatch { left: dim, right: x.dim() });
        }
        sig = sig.mul(&x.exp_to(depth)?, depth)?;
    }
    Ok(sig)
}

/// Sample mean of truncated signatures with per-coefficient standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureEstimate {
    pub mean: TruncatedTensor,
    /// Standard error of every coefficient of `mean`.
    pub se: TruncatedTensor,
    pub n_paths: usize,
}

impl SignatureEstimate {
    /// Euclidean norm of the coefficient standard errors on each level.
    pub fn level_se(&self) -> LevelNorms {
        self.se.level_norms()
    }

    /// Rows `word,mean,se`; letters are joined by `-` and the empty word is `()`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "word,mean,se")?;
        let dim = self.mean.dim();
        let mut offset = 0;
        for n in 0..=self.mean.depth() {
            let count = dim.pow(n as u32);
            for k in 0..count {
                let word = word_from_index(k, n, dim);
                let label = if word.is_empty() {
                    "()".to_string()
                } else {
                    word.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("-")
                };
                let idx = offset + k;
                writeln!(out, "{label},{},{}", self.mean.as_slice()[idx], self.se.as_slice()[idx])?;
            }
            offset += count;
        }
        Ok(())
    }
}

/// First and second sample moments, optionally with the cross moments.
struct Moments {
    n: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
    outer: Option<Vec<f64>>,
}

impl Moments {
    fn new(len: usize, with_outer: bool) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; len],
            sq: vec![0.0; len],
            outer: with_outer.then(|| vec![0.0; len * len]),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for (k, v) in x.iter().enumerate() {
            self.sum[k] += v;
            self.sq[k] += v * v;
        }
        if let Some(outer) = &mut self.outer {
            let len = x.len();
            for (i, a) in x.iter().enumerate() {
                for (j, b) in x.iter().enumerate() {
                    outer[i * len + j] += a * b;
                }
            }
        }
    }

    fn merge(mut self, other: Moments) -> Self {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sq.iter_mut().zip(&other.sq) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (&mut self.outer, &other.outer) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }

    fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n as f64).collect()
    }

    /// Variance of the sample mean of each coefficient.
    fn mean_var(&self) -> Vec<f64> {
        let n = self.n as f64;
        if self.n < 2 {
            return vec![0.0; self.sum.len()];
        }
        self.sum
            .iter()
            .zip(&self.sq)
            .map(|(s, q)| ((q - s * s / n) / (n - 1.0)).max(0.0) / n)
            .collect()
    }

    /// Variance of the sample mean of `⟨X, c⟩`.
    fn projected_mean_var(&self, c: &[f64]) -> f64 {
        let outer = self.outer.as_ref().expect("cross moments were collected");
        let n = self.n as f64;
        if self.n < 2 {
            return 0.0;
        }
        let len = c.len();
        let mean = self.mean();
        let mut var = 0.0;
        for i in 0..len {
            for j in 0..len {
                let cov = (outer[i * len + j] - n * mean[i] * mean[j]) / (n - 1.0);
                var += c[i] * cov * c[j];
            }
        }
        var.max(0.0) / n
    }
}

/// Collects moments of `sample(i)` for `i < n` in fixed-size blocks, reduced in order.
fn block_moments<F: Fn(usize) -> Vec<f64> + Sync>(n: usize, len: usize, with_outer: bool, sample: F) -> Moments {
    let block = n.div_ceil(64).max(256);
    let blocks: Vec<Moments> = (0..n.div_ceil(block))
        .into_par_iter()
        .map(|b| {
            let mut m = Moments::new(len, with_outer);
            for i in b * block..((b + 1) * block).min(n) {
                m.push(&sample(i));
            }
            m
        })
        .collect();
    blocks
        .into_iter()
        .fold(Moments::new(len, with_outer), Moments::merge)
}

fn signature_moments(triplet: &LevyTriplet, t: f64, depth: usize, n_paths: usize, steps: usize, seed: u64, with_outer: bool) -> Result<Moments> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    let sim = Simulator::new(triplet, t, steps, seed)?;
    let len = tensor_len(triplet.dim(), depth);
    Ok(block_moments(n_paths, len, with_outer, |i| sim.signature(i, depth).into_vec()))
}

/// Sample mean of `Sig(γ)_{0,t}` truncated at `depth`.
pub fn estimate_expected_signature(
    triplet: &LevyTriplet,
    t: f64,
    depth: usize,
    n_paths: usize,
    steps: usize,
    seed: u64,
) -> Result<SignatureEstimate> {
    let m = signature_moments(triplet, t, depth, n_paths, steps, seed, false)?;
    let dim = triplet.dim();
    Ok(SignatureEstimate {
        mean: TruncatedTensor::from_flat(dim, depth, m.mean())?,
        se: TruncatedTensor::from_flat(dim, depth, m.mean_var().into_iter().map(f64::sqrt).collect())?,
        n_paths,
    })
}

/// Monte Carlo kernel estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEstimate {
    pub value: f64,
    pub se: f64,
}

/// `⟨E Sig(X)_t, E Sig(Y)_t⟩` from independent samples of both processes.
///
/// The standard error is the delta-method value `sqrt(μ_Yᵀ Σ_X μ_Y / n + μ_Xᵀ Σ_Y μ_X / n)`.
/// The second process uses a fixed offset of `seed`.
pub fn estimate_kernel(
    a: &LevyTriplet,
    b: &LevyTriplet,
    t: f64,
    depth: usize,
    n_paths: usize,
    steps: usize,
    seed: u64,
) -> Result<KernelEstimate> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch { left: a.dim(), right: b.dim() });
    }
    let ma = signature_moments(a, t, depth, n_paths, steps, seed, true)?;
    let mb = signature_moments(b, t, depth, n_paths, steps, seed.wrapping_add(SECOND_PROCESS_SEED), true)?;
    let (mu_a, mu_b) = (ma.mean(), mb.mean());
    let value = mu_a.iter().zip(&mu_b).map(|(x, y)| x * y).sum();
    let var = ma.projected_mean_var(&mu_b) + mb.projected_mean_var(&mu_a);
    Ok(KernelEstimate { value, se: var.sqrt() })
}

/// Importance-sampled `E[e^{|ξ|²/4} |ξ|^{2M}]` for `ξ ~ N(0, I_d)`, as `(mean, se)`.
///
/// Direct sampling has infinite variance, so `ξ` is drawn from `N(0, 2I)` with
/// likelihood ratio `2^{d/2} e^{-|ξ|²/4}`, leaving the estimator `2^{d/2} |ξ|^{2M}`.
pub fn mc_gaussian_mgf_moment(d: usize, m: usize, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if d == 0 || n_samples < 2 {
        return Err(Error::InvalidParameter(
            "need d >= 1 and at least two samples".into(),
        ));
    }
    let weight = 2f64.powf(d as f64 / 2.0);
    let per_stream = 1 << 12;
    let moments = block_moments(n_samples.div_ceil(per_stream), 2, false, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let (mut s, mut q) = (0.0, 0.0);
        for _ in b * per_stream..((b + 1) * per_stream).min(n_samples) {
            let r2: f64 = (0..d)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    2.0 * z * z
                })
                .sum();
            let x = weight * r2.powi(m as i32);
            s += x;
            q += x * x;
        }
        vec![s, q]
    });
    let n = n_samples as f64;
    let mean = moments.sum[0] / n;
    let var = ((moments.sum[1] - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}
