//! Dense truncated tensor algebra `T^N(R^d)`.
//!
//! A [`TruncatedTensor`] stores the levels `0..=depth` back to back in one
//! flat buffer. Level `n` holds `d^n` coefficients and the word
//! `i_1 ... i_n` (letters in `1..=d`) lives at the base-`d` positional index
//! `sum_k (i_k - 1) d^(n-k)` inside its level. All binary operations accept
//! operands of different depths; missing levels are treated as zero.

use crate::error::{Error, Result};

/// Absolute tolerance used when checking the scalar part of exp/log/inverse arguments.
const SCALAR_TOL: f64 = 1e-12;

/// Flat index of a word inside its level.
pub fn word_index(word: &[usize], dim: usize) -> Result<usize> {
    word.iter().try_fold(0usize, |acc, &letter| {
        if letter == 0 || letter > dim {
            Err(Error::InvalidWord { letter, dim })
        } else {
            Ok(acc * dim + (letter - 1))
        }
    })
}

/// Inverse of [`word_index`] for words of length `len`.
pub fn word_from_index(mut index: usize, len: usize, dim: usize) -> Vec<usize> {
    let mut word = vec![0; len];
    for slot in word.iter_mut().rev() {
        *slot = index % dim + 1;
        index /= dim;
    }
    word
}

fn level_offset(dim: usize, n: usize) -> usize {
    if dim == 1 {
        n
    } else {
        (dim.pow(n as u32) - 1) / (dim - 1)
    }
}

/// Number of coefficients in `T^depth(R^dim)`.
pub fn tensor_len(dim: usize, depth: usize) -> usize {
    level_offset(dim, depth + 1)
}

/// [`tensor_len`], or `None` when it does not fit in a `usize`.
pub fn checked_tensor_len(dim: usize, depth: usize) -> Option<usize> {
    if dim <= 1 {
        return Some(if dim == 1 { depth + 1 } else { 1 });
    }
    let top = dim.checked_pow(u32::try_from(depth + 1).ok()?)?;
    Some((top - 1) / (dim - 1))
}

/// Euclidean norms of the individual levels of a tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelNorms {
    values: Vec<f64>,
}

impl LevelNorms {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, n: usize) -> f64 {
        self.values.get(n).copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    depth: usize,
    coeffs: Vec<f64>,
}

impl TruncatedTensor {
    pub fn zeros(dim: usize, depth: usize) -> Self {
        assert!(dim >= 1, "alphabet size must be positive");
        Self {
            dim,
            depth,
            coeffs: vec![0.0; tensor_len(dim, depth)],
        }
    }

    /// The unit `1 = e_()`.
    pub fn one(dim: usize, depth: usize) -> Self {
        Self::scalar(dim, depth, 1.0)
    }

    pub fn scalar(dim: usize, depth: usize, value: f64) -> Self {
        let mut t = Self::zeros(dim, depth);
        t.coeffs[0] = value;
        t
    }

    /// The basis tensor `e_w`, stored at depth `max(depth, |w|)`.
    pub fn basis(dim: usize, depth: usize, word: &[usize]) -> Result<Self> {
        let idx = word_index(word, dim)?;
        let mut t = Self::zeros(dim, depth.max(word.len()));
        t.level_mut(word.len())[idx] = 1.0;
        Ok(t)
    }

    /// Builds a tensor from explicit per-level coefficient arrays.
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if levels.is_empty() {
            return Err(Error::InvalidParameter("at least level 0 is required".into()));
        }
        let depth = levels.len() - 1;
        let mut coeffs = Vec::with_capacity(tensor_len(dim, depth));
        for (n, level) in levels.into_iter().enumerate() {
            let expected = dim.pow(n as u32);
            if level.len() != expected {
                return Err(Error::InvalidParameter(format!(
                    "level {n} has {} coefficients, expected {expected}",
                    level.len()
                )));
            }
            coeffs.extend(level);
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("coefficients must be finite".into()));
        }
        Ok(Self { dim, depth, coeffs })
    }

    /// Builds a tensor from a flat coefficient buffer laid out level after level.
    pub fn from_flat(dim: usize, depth: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if coeffs.len() != tensor_len(dim, depth) {
            return Err(Error::InvalidParameter(format!(
                "flat buffer has {} coefficients, expected {}",
                coeffs.len(),
                tensor_len(dim, depth)
            )));
        }
        Ok(Self { dim, depth, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficients of level `n`; empty above the stored depth.
    pub fn level(&self, n: usize) -> &[f64] {
        if n > self.depth {
            return &[];
        }
        let start = level_offset(self.dim, n);
        &self.coeffs[start..start + self.dim.pow(n as u32)]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        assert!(n <= self.depth, "level {n} above depth {}", self.depth);
        let start = level_offset(self.dim, n);
        let len = self.dim.pow(n as u32);
        &mut self.coeffs[start..start + len]
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, word: &[usize]) -> Result<f64> {
        let idx = word_index(word, self.dim)?;
        Ok(self.level(word.len()).get(idx).copied().unwrap_or(0.0))
    }

    pub fn set_coeff(&mut self, word: &[usize], value: f64) -> Result<()> {
        let idx = word_index(word, self.dim)?;
        if word.len() > self.depth {
            return Err(Error::InvalidParameter(format!(
                "word of length {} exceeds depth {}",
                word.len(),
                self.depth
            )));
        }
        self.level_mut(word.len())[idx] = value;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Iterates over `(word, coefficient)` pairs in level-then-lexicographic order.
    pub fn words(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        (0..=self.depth).flat_map(move |n| {
            self.level(n)
                .iter()
                .enumerate()
                .map(move |(i, &c)| (word_from_index(i, n, self.dim), c))
        })
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            Err(Error::DimMismatch {
                left: self.dim,
                right: other.dim,
            })
        } else {
            Ok(())
        }
    }

    /// Copy truncated or zero-padded to `depth`.
    pub fn with_depth(&self, depth: usize) -> Self {
        let len = tensor_len(self.dim, depth);
        let mut coeffs = vec![0.0; len];
        let keep = len.min(self.coeffs.len());
        coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        Self {
            dim: self.dim,
            depth,
            coeffs,
        }
    }

    /// `pi_(0,n)`: drops every level above `n`. A no-op when `n >= depth`.
    pub fn truncate(&self, n: usize) -> Self {
        self.with_depth(n.min(self.depth))
    }

    /// `pi_n`: keeps only level `n` (same storage depth as `self`).
    pub fn project(&self, n: usize) -> Self {
        let mut out = Self::zeros(self.dim, self.depth);
        if n <= self.depth {
            out.level_mut(n).copy_from_slice(self.level(n));
        }
        out
    }

    /// Sum; the result has the larger of the two depths.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.with_depth(self.depth.max(other.depth));
        for (o, &v) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *o += alpha * v;
        }
        Ok(out)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            dim: self.dim,
            depth: self.depth,
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    /// Truncated tensor product `pi_(0,out_depth)(self (x) other)`.
    pub fn mul(&self, other: &Self, out_depth: usize) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = Self::zeros(self.dim, out_depth);
        mul_acc(&mut out, self, other, 1.0);
        Ok(out)
    }

    /// `<self, other>` summed over all words present in both.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn level_norms(&self) -> LevelNorms {
        LevelNorms {
            values: (0..=self.depth)
                .map(|n| self.level(n).iter().map(|c| c * c).sum::<f64>().sqrt())
                .collect(),
        }
    }

    /// `||x||_p = (sum_n |x^(n)|^p)^(1/p)`; `p = f64::INFINITY` gives the max-level norm.
    pub fn norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidParameter(format!("norm exponent {p} < 1")));
        }
        let norms = self.level_norms();
        if p.is_infinite() {
            return Ok(norms.max());
        }
        if p == 1.0 {
            return Ok(norms.values.iter().sum());
        }
        Ok(norms
            .values
            .iter()
            .map(|v| v.powf(p))
            .sum::<f64>()
            .powf(1.0 / p))
    }

    /// `||x||_1`, the workhorse norm of all estimates.
    pub fn norm1(&self) -> f64 {
        self.level_norms().values.iter().sum()
    }

    /// Max-level norm.
    pub fn norm_max(&self) -> f64 {
        self.level_norms().max()
    }

    /// Dilation: level `n` scaled by `lambda^n`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        let mut factor = 1.0;
        for n in 0..=self.depth {
            for c in out.level_mut(n) {
                *c *= factor;
            }
            factor *= lambda;
        }
        out
    }

    /// Tensor exponential of an element with zero scalar part, truncated at its own depth.
    pub fn exp(&self) -> Result<Self> {
        self.exp_to(self.depth)
    }

    /// Tensor exponential truncated at `depth`.
    pub fn exp_to(&self, depth: usize) -> Result<Self> {
        expect_scalar(self, 0.0)?;
        let x = self.truncate(depth);
        // Horner: 1 + x(1 + x/2(1 + x/3(...)))
        let mut result = Self::one(self.dim, depth);
        let mut tmp = Self::zeros(self.dim, depth);
        for k in (1..=depth).rev() {
            tmp.coeffs.iter_mut().for_each(|c| *c = 0.0);
            mul_acc(&mut tmp, &x, &result, 1.0 / k as f64);
            tmp.coeffs[0] += 1.0;
            std::mem::swap(&mut tmp, &mut result);
        }
        Ok(result)
    }

    /// Tensor logarithm of an element with unit scalar part.
    pub fn log(&self) -> Result<Self> {
        expect_scalar(self, 1.0)?;
        let depth = self.depth;
        let mut y = self.clone();
        y.coeffs[0] = 0.0;
        if depth == 0 {
            return Ok(Self::zeros(self.dim, 0));
        }
        // sum_{n=1}^{D} (-1)^{n+1} y^n / n = y (c_1 + y (c_2 + ... + y c_D))
        let coef = |n: usize| if n % 2 == 1 { 1.0 } else { -1.0 } / n as f64;
        let mut r = Self::scalar(self.dim, depth, coef(depth));
        for n in (1..depth).rev() {
            let mut next = Self::scalar(self.dim, depth, coef(n));
            mul_acc(&mut next, &y, &r, 1.0);
            r = next;
        }
        y.mul(&r, depth)
    }

    /// Inverse in the group of unit-scalar elements.
    pub fn inverse(&self) -> Result<Self> {
        expect_scalar(self, 1.0)?;
        let depth = self.depth;
        let mut z = self.scale(-1.0);
        z.coeffs[0] = 0.0;
        let mut r = Self::one(self.dim, depth);
        for _ in 0..depth {
            let mut next = Self::one(self.dim, depth);
            mul_acc(&mut next, &z, &r, 1.0);
            r = next;
        }
        Ok(r)
    }

    /// Adjoint left multiplication `self |> z`: coefficient of `w` is `sum_v self^v z^(vw)`.
    /// The result has the depth of `z`.
    pub fn adjoint_left(&self, z: &Self) -> Result<Self> {
        self.check_dim(z)?;
        let mut out = Self::zeros(self.dim, z.depth);
        adjoint_left_acc(&mut out, self, z, 1.0);
        Ok(out)
    }

    /// Adjoint right multiplication `self <| z`: coefficient of `w` is `sum_v self^v z^(wv)`.
    pub fn adjoint_right(&self, z: &Self) -> Result<Self> {
        self.check_dim(z)?;
        let mut out = Self::zeros(self.dim, z.depth);
        adjoint_right_acc(&mut out, self, z, 1.0);
        Ok(out)
    }

    /// [`adjoint_left`](Self::adjoint_left) with the scalar component removed.
    pub fn adjoint_left_zero(&self, z: &Self) -> Result<Self> {
        let mut out = self.adjoint_left(z)?;
        out.coeffs[0] = 0.0;
        Ok(out)
    }

    /// [`adjoint_right`](Self::adjoint_right) with the scalar component removed.
    pub fn adjoint_right_zero(&self, z: &Self) -> Result<Self> {
        let mut out = self.adjoint_right(z)?;
        out.coeffs[0] = 0.0;
        Ok(out)
    }

    /// Largest absolute coefficient difference, padding the shallower tensor with zeros.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let depth = self.depth.max(other.depth);
        let a = self.with_depth(depth);
        let b = other.with_depth(depth);
        a.coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

fn expect_scalar(x: &TruncatedTensor, expected: f64) -> Result<()> {
    let found = x.scalar_part();
    if (found - expected).abs() > SCALAR_TOL {
        Err(Error::ScalarPartError { expected, found })
    } else {
        Ok(())
    }
}

/// `out += alpha * pi_(0,out.depth)(x (x) y)`.
pub(crate) fn mul_acc(out: &mut TruncatedTensor, x: &TruncatedTensor, y: &TruncatedTensor, alpha: f64) {
    let dim = out.dim;
    for n in 0..=out.depth {
        let out_off = level_offset(dim, n);
        for k in 0..=n.min(x.depth) {
            if n - k > y.depth {
                continue;
            }
            let xs = x.level(k);
            let ys = y.level(n - k);
            let m = ys.len();
            for (a, &xa) in xs.iter().enumerate() {
                if xa == 0.0 {
                    continue;
                }
                let xa = alpha * xa;
                let dst = &mut out.coeffs[out_off + a * m..out_off + (a + 1) * m];
                for (d, &yb) in dst.iter_mut().zip(ys) {
                    *d += xa * yb;
                }
            }
        }
    }
}

/// `out += alpha * (x |> z)` restricted to the levels stored in `out`.
pub(crate) fn adjoint_left_acc(out: &mut TruncatedTensor, x: &TruncatedTensor, z: &TruncatedTensor, alpha: f64) {
    let dim = out.dim;
    for m in 0..=out.depth {
        let out_off = level_offset(dim, m);
        let dm = dim.pow(m as u32);
        for k in 0..=x.depth {
            if k + m > z.depth {
                break;
            }
            let xs = x.level(k);
            let zs = z.level(k + m);
            for (v, &xv) in xs.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let xv = alpha * xv;
                let src = &zs[v * dm..(v + 1) * dm];
                for (d, &zc) in out.coeffs[out_off..out_off + dm].iter_mut().zip(src) {
                    *d += xv * zc;
                }
            }
        }
    }
}

/// `out += alpha * (y <| z)` restricted to the levels stored in `out`.
pub(crate) fn adjoint_right_acc(out: &mut TruncatedTensor, y: &TruncatedTensor, z: &TruncatedTensor, alpha: f64) {
    let dim = out.dim;
    for m in 0..=out.depth {
        let out_off = level_offset(dim, m);
        let dm = dim.pow(m as u32);
        for k in 0..=y.depth {
            if k + m > z.depth {
                break;
            }
            let ys = y.level(k);
            let zs = z.level(k + m);
            let dk = ys.len();
            for w in 0..dm {
                let src = &zs[w * dk..(w + 1) * dk];
                let s: f64 = ys.iter().zip(src).map(|(a, b)| a * b).sum();
                out.coeffs[out_off + w] += alpha * s;
            }
        }
    }
}
