//! Free developments of piecewise-constant velocities and their estimates.

use nalgebra::DMatrix;

use crate::characteristics::{characteristic_velocity, exponential_moment_value, LevyTriplet, PiecewiseVelocity};
use crate::error::{Error, Result};
use crate::special::ln_factorial;
use crate::tensor::TruncatedTensor;

/// `S_{s,t}`: ordered product of `exp(Δu_i y_i)` over the pieces meeting `[s, t]`, truncated at `depth`.
pub fn develop(v: &PiecewiseVelocity, s: f64, t: f64, depth: usize) -> Result<TruncatedTensor> {
    let mut out = TruncatedTensor::one(v.dim(), depth);
    for (dt, piece) in v.segments(s, t)? {
        let step = piece.truncate(depth).scale(dt).exp_to(depth)?;
        out = out.mul(&step, depth)?;
    }
    Ok(out)
}

/// Expected signature `E[Sig(γ)_{0,t}]` truncated at `depth`.
pub fn expected_signature(triplet: &LevyTriplet, t: f64, depth: usize) -> Result<TruncatedTensor> {
    let moment = exponential_moment_value(triplet, 1.0, t);
    if !moment.is_finite() {
        log::warn!("exponential moment condition fails at λ = 1 (value {moment})");
    }
    let v = characteristic_velocity(triplet, depth.max(triplet.state_depth()))?;
    develop(&v, 0.0, t, depth)
}

/// Complete exponential Bell polynomials `B_0..B_n` at `y_1..y_n`.
pub fn bell_polynomials(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for m in 0..n {
        // B_{m+1} = sum_k C(m,k) B_{m-k} y_{k+1}
        let mut binom = 1.0;
        let mut acc = 0.0;
        for k in 0..=m {
            acc += binom * b[m - k] * y[k];
            binom = binom * (m - k) as f64 / (k + 1) as f64;
        }
        b[m + 1] = acc;
    }
    b
}

/// Bell numbers `B_0..B_n`.
pub fn bell_numbers(n: usize) -> Vec<f64> {
    bell_polynomials(&vec![1.0; n])
}

/// `(1/n!) B_n(1! V_1, ..., n! V_n)` with `V_k = ∫_s^t |π_k y|`.
pub fn bound_level(v: &PiecewiseVelocity, s: f64, t: f64, n: usize) -> Result<f64> {
    let mut y = Vec::with_capacity(n);
    let mut fact = 1.0;
    for k in 1..=n {
        fact *= k as f64;
        let vk = v.integrate(s, t, |p| p.level_norms().get(k))?;
        y.push(fact * vk);
    }
    Ok(bell_polynomials(&y)[n] / fact)
}

/// `exp(∫_s^t ||y||_1)`.
pub fn bound_gronwall(v: &PiecewiseVelocity, s: f64, t: f64) -> Result<f64> {
    Ok(v.mass(s, t)?.exp())
}

/// `exp(A + B) ∫_s^t ||y - ỹ||_1`, with `A` and `B` the masses of both velocities on `[s, t]`.
pub fn bound_lipschitz(v: &PiecewiseVelocity, w: &PiecewiseVelocity, s: f64, t: f64) -> Result<f64> {
    if v.dim() != w.dim() {
        return Err(Error::DimMismatch {
            left: v.dim(),
            right: w.dim(),
        });
    }
    let a = v.mass(s, t)?;
    let b = w.mass(s, t)?;
    let diff = velocity_distance(v, w, s, t)?;
    Ok((a + b).exp() * diff)
}

/// `∫_s^t ||y - ỹ||_1` on the merged grid.
pub fn velocity_distance(v: &PiecewiseVelocity, w: &PiecewiseVelocity, s: f64, t: f64) -> Result<f64> {
    v.check_span(s, t)?;
    w.check_span(s, t)?;
    let merged = v.grid().merge(w.grid());
    let pts = merged.points();
    let mut total = 0.0;
    for i in 0..merged.n_intervals() {
        let lo = pts[i].max(s);
        let hi = pts[i + 1].min(t);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let pv = &v.pieces()[v.grid().locate(mid).expect("inside span")];
        let pw = &w.pieces()[w.grid().locate(mid).expect("inside span")];
        total += (hi - lo) * pv.sub(pw)?.norm1();
    }
    Ok(total)
}

/// `exp(∫||y||_1) ∫||y - π_(0,N) y||_1`.
pub fn bound_inner_truncation(v: &PiecewiseVelocity, s: f64, t: f64, n: usize) -> Result<f64> {
    let tail = v.integrate(s, t, |p| p.sub(&p.truncate(n)).expect("same dim").norm1())?;
    Ok(bound_gronwall(v, s, t)? * tail)
}

/// `e^L L^K / K!` with `K = ⌈M/N⌉` and `L = ∫||π_(0,N) y||_1`.
///
/// Bounds `||S - π_(0,M-1) S||_1` for the development `S` of `π_(0,N) y`.
pub fn bound_outer_truncation(v: &PiecewiseVelocity, s: f64, t: f64, n: usize, m: usize) -> Result<f64> {
    if n == 0 || m < n {
        return Err(Error::InvalidParameter(format!(
            "outer truncation needs M >= N >= 1 (M = {m}, N = {n})"
        )));
    }
    let l = v.integrate(s, t, |p| p.truncate(n).norm1())?;
    Ok(outer_truncation_value(l, n, m))
}

fn outer_truncation_value(l: f64, n: usize, m: usize) -> f64 {
    let k = m.div_ceil(n);
    if l == 0.0 {
        return 0.0;
    }
    (l + k as f64 * l.ln() - ln_factorial(k)).exp()
}

/// Smallest development depth `D` whose outer truncation bound (at `M = D + 1`) is below `tol`,
/// for a velocity of depth `n` and mass `l`.
pub fn oracle_depth(l: f64, n: usize, tol: f64) -> Option<usize> {
    (1..=400).find(|&d| outer_truncation_value(l, n, d + 1) < tol)
}

/// Which jump law generates the remainder sequence of [`remainder_diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderMode {
    /// `a_n = ρ^n / n!` (Poisson-type jumps).
    Factorial,
    /// `a_n = ρ^n` (exponential-type jumps), `ρ < 1`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderDiagnostics {
    /// `r_m = sum_{n >= m} (1/n!) B_n(1! a_1, ..., n! a_n)`.
    pub exact: f64,
    /// Leading-order asymptotic of `r_m`.
    pub asymptotic: f64,
    /// Number of terms summed.
    pub terms: usize,
}

const REMAINDER_MAX_TERMS: usize = 6000;

/// Exact tail `r_m` next to its leading-order asymptotic.
pub fn remainder_diagnostics(rho: f64, m: usize, mode: RemainderMode) -> Result<RemainderDiagnostics> {
    if !(rho > 0.0) || !rho.is_finite() || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "remainder needs rho > 0 and m >= 1 (rho = {rho}, m = {m})"
        )));
    }
    if mode == RemainderMode::Geometric && rho >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "geometric remainder needs rho < 1, found {rho}"
        )));
    }
    // c_n = (1/n!) B_n(1! a_1, ...) are the Taylor coefficients of exp(sum a_k x^k),
    // so n c_n = sum_k k a_k c_{n-k}.
    let a = |k: usize| -> f64 {
        match mode {
            RemainderMode::Factorial => (k as f64 * rho.ln() - ln_factorial(k)).exp(),
            RemainderMode::Geometric => rho.powi(k as i32),
        }
    };
    let mut ka = vec![0.0];
    let mut c = vec![1.0];
    let mut exact = 0.0;
    let mut terms = 0;
    for n in 1..REMAINDER_MAX_TERMS {
        ka.push(n as f64 * a(n));
        let cn = (1..=n).map(|k| ka[k] * c[n - k]).sum::<f64>() / n as f64;
        c.push(cn);
        if n >= m {
            exact += cn;
            terms += 1;
            if n > m && cn < 1e-16 * exact {
                break;
            }
        }
    }
    let mf = m as f64;
    let asymptotic = match mode {
        RemainderMode::Factorial => {
            let bell = bell_numbers(m)[m];
            (mf * rho.ln() + bell.ln() - ln_factorial(m)).exp()
        }
        RemainderMode::Geometric => {
            let pe = std::f64::consts::PI * std::f64::consts::E;
            (2.0 * mf.sqrt()).exp() / (2.0 * mf.powf(0.75) * pe.sqrt()) * rho.powi(m as i32)
                / (1.0 - rho)
        }
    };
    Ok(RemainderDiagnostics {
        exact,
        asymptotic,
        terms,
    })
}

/// `E_{ξ ~ N(0, I_d)}[e^{|ξ|²/4} |ξ|^{2M}] = 2^{2M + d/2} Γ(d/2 + M) / Γ(d/2)`.
pub fn gaussian_mgf_moment(d: usize, m: usize) -> f64 {
    let half = d as f64 / 2.0;
    let prod: f64 = (0..m).map(|k| half + k as f64).product();
    2f64.powf(2.0 * m as f64 + half) * prod
}

/// Bound on `∫_0^t ||y - π_(0,2M) y||_1` for compound Poisson jumps `N(0, Σ)` at constant intensity.
///
/// Evaluates `e^{σ²} σ^{2M} E[e^{|ξ|²/4}|ξ|^{2M}] / (2M)! · λ t` with `σ² = λ_max(Σ)`,
/// i.e. the chain of estimates with the dimension constant computed exactly.
pub fn gaussian_jump_tail_bound(sigma: &DMatrix<f64>, intensity: f64, t: f64, m: usize) -> f64 {
    let d = sigma.nrows();
    let s2 = sigma
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let ln_val = s2 + m as f64 * s2.ln() + gaussian_mgf_moment(d, m).ln() - ln_factorial(2 * m);
    if s2 == 0.0 {
        return 0.0;
    }
    ln_val.exp() * intensity * t
}
