use crate::characteristics::PiecewiseVelocity;
use crate::error::{Error, Result};

/// Bound on `|<S(y)_s, S(ỹ)_t> − w^{M,N}(s,t)|` for velocities given at full depth.
///
/// Evaluates `e^{∫_0^s ||y||} e^{∫_0^t ||ỹ||} (∫_0^s ||y − π_M y|| + ∫_0^t ||ỹ − π_N ỹ||)`,
/// exactly for piecewise-constant velocities.
pub fn truncation_certificate(
    v: &PiecewiseVelocity,
    vt: &PiecewiseVelocity,
    m: usize,
    n: usize,
    s: f64,
    t: f64,
) -> Result<f64> {
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
    let tail = |x: &PiecewiseVelocity, k: usize, u: f64| {
        x.integrate(0.0, u, |p| p.sub(&p.truncate(k)).expect("same dim").norm1())
    };
    let rest = tail(v, m, s)? + tail(vt, n, t)?;
    if rest == 0.0 {
        return Ok(0.0);
    }
    Ok((v.mass(0.0, s)? + vt.mass(0.0, t)?).exp() * rest)
}
