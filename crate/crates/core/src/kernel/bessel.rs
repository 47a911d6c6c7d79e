//! Modified Bessel function `I₀` and the a priori bound `ψ`.

use crate::error::{Error, Result};
use crate::special::ln_factorial;

fn check(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and non-negative, found {x}"
        )));
    }
    Ok(())
}

/// `ln I₀(z)` from the even series, summed around its largest term.
fn ln_i0(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let lq = 2.0 * (0.5 * z).ln();
    let ln_term = |k: usize| k as f64 * lq - 2.0 * ln_factorial(k);
    let peak = (0.5 * z).floor() as usize;
    let top = ln_term(peak);
    let mut sum = 0.0;
    for k in (0..=peak).rev() {
        let r = (ln_term(k) - top).exp();
        sum += r;
        if r < 1e-17 * sum {
            break;
        }
    }
    let mut k = peak + 1;
    loop {
        let r = (ln_term(k) - top).exp();
        sum += r;
        if r < 1e-17 * sum {
            break;
        }
        k += 1;
    }
    top + sum.ln()
}

/// `I₀(z) = Σ (z/2)^{2k} / (k!)²`.
pub fn bessel_i0(z: f64) -> Result<f64> {
    check("z", z)?;
    if z > 600.0 {
        return Ok(ln_i0(z).exp());
    }
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= q / (k * k) as f64;
        sum += term;
        // terms decrease once k² > q
        if term < 1e-17 * sum && (k * k) as f64 > q {
            return Ok(sum);
        }
    }
}

/// `ψ(x, y) = e^{x+y} I₀(2√(xy))`.
pub fn apriori_psi(x: f64, y: f64) -> Result<f64> {
    check("x", x)?;
    check("y", y)?;
    let z = 2.0 * (x * y).sqrt();
    Ok((x + y + ln_i0(z)).exp())
}
