use crate::error::{Error, Result};

/// Modified Bessel function `I_0(z)` by its even power series.
pub fn bessel_i0(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "I0 argument must be non-negative, found {z}"
        )));
    }
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        // terms decrease once k exceeds z/2
        if term < 1e-17 * sum && k * k > q {
            return Ok(sum);
        }
        if !sum.is_finite() {
            return Ok(f64::INFINITY);
        }
    }
}

/// A priori bound `ψ(x, y) = e^{x+y} I_0(2 sqrt(xy))`.
pub fn apriori_psi(x: f64, y: f64) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ψ arguments must be non-negative, found ({x}, {y})"
        )));
    }
    Ok((x + y).exp() * bessel_i0(2.0 * (x * y).sqrt())?)
}
