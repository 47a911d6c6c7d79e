//! Small special-function and quadrature helpers.

use std::f64::consts::PI;

/// `ln Γ(k/2)` for a positive integer `k`, exact up to rounding.
pub fn ln_gamma_half(k: usize) -> f64 {
    assert!(k >= 1, "ln_gamma_half needs k >= 1");
    if k % 2 == 0 {
        // Γ(m) = (m-1)!
        (1..k / 2).map(|j| (j as f64).ln()).sum()
    } else {
        // Γ(m + 1/2) = sqrt(pi) * prod_{j<m} (j + 1/2)
        0.5 * PI.ln() + (0..k / 2).map(|j| (j as f64 + 0.5).ln()).sum::<f64>()
    }
}

/// `ln n!`.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp;
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre rule for `∫_a^b f` with `panels` equal panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let part: f64 = rule
            .0
            .iter()
            .zip(&rule.1)
            .map(|(x, w)| w * f(mid + 0.5 * h * x))
            .sum();
        total += 0.5 * h * part;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_half_integers() {
        assert!((ln_gamma_half(1) - PI.sqrt().ln()).abs() < 1e-15);
        assert!(ln_gamma_half(2).abs() < 1e-15);
        assert!((ln_gamma_half(5).exp() - 0.75 * PI.sqrt()).abs() < 1e-14);
        assert!((ln_gamma_half(8).exp() - 6.0).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(8);
        assert!((rule.1.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let v = integrate(|x| x.powi(15) + x.powi(14), -1.0, 1.0, 1, &rule);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let e = integrate(f64::exp, 0.0, 1.0, 4, &rule);
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
