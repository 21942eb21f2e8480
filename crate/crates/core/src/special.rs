//! Special functions shared across modules.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Euler beta function B(x, y).
pub fn beta(x: f64, y: f64) -> f64 {
    (ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp()
}

/// Surface area of the unit sphere S^m embedded in R^{m+1}.
pub fn sphere_area(m: usize) -> f64 {
    let h = (m as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Zonal harmonic of degree `ell` on S^{n-1}, normalized to 1 at the pole,
/// together with its derivative in mu = cos(theta).
///
/// For n = 3 this is the Legendre polynomial, for n = 2 the Chebyshev
/// polynomial T_ell.
pub fn zonal(ell: usize, n: usize, mu: f64) -> (f64, f64) {
    let nf = n as f64;
    let (mut p0, mut d0) = (1.0, 0.0);
    if ell == 0 {
        return (p0, d0);
    }
    let (mut p1, mut d1) = (mu, 1.0);
    for l in 1..ell {
        let lf = l as f64;
        let c = 2.0 * lf + nf - 2.0;
        let den = lf + nf - 2.0;
        let p2 = (c * mu * p1 - lf * p0) / den;
        let d2 = (c * (p1 + mu * d1) - lf * d0) / den;
        p0 = p1;
        d0 = d1;
        p1 = p2;
        d1 = d2;
    }
    (p1, d1)
}

/// `(1 + u)^e - 1 - e*u` evaluated without cancellation for small `u`.
pub fn pow1p_remainder(u: f64, e: f64) -> f64 {
    if u.abs() < 0.125 {
        let mut term = e * (e - 1.0) / 2.0 * u * u;
        let mut sum = term;
        let mut j = 2.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) && j < 200.0 {
            term *= (e - j) / (j + 1.0) * u;
            sum += term;
            j += 1.0;
        }
        sum
    } else {
        (1.0 + u).abs().powf(e) - 1.0 - e * u
    }
}

/// `(1 + u)^e - 1` evaluated without cancellation for small `u`.
pub fn pow1p_m1(u: f64, e: f64) -> f64 {
    (e * u.ln_1p()).exp_m1()
}
