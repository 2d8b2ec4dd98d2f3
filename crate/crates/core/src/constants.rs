//! Gamma-ratio constants shared by every other module.
//!
//! [`Params`] is built once per `(n, s)` and read everywhere else; all the
//! derived quantities (`c`, `c_hat`, `kappa`, `rho`, `p`) are cached on it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lanczos coefficients (g = 7, 9 terms).
pub(crate) const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
pub(crate) const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function on the positive half-line.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("gamma requires x > 0, got {x}")));
    }
    Ok(gamma_pos(x))
}

pub(crate) fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum in its accurate range.
        return gamma_pos(x + 1.0) / x;
    }
    if x > 171.7 {
        return f64::INFINITY;
    }
    if x.fract() == 0.0 {
        return (2..x as u32).map(f64::from).product();
    }
    let z = x - 1.0;
    let (sum, t) = lanczos_sum(z);
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * sum
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let (sum, t) = lanczos_sum(z);
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}

fn lanczos_sum(z: f64) -> (f64, f64) {
    let mut sum = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    (sum, z + LANCZOS_G + 0.5)
}

/// Euler beta function `B(a, b) = Γ(a)Γ(b)/Γ(a+b)` for positive arguments.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!(
            "beta requires positive arguments, got ({a}, {b})"
        )));
    }
    Ok((ln_gamma_pos(a) + ln_gamma_pos(b) - ln_gamma_pos(a + b)).exp())
}

/// Bernoulli numbers B_2, B_4, ..., B_20.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Riemann zeta on the real line (analytically continued), `x != 1`.
///
/// Euler–Maclaurin summation with a head of 16 terms; accurate to ~1e-15 on
/// `x ∈ [-4, 30]`, which covers the band-correction arguments `2s - 1` and
/// `2s - 3`.
pub fn riemann_zeta(x: f64) -> Result<f64> {
    if x == 1.0 || !x.is_finite() {
        return Err(Error::domain(format!("zeta has a pole at 1, got {x}")));
    }
    const N: usize = 16;
    let nf = N as f64;
    let mut sum = 0.0;
    for j in 1..N {
        sum += (j as f64).powf(-x);
    }
    sum += nf.powf(1.0 - x) / (x - 1.0) + 0.5 * nf.powf(-x);
    // rising factorial x (x+1) ... (x+2k-2) / (2k)!
    let mut rising = x;
    let mut fact = 2.0;
    let mut npow = nf.powf(-x - 1.0);
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let k = k + 1;
        if k > 1 {
            let a = (2 * k - 3) as f64;
            rising *= (x + a) * (x + a + 1.0);
            fact *= ((2 * k - 1) * (2 * k)) as f64;
            npow /= nf * nf;
        }
        sum += b / fact * rising * npow;
    }
    Ok(sum)
}

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: u32) -> f64 {
    let h = f64::from(d) / 2.0;
    2.0 * PI.powf(h) / gamma_pos(h)
}

/// Lowest admissible fractional order for kernel/quadrature consumers.
pub const S_MIN_QUADRATURE: f64 = 0.05;
/// Highest admissible fractional order for kernel/quadrature consumers.
pub const S_MAX_QUADRATURE: f64 = 0.999;

/// Dimension, fractional order, and every constant derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: u32,
    pub s: f64,
    /// Critical exponent `(n + 2s)/(n - 2s)`.
    pub p: f64,
    /// Normalization constant `c_{n,s}`.
    pub c: f64,
    /// Height of the spherical solution, `ĉ_{n,s}`.
    pub c_hat: f64,
    /// Prefactor `κ_{n,s}` of the singular integral.
    pub kappa: f64,
    /// Radius `ρ_{n,s}` of the sphere realized by the spherical solution.
    pub rho: f64,
}

/// Builds [`Params`] for `n >= 3`, `0 < s < 1`.
pub fn make_params(n: u32, s: f64) -> Result<Params> {
    Params::new(n, s)
}

impl Params {
    pub fn new(n: u32, s: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::parameter(format!("dimension n must be >= 3, got {n}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::parameter(format!("order s must lie in (0, 1), got {s}")));
        }
        let nf = f64::from(n);
        let half_n = nf / 2.0;
        let p = (nf + 2.0 * s) / (nf - 2.0 * s);

        // G = Γ((n/2 + s)/2) / Γ((n/2 - s)/2), H = Γ(n/2 - s) / Γ(n/2 + s)
        let ln_g = ln_gamma_pos((half_n + s) / 2.0) - ln_gamma_pos((half_n - s) / 2.0);
        let ln_h = ln_gamma_pos(half_n - s) - ln_gamma_pos(half_n + s);
        let ln2 = std::f64::consts::LN_2;

        let c = (2.0 * s * ln2 + 2.0 * ln_g).exp();
        let e = (2.0 * s - nf) / 2.0;
        let c_hat = (e * ln2 + e / s * ln_g + e / (2.0 * s) * ln_h).exp();
        let rho = (-2.0 * ln2 - 2.0 / s * ln_g - ln_h / s).exp();
        // κ = π^{-n/2} 2^{2s} Γ(n/2 + s) / Γ(1 - s) · s; Γ(1-s) via Γ(2-s)/(1-s)
        let kappa = (-half_n * PI.ln() + 2.0 * s * ln2 + ln_gamma_pos(half_n + s) - ln_gamma_pos(2.0 - s))
            .exp()
            * (1.0 - s)
            * s;

        Ok(Self {
            n,
            s,
            p,
            c,
            c_hat,
            kappa,
            rho,
        })
    }

    pub fn dim(&self) -> f64 {
        f64::from(self.n)
    }

    /// Exponent `(n + 2s)/2` of the kernel denominator; also its exponential decay rate.
    pub fn kernel_exponent(&self) -> f64 {
        (self.dim() + 2.0 * self.s) / 2.0
    }

    /// Exponent `(2s - n)/2` of the Emden–Fowler weight.
    pub fn weight_exponent(&self) -> f64 {
        (2.0 * self.s - self.dim()) / 2.0
    }

    /// Conjugate exponent `2n/(n - 2s) = p + 1` of the energy denominator.
    pub fn energy_exponent(&self) -> f64 {
        self.p + 1.0
    }

    /// Cylindrical spherical solution `ĉ cosh(t)^{(2s-n)/2}`.
    pub fn bubble(&self, t: f64) -> f64 {
        self.c_hat * cosh_pow(t, self.weight_exponent())
    }

    /// `d/dt` of [`Params::bubble`].
    pub fn bubble_derivative(&self, t: f64) -> f64 {
        self.weight_exponent() * t.tanh() * self.bubble(t)
    }
}

/// `cosh(t)^q` evaluated without overflow for large `|t|`.
pub(crate) fn cosh_pow(t: f64, q: f64) -> f64 {
    let a = t.abs();
    // cosh a = e^a (1 + e^{-2a}) / 2
    (q * (a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2)).exp()
}

/// `κ_{n,s}/(1 - s)` for each entry of `s_list`, paired with `s`.
pub fn kappa_scaling_check(n: u32, s_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    s_list
        .iter()
        .map(|&s| Params::new(n, s).map(|p| (s, p.kappa / (1.0 - s))))
        .collect()
}

/// Closed-form `s → 1` limit of `ĉ_{n,s}`: `(n/(n-2))^{(n-2)/4}`.
pub fn c_hat_classical(n: u32) -> f64 {
    let nf = f64::from(n);
    (nf / (nf - 2.0)).powf((nf - 2.0) / 4.0)
}

/// Closed-form `s → 1` limit of `c_{n,s}`: `((n-2)/2)^2`.
pub fn c_classical(n: u32) -> f64 {
    let h = (f64::from(n) - 2.0) / 2.0;
    h * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// `∫_0^∞ t^{x-1} e^{-t} dt` by the substitution `t = e^y` and a fine
    /// trapezoid rule; the integrand decays doubly exponentially at both ends.
    fn gamma_by_quadrature(x: f64) -> f64 {
        let (a, b) = (-60.0 / x.min(1.0), 6.0);
        let n = 400_000;
        let h = (b - a) / n as f64;
        (0..=n)
            .map(|i| {
                let y = a + h * i as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * (x * y - y.exp()).exp()
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn gamma_integers() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn gamma_matches_defining_integral() {
        for &x in &[0.1, 0.5, 1.3, 2.75, 7.2, 15.5] {
            let q = gamma_by_quadrature(x);
            assert_relative_eq!(gamma(x).unwrap(), q, max_relative = 1e-13);
        }
        assert_relative_eq!(
            gamma_by_quadrature(0.5),
            1.772_453_850_905_516,
            max_relative = 1e-13
        );
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(matches!(gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(gamma(-1.5), Err(Error::Domain(_))));
        assert!(gamma(f64::NAN).is_err());
    }

    #[test]
    fn gamma_recurrence() {
        let mut x = 0.1;
        while x <= 20.0 {
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs, "x = {x}");
            x += 0.037;
        }
    }

    #[test]
    fn zeta_known_values() {
        assert_relative_eq!(riemann_zeta(2.0).unwrap(), PI * PI / 6.0, max_relative = 1e-14);
        assert_relative_eq!(riemann_zeta(0.0).unwrap(), -0.5, max_relative = 1e-14);
        assert_relative_eq!(riemann_zeta(-1.0).unwrap(), -1.0 / 12.0, max_relative = 1e-13);
        assert!(riemann_zeta(-2.0).unwrap().abs() < 1e-12);
        assert_relative_eq!(
            riemann_zeta(0.5).unwrap(),
            -1.460_354_508_809_586_8,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            riemann_zeta(-0.5).unwrap(),
            -0.207_886_224_977_354_57,
            max_relative = 1e-12
        );
        assert!(riemann_zeta(1.0).is_err());
    }

    #[test]
    fn closed_forms_at_half() {
        let p = make_params(3, 0.5).unwrap();
        assert_relative_eq!(p.c, 2.0 / PI, max_relative = 1e-12);
        assert_relative_eq!(p.c_hat, PI / 2.0, max_relative = 1e-12);
        assert_relative_eq!(p.kappa, PI.powi(-2), max_relative = 1e-12);
        assert_relative_eq!(p.p, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn limits_near_one() {
        let p = make_params(4, 1.0 - 1e-6).unwrap();
        assert_relative_eq!(p.c, 1.0, max_relative = 1e-5);
        assert_relative_eq!(p.c_hat, 2f64.sqrt(), max_relative = 1e-5);
        assert_relative_eq!(p.rho, 2.0, max_relative = 1e-5);
        for n in 3..=8 {
            let p = make_params(n, 1.0 - 1e-8).unwrap();
            assert!((p.c - c_classical(n)).abs() < 1e-6, "n = {n}");
            assert!((p.c_hat - c_hat_classical(n)).abs() < 1e-6, "n = {n}");
        }
    }

    #[test]
    fn classical_c_hat_is_root_of_hamiltonian() {
        // H(v, 0) = -c v^2 / 2 + c (n-2)/(2n) v^{2n/(n-2)} vanishes at ĉ_{n,1}.
        for n in 3..=8 {
            let nf = f64::from(n);
            let v = c_hat_classical(n);
            let h = -0.5 * v * v + (nf - 2.0) / (2.0 * nf) * v.powf(2.0 * nf / (nf - 2.0));
            assert!(h.abs() < 1e-14);
        }
    }

    #[test]
    fn c_hat_exceeds_one() {
        for n in 3..=5 {
            for k in 1..=9 {
                let p = make_params(n, f64::from(k) / 10.0).unwrap();
                assert!(p.c_hat > 1.0, "n = {n}, s = {}", p.s);
                assert!(p.p > 1.0 && p.c > 0.0 && p.kappa > 0.0 && p.rho > 0.0);
            }
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(make_params(2, 0.5), Err(Error::Parameter(_))));
        assert!(matches!(make_params(3, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(make_params(3, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(make_params(3, 1.2), Err(Error::Parameter(_))));
    }

    #[test]
    fn kappa_scales_like_one_minus_s() {
        let rows = kappa_scaling_check(3, &[0.9, 0.99, 0.999, 0.9999]).unwrap();
        // successive changes shrink; 0.9 -> 0.99 is ~21%, 0.99 -> 0.999 under 3%
        let d1 = (rows[1].1 - rows[0].1).abs() / rows[1].1;
        let d2 = (rows[2].1 - rows[1].1).abs() / rows[2].1;
        assert!(d2 < 0.1 && d2 < d1);
        // limit: 4 π^{-n/2} Γ(n/2 + 1)
        let limit = 4.0 * PI.powf(-1.5) * gamma(2.5).unwrap();
        assert_relative_eq!(rows[3].1, limit, max_relative = 1e-3);
        assert!(make_params(3, 0.999_999).unwrap().kappa < 1e-5);
    }

    #[test]
    fn bubble_values() {
        let p = make_params(3, 0.75).unwrap();
        assert_relative_eq!(p.bubble(0.0), p.c_hat, max_relative = 1e-15);
        let t = 3.3;
        assert_relative_eq!(
            p.bubble(t),
            p.c_hat * t.cosh().powf(p.weight_exponent()),
            max_relative = 1e-13
        );
        assert!(p.bubble(800.0) > 0.0);
        let h = 1e-5;
        let fd = (p.bubble(t + h) - p.bubble(t - h)) / (2.0 * h);
        assert_relative_eq!(p.bubble_derivative(t), fd, max_relative = 1e-8);
    }
}
