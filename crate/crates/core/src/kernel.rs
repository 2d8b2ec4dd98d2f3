//! The cylindrical convolution kernel `K_s`, its periodization, and the
//! normalization integral `A`.
//!
//! For radial functions the kernel reduces to
//!
//! ```text
//! K_s(ξ) = κ ∫_{S^{n-1}} (2 cosh ξ - 2⟨θ, φ⟩)^{-(n+2s)/2} dφ
//!        = κ |S^{n-2}| ∫_0^π (4 sinh²(ξ/2) + 4 sin²(φ/2))^{-(n+2s)/2} sin^{n-2}φ dφ,
//! ```
//!
//! which is even in `ξ`, blows up like `C |ξ|^{-(1+2s)}` at the origin and
//! decays like `e^{-(n+2s)|ξ|/2}`. The angle integral is evaluated with
//! Gauss–Legendre panels graded geometrically towards `φ = 0` at the scale
//! `2 sinh(|ξ|/2)`, so it stays accurate arbitrarily close to the singularity.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{beta, sphere_area, Params, S_MAX_QUADRATURE, S_MIN_QUADRATURE};
use crate::error::{Error, Result};
use crate::quad::{graded_breakpoints, integrate_adaptive, GaussLegendre};

/// Which closed form of the kernel is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KernelForm {
    /// Distance-consistent, even kernel.
    #[default]
    Symmetric,
    /// The uncorrected display: numerator `e^{(2s-n)ξ/2}` and cross term
    /// `2 e^{-2ξ}⟨θ, φ⟩`. Not even; kept only for fault-injection runs.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub params: Params,
    /// Gauss–Legendre nodes per angular panel.
    pub angular_nodes: usize,
    /// Lattice copies farther than this are replaced by their certified bound.
    pub tail_cut: f64,
    pub abs_tol: f64,
    #[serde(default)]
    pub form: KernelForm,
}

impl KernelSpec {
    pub const DEFAULT_ANGULAR_NODES: usize = 32;
    pub const DEFAULT_TAIL_CUT: f64 = 40.0;
    pub const DEFAULT_ABS_TOL: f64 = 1e-12;

    pub fn new(params: Params) -> Result<Self> {
        let spec = Self {
            params,
            angular_nodes: Self::DEFAULT_ANGULAR_NODES,
            tail_cut: Self::DEFAULT_TAIL_CUT,
            abs_tol: Self::DEFAULT_ABS_TOL,
            form: KernelForm::Symmetric,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_form(mut self, form: KernelForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Result<Self> {
        self.abs_tol = abs_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.params.s;
        if !(S_MIN_QUADRATURE..=S_MAX_QUADRATURE).contains(&s) {
            return Err(Error::parameter(format!(
                "kernel quadrature supports s in [{S_MIN_QUADRATURE}, {S_MAX_QUADRATURE}], got {s}"
            )));
        }
        if self.angular_nodes < 32 {
            return Err(Error::parameter(format!(
                "angular_nodes must be >= 32, got {}",
                self.angular_nodes
            )));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::parameter("abs_tol must be positive"));
        }
        if !(self.tail_cut > 1.0) {
            return Err(Error::parameter("tail_cut must exceed 1"));
        }
        Ok(())
    }
}

/// `∫_{S^{n-1}} f(⟨θ, φ⟩) dφ` for a zonal integrand, reduced to
/// `|S^{n-2}| ∫_0^π f(cos ϑ) sin^{n-2} ϑ dϑ`.
pub fn angular_reduce<F: Fn(f64) -> f64>(f: F, n: u32, abs_tol: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::parameter("angular_reduce needs n >= 2"));
    }
    let area = sphere_area(n - 1);
    let k = (n - 2) as i32;
    let est = integrate_adaptive(
        |t| f(t.cos()) * t.sin().powi(k),
        0.0,
        PI,
        abs_tol / area,
        "angular reduction",
    )?;
    Ok(area * est.value)
}

/// Kernel value with the underflow flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub value: f64,
    /// Set when the true value lies below the smallest positive double; `bound`
    /// then certifies it.
    pub underflow: bool,
    pub bound: f64,
}

/// Periodized kernel value with the certified bound on the omitted copies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodizedSample {
    pub value: f64,
    pub tail_bound: f64,
}

/// Evaluator for `K_s` with precomputed constants.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    rule: Arc<GaussLegendre>,
    exponent: f64,
    prefactor: f64,
    bound_prefactor: f64,
    near_constant: f64,
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        let p = &spec.params;
        let b = p.kernel_exponent();
        let prefactor = p.kappa * sphere_area(p.n - 1);
        let bound_prefactor = p.kappa * sphere_area(p.n);
        let near_constant = 0.5 * prefactor * beta((p.dim() - 1.0) / 2.0, (1.0 + 2.0 * p.s) / 2.0)?;
        Ok(Self {
            rule: GaussLegendre::shared(spec.angular_nodes),
            spec,
            exponent: b,
            prefactor,
            bound_prefactor,
            near_constant,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn params(&self) -> &Params {
        &self.spec.params
    }

    /// `C` in `K_s(ξ) ~ C |ξ|^{-(1+2s)}` as `ξ → 0`.
    pub fn near_origin_constant(&self) -> f64 {
        self.near_constant
    }

    /// Exponential decay rate `(n + 2s)/2` used for every tail bound.
    pub fn decay_rate(&self) -> f64 {
        self.exponent
    }

    /// Leading singular law `C |ξ|^{-(1+2s)}`.
    pub fn near_origin_law(&self, xi: f64) -> f64 {
        self.near_constant * xi.abs().powf(-(1.0 + 2.0 * self.params().s))
    }

    /// Certified upper bound `κ |S^{n-1}| (4 sinh²(ξ/2))^{-(n+2s)/2}`.
    pub fn upper_bound(&self, xi: f64) -> f64 {
        let x = xi.abs();
        if x > 1.0 {
            let q = (-x).exp();
            self.bound_prefactor * (-self.exponent * x).exp() * (1.0 - q).powf(-2.0 * self.exponent)
        } else {
            let d = 2.0 * (0.5 * x).sinh();
            self.bound_prefactor * d.powf(-2.0 * self.exponent)
        }
    }

    /// Certified lower bound `κ |S^{n-1}| (2 cosh ξ + 2)^{-(n+2s)/2}`.
    pub fn lower_bound(&self, xi: f64) -> f64 {
        let x = xi.abs();
        let q = (-x).exp();
        self.bound_prefactor * (-self.exponent * x).exp() * (1.0 + q).powf(-2.0 * self.exponent)
    }

    /// `K_s(ξ)`; zero only when the value underflows.
    pub fn value(&self, xi: f64) -> Result<f64> {
        self.sample(xi).map(|s| s.value)
    }

    pub fn sample(&self, xi: f64) -> Result<KernelSample> {
        if xi == 0.0 {
            return Err(Error::Singularity("kernel evaluated at xi = 0".into()));
        }
        if !xi.is_finite() {
            return Err(Error::domain(format!("kernel offset must be finite, got {xi}")));
        }
        let bound = self.upper_bound(xi);
        if bound < f64::MIN_POSITIVE {
            return Ok(KernelSample {
                value: 0.0,
                underflow: true,
                bound,
            });
        }
        let value = match self.spec.form {
            KernelForm::Symmetric => self.symmetric(xi.abs()),
            KernelForm::Printed => self.printed(xi)?,
        };
        Ok(KernelSample {
            value,
            underflow: false,
            bound,
        })
    }

    fn symmetric(&self, x: f64) -> f64 {
        let b = self.exponent;
        let k = (self.params().n - 2) as i32;
        if x > 1.0 {
            let q = (-x).exp();
            let one_q2 = (1.0 - q) * (1.0 - q);
            let pts = graded_breakpoints(1.0, 0.5, PI);
            let mut total = 0.0;
            for w in pts.windows(2) {
                total += self.rule.integrate(w[0], w[1], |phi| {
                    let sh = (0.5 * phi).sin();
                    (one_q2 + 4.0 * q * sh * sh).powf(-b) * phi.sin().powi(k)
                });
            }
            self.prefactor * (-b * x).exp() * total
        } else {
            let d = 2.0 * (0.5 * x).sinh();
            let d2 = d * d;
            let pts = graded_breakpoints(d, 0.5, PI);
            let mut total = 0.0;
            for w in pts.windows(2) {
                total += self.rule.integrate(w[0], w[1], |phi| {
                    let sh = 2.0 * (0.5 * phi).sin();
                    (d2 + sh * sh).powf(-b) * phi.sin().powi(k)
                });
            }
            self.prefactor * total
        }
    }

    fn printed(&self, xi: f64) -> Result<f64> {
        let p = self.params();
        let b = self.exponent;
        let k = (p.n - 2) as i32;
        let e2 = (-2.0 * xi).exp();
        let scale = (2.0 * (0.5 * xi.abs()).sinh()).min(1.0);
        let pts = graded_breakpoints(scale, 0.5, PI);
        let mut total = 0.0;
        let mut negative = false;
        for w in pts.windows(2) {
            total += self.rule.integrate(w[0], w[1], |phi| {
                let base = 1.0 + e2 - 2.0 * e2 * phi.cos();
                if base <= 0.0 {
                    negative = true;
                    return 0.0;
                }
                base.powf(-b) * phi.sin().powi(k)
            });
        }
        if negative {
            return Err(Error::domain(format!(
                "printed kernel form has a non-positive base at xi = {xi}"
            )));
        }
        Ok(self.prefactor * (p.weight_exponent() * xi).exp() * total)
    }

    /// `K_{s,L}(ξ) = Σ_j K_s(ξ - jL)`, copies beyond `tail_cut` bounded.
    pub fn periodized(&self, xi: f64, period: f64) -> Result<PeriodizedSample> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::parameter(format!("period must be positive, got {period}")));
        }
        let r = xi - period * (xi / period).round();
        if r.abs() <= 1e-14 * period {
            return Err(Error::Singularity(format!(
                "periodized kernel evaluated at xi = {xi}, congruent to 0 mod {period}"
            )));
        }
        let cut = self.spec.tail_cut.max(period);
        let mut value = self.value(r)?;
        let mut j = 1i64;
        let smallest_excluded = loop {
            let right = (j as f64) * period - r;
            let left = (j as f64) * period + r;
            let d = right.min(left);
            if d > cut {
                break d;
            }
            if right <= cut {
                value += self.value(right)?;
            }
            if left <= cut {
                value += self.value(left)?;
            }
            j += 1;
        };
        // Two geometric series starting at the nearest excluded copy.
        let b = self.exponent;
        let d = smallest_excluded;
        let tail_bound = 2.0 * self.bound_prefactor * (1.0 - (-d).exp()).powf(-2.0 * b) * (-b * d).exp()
            / (1.0 - (-b * period).exp());
        if tail_bound > self.spec.abs_tol {
            return Err(Error::Accuracy {
                what: format!("periodization at L = {period}"),
                estimate: tail_bound,
                requested: self.spec.abs_tol,
            });
        }
        Ok(PeriodizedSample { value, tail_bound })
    }

    /// Least-squares slope of `log K` against `log ξ` on a geometric grid.
    pub fn fitted_power_exponent(&self, lo: f64, hi: f64, count: usize) -> Result<f64> {
        let xs: Vec<f64> = (0..count)
            .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (count - 1) as f64).exp())
            .collect();
        let mut pts = Vec::with_capacity(count);
        for &x in &xs {
            pts.push((x.ln(), self.value(x)?.ln()));
        }
        Ok(least_squares_slope(&pts))
    }

    /// Least-squares slope of `log K` against `ξ` on a uniform grid.
    pub fn fitted_tail_rate(&self, lo: f64, hi: f64, count: usize) -> Result<f64> {
        let mut pts = Vec::with_capacity(count);
        for i in 0..count {
            let x = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            pts.push((x, self.value(x)?.ln()));
        }
        Ok(least_squares_slope(&pts))
    }
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `K_s(ξ)` for a one-off evaluation.
pub fn kernel_ks(xi: f64, spec: &KernelSpec) -> Result<f64> {
    Kernel::new(*spec)?.value(xi)
}

/// `K_{s,L}(ξ)` for a one-off evaluation.
pub fn kernel_periodized(xi: f64, period: f64, spec: &KernelSpec) -> Result<f64> {
    Kernel::new(*spec)?.periodized(xi, period).map(|p| p.value)
}

/// The constant `A` of the radial reduction (with the `κ` prefactor).
///
/// In the log variable `ρ̄ = e^{-τ}`, pairing `τ` with `-τ` gives
/// `A = ∫_0^∞ 4 sinh²((n - 2s)τ/4) K_s(τ) dτ`; the integrand is
/// `O(τ^{1-2s})` at the origin and decays like `e^{-2sτ}`.
pub fn check_a(spec: &KernelSpec) -> Result<f64> {
    let kernel = Kernel::new(*spec)?;
    check_a_with(&kernel)
}

pub(crate) fn check_a_with(kernel: &Kernel) -> Result<f64> {
    let p = kernel.params();
    let a = (p.dim() - 2.0 * p.s) / 2.0;
    let s = p.s;
    let c = kernel.near_origin_constant();
    let tau0: f64 = 1e-7;
    // ∫_0^{τ0} a² τ² C τ^{-1-2s} dτ, leading order
    let head = a * a * c * tau0.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let integrand = |t: f64| -> Result<f64> {
        let sh = (0.5 * a * t).sinh();
        Ok(4.0 * sh * sh * kernel.value(t)?)
    };
    // integrand ≲ κ|S^{n-1}| e^{-2sτ}(1 - e^{-τ})^{-2b}
    let target = 1e-3 * spec_tol(kernel);
    let end = ((kernel.bound_prefactor / (2.0 * s * target)).ln() / (2.0 * s)).max(10.0);
    let mut pts = vec![tau0];
    let mut x = tau0;
    while x * 2.0 < 1.0 {
        x *= 2.0;
        pts.push(x);
    }
    let count = (end - 1.0).ceil() as usize;
    for k in 0..=count {
        pts.push(1.0 + (end - 1.0) * k as f64 / count as f64);
    }
    let fine = GaussLegendre::shared(kernel.spec().angular_nodes);
    let coarse = GaussLegendre::shared(kernel.spec().angular_nodes / 2);
    let mut total_fine = head;
    let mut total_coarse = head;
    for w in pts.windows(2) {
        for (t, wt) in fine.mapped(w[0], w[1]) {
            total_fine += wt * integrand(t)?;
        }
        for (t, wt) in coarse.mapped(w[0], w[1]) {
            total_coarse += wt * integrand(t)?;
        }
    }
    let err = (total_fine - total_coarse).abs();
    if err > 1e-9 * total_fine.abs().max(1.0) {
        return Err(Error::Accuracy {
            what: "normalization integral A".into(),
            estimate: err,
            requested: 1e-9,
        });
    }
    Ok(total_fine)
}

fn spec_tol(kernel: &Kernel) -> f64 {
    kernel.spec().abs_tol
}

/// Line or period-`L` circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Period {
    Line,
    Finite(f64),
}

/// Sampled kernel values for plotting and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct KernelTable {
    pub spec: KernelSpec,
    pub period: Period,
    pub offsets: Vec<f64>,
    /// `K_s` at each offset.
    pub line_values: Vec<f64>,
    /// `K_{s,L}` at each offset (finite period only).
    pub periodized_values: Option<Vec<f64>>,
    /// Per-row certified bound on omitted lattice copies (or on the
    /// underflowed value for the line).
    pub tail_bounds: Vec<f64>,
}

impl KernelTable {
    pub fn build(spec: KernelSpec, period: Period, mut offsets: Vec<f64>) -> Result<Self> {
        let kernel = Kernel::new(spec)?;
        offsets.sort_by(f64::total_cmp);
        let rows: Vec<(f64, Option<f64>, f64)> = offsets
            .par_iter()
            .map(|&xi| -> Result<_> {
                let line = kernel.sample(xi)?;
                match period {
                    Period::Line => Ok((line.value, None, if line.underflow { line.bound } else { 0.0 })),
                    Period::Finite(l) => {
                        let per = kernel.periodized(xi, l)?;
                        Ok((line.value, Some(per.value), per.tail_bound))
                    }
                }
            })
            .collect::<Result<_>>()?;
        let line_values = rows.iter().map(|r| r.0).collect();
        let periodized_values = match period {
            Period::Line => None,
            Period::Finite(_) => Some(rows.iter().map(|r| r.1.unwrap_or(0.0)).collect()),
        };
        let tail_bounds = rows.iter().map(|r| r.2).collect();
        Ok(Self {
            spec,
            period,
            offsets,
            line_values,
            periodized_values,
            tail_bounds,
        })
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bounds.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::make_params;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(n: u32, s: f64) -> KernelSpec {
        KernelSpec::new(make_params(n, s).unwrap()).unwrap()
    }

    /// Closed form for n = 3: the angle integral is elementary.
    fn k3_closed_form(xi: f64, s: f64) -> f64 {
        let p = make_params(3, s).unwrap();
        let b = p.kernel_exponent();
        let x = xi.abs();
        let lo = 4.0 * (0.5 * x).sinh().powi(2);
        let hi = 2.0 * x.cosh() + 2.0;
        p.kappa * 2.0 * PI / (2.0 * (b - 1.0)) * (lo.powf(1.0 - b) - hi.powf(1.0 - b))
    }

    /// Raw (unsimplified) form straight from the Euclidean distance,
    /// `e^{-bξ} (1 + e^{-2ξ} - 2 e^{-ξ} c)^{-b}`, integrated adaptively.
    fn raw_by_adaptive(xi: f64, n: u32, s: f64) -> f64 {
        let p = make_params(n, s).unwrap();
        let b = p.kernel_exponent();
        let q = (-xi).exp();
        p.kappa
            * angular_reduce(
                |c| (-b * xi).exp() * (1.0 + q * q - 2.0 * q * c).powf(-b),
                n,
                1e-13,
            )
            .unwrap()
    }

    #[test]
    fn angular_reduce_examples() {
        assert_relative_eq!(
            angular_reduce(|_| 1.0, 3, 1e-13).unwrap(),
            4.0 * PI,
            max_relative = 1e-13
        );
        for n in 3..=6 {
            assert!(angular_reduce(|c| c, n, 1e-13).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn angular_reduce_second_moment_against_monte_carlo() {
        let exact = angular_reduce(|c| c * c, 3, 1e-13).unwrap();
        assert_relative_eq!(exact, 4.0 * PI / 3.0, max_relative = 1e-12);
        // Monte Carlo over S^2 with θ = e_3: mean of φ_3^2 times area.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples = 200_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let z: f64 = rng.gen_range(-1.0..1.0); // φ_3 is uniform on S^2 (Archimedes)
            acc += z * z;
        }
        let mc = 4.0 * PI * acc / samples as f64;
        assert!((mc - exact).abs() < 0.02 * exact);
    }

    #[test]
    fn matches_closed_form_for_n3() {
        for &s in &[0.1, 0.5, 0.75, 0.9, 0.999] {
            let k = Kernel::new(spec(3, s)).unwrap();
            for &x in &[1e-6, 1e-3, 0.01, 0.3, 0.999, 1.0, 1.001, 2.5, 7.0, 20.0] {
                assert_relative_eq!(k.value(x).unwrap(), k3_closed_form(x, s), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn matches_raw_form_for_higher_n() {
        for &(n, s) in &[(4, 0.75), (5, 0.3), (6, 0.9)] {
            let k = Kernel::new(spec(n, s)).unwrap();
            for &x in &[0.5, 1.5, 4.0] {
                assert_relative_eq!(
                    k.value(x).unwrap(),
                    raw_by_adaptive(x, n, s),
                    max_relative = 1e-10
                );
                assert_relative_eq!(
                    k.value(-x).unwrap(),
                    raw_by_adaptive(-x, n, s),
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn evenness_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, s) in &[(3, 0.5), (3, 0.9), (4, 0.75)] {
            let sp = spec(n, s);
            let k = Kernel::new(sp).unwrap();
            for _ in 0..200 {
                let x: f64 = rng.gen_range(-30.0..30.0);
                if x == 0.0 {
                    continue;
                }
                let (a, b) = (k.value(x).unwrap(), k.value(-x).unwrap());
                assert!(a > 0.0);
                assert!((a - b).abs() <= sp.abs_tol * (1.0 + a));
            }
        }
    }

    #[test]
    fn singularity_and_underflow() {
        let k = Kernel::new(spec(3, 0.75)).unwrap();
        assert!(matches!(k.value(0.0), Err(Error::Singularity(_))));
        let far = k.sample(400.0).unwrap();
        assert!(far.underflow);
        assert_eq!(far.value, 0.0);
        assert!(far.bound < f64::MIN_POSITIVE);
    }

    #[test]
    fn near_origin_ratio() {
        let k = Kernel::new(spec(3, 0.75)).unwrap();
        let ratio = k.value(1e-3).unwrap() / k.value(1e-4).unwrap();
        let expected = 10f64.powf(-2.5);
        assert!((ratio - expected).abs() < 0.05 * expected);
        assert_relative_eq!(
            k.value(1e-6).unwrap(),
            k.near_origin_law(1e-6),
            max_relative = 1e-6
        );
    }

    #[test]
    fn tail_log_difference() {
        let k = Kernel::new(spec(3, 0.75)).unwrap();
        let d = k.value(20.0).unwrap().ln() - k.value(22.0).unwrap().ln();
        assert!((d - 4.5).abs() < 0.05 * 4.5);
    }

    #[test]
    fn bounds_bracket_value() {
        let k = Kernel::new(spec(4, 0.6)).unwrap();
        for &x in &[0.05, 0.9, 1.1, 3.0, 12.0] {
            let v = k.value(x).unwrap();
            assert!(k.lower_bound(x) <= v && v <= k.upper_bound(x));
        }
    }

    #[test]
    fn periodization_properties() {
        let sp = spec(3, 0.75);
        let k = Kernel::new(sp).unwrap();
        let l = 40.0;
        let a = k.periodized(1.0, l).unwrap();
        let b = k.periodized(41.0, l).unwrap();
        assert_eq!(a.value, b.value);
        assert!(a.value >= k.value(1.0).unwrap());
        // explicit tail summation oracle
        let explicit: f64 = (1..=3)
            .map(|j| k3_closed_form(1.0 - j as f64 * l, 0.75) + k3_closed_form(1.0 + j as f64 * l, 0.75))
            .sum();
        let diff = a.value - k.value(1.0).unwrap();
        assert!(diff < 3.0 * k.value(l - 1.0).unwrap());
        assert_relative_eq!(diff, explicit, max_relative = 1e-10);
        assert!(matches!(k.periodized(80.0, l), Err(Error::Singularity(_))));
    }

    #[test]
    fn periodization_small_period() {
        let k = Kernel::new(spec(3, 0.5)).unwrap();
        let l = 0.7;
        let v = k.periodized(0.2, l).unwrap();
        let brute: f64 = (-200..=200)
            .map(|j| k3_closed_form(0.2 - j as f64 * l, 0.5))
            .sum();
        assert_relative_eq!(v.value, brute, max_relative = 1e-12);
    }

    #[test]
    fn printed_form_is_not_even() {
        let sp = spec(3, 0.75).with_form(KernelForm::Printed);
        let k = Kernel::new(sp).unwrap();
        let plus = k.value(1.0).unwrap();
        match k.value(-1.0) {
            Ok(minus) => assert!((plus - minus).abs() > 1e-3 * plus),
            Err(e) => assert!(matches!(e, Error::Domain(_))),
        }
    }

    #[test]
    fn a_identity() {
        let sp = spec(3, 0.5);
        let a = check_a(&sp).unwrap();
        assert!((a - sp.params.c).abs() < 1e-4, "A = {a}, c = {}", sp.params.c);
    }

    #[test]
    fn spec_validation() {
        let p = make_params(3, 0.5).unwrap();
        let mut sp = KernelSpec::new(p).unwrap();
        sp.angular_nodes = 16;
        assert!(sp.validate().is_err());
        assert!(KernelSpec::new(make_params(3, 0.9995).unwrap()).is_err());
        assert!(KernelSpec::new(make_params(3, 0.01).unwrap()).is_err());
    }

    #[test]
    fn table_build() {
        let t = KernelTable::build(spec(3, 0.75), Period::Finite(10.0), vec![2.0, -1.0, 0.5]).unwrap();
        assert_eq!(t.offsets, vec![-1.0, 0.5, 2.0]);
        let per = t.periodized_values.as_ref().unwrap();
        for (v, p) in t.line_values.iter().zip(per) {
            assert!(p >= v && *v > 0.0);
        }
        assert!(t.tail_bound() <= 1e-12);
    }
}
