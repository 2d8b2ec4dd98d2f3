//! Dense periodic discretization of `P_{s,L}`, the equation residual, its
//! linearization, and the radial symbol `θ_s`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::constants::{riemann_zeta, Params};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelSpec};
use crate::quad::GaussLegendre;

pub const MIN_GRID: usize = 64;
pub const MAX_GRID: usize = 8192;

/// Uniform periodic grid `t_i = i L / m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(rename = "L")]
    period: f64,
    m: usize,
}

impl Grid {
    pub fn new(period: f64, m: usize) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::parameter(format!("period must be positive, got {period}")));
        }
        if !m.is_power_of_two() || !(MIN_GRID..=MAX_GRID).contains(&m) {
            return Err(Error::parameter(format!(
                "grid size must be a power of two in [{MIN_GRID}, {MAX_GRID}], got {m}"
            )));
        }
        Ok(Self { period, m })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.m as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.node(i)).collect()
    }
}

/// Samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: Grid,
    pub samples: Vec<f64>,
    pub positive: bool,
}

impl Field {
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::parameter(format!(
                "field has {} samples on a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        let positive = samples.iter().all(|&v| v > 0.0);
        Ok(Self {
            grid,
            samples,
            positive,
        })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            samples: vec![value; grid.len()],
            positive: value > 0.0,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let samples: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        let positive = samples.iter().all(|&v| v > 0.0);
        Self {
            grid,
            samples,
            positive,
        }
    }

    /// Lattice sum `Σ_j v_∘(t - L/2 - jL)` of the spherical solution centred
    /// at `L/2`; smooth and exactly periodic, unlike a truncated bubble.
    pub fn periodized_bubble(grid: Grid, params: &Params) -> Self {
        let l = grid.period();
        let a = -params.weight_exponent();
        // copies decay like ĉ 2^a e^{-a|t|}
        let reach = ((params.c_hat * 2f64.powf(a) / 1e-18).ln() / a / l).ceil() as i64 + 1;
        Self::from_fn(grid, |t| {
            (-reach..=reach)
                .map(|j| params.bubble(t - 0.5 * l - j as f64 * l))
                .sum()
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn argmin(&self) -> usize {
        self.samples
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Cyclic shift: `out[i] = self[(i + k) mod m]`.
    pub fn shifted(&self, k: usize) -> Self {
        let m = self.len();
        let samples = (0..m).map(|i| self.samples[(i + k) % m]).collect();
        Self {
            grid: self.grid,
            samples,
            positive: self.positive,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Field::new(self.grid, self.samples.iter().map(|v| a * v).collect()).expect("same grid length")
    }

    /// Periodic band-limited interpolation at an arbitrary `t`.
    pub fn interpolate(&self, t: f64) -> f64 {
        let coeffs = fourier_coefficients(&self.samples);
        eval_trig(&coeffs, self.grid.period(), t)
    }

    /// [`Field::interpolate`] at many points, sharing one transform.
    pub fn interpolate_many(&self, ts: &[f64]) -> Vec<f64> {
        let coeffs = fourier_coefficients(&self.samples);
        ts.iter()
            .map(|&t| eval_trig(&coeffs, self.grid.period(), t))
            .collect()
    }

    /// Resamples onto a grid of the same period with `m` points.
    pub fn resample(&self, m: usize) -> Result<Self> {
        let grid = Grid::new(self.grid.period(), m)?;
        let coeffs = fourier_coefficients(&self.samples);
        Field::new(
            grid,
            grid.nodes()
                .iter()
                .map(|&t| eval_trig(&coeffs, grid.period(), t))
                .collect(),
        )
    }

    /// Spectral derivative in `t`.
    pub fn derivative(&self) -> Self {
        let m = self.len();
        let mut buf: Vec<Complex64> = self.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(m).process(&mut buf);
        let w0 = 2.0 * PI / self.grid.period();
        for (k, c) in buf.iter_mut().enumerate() {
            let kk = if k < m / 2 {
                k as f64
            } else if k == m / 2 {
                0.0
            } else {
                k as f64 - m as f64
            };
            *c *= Complex64::new(0.0, w0 * kk);
        }
        planner.plan_fft_inverse(m).process(&mut buf);
        let samples = buf.iter().map(|c| c.re / m as f64).collect();
        Field::new(self.grid, samples).expect("same grid length")
    }

    /// Spectral translation `t ↦ v(t + shift)`.
    pub fn translated(&self, shift: f64) -> Self {
        let m = self.len();
        let mut buf: Vec<Complex64> = self.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(m).process(&mut buf);
        let w0 = 2.0 * PI / self.grid.period();
        for (k, c) in buf.iter_mut().enumerate() {
            let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            if k == m / 2 {
                *c *= (w0 * kk * shift).cos();
            } else {
                *c *= Complex64::from_polar(1.0, w0 * kk * shift);
            }
        }
        planner.plan_fft_inverse(m).process(&mut buf);
        let samples = buf.iter().map(|c| c.re / m as f64).collect();
        Field::new(self.grid, samples).expect("same grid length")
    }

    pub(crate) fn require_positive(&self, what: &str) -> Result<()> {
        if let Some((i, v)) = self.samples.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::domain(format!(
                "{what}: field sample {i} is {v}, fractional power needs v > 0"
            )));
        }
        Ok(())
    }
}

/// Normalized DFT coefficients with signed frequencies.
fn fourier_coefficients(samples: &[f64]) -> Vec<(f64, Complex64)> {
    let m = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    buf.into_iter()
        .enumerate()
        .map(|(k, c)| {
            let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            (kk, c / m as f64)
        })
        .collect()
}

fn eval_trig(coeffs: &[(f64, Complex64)], period: f64, t: f64) -> f64 {
    let m = coeffs.len();
    let w0 = 2.0 * PI / period;
    coeffs
        .iter()
        .enumerate()
        .map(|(k, (kk, c))| {
            if k == m / 2 {
                c.re * (w0 * kk * t).cos()
            } else {
                (c * Complex64::from_polar(1.0, w0 * kk * t)).re
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Ps,
    Linearization,
}

/// Dense symmetric matrix on a grid.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    pub kind: OperatorKind,
    /// Circulant weights `w_0..w_{m-1}` of `P_s` (with `w_0` unused).
    weights: Vec<f64>,
    params: Params,
}

impl NonlocalOperator {
    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Off-diagonal weights `w_j`, `j = 0..m` (`w_0 = 0`); the `P_s` matrix
    /// has entries `-w_{(j - i) mod m}` and diagonal `Σ w_j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(v);
        (&self.matrix * x).as_slice().to_vec()
    }

    /// Eigenvalues of the `P_s` circulant, `λ_k = Σ_j w_j (1 - cos 2πjk/m)`,
    /// indexed by frequency `k = 0..m`.
    pub fn circulant_symbols(&self) -> Vec<f64> {
        let m = self.grid.len();
        let mut buf: Vec<Complex64> = self.weights.iter().map(|&w| Complex64::new(w, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let total: f64 = self.weights.iter().sum();
        buf.iter().map(|c| total - c.re).collect()
    }

    pub fn rayleigh_quotient(&self, v: &[f64]) -> f64 {
        let av = self.apply(v);
        let num: f64 = av.iter().zip(v).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|b| b * b).sum();
        num / den
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.grid.len();
        (0..m).all(|i| (0..i).all(|j| self.matrix[(i, j)] == self.matrix[(j, i)]))
    }

    pub fn max_row_sum(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// FFT realization of a shifted `P_s` circulant, `P_s + shift·I`.
pub struct Circulant {
    eig: Vec<f64>,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for Circulant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Circulant").field("m", &self.eig.len()).finish()
    }
}

impl Circulant {
    pub fn new(op: &NonlocalOperator, shift: f64) -> Self {
        let m = op.grid.len();
        let mut planner = FftPlanner::new();
        Self {
            eig: op.circulant_symbols().into_iter().map(|l| l + shift).collect(),
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    fn multiply(&self, v: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        let m = v.len();
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        for (c, &l) in buf.iter_mut().zip(&self.eig) {
            *c *= f(l);
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re / m as f64).collect()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.multiply(v, |l| l)
    }

    /// Inverse; the caller guarantees every eigenvalue is nonzero.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.multiply(v, |l| 1.0 / l)
    }
}

/// Builds the circulant weights of `P_{s,L}` on `grid`.
///
/// Off the band, `w_j = h K_{s,L}(jh)`. At `j = 1, 2` (and mirrored) the
/// weights get the zeta correction that makes the trapezoid sum exact on the
/// `ξ²` moment of `C|ξ|^{-1-2s}` (and on the `ξ⁴` moment too whenever that
/// keeps `w_2 ≥ 0`). Weights are then
/// rounded to a common binary quantum so every row sums to zero exactly.
pub(crate) fn circulant_weights(grid: &Grid, kernel: &Kernel) -> Result<Vec<f64>> {
    let m = grid.len();
    let h = grid.spacing();
    let l = grid.period();
    let half: Vec<f64> = (1..=m / 2)
        .into_par_iter()
        .map(|j| kernel.periodized(j as f64 * h, l).map(|k| h * k.value))
        .collect::<Result<_>>()?;
    let mut w = vec![0.0; m];
    for j in 1..m {
        w[j] = half[j.min(m - j) - 1];
    }
    let s = kernel.params().s;
    let c = kernel.near_origin_constant();
    let z1 = riemann_zeta(2.0 * s - 1.0)?;
    let z3 = riemann_zeta(2.0 * s - 3.0)?;
    let hs = h.powf(-2.0 * s);
    // quartic-optimal split, clamped so the j = 2 weight stays nonnegative;
    // the quadratic moment is matched exactly either way
    let c2 = ((z1 - z3) * c * hs / 12.0).max(-w[2]);
    let c1 = -z1 * c * hs - 4.0 * c2;
    for (j, cj) in [(1, c1), (2, c2)] {
        w[j] += cj;
        w[m - j] += cj;
    }
    if let Some(j) = w[1..].iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::Numeric(format!(
            "negative operator weight at offset {}",
            j + 1
        )));
    }
    let diag: f64 = w.iter().sum();
    let quantum = 2f64.powi(diag.log2().ceil() as i32 - 52);
    for x in w.iter_mut() {
        *x = (*x / quantum).round() * quantum;
    }
    Ok(w)
}

fn circulant_matrix(w: &[f64]) -> DMatrix<f64> {
    let m = w.len();
    let diag: f64 = w.iter().sum();
    DMatrix::from_fn(m, m, |i, j| if i == j { diag } else { -w[(j + m - i) % m] })
}

/// Dense `P_{s,L}` on `grid`.
pub fn assemble_ps(grid: Grid, spec: &KernelSpec) -> Result<NonlocalOperator> {
    let kernel = Kernel::new(*spec)?;
    assemble_ps_with(grid, &kernel)
}

pub(crate) fn assemble_ps_with(grid: Grid, kernel: &Kernel) -> Result<NonlocalOperator> {
    let weights = circulant_weights(&grid, kernel)?;
    Ok(NonlocalOperator {
        grid,
        matrix: circulant_matrix(&weights),
        kind: OperatorKind::Ps,
        weights,
        params: *kernel.params(),
    })
}

/// `P_s v + c v - c v^p`.
pub fn residual(v: &Field, op: &NonlocalOperator, params: &Params) -> Result<Field> {
    check_compatible(v, op)?;
    v.require_positive("residual")?;
    let pv = op.apply(&v.samples);
    let c = params.c;
    let samples = pv
        .iter()
        .zip(&v.samples)
        .map(|(a, &x)| a + c * x - c * (params.p * x.ln()).exp())
        .collect();
    Field::new(v.grid, samples)
}

/// `P_s + c - p c v^{p-1}`.
pub fn assemble_linearization(v: &Field, op: &NonlocalOperator, params: &Params) -> Result<NonlocalOperator> {
    check_compatible(v, op)?;
    v.require_positive("linearization")?;
    let mut matrix = op.matrix.clone();
    for (i, &x) in v.samples.iter().enumerate() {
        matrix[(i, i)] += params.c - params.p * params.c * ((params.p - 1.0) * x.ln()).exp();
    }
    Ok(NonlocalOperator {
        grid: op.grid,
        matrix,
        kind: OperatorKind::Linearization,
        weights: op.weights.clone(),
        params: op.params,
    })
}

fn check_compatible(v: &Field, op: &NonlocalOperator) -> Result<()> {
    if op.kind != OperatorKind::Ps {
        return Err(Error::parameter("expected a P_s operator"));
    }
    if v.grid != op.grid {
        return Err(Error::parameter("field and operator live on different grids"));
    }
    Ok(())
}

/// Radial symbol `θ_s(ω) = ∫_R (1 - cos ωξ) K_s(ξ) dξ`.
#[derive(Debug, Clone)]
pub struct Symbol {
    kernel: Kernel,
}

impl Symbol {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        Ok(Self {
            kernel: Kernel::new(spec)?,
        })
    }

    pub fn from_kernel(kernel: Kernel) -> Self {
        Self { kernel }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn theta(&self, omega: f64) -> Result<f64> {
        let w = omega.abs();
        if w == 0.0 {
            return Ok(0.0);
        }
        if !w.is_finite() {
            return Err(Error::domain("symbol frequency must be finite"));
        }
        let k = &self.kernel;
        let s = k.params().s;
        let b = k.decay_rate();
        let tol = k.spec().abs_tol;
        // head: ∫_0^{τ0} (ω²ξ²/2) C ξ^{-1-2s}
        let tau0 = 1e-7 / w.max(1.0);
        let head = 0.5 * w * w * k.near_origin_constant() * tau0.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
        let width = (1.0 / w).min(0.5);
        let end = ((4.0 * k.upper_bound(1.0) * b.exp() / (b * 1e-3 * tol)).ln() / b).max(2.0);
        let mut pts = vec![tau0];
        let mut x = tau0;
        while 2.0 * x < width {
            x *= 2.0;
            pts.push(x);
        }
        let start = *pts.last().expect("non-empty");
        let count = ((end - start) / width).ceil() as usize;
        for j in 1..=count {
            pts.push(start + (end - start) * j as f64 / count as f64);
        }
        let rule = GaussLegendre::shared(k.spec().angular_nodes);
        let mut total = head;
        for win in pts.windows(2) {
            for (xi, wt) in rule.mapped(win[0], win[1]) {
                let sh = (0.5 * w * xi).sin();
                total += wt * 2.0 * sh * sh * k.value(xi)?;
            }
        }
        Ok(2.0 * total)
    }
}

/// `θ_s(ω)` for a one-off evaluation.
pub fn symbol_theta(omega: f64, spec: &KernelSpec) -> Result<f64> {
    Symbol::new(*spec)?.theta(omega)
}

/// `ln |Γ(x + iy)|` for `x > 0` (Lanczos, shifted up until `x ≥ 0.5`).
pub fn ln_abs_gamma_complex(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("ln|Γ| helper needs Re z > 0, got {x}")));
    }
    use crate::constants::{LANCZOS_COEF as COEF, LANCZOS_G as G};
    let mut z = Complex64::new(x, y);
    let mut shift = 0.0;
    while z.re < 0.5 {
        shift -= z.norm().ln();
        z += 1.0;
    }
    let zm = z - 1.0;
    let mut acc = Complex64::new(COEF[0], 0.0);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (zm + i as f64);
    }
    let t = zm + G + 0.5;
    let ln = 0.5 * (2.0 * PI).ln() + (zm + 0.5) * t.ln() - t + acc.ln();
    Ok(ln.re + shift)
}

/// Candidate closed form
/// `2^{2s} |Γ((n/2+s)/2 + iω/2)|² / |Γ((n/2-s)/2 + iω/2)|² - c`.
///
/// Only trustworthy after [`validate_gamma_symbol`] has accepted it.
pub fn gamma_ratio_symbol(omega: f64, params: &Params) -> Result<f64> {
    let half_n = params.dim() / 2.0;
    let s = params.s;
    let y = omega / 2.0;
    let ln = 2.0 * s * std::f64::consts::LN_2 + 2.0 * ln_abs_gamma_complex((half_n + s) / 2.0, y)?
        - 2.0 * ln_abs_gamma_complex((half_n - s) / 2.0, y)?;
    Ok(ln.exp() - params.c)
}

/// Outcome of comparing the Gamma-ratio symbol against quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolValidation {
    pub omegas: Vec<f64>,
    pub quadrature: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub max_rel_error: f64,
    pub accepted: bool,
}

/// Compares the closed form with `θ_s` quadrature; accepted below `rel_tol`.
pub fn validate_gamma_symbol(spec: &KernelSpec, omegas: &[f64], rel_tol: f64) -> Result<SymbolValidation> {
    let symbol = Symbol::new(*spec)?;
    let quadrature: Vec<f64> = omegas.iter().map(|&w| symbol.theta(w)).collect::<Result<_>>()?;
    let closed_form: Vec<f64> = omegas
        .iter()
        .map(|&w| gamma_ratio_symbol(w, &spec.params))
        .collect::<Result<_>>()?;
    let max_rel_error = quadrature
        .iter()
        .zip(&closed_form)
        .filter(|(q, _)| **q != 0.0)
        .map(|(q, g)| ((q - g) / q).abs())
        .fold(0.0, f64::max);
    Ok(SymbolValidation {
        omegas: omegas.to_vec(),
        quadrature,
        closed_form,
        max_rel_error,
        accepted: max_rel_error <= rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{gamma, make_params};
    use approx::assert_relative_eq;

    fn spec(n: u32, s: f64) -> KernelSpec {
        KernelSpec::new(make_params(n, s).unwrap()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(10.0, 100).is_err());
        assert!(Grid::new(10.0, 32).is_err());
        assert!(Grid::new(-1.0, 64).is_err());
        let g = Grid::new(10.0, 64).unwrap();
        assert_relative_eq!(g.spacing(), 10.0 / 64.0);
    }

    #[test]
    fn complex_gamma_helper() {
        // real axis
        for &x in &[0.3, 0.5, 1.0, 2.5, 7.2] {
            assert_relative_eq!(
                ln_abs_gamma_complex(x, 0.0).unwrap(),
                gamma(x).unwrap().ln(),
                epsilon = 1e-13
            );
        }
        // |Γ(1/2 + iy)|² = π / cosh(πy)
        for &y in &[0.3, 1.0, 4.0] {
            let v = 2.0 * ln_abs_gamma_complex(0.5, y).unwrap();
            assert_relative_eq!(v, (PI / (PI * y).cosh()).ln(), epsilon = 1e-12);
        }
        // |Γ(1 + iy)|² = πy / sinh(πy)
        let y: f64 = 0.7;
        assert_relative_eq!(
            2.0 * ln_abs_gamma_complex(1.0, y).unwrap(),
            (PI * y / (PI * y).sinh()).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ps_structure() {
        let g = Grid::new(10.0, 128).unwrap();
        let op = assemble_ps(g, &spec(3, 0.75)).unwrap();
        assert!(op.is_symmetric());
        for i in 0..128 {
            assert_eq!(op.matrix.row(i).iter().sum::<f64>(), 0.0);
            for j in 0..128 {
                if i != j {
                    assert!(op.matrix[(i, j)] <= 0.0);
                }
            }
        }
        let ones = vec![1.0; 128];
        assert!(op.apply(&ones).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fourier_modes_match_symbol() {
        let sp = spec(3, 0.75);
        let l = 10.0;
        let g = Grid::new(l, 1024).unwrap();
        let op = assemble_ps(g, &sp).unwrap();
        let sym = Symbol::new(sp).unwrap();
        for k in [1usize, 2, 4] {
            let v: Vec<f64> = g
                .nodes()
                .iter()
                .map(|t| (2.0 * PI * k as f64 * t / l).cos())
                .collect();
            let rq = op.rayleigh_quotient(&v);
            let th = sym.theta(2.0 * PI * k as f64 / l).unwrap();
            assert!((rq - th).abs() < 0.01 * th, "k={k}: {rq} vs {th}");
            assert_relative_eq!(op.circulant_symbols()[k], rq, max_relative = 1e-10);
        }
    }

    #[test]
    fn symbol_basic_properties() {
        let sym = Symbol::new(spec(3, 0.5)).unwrap();
        assert_eq!(sym.theta(0.0).unwrap(), 0.0);
        assert_relative_eq!(sym.theta(1.3).unwrap(), sym.theta(-1.3).unwrap());
        let mut prev = 0.0;
        for i in 1..20 {
            let v = sym.theta(0.5 * i as f64).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn symbol_near_local_limit() {
        let th = symbol_theta(1.0, &spec(3, 0.999)).unwrap();
        assert!((th - 1.0).abs() < 0.05, "θ(1) = {th}");
    }

    #[test]
    fn gamma_symbol_passes_validation() {
        for &(n, s) in &[(3, 0.5), (3, 0.9), (4, 0.75)] {
            let v = validate_gamma_symbol(&spec(n, s), &[0.3, 1.0, 2.0, 5.0], 1e-6).unwrap();
            assert!(v.accepted, "({n}, {s}): {:?}", v);
        }
    }

    #[test]
    fn residual_of_constants() {
        let p = make_params(3, 0.75).unwrap();
        let g = Grid::new(8.0, 64).unwrap();
        let op = assemble_ps(g, &KernelSpec::new(p).unwrap()).unwrap();
        let r = residual(&Field::constant(g, 1.0), &op, &p).unwrap();
        assert!(r.max_abs() <= 1e-15);
        let a = 1.7;
        let r = residual(&Field::constant(g, a), &op, &p).unwrap();
        for x in r.samples {
            assert_relative_eq!(x, p.c * (a - a.powf(p.p)), max_relative = 1e-12);
        }
        let mut bad = Field::constant(g, 1.0);
        bad.samples[3] = -0.1;
        assert!(matches!(residual(&bad, &op, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn linearization_at_one() {
        let p = make_params(3, 0.75).unwrap();
        let g = Grid::new(8.0, 64).unwrap();
        let op = assemble_ps(g, &KernelSpec::new(p).unwrap()).unwrap();
        let lin = assemble_linearization(&Field::constant(g, 1.0), &op, &p).unwrap();
        for i in 0..64 {
            assert_relative_eq!(
                lin.matrix[(i, i)] - op.matrix[(i, i)],
                p.c * (1.0 - p.p),
                max_relative = 1e-12
            );
        }
        let ones = vec![1.0; 64];
        assert_relative_eq!(
            lin.rayleigh_quotient(&ones),
            p.c * (1.0 - p.p),
            max_relative = 1e-12
        );
    }

    #[test]
    fn spectral_derivative_and_translation() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let f = Field::from_fn(g, |t| (2.0 * t).sin() + 0.3 * t.cos());
        let d = f.derivative();
        for (i, t) in g.nodes().iter().enumerate() {
            assert_relative_eq!(
                d.samples[i],
                2.0 * (2.0 * t).cos() - 0.3 * t.sin(),
                epsilon = 1e-12
            );
        }
        let tr = f.translated(0.4);
        for (i, t) in g.nodes().iter().enumerate() {
            let e = (2.0 * (t + 0.4)).sin() + 0.3 * (t + 0.4).cos();
            assert_relative_eq!(tr.samples[i], e, epsilon = 1e-12);
        }
        assert_relative_eq!(
            f.interpolate(0.123),
            (0.246f64).sin() + 0.3 * 0.123f64.cos(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn periodized_bubble_is_smooth_and_peaked() {
        let p = make_params(3, 0.75).unwrap();
        let g = Grid::new(20.0, 256).unwrap();
        let b = Field::periodized_bubble(g, &p);
        assert!(b.positive);
        assert_eq!(b.samples.iter().position(|&x| x == b.max()), Some(128));
        assert!((b.max() - p.c_hat).abs() < 1e-3);
    }
}
