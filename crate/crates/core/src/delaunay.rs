//! Delaunay solutions: periodic minimizers of `E_{s,L}`, rescaled and
//! Newton-refined into solutions of `P_s v + c v = c v^p`.
//!
//! All iterates are kept even about `t = 0`, which removes the translation
//! zero mode. Reported solutions have their minimum (the neck) at `t = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::Params;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelSpec};
use crate::operator::{
    assemble_ps_with, residual, Circulant, Field, Grid, NonlocalOperator, Symbol, MAX_GRID, MIN_GRID,
};

/// Largest grid spacing the pipeline will use.
pub const MAX_SPACING: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Constant,
    Delaunay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: Params,
    #[serde(rename = "L")]
    pub period: f64,
    pub m: usize,
    pub epsilon: f64,
    pub vmax: f64,
    pub energy: f64,
    pub residual_norm: f64,
    pub gradient_iterations: usize,
    pub newton_iterations: usize,
    pub branch: Branch,
    #[serde(rename = "L_star")]
    pub l_star: f64,
}

impl SolveReport {
    /// `max v ≤ ĉ (1 + rel)`.
    pub fn satisfies_sup_bound(&self, rel: f64) -> bool {
        self.vmax <= self.params.c_hat * (1.0 + rel)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    pub report: SolveReport,
}

/// Smallest power-of-two grid with spacing at most [`MAX_SPACING`].
pub fn default_grid_size(period: f64) -> usize {
    let need = (period / MAX_SPACING).ceil() as usize;
    need.next_power_of_two().clamp(MIN_GRID, MAX_GRID)
}

/// `u_i = (v_i + v_{-i}) / 2`.
pub fn symmetrize(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    (0..m).map(|i| 0.5 * (v[i] + v[(m - i) % m])).collect()
}

/// Energy quotient `E = h vᵀ(P_s + c)v / (h Σ |v|^q)^{2/q}`, `q = 2n/(n-2s)`.
pub struct Energy {
    a: Circulant,
    h: f64,
    q: f64,
}

/// Energy value with the gradient density `∂E/∂v_i / h`.
#[derive(Debug, Clone)]
pub struct EnergyEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub denominator: f64,
}

impl Energy {
    pub fn new(op: &NonlocalOperator) -> Self {
        Self {
            a: Circulant::new(op, op.params().c),
            h: op.grid.spacing(),
            q: op.params().energy_exponent(),
        }
    }

    fn power_sum(&self, v: &[f64]) -> f64 {
        self.h * v.iter().map(|x| x.abs().powf(self.q)).sum::<f64>()
    }

    pub fn value(&self, v: &[f64]) -> Result<f64> {
        let av = self.a.apply(v);
        let num = self.h * av.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let s = self.power_sum(v);
        if !(s > 0.0) {
            return Err(Error::domain("energy denominator vanishes"));
        }
        Ok(num / s.powf(2.0 / self.q))
    }

    pub fn evaluate(&self, v: &[f64]) -> Result<EnergyEval> {
        let av = self.a.apply(v);
        let num = self.h * av.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let s = self.power_sum(v);
        if !(s > 0.0) {
            return Err(Error::domain("energy denominator vanishes"));
        }
        let d = s.powf(2.0 / self.q);
        let e = num / d;
        let gradient = av
            .iter()
            .zip(v)
            .map(|(a, &x)| 2.0 * (a / d - e * x.abs().powf(self.q - 2.0) * x / s))
            .collect();
        Ok(EnergyEval {
            value: e,
            gradient,
            denominator: s,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        self.a.solve(g)
    }

    fn normalize(&self, v: &mut [f64]) {
        let scale = self.power_sum(v).powf(-1.0 / self.q);
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

/// `E_{s,L}(v)`.
pub fn energy(v: &Field, op: &NonlocalOperator) -> Result<f64> {
    if v.grid != op.grid {
        return Err(Error::parameter("field and operator live on different grids"));
    }
    Energy::new(op).value(&v.samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Max-norm of the gradient density at unit denominator.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimizer {
    /// Normalized to `h Σ v^q = 1`.
    pub field: Field,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Sobolev-preconditioned gradient descent on the unit-denominator manifold,
/// restricted to fields even about `t = 0`, with Armijo backtracking.
pub fn minimize_energy(op: &NonlocalOperator, init: &Field, opts: &MinimizeOptions) -> Result<Minimizer> {
    if init.grid != op.grid {
        return Err(Error::parameter(
            "initial field and operator live on different grids",
        ));
    }
    let functional = Energy::new(op);
    let mut v = symmetrize(&init.samples);
    functional.normalize(&mut v);
    let mut eval = functional.evaluate(&v)?;
    let mut alpha: f64 = 1.0;
    let h = functional.spacing();
    for it in 0..=opts.max_iter {
        let grad_norm = eval.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < opts.grad_tol {
            return Ok(Minimizer {
                field: Field::new(op.grid, v)?,
                energy: eval.value,
                grad_norm,
                iterations: it,
            });
        }
        if it == opts.max_iter {
            let last = Field::new(op.grid, v)?;
            return Err(Error::NonConvergence {
                what: "energy minimization".into(),
                iterations: it,
                measure: grad_norm,
                last: Some(Box::new(last)),
            });
        }
        let d: Vec<f64> = symmetrize(&functional.precondition(&eval.gradient))
            .into_iter()
            .map(|x| -x)
            .collect();
        let slope = h * eval.gradient.iter().zip(&d).map(|(g, x)| g * x).sum::<f64>();
        let slack = 8.0 * f64::EPSILON * eval.value.abs();
        alpha = (2.0 * alpha).min(16.0);
        loop {
            let mut trial: Vec<f64> = v.iter().zip(&d).map(|(x, y)| x + alpha * y).collect();
            functional.normalize(&mut trial);
            let trial_eval = functional.evaluate(&trial)?;
            if trial_eval.value <= eval.value + 1e-4 * alpha * slope + slack {
                v = trial;
                eval = trial_eval;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                let last = Field::new(op.grid, v)?;
                return Err(Error::NonConvergence {
                    what: "energy minimization line search".into(),
                    iterations: it,
                    measure: grad_norm,
                    last: Some(Box::new(last)),
                });
            }
        }
    }
    unreachable!("loop returns on the final iteration")
}

/// Multiplies a critical point of `E` by the unique `a > 0` that turns it into
/// a solution: `a^{p-1} = Q(w) / (c h Σ w^{p+1})`.
pub fn rescale_to_solution(w: &Field, op: &NonlocalOperator) -> Result<Field> {
    let params = op.params();
    let h = op.grid.spacing();
    let a = Circulant::new(op, params.c).apply(&w.samples);
    let q = h * a.iter().zip(&w.samples).map(|(x, y)| x * y).sum::<f64>();
    let s = h * w
        .samples
        .iter()
        .map(|x| x.abs().powf(params.p + 1.0))
        .sum::<f64>();
    let ratio = q / (params.c * s);
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::InconsistentCriticalPoint(format!(
            "multiplier ratio {ratio} is not positive"
        )));
    }
    Ok(w.scaled(ratio.powf(1.0 / (params.p - 1.0))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub field: Field,
    pub iterations: usize,
    /// Max-norm residual before each step and after the last.
    pub residual_history: Vec<f64>,
    /// The starting field followed by every accepted iterate.
    pub iterates: Vec<Field>,
}

/// Damped Newton on the residual, in the space of fields even about `t = 0`.
pub fn newton_refine(v: &Field, op: &NonlocalOperator, opts: &NewtonOptions) -> Result<NewtonReport> {
    let params = *op.params();
    let m = op.grid.len();
    let half = m / 2;
    let mut x = Field::new(op.grid, symmetrize(&v.samples))?;
    let mut r = residual(&x, op, &params)?;
    let mut history = vec![r.max_abs()];
    let mut iterates = vec![x.clone()];
    if history[0] >= 0.1 {
        return Err(Error::parameter(format!(
            "Newton needs a starting residual below 0.1, got {:.3e}",
            history[0]
        )));
    }
    for it in 0..opts.max_iter {
        let rn = *history.last().expect("non-empty");
        if rn < opts.tol {
            return Ok(NewtonReport {
                field: x,
                iterations: it,
                residual_history: history,
                iterates,
            });
        }
        // even-reduced Jacobian: unknowns u_k = v_k = v_{m-k}, k = 0..=m/2
        let pc = params.p * params.c;
        let jac = DMatrix::from_fn(half + 1, half + 1, |i, k| {
            let mut val = op.matrix[(i, k)];
            if k != 0 && k != half {
                val += op.matrix[(i, m - k)];
            }
            if i == k {
                val += params.c - pc * ((params.p - 1.0) * x.samples[i].ln()).exp();
            }
            val
        });
        let rhs = DVector::from_iterator(half + 1, r.samples[..=half].iter().map(|y| -y));
        let lu = jac.lu();
        let pivots = lu.u().diagonal().map(f64::abs);
        let (pmin, pmax) = (pivots.min(), pivots.max());
        if !(pmin > 1e-13 * pmax) {
            return Err(Error::SingularLinearization(format!(
                "pivot ratio {:.3e} at L = {}; perturb the period away from the bifurcation",
                pmin / pmax,
                op.grid.period()
            )));
        }
        let du = lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularLinearization("LU solve failed".into()))?;
        let step: Vec<f64> = (0..m).map(|i| du[i.min(m - i)]).collect();
        let mut damping = 1.0;
        let (next, next_r) = loop {
            let trial: Vec<f64> = x
                .samples
                .iter()
                .zip(&step)
                .map(|(a, b)| a + damping * b)
                .collect();
            if trial.iter().all(|&y| y > 0.0) {
                let f = Field::new(op.grid, trial)?;
                let fr = residual(&f, op, &params)?;
                if fr.max_abs() < rn || damping < 1e-3 {
                    break (f, fr);
                }
            }
            damping *= 0.5;
            if damping < 1e-10 {
                return Err(Error::NonConvergence {
                    what: "Newton damping".into(),
                    iterations: it,
                    measure: rn,
                    last: Some(Box::new(x)),
                });
            }
        };
        x = next;
        r = next_r;
        history.push(r.max_abs());
        iterates.push(x.clone());
    }
    let rn = *history.last().expect("non-empty");
    if rn < opts.tol {
        return Ok(NewtonReport {
            field: x,
            iterations: opts.max_iter,
            residual_history: history,
            iterates,
        });
    }
    Err(Error::NonConvergence {
        what: "Newton refinement".into(),
        iterations: opts.max_iter,
        measure: rn,
        last: Some(Box::new(x)),
    })
}

/// Period `L*` at which the first cosine mode of the linearization at `v ≡ 1`
/// becomes neutral: `θ_s(2π/L*) = (p - 1) c`.
pub fn bifurcation_threshold(params: &Params) -> Result<f64> {
    let symbol = Symbol::new(KernelSpec::new(*params)?)?;
    bifurcation_threshold_with(&symbol)
}

pub(crate) fn bifurcation_threshold_with(symbol: &Symbol) -> Result<f64> {
    let params = symbol.kernel().params();
    let target = (params.p - 1.0) * params.c;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut guard = 0;
    while symbol.theta(hi)? < target {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::parameter("bifurcation bracket not found"));
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if symbol.theta(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(2.0 * std::f64::consts::PI / (0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Grid size; `None` picks [`default_grid_size`].
    pub m: Option<usize>,
    /// Gradient tolerance at which descent hands over to Newton.
    pub handoff_tol: f64,
    pub max_gradient_iter: usize,
    pub newton: NewtonOptions,
    /// Amplitude of the cosine kick added to the starting field.
    pub kick: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            m: None,
            handoff_tol: 1e-6,
            max_gradient_iter: 100_000,
            newton: NewtonOptions::default(),
            kick: 0.3,
        }
    }
}

/// Kernel, threshold and per-period operators for one `(n, s)`.
#[derive(Debug, Clone)]
pub struct Solver {
    kernel: Kernel,
    l_star: f64,
    pub options: SolveOptions,
}

impl Solver {
    pub fn new(params: Params, options: SolveOptions) -> Result<Self> {
        let kernel = Kernel::new(KernelSpec::new(params)?)?;
        let l_star = bifurcation_threshold_with(&Symbol::from_kernel(kernel.clone()))?;
        Ok(Self {
            kernel,
            l_star,
            options,
        })
    }

    pub fn params(&self) -> &Params {
        self.kernel.params()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn l_star(&self) -> f64 {
        self.l_star
    }

    pub fn operator(&self, period: f64, m: Option<usize>) -> Result<NonlocalOperator> {
        let m = m.or(self.options.m).unwrap_or_else(|| default_grid_size(period));
        assemble_ps_with(Grid::new(period, m)?, &self.kernel)
    }

    /// Starting field: bubble lattice for long periods, cosine kick otherwise.
    /// Maximum at `t = 0`.
    pub fn initial_field(&self, grid: Grid) -> Field {
        let l = grid.period();
        if l > 2.0 * self.l_star {
            Field::periodized_bubble(grid, self.params()).shifted(grid.len() / 2)
        } else {
            let w = 2.0 * std::f64::consts::PI / l;
            Field::from_fn(grid, |t| 1.0 + self.options.kick * (w * t).cos())
        }
    }

    pub fn solve(&self, period: f64, warm: Option<&Field>) -> Result<Solution> {
        let op = self.operator(period, None)?;
        // a flat warm start is a critical point and would pin descent there
        let init = match warm {
            Some(f) if f.max() - f.min() > 1e-8 => stretch(f, op.grid),
            _ => self.initial_field(op.grid),
        };
        self.solve_on(&op, &init)
    }

    /// Minimizes, rescales and refines on `op`. Up to `L*` the minimizer is
    /// the constant `v ≡ 1`, which is returned directly: at `L*` itself the
    /// linearization is singular and Newton would stall.
    pub fn solve_on(&self, op: &NonlocalOperator, init: &Field) -> Result<Solution> {
        if op.grid.period() <= self.l_star {
            return self.constant_solution(op);
        }
        let mopts = MinimizeOptions {
            grad_tol: self.options.handoff_tol,
            max_iter: self.options.max_gradient_iter,
        };
        let min = minimize_energy(op, init, &mopts)?;
        let start = rescale_to_solution(&min.field, op)?;
        let newton = newton_refine(&start, op, &self.options.newton)?;
        let mut field = newton.field;
        let k = field.argmin();
        field = field.shifted(k);
        let params = *self.params();
        let residual_norm = residual(&field, op, &params)?.max_abs();
        let (epsilon, vmax) = (field.min(), field.max());
        let branch = if vmax - epsilon < 1e-8 {
            Branch::Constant
        } else {
            Branch::Delaunay
        };
        Ok(Solution {
            report: SolveReport {
                params,
                period: op.grid.period(),
                m: op.grid.len(),
                epsilon,
                vmax,
                energy: energy(&field, op)?,
                residual_norm,
                gradient_iterations: min.iterations,
                newton_iterations: newton.iterations,
                branch,
                l_star: self.l_star,
            },
            field,
        })
    }

    fn constant_solution(&self, op: &NonlocalOperator) -> Result<Solution> {
        let params = *self.params();
        let field = Field::constant(op.grid, 1.0);
        Ok(Solution {
            report: SolveReport {
                params,
                period: op.grid.period(),
                m: op.grid.len(),
                epsilon: 1.0,
                vmax: 1.0,
                energy: energy(&field, op)?,
                residual_norm: residual(&field, op, &params)?.max_abs(),
                gradient_iterations: 0,
                newton_iterations: 0,
                branch: Branch::Constant,
                l_star: self.l_star,
            },
            field,
        })
    }

    /// Solves along increasing periods, warm-starting each from the last.
    pub fn continue_branch(&self, periods: &[f64]) -> Result<Vec<Solution>> {
        if periods.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::parameter("periods must be strictly increasing"));
        }
        if let Some(&first) = periods.first() {
            if first <= self.l_star {
                return Err(Error::parameter(format!(
                    "branch must start above L* = {:.6}, got {first}",
                    self.l_star
                )));
            }
        }
        let mut out: Vec<Solution> = Vec::with_capacity(periods.len());
        for (i, &l) in periods.iter().enumerate() {
            let warm = out
                .last()
                .filter(|s| s.report.branch == Branch::Delaunay)
                .map(|s| s.field.clone());
            let sol = self.solve(l, warm.as_ref()).map_err(|e| annotate(e, i, l))?;
            out.push(sol);
        }
        Ok(out)
    }
}

fn annotate(e: Error, index: usize, period: f64) -> Error {
    match e {
        Error::NonConvergence {
            what,
            iterations,
            measure,
            last,
        } => Error::NonConvergence {
            what: format!("{what} (branch point {index}, L = {period})"),
            iterations,
            measure,
            last,
        },
        other => other,
    }
}

/// `v` rescaled in `t` onto `grid` (same number of periods).
pub fn stretch(v: &Field, grid: Grid) -> Field {
    let ratio = v.grid.period() / grid.period();
    Field::from_fn(grid, |t| v.interpolate(t * ratio))
}

/// One-off solve with default kernel settings.
pub fn solve(params: Params, period: f64, options: SolveOptions) -> Result<Solution> {
    Solver::new(params, options)?.solve(period, None)
}

/// `continue_branch` with default kernel settings.
pub fn continue_branch(params: Params, periods: &[f64], options: SolveOptions) -> Result<Vec<Solution>> {
    Solver::new(params, options)?.continue_branch(periods)
}

/// Euclidean conformal factor `u(r) = r^{(2s-n)/2} v(-ln r)`.
pub fn euclidean_profile(v: &Field, params: &Params, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let e = params.weight_exponent();
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::domain(format!("radius must be positive, got {r}")));
            }
            let l = v.grid.period();
            let t = (-r.ln()).rem_euclid(l);
            Ok((r, r.powf(e) * v.interpolate(t)))
        })
        .collect()
}
