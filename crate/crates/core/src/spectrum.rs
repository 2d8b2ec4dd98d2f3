//! Spectral certificates: bubble Morse index, the Dirichlet eigenvalue
//! `λ₁(L)`, Jacobi fields of Delaunay solutions, and the radial-sector
//! nondegeneracy margin.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::constants::Params;
use crate::delaunay::{Branch, Solution, Solver};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelSpec};
use crate::operator::{
    assemble_linearization, assemble_ps_with, residual, Field, Grid, NonlocalOperator, OperatorKind, MAX_GRID,
};

/// Eigenvalues with zero/negative classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub kind: OperatorKind,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub morse_index: usize,
    pub kernel_dim: usize,
    /// Smallest `|λ|` outside the identified kernel.
    pub margin: Option<f64>,
    pub tol: f64,
}

impl SpectralSummary {
    pub fn classify(kind: OperatorKind, mut eigenvalues: Vec<f64>, tol: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let morse_index = eigenvalues.iter().filter(|&&l| l < -tol).count();
        let kernel_dim = eigenvalues.iter().filter(|&&l| l.abs() <= tol).count();
        let margin = eigenvalues
            .iter()
            .filter(|l| l.abs() > tol)
            .map(|l| l.abs())
            .min_by(f64::total_cmp);
        Self {
            kind,
            eigenvalues,
            morse_index,
            kernel_dim,
            margin,
            tol,
        }
    }
}

/// Ascending eigenpairs of a symmetric matrix (vectors as columns).
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn symmetric_eigenpairs(matrix: &DMatrix<f64>) -> Result<Eigenpairs> {
    let n = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigenpairs { values, vectors })
}

pub fn symmetric_eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let vals = matrix.clone().symmetric_eigenvalues();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "symmetric eigensolver produced non-finite values".into(),
        ));
    }
    let mut v: Vec<f64> = vals.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Round-off level zero tolerance `10 m ε max|diag|`.
pub fn roundoff_tolerance(matrix: &DMatrix<f64>) -> f64 {
    let d = matrix.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    10.0 * matrix.nrows() as f64 * f64::EPSILON * d
}

/// `10 ‖𝕃 w‖₂ / ‖w‖₂` for a known kernel field `w`.
pub fn kernel_field_tolerance(matrix: &DMatrix<f64>, w: &[f64]) -> f64 {
    let x = DVector::from_column_slice(w);
    10.0 * (matrix * &x).norm() / x.norm()
}

/// Full spectrum of `op`; `tol` defaults to [`roundoff_tolerance`].
pub fn eigen_decompose(op: &NonlocalOperator, tol: Option<f64>) -> Result<SpectralSummary> {
    let tol = tol.unwrap_or_else(|| roundoff_tolerance(&op.matrix));
    Ok(SpectralSummary::classify(
        op.kind,
        symmetric_eigenvalues(&op.matrix)?,
        tol,
    ))
}

/// Deletes the rows and columns not in `keep` (diagonal kept in full).
pub fn restrict(matrix: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(keep.len(), keep.len(), |i, j| matrix[(keep[i], keep[j])])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleIndexReport {
    pub summary: SpectralSummary,
    /// `|⟨φ₀, v̇_∘⟩| / (‖φ₀‖ ‖v̇_∘‖)` for the eigenvector nearest zero.
    pub kernel_correlation: f64,
    /// `v_∘` at the box edge.
    pub boundary_value: f64,
    pub warnings: Vec<String>,
}

/// Morse index of the linearization at `v_∘` restricted to the box
/// `[-L_box/2, L_box/2]` sampled with `m` nodes. The ambient grid has period
/// `2 L_box`, so exterior kernel mass lands on the diagonal.
pub fn bubble_morse_index(params: &Params, l_box: f64, m: usize) -> Result<BubbleIndexReport> {
    let kernel = Kernel::new(KernelSpec::new(*params)?)?;
    let grid = Grid::new(2.0 * l_box, 2 * m)?;
    let op = assemble_ps_with(grid, &kernel)?;
    // box nodes: indices m/2 ..= 3m/2 - 1, centred at t = L_box
    let keep: Vec<usize> = (m / 2..m / 2 + m).collect();
    let centre = l_box;
    let p = params;
    let ts: Vec<f64> = keep.iter().map(|&i| grid.node(i) - centre).collect();
    let mut a = restrict(&op.matrix, &keep);
    for (i, &t) in ts.iter().enumerate() {
        let v = p.bubble(t);
        a[(i, i)] += p.c - p.p * p.c * ((p.p - 1.0) * v.ln()).exp();
    }
    let dv: Vec<f64> = ts.iter().map(|&t| p.bubble_derivative(t)).collect();
    let tol = kernel_field_tolerance(&a, &dv);
    let pairs = symmetric_eigenpairs(&a)?;
    let summary = SpectralSummary::classify(OperatorKind::Linearization, pairs.values.clone(), tol);
    let nearest = (0..m)
        .min_by(|&x, &y| pairs.values[x].abs().total_cmp(&pairs.values[y].abs()))
        .expect("non-empty");
    let phi: Vec<f64> = pairs.vectors.column(nearest).iter().copied().collect();
    let kernel_correlation = dot(&phi, &dv).abs() / (norm(&phi) * norm(&dv));
    let boundary_value = p.bubble(0.5 * l_box);
    let mut warnings = Vec::new();
    if boundary_value > 1e-6 {
        warnings.push(format!(
            "bubble is {boundary_value:.2e} at the box edge (above 1e-6); enlarge L_box"
        ));
    }
    let edge = (m / 20).max(1);
    for (label, col) in [("ground state", 0), ("kernel vector", nearest)] {
        let v = pairs.vectors.column(col);
        let total: f64 = v.iter().map(|x| x * x).sum();
        let rim: f64 = v
            .iter()
            .take(edge)
            .chain(v.iter().skip(m - edge))
            .map(|x| x * x)
            .sum();
        if rim / total > 1e-4 {
            warnings.push(format!("{label} has boundary mass {:.2e}", rim / total));
        }
    }
    Ok(BubbleIndexReport {
        summary,
        kernel_correlation,
        boundary_value,
        warnings,
    })
}

/// Smallest Dirichlet eigenvalue of `P_s` on `[-L, L]` with its positive
/// eigenfunction, sampled at `m` interior nodes.
#[derive(Debug, Clone)]
pub struct DirichletEigen {
    pub lambda1: f64,
    /// On `t_i = -L + (i + 1/2) 2L/m`.
    pub nodes: Vec<f64>,
    pub eigenfunction: Vec<f64>,
    pub half_width: f64,
    pub ambient_period: f64,
}

impl DirichletEigen {
    pub fn is_positive(&self) -> bool {
        self.eigenfunction.iter().all(|&x| x > 0.0)
    }

    /// Eigenfunction on a grid of period `2L` (node `i` is `t_i + L`).
    pub fn field(&self) -> Result<Field> {
        Field::new(
            Grid::new(2.0 * self.half_width, self.nodes.len())?,
            self.eigenfunction.clone(),
        )
    }
}

pub fn dirichlet_lambda1(l: f64, spec: &KernelSpec, m: usize) -> Result<DirichletEigen> {
    let kernel = Kernel::new(*spec)?;
    dirichlet_lambda1_with(l, &kernel, m)
}

pub(crate) fn dirichlet_lambda1_with(l: f64, kernel: &Kernel, m: usize) -> Result<DirichletEigen> {
    if !(l > 0.0) {
        return Err(Error::parameter(format!("half-width must be positive, got {l}")));
    }
    let h = 2.0 * l / m as f64;
    // copies of the window must not interact: K(padding) below abs_tol
    let padding = (kernel.upper_bound(1.0) / kernel.spec().abs_tol).ln() / kernel.decay_rate() + 1.0;
    let ambient = ((2.0 * l + padding) / h).ceil() as usize;
    let big = ambient.next_power_of_two().max(64);
    if big > MAX_GRID {
        return Err(Error::parameter(format!(
            "Dirichlet problem needs an ambient grid of {big} > {MAX_GRID}; reduce m"
        )));
    }
    let grid = Grid::new(big as f64 * h, big)?;
    let op = assemble_ps_with(grid, kernel)?;
    let keep: Vec<usize> = (0..m).collect();
    let a = restrict(&op.matrix, &keep);
    let pairs = symmetric_eigenpairs(&a)?;
    let mut phi: Vec<f64> = pairs.vectors.column(0).iter().copied().collect();
    if phi.iter().sum::<f64>() < 0.0 {
        phi.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(DirichletEigen {
        lambda1: pairs.values[0],
        nodes: (0..m).map(|i| -l + (i as f64 + 0.5) * h).collect(),
        eigenfunction: phi,
        half_width: l,
        ambient_period: grid.period(),
    })
}

/// `λ₁(L₀)` against `c/2`, with `L₀` from `p ĉ^{p-1} cosh(L₀)^{-2s} = 3/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCheck {
    pub l0: f64,
    pub lambda1: f64,
    pub half_c: f64,
    pub holds: bool,
}

pub fn convexity_threshold(params: &Params) -> Result<f64> {
    let x = params.p * params.c_hat.powf(params.p - 1.0) / 1.5;
    if x <= 1.0 {
        return Err(Error::domain("cosh threshold has no positive solution"));
    }
    Ok(x.powf(1.0 / (2.0 * params.s)).acosh())
}

pub fn lambda1_convexity_check(params: &Params, m: usize) -> Result<ConvexityCheck> {
    let l0 = convexity_threshold(params)?;
    let eig = dirichlet_lambda1(l0, &KernelSpec::new(*params)?, m)?;
    let half_c = 0.5 * params.c;
    Ok(ConvexityCheck {
        l0,
        lambda1: eig.lambda1,
        half_c,
        holds: eig.lambda1 <= half_c,
    })
}

/// Translation and necksize Jacobi fields, both with the inflection point
/// `t₀` (where `v̇` peaks) moved to `t = 0`.
#[derive(Debug, Clone)]
pub struct JacobiFields {
    /// The solution translated by the same `t₀`.
    pub field: Field,
    pub w_plus: Field,
    /// Samples of the non-periodic field on the same nodes `t ∈ [0, L)`.
    pub w_minus: Vec<f64>,
    /// `‖𝕃 w⁺‖_∞ / ‖w⁺‖_∞` on the periodic grid.
    pub w_plus_residual: f64,
    pub inflection: f64,
    /// `dL/dε` from the neighbouring solves.
    pub period_slope: f64,
    pub warnings: Vec<String>,
}

/// `w⁺ = v̇`; `w⁻ = ∂_ε v` by a centred difference of solves at `L(1 ± rel_delta)`.
pub fn jacobi_fields(solver: &Solver, solution: &Solution, rel_delta: f64) -> Result<JacobiFields> {
    let v = &solution.field;
    let grid = v.grid;
    let l = grid.period();
    let m = grid.len();
    let op = solver.operator(l, Some(m))?;
    let params = *solver.params();
    let w_plus_raw = v.derivative();
    let lin = assemble_linearization(v, &op, &params)?;
    let mut warnings = Vec::new();
    let w_plus_residual = {
        let lw = lin.apply(&w_plus_raw.samples);
        let num = lw.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let den = w_plus_raw.max_abs();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    if solution.report.branch == Branch::Constant {
        warnings.push("constant branch: both Jacobi fields vanish".into());
        return Ok(JacobiFields {
            field: v.clone(),
            w_plus: w_plus_raw,
            w_minus: vec![0.0; m],
            w_plus_residual,
            inflection: 0.0,
            period_slope: 0.0,
            warnings,
        });
    }
    let t0 = inflection_point(v);
    // neighbouring solves at fixed grid size
    let mut neighbours = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let ln = l * (1.0 + sign * rel_delta);
        let opn = solver.operator(ln, Some(m))?;
        let warm = crate::delaunay::stretch(v, opn.grid);
        let sol = solver.solve_on(&opn, &warm)?;
        neighbours.push((ln, sol.field));
    }
    let (lp, vp) = &neighbours[0];
    let (lm, vm) = &neighbours[1];
    let de = vp.min() - vm.min();
    let eps = v.min();
    let rel = (0.5 * de / eps).abs();
    if !(1e-4..=1e-2).contains(&rel) {
        warnings.push(format!("necksize step |δε|/ε = {rel:.2e} outside [1e-4, 1e-2]"));
    }
    if de == 0.0 {
        return Err(Error::Numeric(
            "neighbouring solutions have equal necksize".into(),
        ));
    }
    let period_slope = (lp - lm) / de;
    let periodic: Vec<f64> = vp
        .samples
        .iter()
        .zip(&vm.samples)
        .map(|(a, b)| (a - b) / de)
        .collect();
    let periodic = Field::new(grid, periodic)?.translated(t0);
    let w_plus = w_plus_raw.translated(t0);
    let mut w_minus: Vec<f64> = (0..m)
        .map(|i| {
            let t = grid.node(i) + t0;
            periodic.samples[i] - t / l * period_slope * w_plus.samples[i]
        })
        .collect();
    let shift = w_minus[0] / w_plus.samples[0];
    for (x, w) in w_minus.iter_mut().zip(&w_plus.samples) {
        *x -= shift * w;
    }
    // ẇ⁻(0) by a centred difference across the periodic seam of the nodes
    let h = grid.spacing();
    let slope = (w_minus[1] - w_minus[0]) / h;
    if slope < 0.0 {
        w_minus.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(JacobiFields {
        field: v.translated(t0),
        w_plus,
        w_minus,
        w_plus_residual,
        inflection: t0,
        period_slope,
        warnings,
    })
}

/// Point where `v̇` is largest, refined by Newton on `v̈`.
fn inflection_point(v: &Field) -> f64 {
    let d1 = v.derivative();
    let d2 = d1.derivative();
    let d3 = d2.derivative();
    let k = d1
        .samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut t = v.grid.node(k);
    for _ in 0..8 {
        let step = d2.interpolate(t) / d3.interpolate(t);
        if !step.is_finite() || step.abs() > v.grid.spacing() {
            break;
        }
        t -= step;
        if step.abs() < 1e-14 {
            break;
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub label: String,
    pub summary: SpectralSummary,
    /// `‖𝕃 w⁺‖₂ / ‖w⁺‖₂`.
    pub w_plus_residual: f64,
    /// `|cos|` between `w⁺` and the deflated eigenvector.
    pub deflated_correlation: f64,
    pub margin: f64,
    pub degenerate: bool,
}

/// Smallest `|λ|` of the periodic linearization after deflating the
/// eigenvector most aligned with `w⁺` (which must share the phase of `v`).
pub fn nondegeneracy_margin(v: &Field, w_plus: &Field, op: &NonlocalOperator) -> Result<NondegeneracyReport> {
    if v.grid != w_plus.grid {
        return Err(Error::parameter("w⁺ and the solution live on different grids"));
    }
    let params = *op.params();
    let lin = assemble_linearization(v, op, &params)?;
    let wn = norm(&w_plus.samples);
    if wn == 0.0 {
        return Err(Error::parameter("w⁺ vanishes; solution is constant"));
    }
    let lw = lin.apply(&w_plus.samples);
    let w_plus_residual = norm(&lw) / wn;
    let tol = 10.0 * w_plus_residual;
    let pairs = symmetric_eigenpairs(&lin.matrix)?;
    let n = pairs.values.len();
    let (deflate, corr) = (0..n)
        .map(|j| {
            let col: Vec<f64> = pairs.vectors.column(j).iter().copied().collect();
            (j, dot(&col, &w_plus.samples).abs() / (norm(&col) * wn))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let margin = (0..n)
        .filter(|&j| j != deflate)
        .map(|j| pairs.values[j].abs())
        .fold(f64::INFINITY, f64::min);
    let summary = SpectralSummary::classify(OperatorKind::Linearization, pairs.values, tol);
    Ok(NondegeneracyReport {
        label: "radial-sector nondegeneracy".into(),
        degenerate: summary.kernel_dim > 1,
        summary,
        w_plus_residual,
        deflated_correlation: corr,
        margin,
    })
}

/// Dirichlet Morse index of the linearization on windows `[0, kT]`.
pub fn delaunay_index_growth(solver: &Solver, v: &Field, multiples: &[usize]) -> Result<Vec<usize>> {
    let kmax = multiples.iter().copied().max().unwrap_or(0);
    if kmax == 0 {
        return Err(Error::parameter("window multiples must be positive"));
    }
    let tiles = (kmax + 2).next_power_of_two();
    let m = v.len();
    let total = tiles * m;
    if total > MAX_GRID {
        return Err(Error::parameter(format!(
            "tiling {tiles} periods of {m} nodes exceeds {MAX_GRID}"
        )));
    }
    let l = v.grid.period();
    let params = *solver.params();
    let grid = Grid::new(tiles as f64 * l, total)?;
    let op = assemble_ps_with(grid, solver.kernel())?;
    let tiled = Field::new(grid, (0..total).map(|i| v.samples[i % m]).collect())?;
    let r = residual(&tiled, &op, &params)?.max_abs();
    let lin = assemble_linearization(&tiled, &op, &params)?;
    let tol = 10.0 * r.max(roundoff_tolerance(&lin.matrix));
    multiples
        .iter()
        .map(|&k| {
            let keep: Vec<usize> = (0..k * m).collect();
            let vals = symmetric_eigenvalues(&restrict(&lin.matrix, &keep))?;
            Ok(vals.iter().filter(|&&x| x < -tol).count())
        })
        .collect()
}

/// Index of the bubble on growing windows `[-kT/2, kT/2]` for comparison.
pub fn bubble_window_index(
    solver: &Solver,
    period: f64,
    m_per_period: usize,
    multiples: &[usize],
) -> Result<Vec<usize>> {
    let kmax = multiples.iter().copied().max().unwrap_or(0);
    let tiles = (2 * kmax).next_power_of_two().max(2);
    let total = tiles * m_per_period;
    if total > MAX_GRID {
        return Err(Error::parameter("bubble window grid too large"));
    }
    let params = *solver.params();
    let grid = Grid::new(tiles as f64 * period, total)?;
    let op = assemble_ps_with(grid, solver.kernel())?;
    let centre = 0.5 * grid.period();
    let mut a = op.matrix.clone();
    for i in 0..total {
        let v = params.bubble(grid.node(i) - centre);
        a[(i, i)] += params.c - params.p * params.c * ((params.p - 1.0) * v.ln()).exp();
    }
    let mid = total / 2;
    multiples
        .iter()
        .map(|&k| {
            let half = k * m_per_period / 2;
            let keep: Vec<usize> = (mid - half..mid + half).collect();
            let vals = symmetric_eigenvalues(&restrict(&a, &keep))?;
            let tol = roundoff_tolerance(&a);
            Ok(vals.iter().filter(|&&x| x < -tol).count())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::make_params;
    use crate::operator::assemble_ps;

    #[test]
    fn classification() {
        let s = SpectralSummary::classify(OperatorKind::Ps, vec![3.0, -1.0, 1e-12, 0.5], 1e-9);
        assert_eq!(s.eigenvalues, vec![-1.0, 1e-12, 0.5, 3.0]);
        assert_eq!((s.morse_index, s.kernel_dim), (1, 1));
        assert_eq!(s.margin, Some(0.5));
    }

    #[test]
    fn ps_spectrum_is_nonnegative() {
        let p = make_params(3, 0.75).unwrap();
        let op = assemble_ps(Grid::new(6.0, 128).unwrap(), &KernelSpec::new(p).unwrap()).unwrap();
        let s = eigen_decompose(&op, None).unwrap();
        assert_eq!(s.morse_index, 0);
        assert_eq!(s.kernel_dim, 1);
        assert!(s.eigenvalues[0].abs() <= s.tol);
    }

    #[test]
    fn constant_below_threshold_has_one_negative() {
        let p = make_params(3, 0.75).unwrap();
        let ls = crate::delaunay::bifurcation_threshold(&p).unwrap();
        let g = Grid::new(0.8 * ls, 128).unwrap();
        let op = assemble_ps(g, &KernelSpec::new(p).unwrap()).unwrap();
        let lin = assemble_linearization(&Field::constant(g, 1.0), &op, &p).unwrap();
        let s = eigen_decompose(&lin, None).unwrap();
        assert_eq!(s.morse_index, 1);
        assert!((s.eigenvalues[0] - p.c * (1.0 - p.p)).abs() < 1e-10);
        assert_eq!(s.kernel_dim, 0);
    }

    #[test]
    fn translation_equivariance_of_spectrum() {
        let p = make_params(3, 0.5).unwrap();
        let g = Grid::new(5.0, 64).unwrap();
        let op = assemble_ps(g, &KernelSpec::new(p).unwrap()).unwrap();
        let v = Field::from_fn(g, |t| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * t / 5.0).cos());
        let a = eigen_decompose(&assemble_linearization(&v, &op, &p).unwrap(), None).unwrap();
        let b = eigen_decompose(&assemble_linearization(&v.shifted(11), &op, &p).unwrap(), None).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-11 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn restriction_keeps_diagonal() {
        let m = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64);
        let r = restrict(&m, &[1, 3]);
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[5.0, 7.0, 13.0, 15.0]));
    }

    #[test]
    fn dirichlet_eigenvalue_positive_and_decreasing() {
        let spec = KernelSpec::new(make_params(3, 0.5).unwrap()).unwrap();
        let a = dirichlet_lambda1(1.0, &spec, 128).unwrap();
        let b = dirichlet_lambda1(2.0, &spec, 128).unwrap();
        assert!(a.lambda1 > 0.0 && b.lambda1 < a.lambda1);
        assert!(a.is_positive());
    }
}
