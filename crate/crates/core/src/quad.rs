//! Gauss–Legendre rules and a small adaptive integrator.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Shared rule of the given order (computed once per order).
    pub fn shared(order: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(order)
            .or_insert_with(|| Arc::new(GaussLegendre::new(order)))
            .clone()
    }

    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Mapped nodes and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Adaptive bisection comparing 10- and 20-point Gauss–Legendre on each panel.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    what: &str,
) -> Result<Estimate> {
    const MAX_DEPTH: usize = 200;
    const MAX_PANELS: usize = 200_000;
    let lo = GaussLegendre::shared(10);
    let hi = GaussLegendre::shared(20);
    let total_len = (b - a).abs();
    let mut stack = vec![(a, b, 0usize)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = 0;
    while let Some((x0, x1, depth)) = stack.pop() {
        panels += 1;
        let coarse = lo.integrate(x0, x1, &f);
        let fine = hi.integrate(x0, x1, &f);
        let diff = (fine - coarse).abs();
        let budget = abs_tol * ((x1 - x0).abs() / total_len).max(1e-3);
        if !fine.is_finite() {
            return Err(Error::Numeric(format!(
                "{what}: non-finite integrand on [{x0}, {x1}]"
            )));
        }
        if diff <= budget || depth >= MAX_DEPTH || panels > MAX_PANELS {
            if diff > budget {
                return Err(Error::Accuracy {
                    what: what.to_string(),
                    estimate: error + diff,
                    requested: abs_tol,
                });
            }
            value += fine;
            error += diff;
        } else {
            let m = 0.5 * (x0 + x1);
            stack.push((m, x1, depth + 1));
            stack.push((x0, m, depth + 1));
        }
    }
    Ok(Estimate { value, error })
}

/// Breakpoints on `[0, end]` refined geometrically towards 0 at scale `scale`:
/// `0, scale, 2 scale, 4 scale, ...` up to `coarse`, then uniform steps of at
/// most `coarse` up to `end`.
pub(crate) fn graded_breakpoints(scale: f64, coarse: f64, end: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    if scale < coarse {
        let mut x = scale;
        while x < coarse && x < end {
            pts.push(x);
            x *= 2.0;
        }
    }
    let start = *pts.last().expect("non-empty");
    let remaining = end - start;
    if remaining > 0.0 {
        let count = (remaining / coarse).ceil().max(1.0) as usize;
        for k in 1..count {
            pts.push(start + remaining * k as f64 / count as f64);
        }
        pts.push(end);
    }
    pts
}
