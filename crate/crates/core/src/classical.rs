//! The local `s = 1` limit `v'' = c (v - v^p)` with `c = ((n-2)/2)²`,
//! `p = (n+2)/(n-2)`, and comparisons of fractional profiles against it.

use serde::{Deserialize, Serialize};

use crate::constants::{c_classical, c_hat_classical, make_params, Params};
use crate::delaunay::{Solution, SolveOptions, Solver};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub t: f64,
    pub v: f64,
    pub vdot: f64,
}

/// Constants of the classical Fowler equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fowler {
    pub n: u32,
    pub c: f64,
    pub p: f64,
    pub c_hat: f64,
}

impl Fowler {
    pub fn new(n: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::parameter(format!("dimension n must be >= 3, got {n}")));
        }
        let nf = f64::from(n);
        Ok(Self {
            n,
            c: c_classical(n),
            p: (nf + 2.0) / (nf - 2.0),
            c_hat: c_hat_classical(n),
        })
    }

    fn accel(&self, v: f64) -> f64 {
        self.c * (v - v.powf(self.p))
    }

    /// One RK4 step.
    pub fn step(&self, s: OdeState, dt: f64) -> OdeState {
        let (v, w) = (s.v, s.vdot);
        let k1 = (w, self.accel(v));
        let k2 = (w + 0.5 * dt * k1.1, self.accel(v + 0.5 * dt * k1.0));
        let k3 = (w + 0.5 * dt * k2.1, self.accel(v + 0.5 * dt * k2.0));
        let k4 = (w + dt * k3.1, self.accel(v + dt * k3.0));
        OdeState {
            t: s.t + dt,
            v: v + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            vdot: w + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        }
    }

    /// Homoclinic profile `ĉ cosh(t)^{(2-n)/2}`.
    pub fn bubble(&self, t: f64) -> f64 {
        self.c_hat * crate::constants::cosh_pow(t, (2.0 - f64::from(self.n)) / 2.0)
    }
}

/// `H = ½ v̇² - ½ c v² + (c (n-2)/(2n)) v^{2n/(n-2)}`.
pub fn hamiltonian(v: f64, vdot: f64, f: &Fowler) -> f64 {
    let nf = f64::from(f.n);
    0.5 * vdot * vdot - 0.5 * f.c * v * v + f.c * (nf - 2.0) / (2.0 * nf) * v.powf(2.0 * nf / (nf - 2.0))
}

/// Trajectory of `steps` RK4 steps (including the start).
pub fn fowler_flow(start: OdeState, f: &Fowler, dt: f64, steps: usize) -> Result<Vec<OdeState>> {
    if !(start.v > 0.0) {
        return Err(Error::TrajectoryExit { t: start.t });
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    let mut s = start;
    for _ in 0..steps {
        s = f.step(s, dt);
        if !(s.v > 0.0) {
            return Err(Error::TrajectoryExit { t: s.t });
        }
        out.push(s);
    }
    Ok(out)
}

/// Period of the orbit through `(v_min, 0)`: time from the neck back to the
/// next neck, located by cubic Hermite interpolation of `v̇`.
pub fn classical_period(v_min: f64, f: &Fowler) -> Result<f64> {
    if !(v_min > 0.0 && v_min < 1.0) {
        return Err(Error::domain(format!("v_min must lie in (0, 1), got {v_min}")));
    }
    let dt = 1e-3;
    let mut s = OdeState {
        t: 0.0,
        v: v_min,
        vdot: 0.0,
    };
    let mut sign_changes = 0;
    let limit = 1e6 as usize;
    for _ in 0..limit {
        let next = f.step(s, dt);
        if !(next.v > 0.0) {
            return Err(Error::TrajectoryExit { t: next.t });
        }
        let crossed = (s.vdot > 0.0 && next.vdot <= 0.0) || (s.vdot < 0.0 && next.vdot >= 0.0);
        if crossed && s.t > 0.0 {
            sign_changes += 1;
            if sign_changes == 2 {
                return Ok(hermite_zero(s, next, f));
            }
        }
        s = next;
    }
    Err(Error::domain(
        "orbit did not close; initial condition is not periodic",
    ))
}

/// Zero of `v̇` between two states, by bisection on the cubic Hermite
/// interpolant built from `v̇` and `v̈`.
fn hermite_zero(a: OdeState, b: OdeState, f: &Fowler) -> f64 {
    let h = b.t - a.t;
    let (y0, y1) = (a.vdot, b.vdot);
    let (d0, d1) = (f.accel(a.v) * h, f.accel(b.v) * h);
    let eval = |x: f64| {
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * y0
            + (x3 - 2.0 * x2 + x) * d0
            + (-2.0 * x3 + 3.0 * x2) * y1
            + (x3 - x2) * d1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (eval(mid) > 0.0) == (y0 > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    a.t + 0.5 * (lo + hi) * h
}

/// Classical periodic profile with neck `v_min` at `t = 0`, sampled on
/// `t = j dt`, `j = 0..=steps`.
pub fn classical_profile(v_min: f64, f: &Fowler, dt: f64, steps: usize) -> Result<Vec<f64>> {
    let start = OdeState {
        t: 0.0,
        v: v_min,
        vdot: 0.0,
    };
    Ok(fowler_flow(start, f, dt, steps)?
        .into_iter()
        .map(|s| s.v)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub s: f64,
    /// Half-width of the comparison window `[-L, L]`.
    #[serde(rename = "L")]
    pub window: f64,
    pub sup_distance: f64,
    /// Period of the fractional solution (bubble rows: infinite, stored as 0).
    pub period: f64,
}

/// `sup_{|t| ≤ L} |v_∘^{(s)} - v_∘^{(1)}|` on a fine grid.
pub fn bubble_limit_comparison(n: u32, s_list: &[f64], window: f64) -> Result<Vec<ComparisonRow>> {
    let f = Fowler::new(n)?;
    let samples = 2001;
    s_list
        .iter()
        .map(|&s| {
            let p = make_params(n, s)?;
            let d = (0..samples)
                .map(|i| -window + 2.0 * window * i as f64 / (samples - 1) as f64)
                .map(|t| (p.bubble(t) - f.bubble(t)).abs())
                .fold(0.0, f64::max);
            Ok(ComparisonRow {
                s,
                window,
                sup_distance: d,
                period: 0.0,
            })
        })
        .collect()
}

/// Fractional Delaunay solution with `min v = epsilon`, found by a
/// bracketed secant (Illinois) search on the period.
pub fn match_necksize(solver: &Solver, epsilon: f64, tol: f64) -> Result<Solution> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Matching(format!("necksize {epsilon} outside (0, 1)")));
    }
    let l_star = solver.l_star();
    let mut lo = l_star * 1.01;
    let mut sol_lo = solver.solve(lo, None)?;
    if sol_lo.report.epsilon < epsilon {
        return Err(Error::Matching(format!(
            "necksize {epsilon} is above the branch value {:.6} just past L*",
            sol_lo.report.epsilon
        )));
    }
    let mut hi = lo;
    let mut sol_hi = sol_lo.clone();
    for _ in 0..40 {
        hi *= 1.25;
        sol_hi = solver.solve(hi, Some(&sol_hi.field))?;
        if sol_hi.report.epsilon < epsilon {
            break;
        }
        lo = hi;
        sol_lo = sol_hi.clone();
    }
    if sol_hi.report.epsilon >= epsilon {
        return Err(Error::Matching(format!(
            "no period with necksize below {epsilon}"
        )));
    }
    let (mut f_lo, mut f_hi) = (sol_lo.report.epsilon - epsilon, sol_hi.report.epsilon - epsilon);
    let mut side = 0i8;
    for _ in 0..80 {
        let l = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let warm = if f_lo.abs() < f_hi.abs() {
            &sol_lo.field
        } else {
            &sol_hi.field
        };
        let sol = solver.solve(l, Some(warm))?;
        let fl = sol.report.epsilon - epsilon;
        if fl.abs() < tol {
            return Ok(sol);
        }
        if (fl > 0.0) == (f_lo > 0.0) {
            lo = l;
            f_lo = fl;
            sol_lo = sol;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = l;
            f_hi = fl;
            sol_hi = sol;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if (hi - lo).abs() < 1e-13 * hi {
            break;
        }
    }
    Err(Error::Matching(format!(
        "period search for necksize {epsilon} did not converge"
    )))
}

/// Sup distance over `[-L, L]` between the fractional Delaunay solution of
/// necksize `epsilon` and the classical one, both with the neck at `t = 0`.
pub fn limit_comparison(n: u32, s_list: &[f64], window: f64, epsilon: f64) -> Result<Vec<ComparisonRow>> {
    let f = Fowler::new(n)?;
    let steps = (window / 1e-3).ceil() as usize;
    let dt = window / steps as f64;
    let classical = classical_profile(epsilon, &f, dt, steps)?;
    s_list
        .iter()
        .map(|&s| {
            let solver = Solver::new(make_params(n, s)?, SolveOptions::default())?;
            let sol = match_necksize(&solver, epsilon, 1e-8)?;
            let period = sol.report.period;
            // even about the neck, so [0, L] covers [-L, L]
            let ts: Vec<f64> = (0..classical.len()).map(|j| j as f64 * dt).collect();
            let d = sol
                .field
                .interpolate_many(&ts)
                .iter()
                .zip(&classical)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(ComparisonRow {
                s,
                window,
                sup_distance: d,
                period,
            })
        })
        .collect()
}

/// `ĉ_{n,s}` at `s = 1 - 1e-6`, to compare against the closed form.
pub fn c_hat_limit(n: u32) -> Result<f64> {
    Ok(Params::new(n, 1.0 - 1e-6)?.c_hat)
}
