use std::f64::consts::PI;

use anyhow::{anyhow, Result};
use serde::Serialize;

use fracdelaunay::classical::{
    bubble_limit_comparison, fowler_flow, hamiltonian, limit_comparison, Fowler, OdeState,
};
use fracdelaunay::delaunay::{bifurcation_threshold, SolveOptions, SolveReport, Solver};
use fracdelaunay::spectrum::{bubble_morse_index, dirichlet_lambda1, eigen_decompose, SpectralSummary};
use fracdelaunay::{
    assemble_linearization, make_params, Error, KernelForm, KernelSpec, KernelTable, Params, Period,
};

use crate::config::{Command, RunConfig};
use crate::output::{num, Output};
use crate::Status;

pub const BRANCH_HEADER: [&str; 8] = [
    "n",
    "s",
    "L",
    "epsilon",
    "vmax",
    "energy",
    "residual_norm",
    "L_star",
];

/// Relative slack allowed on `max v ≤ ĉ`.
pub const SUP_SLACK: f64 = 1e-3;

pub fn run(cfg: &RunConfig, out: &Output) -> Result<Status> {
    match cfg.command {
        Command::Constants => constants(cfg, out),
        Command::KernelTable => kernel_table(cfg, out),
        Command::Solve => solve(cfg, out),
        Command::Branch => branch(cfg, out),
        Command::Bifurcation => bifurcation(cfg, out),
        Command::Spectrum => spectrum(cfg, out),
        Command::Lambda1 => lambda1(cfg, out),
        Command::Certify => crate::certify::certify(cfg, out),
        Command::Limit => limit(cfg, out),
    }
}

pub(crate) fn kernel_spec(cfg: &RunConfig, params: Params) -> Result<KernelSpec> {
    let spec = KernelSpec::new(params)?;
    Ok(if cfg.debug.printed_kernel {
        spec.with_form(KernelForm::Printed)
    } else {
        spec
    })
}

fn constants(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let params: Vec<Params> = cfg
        .s
        .iter()
        .map(|&s| make_params(cfg.n, s).map_err(|e| anyhow!("row n = {}, s = {s}: {e}", cfg.n)))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = params
        .iter()
        .map(|p| {
            vec![
                p.n.to_string(),
                num(p.s),
                num(p.c),
                num(p.c_hat),
                num(p.kappa),
                num(p.rho),
                num(p.p),
            ]
        })
        .collect();
    out.table(
        "constants",
        "constants",
        &["n", "s", "c", "c_hat", "kappa", "rho", "p"],
        &rows,
        &params,
    )?;
    Ok(Status::Success)
}

#[derive(Serialize)]
struct KernelRow {
    xi: f64,
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "K_periodized")]
    k_periodized: f64,
    tail_bound: f64,
}

fn kernel_table(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let params = make_params(cfg.n, cfg.single_s()?)?;
    let period = cfg.period.unwrap_or(2.0 * PI);
    let m = cfg.grid.unwrap_or(256);
    let h = period / m as f64;
    let offsets: Vec<f64> = (1..=m / 2).map(|j| j as f64 * h).collect();
    let table = KernelTable::build(kernel_spec(cfg, params)?, Period::Finite(period), offsets)?;
    let per = table.periodized_values.clone().unwrap_or_default();
    let data: Vec<KernelRow> = (0..table.offsets.len())
        .map(|i| KernelRow {
            xi: table.offsets[i],
            k: table.line_values[i],
            k_periodized: per[i],
            tail_bound: table.tail_bounds[i],
        })
        .collect();
    let rows: Vec<Vec<String>> = data
        .iter()
        .map(|r| vec![num(r.xi), num(r.k), num(r.k_periodized), num(r.tail_bound)])
        .collect();
    out.table(
        "kernel_table",
        "kernel-table",
        &["xi", "K", "K_periodized", "tail_bound"],
        &rows,
        &data,
    )?;
    Ok(Status::Success)
}

fn solver(cfg: &RunConfig, s: f64) -> Result<Solver> {
    let options = SolveOptions {
        m: cfg.grid,
        ..SolveOptions::default()
    };
    Ok(Solver::new(make_params(cfg.n, s)?, options)?)
}

fn branch_row(r: &SolveReport) -> Vec<String> {
    vec![
        r.params.n.to_string(),
        num(r.params.s),
        num(r.period),
        num(r.epsilon),
        num(r.vmax),
        num(r.energy),
        num(r.residual_norm),
        num(r.l_star),
    ]
}

#[derive(Serialize)]
struct FieldDump<'a> {
    converged: bool,
    #[serde(rename = "L")]
    period: f64,
    t: Vec<f64>,
    v: &'a [f64],
}

fn residual_tol(cfg: &RunConfig) -> f64 {
    cfg.tol.unwrap_or(1e-8)
}

fn solve(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let l = cfg.period.ok_or_else(|| usage("solve needs --L"))?;
    let solver = solver(cfg, cfg.single_s()?)?;
    let sol = match solver.solve(l, None) {
        Ok(sol) => sol,
        Err(e) => {
            if let Error::NonConvergence { last: Some(f), .. } = &e {
                out.side_json(
                    "field_partial",
                    &FieldDump {
                        converged: false,
                        period: l,
                        t: f.grid.nodes(),
                        v: &f.samples,
                    },
                )?;
            }
            return Err(e.into());
        }
    };
    out.table(
        "report",
        "branch",
        &BRANCH_HEADER,
        &[branch_row(&sol.report)],
        &sol.report,
    )?;
    out.side_json(
        "field",
        &FieldDump {
            converged: true,
            period: l,
            t: sol.field.grid.nodes(),
            v: &sol.field.samples,
        },
    )?;
    let ok = sol.report.residual_norm < residual_tol(cfg) && sol.report.satisfies_sup_bound(SUP_SLACK);
    Ok(if ok { Status::Success } else { Status::CheckFailed })
}

fn branch(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let s = cfg.single_s()?;
    let solver = solver(cfg, s)?;
    let ls = solver.l_star();
    let periods = match cfg.periods() {
        Some(p) if cfg.period_min.is_some() => p,
        _ => {
            let (a, b) = (ls, 6.0 * ls);
            let k = cfg.period_count.max(2);
            (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
        }
    };
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut warm = None;
    let mut failure = None;
    let mut status = Status::Success;
    for &l in &periods {
        match solver.solve(l, warm.as_ref()) {
            Ok(sol) => {
                if !(sol.report.residual_norm < residual_tol(cfg)
                    && sol.report.satisfies_sup_bound(SUP_SLACK))
                {
                    status = Status::CheckFailed;
                }
                rows.push(branch_row(&sol.report));
                reports.push(sol.report.clone());
                warm = Some(sol.field);
            }
            Err(e) => {
                failure = Some((l, e));
                break;
            }
        }
    }
    out.table("branch", "branch", &BRANCH_HEADER, &rows, &reports)?;
    if let Some((l, e)) = failure {
        let msg = format!(
            "branch stopped at L = {l} after {} of {} points",
            rows.len(),
            periods.len()
        );
        // the table above holds only the converged prefix
        out.side_json(
            "branch_incomplete",
            &serde_json::json!({ "message": msg, "error": e.to_string() }),
        )?;
        return Err(anyhow::Error::from(e).context(msg));
    }
    Ok(status)
}

#[derive(Serialize)]
struct ThresholdRow {
    n: u32,
    s: f64,
    #[serde(rename = "L_star")]
    l_star: f64,
    #[serde(rename = "L_star_classical")]
    l_star_classical: f64,
}

fn bifurcation(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let classical = 2.0 * PI / f64::from(cfg.n - 2).sqrt();
    let data: Vec<ThresholdRow> = cfg
        .s
        .iter()
        .map(|&s| {
            Ok(ThresholdRow {
                n: cfg.n,
                s,
                l_star: bifurcation_threshold(&make_params(cfg.n, s)?)?,
                l_star_classical: classical,
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = data
        .iter()
        .map(|r| vec![r.n.to_string(), num(r.s), num(r.l_star), num(r.l_star_classical)])
        .collect();
    out.table(
        "bifurcation",
        "bifurcation",
        &["n", "s", "L_star", "L_star_classical"],
        &rows,
        &data,
    )?;
    Ok(Status::Success)
}

fn spectrum_rows(summary: &SpectralSummary) -> Vec<Vec<String>> {
    summary
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), num(*l)])
        .collect()
}

fn spectrum(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let s = cfg.single_s()?;
    let params = make_params(cfg.n, s)?;
    let summary = if cfg.bubble {
        let l_box = cfg.period.unwrap_or(40.0);
        let report = bubble_morse_index(&params, l_box, cfg.grid.unwrap_or(2048))?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        out.side_json("bubble_index", &report)?;
        report.summary
    } else {
        let l = cfg
            .period
            .ok_or_else(|| usage("spectrum needs --L (or --bubble)"))?;
        let solver = solver(cfg, s)?;
        let sol = solver.solve(l, None)?;
        let op = solver.operator(l, Some(sol.field.len()))?;
        let lin = assemble_linearization(&sol.field, &op, &params)?;
        if cfg.debug.dump_matrix {
            let rows: Vec<Vec<String>> = (0..lin.matrix.nrows())
                .map(|i| lin.matrix.row(i).iter().map(|x| num(*x)).collect())
                .collect();
            let header: Vec<String> = (0..lin.matrix.ncols()).map(|j| format!("c{j}")).collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            out.csv("matrix", "matrix", &header, &rows)?;
        }
        eigen_decompose(&lin, cfg.tol)?
    };
    match cfg.format {
        crate::config::Format::Csv => {
            out.csv(
                "spectrum",
                "spectrum",
                &["index", "eigenvalue"],
                &spectrum_rows(&summary),
            )?;
            out.side_json("summary", &summary)?;
        }
        crate::config::Format::Json => {
            out.json("summary", &summary)?;
            out.side_csv(
                "spectrum",
                "spectrum",
                &["index", "eigenvalue"],
                &spectrum_rows(&summary),
            )?;
        }
    }
    Ok(Status::Success)
}

#[derive(Serialize)]
struct Lambda1Row {
    #[serde(rename = "L")]
    half_width: f64,
    m: usize,
    lambda1: f64,
    positive: bool,
}

fn lambda1(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let params = make_params(cfg.n, cfg.single_s()?)?;
    let spec = kernel_spec(cfg, params)?;
    let widths = cfg.periods().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0, 16.0]);
    let data: Vec<Lambda1Row> = widths
        .iter()
        .map(|&l| {
            let m = cfg.grid.unwrap_or_else(|| lambda1_grid(l));
            let e = dirichlet_lambda1(l, &spec, m)?;
            Ok(Lambda1Row {
                half_width: l,
                m,
                lambda1: e.lambda1,
                positive: e.is_positive(),
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = data
        .iter()
        .map(|r| {
            vec![
                num(r.half_width),
                r.m.to_string(),
                num(r.lambda1),
                r.positive.to_string(),
            ]
        })
        .collect();
    out.table(
        "lambda1",
        "lambda1",
        &["L", "m", "lambda1", "positive"],
        &rows,
        &data,
    )?;
    Ok(if data.iter().all(|r| r.lambda1 > 0.0 && r.positive) {
        Status::Success
    } else {
        Status::CheckFailed
    })
}

/// About 64 nodes per unit half-width, at least 128.
pub(crate) fn lambda1_grid(l: f64) -> usize {
    ((64.0 * l).ceil() as usize).next_power_of_two().clamp(128, 1024)
}

fn limit(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let window = cfg.period.unwrap_or(5.0);
    let header = ["s", "L", "sup_distance"];
    let to_rows = |rows: &[fracdelaunay::classical::ComparisonRow]| -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| vec![num(r.s), num(r.window), num(r.sup_distance)])
            .collect()
    };
    let bubble = bubble_limit_comparison(cfg.n, &cfg.s, window)?;
    out.table(
        "limit_bubble",
        "limit-bubble",
        &header,
        &to_rows(&bubble),
        &bubble,
    )?;
    let delaunay = limit_comparison(cfg.n, &cfg.s, window, cfg.epsilon)?;
    out.table(
        "limit_delaunay",
        "limit-delaunay",
        &header,
        &to_rows(&delaunay),
        &delaunay,
    )?;

    let f = Fowler::new(cfg.n)?;
    let dt = 0.01;
    let steps = (window / dt).round() as usize;
    let start = OdeState {
        t: 0.0,
        v: cfg.epsilon,
        vdot: 0.0,
    };
    let traj = fowler_flow(start, &f, dt, steps)?;
    let rows: Vec<Vec<String>> = traj
        .iter()
        .map(|p| vec![num(p.t), num(p.v), num(p.vdot), num(hamiltonian(p.v, p.vdot, &f))])
        .collect();
    out.side_csv(
        "trajectory",
        "trajectory",
        &["t", "v", "vdot", "hamiltonian"],
        &rows,
    )?;
    Ok(Status::Success)
}

/// Marker attached to errors that should exit with the usage code.
#[derive(Debug)]
pub struct Usage;

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("usage error")
    }
}

pub(crate) fn usage(msg: &str) -> anyhow::Error {
    anyhow!("{msg}").context(Usage)
}
