//! Command-line front end for `fracdelaunay`.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub mod certify;
pub mod commands;
pub mod config;
pub mod output;

use config::{Command, Format, RunConfig};
use output::Output;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    CheckFailed,
}

#[derive(Debug, Parser)]
#[command(
    name = "fracdelaunay",
    version,
    about = "Fractional Delaunay solutions on the cylinder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// c, ĉ, κ, ρ and p for each (n, s).
    Constants(Flags),
    /// Sampled K_s and K_{s,L} on the grid offsets jh, j = 1..m/2.
    KernelTable(Flags),
    /// One solution at period L.
    Solve(Flags),
    /// Continuation over [L_min, L_max] (default [L*, 6L*]).
    Branch(Flags),
    /// Threshold L* for each s.
    Bifurcation(Flags),
    /// Spectrum of the linearization at a solution, or the bubble index with --bubble.
    Spectrum(Flags),
    /// Dirichlet λ₁ on [-L, L].
    Lambda1(Flags),
    /// Full invariant suite.
    Certify(Flags),
    /// Distance to the s = 1 profiles over [-L, L] (default L = 5).
    Limit(Flags),
}

impl Sub {
    fn split(&self) -> (Command, &Flags) {
        match self {
            Sub::Constants(f) => (Command::Constants, f),
            Sub::KernelTable(f) => (Command::KernelTable, f),
            Sub::Solve(f) => (Command::Solve, f),
            Sub::Branch(f) => (Command::Branch, f),
            Sub::Bifurcation(f) => (Command::Bifurcation, f),
            Sub::Spectrum(f) => (Command::Spectrum, f),
            Sub::Lambda1(f) => (Command::Lambda1, f),
            Sub::Certify(f) => (Command::Certify, f),
            Sub::Limit(f) => (Command::Limit, f),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Load a saved run config; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, conflicts_with = "s_list")]
    pub s: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub s_list: Option<Vec<f64>>,
    #[arg(long = "L")]
    pub period: Option<f64>,
    #[arg(long = "L-min", requires = "period_max")]
    pub period_min: Option<f64>,
    #[arg(long = "L-max", requires = "period_min")]
    pub period_max: Option<f64>,
    #[arg(long = "L-count")]
    pub period_count: Option<usize>,
    /// Grid size (power of two).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Results directory; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Target necksize for `limit`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub bubble: bool,
    /// Debug: use the printed, non-even kernel form.
    #[arg(long, hide = true)]
    pub debug_printed_kernel: bool,
    /// Debug: write the assembled linearization as matrix.csv.
    #[arg(long, hide = true)]
    pub debug_dump_matrix: bool,
}

impl Flags {
    pub fn resolve(&self, command: Command) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.command = command;
        if let Some(n) = self.n {
            c.n = n;
        }
        if let Some(s) = self.s {
            c.s = vec![s];
        }
        if let Some(list) = &self.s_list {
            c.s = list.clone();
        } else if self.s.is_none() && self.config.is_none() && command == Command::Limit {
            c.s = vec![0.9, 0.99, 0.999];
        }
        macro_rules! take {
            ($($f:ident),*) => {$(if self.$f.is_some() { c.$f = self.$f.clone(); })*};
        }
        take!(period, period_min, period_max, grid, tol, out);
        if let Some(k) = self.period_count {
            c.period_count = k;
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(f) = self.format {
            c.format = f;
        }
        if let Some(e) = self.epsilon {
            c.epsilon = e;
        }
        c.bubble |= self.bubble;
        c.debug.printed_kernel |= self.debug_printed_kernel;
        c.debug.dump_matrix |= self.debug_dump_matrix;
        c.validate()?;
        Ok(c)
    }
}

/// Exit code for an error: usage problems, solver failures, everything else.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<commands::Usage>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<fracdelaunay::Error>() {
        Some(fracdelaunay::Error::Parameter(_) | fracdelaunay::Error::Domain(_)) => EXIT_USAGE,
        Some(
            fracdelaunay::Error::NonConvergence { .. }
            | fracdelaunay::Error::SingularLinearization(_)
            | fracdelaunay::Error::Matching(_)
            | fracdelaunay::Error::Accuracy { .. }
            | fracdelaunay::Error::InconsistentCriticalPoint(_),
        ) => EXIT_NONCONVERGENCE,
        _ => EXIT_RUNTIME,
    }
}

/// Parses, runs and maps the outcome to an exit code.
pub fn run(cli: &Cli) -> i32 {
    let (command, flags) = cli.command.split();
    let cfg = match flags.resolve(command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let result = (|| -> Result<Status> {
        let out = Output::new(cfg.out.as_deref(), cfg.format)?;
        if let Some(dir) = out.dir() {
            std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
        }
        commands::run(&cfg, &out)
    })();
    match result {
        Ok(Status::Success) => EXIT_SUCCESS,
        Ok(Status::CheckFailed) => EXIT_CERTIFICATION,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
