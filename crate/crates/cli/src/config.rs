use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    #[default]
    Constants,
    KernelTable,
    Solve,
    Branch,
    Bifurcation,
    Spectrum,
    Lambda1,
    Certify,
    Limit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::KernelTable => "kernel-table",
            Command::Solve => "solve",
            Command::Branch => "branch",
            Command::Bifurcation => "bifurcation",
            Command::Spectrum => "spectrum",
            Command::Lambda1 => "lambda1",
            Command::Certify => "certify",
            Command::Limit => "limit",
        }
    }
}

/// Debug switches; never set in production runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Debug {
    /// Use the printed (non-even) kernel form.
    pub printed_kernel: bool,
    /// Write the assembled matrix next to the spectrum.
    pub dump_matrix: bool,
}

/// One run, serialized as TOML next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: Command,
    pub n: u32,
    pub s: Vec<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(rename = "L_min", skip_serializing_if = "Option::is_none")]
    pub period_min: Option<f64>,
    #[serde(rename = "L_max", skip_serializing_if = "Option::is_none")]
    pub period_max: Option<f64>,
    #[serde(rename = "L_count")]
    pub period_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Target necksize for `limit`.
    pub epsilon: f64,
    /// Run the Morse index of the bubble instead of a periodic solution.
    pub bubble: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub format: Format,
    pub debug: Debug,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::default(),
            n: 3,
            s: vec![0.9],
            period: None,
            period_min: None,
            period_max: None,
            period_count: 10,
            grid: None,
            tol: None,
            epsilon: 0.8,
            bubble: false,
            out: None,
            seed: 0,
            format: Format::default(),
            debug: Debug::default(),
        }
    }
}

pub const S_MIN: f64 = 0.05;
pub const S_MAX: f64 = 0.999;
pub const GRID_MIN: usize = 64;
pub const GRID_MAX: usize = 8192;

impl RunConfig {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    /// Range checks; every failure here is a usage error.
    pub fn validate(&self) -> Result<()> {
        if !(3..=16).contains(&self.n) {
            bail!("n must lie in 3..=16, got {}", self.n);
        }
        if self.s.is_empty() {
            bail!("s list is empty");
        }
        // constants accept any s in (0, 1); quadrature needs the narrower range
        let (lo, hi) = if self.command == Command::Constants {
            (0.0, 1.0)
        } else {
            (S_MIN - 1e-15, S_MAX + 1e-15)
        };
        for &s in &self.s {
            let ok = if self.command == Command::Constants {
                s > lo && s < hi
            } else {
                s >= lo && s <= hi
            };
            if !ok {
                bail!("s = {s} outside the admissible range");
            }
        }
        for l in [self.period, self.period_min, self.period_max]
            .into_iter()
            .flatten()
        {
            if !(l > 0.0 && l.is_finite()) {
                bail!("periods must be positive and finite, got {l}");
            }
        }
        if let (Some(a), Some(b)) = (self.period_min, self.period_max) {
            if b.partial_cmp(&a) != Some(std::cmp::Ordering::Greater) {
                bail!("L_max must exceed L_min");
            }
        }
        if self.period_count == 0 {
            bail!("L_count must be positive");
        }
        if let Some(m) = self.grid {
            if !m.is_power_of_two() || !(GRID_MIN..=GRID_MAX).contains(&m) {
                bail!("grid must be a power of two in [{GRID_MIN}, {GRID_MAX}], got {m}");
            }
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0 && t.is_finite()) {
                bail!("tol must be non-negative, got {t}");
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bail!("epsilon must lie in (0, 1), got {}", self.epsilon);
        }
        Ok(())
    }

    pub fn single_s(&self) -> Result<f64> {
        match self.s.as_slice() {
            [s] => Ok(*s),
            _ => bail!("{} takes a single s, got {}", self.command.name(), self.s.len()),
        }
    }

    /// `L_count` points spanning `[L_min, L_max]`, or the single `L`.
    pub fn periods(&self) -> Option<Vec<f64>> {
        match (self.period_min, self.period_max) {
            (Some(a), Some(b)) => {
                let k = self.period_count;
                if k == 1 {
                    return Some(vec![a]);
                }
                Some((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect())
            }
            _ => self.period.map(|l| vec![l]),
        }
    }
}
