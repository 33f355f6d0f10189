//! Flags, config files and their merge into effective settings.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use fallingballs::{DynamicsConfig, FloorDerivativeMode, Locus, MassVector, SimultaneityPolicy};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Lyapunov,
    QformAudit,
    RankTest,
    Oracle,
    MassScan,
    StableOrbit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Lyapunov => "lyapunov",
            Command::QformAudit => "qform-audit",
            Command::RankTest => "rank-test",
            Command::Oracle => "oracle",
            Command::MassScan => "mass-scan",
            Command::StableOrbit => "stable-orbit",
        }
    }
}

/// Every setting is optional so that flags can be layered over a config
/// file. Config keys are the flag names without the leading dashes.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Comma-separated masses, lowest ball first.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub masses: Option<Vec<f64>>,
    /// Rescale masses to sum to one.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub events: Option<usize>,
    /// Comma-separated collision counts.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Floor derivative: full or reflect-only.
    #[arg(long)]
    pub mode: Option<String>,
    /// Relative singular-value threshold for the numerical rank.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of balls when no masses are given.
    #[arg(long)]
    pub n: Option<usize>,
    /// Start-point locus: interior, boundary or singular-double.
    #[arg(long)]
    pub locus: Option<String>,
    /// Events between Gram-Schmidt passes.
    #[arg(long)]
    pub reortho: Option<usize>,
    /// Random tangent vectors per audited collision.
    #[arg(long)]
    pub vectors: Option<usize>,
    #[arg(long)]
    pub stderr_cap: Option<f64>,
    #[arg(long)]
    pub max_period: Option<usize>,
    #[arg(long)]
    pub eps_t: Option<f64>,
    #[arg(long)]
    pub eps_q: Option<f64>,
    #[arg(long)]
    pub zeno_max: Option<usize>,
    #[arg(long)]
    pub zeno_window: Option<f64>,
    /// Near-simultaneous events: abort or resolve.
    #[arg(long)]
    pub simultaneity: Option<String>,
}

macro_rules! layer {
    ($top:ident, $base:ident; $($field:ident),*) => {
        Settings { $($field: $top.$field.or($base.$field)),* }
    };
}

macro_rules! fill {
    ($s:ident; $($field:ident = $value:expr),* $(,)?) => {
        $( if $s.$field.is_none() { $s.$field = Some($value); } )*
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    /// `self` wins over `base`.
    pub fn over(self, base: Settings) -> Settings {
        let top = self;
        layer!(top, base; masses, normalize, seed, events, k, trials, mode, tol, jobs, out, n, locus,
            reortho, vectors, stderr_cap, max_period, eps_t, eps_q, zeno_max, zeno_window, simultaneity)
    }

    /// Fills in the defaults of `command` so that the manifest records every
    /// value actually used.
    pub fn resolve(mut self, command: Command) -> Self {
        let events = match command {
            Command::Simulate => 1_000,
            Command::Lyapunov => 100_000,
            _ => 10_000,
        };
        let locus = match command {
            Command::Simulate | Command::Lyapunov | Command::QformAudit => "interior",
            Command::RankTest => "singular-double",
            _ => "boundary",
        };
        let trials = if command == Command::MassScan { 1_000 } else { 1 };
        let d = DynamicsConfig::default();
        fill!(self;
            normalize = false,
            seed = 0,
            events = events,
            k = vec![5],
            trials = trials,
            mode = "full".to_string(),
            tol = fallingballs::transversality::DEFAULT_RANK_TOL,
            jobs = 1,
            locus = locus.to_string(),
            reortho = 1,
            vectors = 8,
            max_period = 8,
            eps_t = d.eps_t_rel,
            eps_q = d.eps_q,
            zeno_max = d.zeno_max,
            zeno_window = d.zeno_window,
            simultaneity = "abort".to_string(),
        );
        if self.masses.is_none() {
            fill!(self; n = if command == Command::Oracle { 4 } else { 3 });
        } else if let Some(m) = &self.masses {
            self.n = Some(m.len());
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("tol", self.tol),
            ("eps-t", self.eps_t),
            ("eps-q", self.eps_q),
            ("zeno-window", self.zeno_window),
        ];
        for (name, value) in positive {
            if let Some(x) = value {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(CliError::Validation(format!("--{name} must be positive, got {x}")));
                }
            }
        }
        let counts = [
            ("trials", self.trials),
            ("events", self.events),
            ("jobs", self.jobs),
            ("reortho", self.reortho),
            ("vectors", self.vectors),
            ("max-period", self.max_period),
            ("zeno-max", self.zeno_max),
        ];
        for (name, value) in counts {
            if value == Some(0) {
                return Err(CliError::Validation(format!("--{name} must be at least 1")));
            }
        }
        if let Some(n) = self.n {
            if n < 2 {
                return Err(CliError::Validation(format!("--n must be at least 2, got {n}")));
            }
        }
        if let Some(ks) = &self.k {
            if ks.is_empty() || ks.contains(&0) {
                return Err(CliError::Validation("--k values must be positive".into()));
            }
        }
        self.mode()?;
        self.locus()?;
        self.dynamics()?;
        if self.masses.is_some() {
            self.mass_vector()?;
        }
        Ok(())
    }

    pub fn mass_vector(&self) -> Result<MassVector, CliError> {
        let raw = self
            .masses
            .clone()
            .ok_or_else(|| CliError::Validation("--masses is required".into()))?;
        let m = MassVector::new(raw)?;
        Ok(if self.normalize == Some(true) { m.normalized() } else { m })
    }

    pub fn mode(&self) -> Result<FloorDerivativeMode, CliError> {
        Ok(self.mode.as_deref().unwrap_or("full").parse()?)
    }

    pub fn locus(&self) -> Result<Locus, CliError> {
        Ok(self.locus.as_deref().unwrap_or("boundary").parse()?)
    }

    pub fn dynamics(&self) -> Result<DynamicsConfig, CliError> {
        let d = DynamicsConfig::default();
        let policy: SimultaneityPolicy = self.simultaneity.as_deref().unwrap_or("abort").parse()?;
        Ok(DynamicsConfig {
            eps_t_rel: self.eps_t.unwrap_or(d.eps_t_rel),
            eps_q: self.eps_q.unwrap_or(d.eps_q),
            policy,
            zeno_max: self.zeno_max.unwrap_or(d.zeno_max),
            zeno_window: self.zeno_window.unwrap_or(d.zeno_window),
        })
    }
}
