use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use fallingballs::output::{
    write_cone_csv, write_json, write_json_lines, write_scan_csv, write_trajectory_csv, RunManifest,
};
use fallingballs::sampling::derive_seed;
use fallingballs::transversality::{mass_scan, rank_test, ScanConfig};
use fallingballs::{
    equal_mass_oracle, lyapunov_batch, qform_audit, sample_state, simulate, stable_orbit_probe, Locus, LyapunovConfig,
    MassOrdering, MassVector, OrbitSearch, RankTestReport,
};

use crate::settings::{Command, Settings};
use crate::CliError;

/// Primary output: the `--out` file, or stdout.
fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Io(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `<out>.<suffix>`, only when writing to a file.
fn side_path(out: Option<&Path>, suffix: &str) -> Option<PathBuf> {
    out.map(|p| {
        let mut s = p.as_os_str().to_owned();
        s.push(format!(".{suffix}"));
        PathBuf::from(s)
    })
}

fn write_side<T: Serialize + ?Sized>(path: &Option<PathBuf>, value: &T, outputs: &mut Vec<String>) -> Result<(), CliError> {
    if let Some(p) = path {
        write_json(BufWriter::new(File::create(p)?), value)?;
        outputs.push(p.display().to_string());
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleRecord {
    masses: Vec<f64>,
    seed: u64,
    n_events: usize,
    max_residual: f64,
}

#[derive(Serialize)]
struct RankRecord {
    masses: Vec<f64>,
    seed: u64,
    locus: Locus,
    results: Vec<RankTestReport>,
}

#[derive(Serialize)]
struct ConeSummary {
    collisions: usize,
    vectors_per_collision: usize,
    min_delta_q: f64,
    max_floor_rel_error: f64,
    min_strict_pair_margin: f64,
}

pub fn execute(command: Command, s: &Settings, started: Instant) -> Result<(), CliError> {
    let out = s.out.as_deref();
    let dynamics = s.dynamics()?;
    let seed = s.seed.unwrap_or(0);
    let events = s.events.unwrap_or(1);
    let mut outputs: Vec<String> = out.iter().map(|p| p.display().to_string()).collect();

    match command {
        Command::Simulate => {
            let m = s.mass_vector()?;
            let start = sample_state(&m, seed, s.locus()?);
            let trajectory = simulate(&start, &m, events, &dynamics)?;
            write_trajectory_csv(open_out(out)?, &trajectory, m.n())?;
        }
        Command::Lyapunov => {
            let m = s.mass_vector()?;
            let mut cfg = LyapunovConfig::new(events, s.reortho.unwrap_or(1));
            cfg.stderr_cap = s.stderr_cap;
            cfg.dynamics = dynamics;
            let trials = s.trials.unwrap_or(1);
            let inputs: Vec<(MassVector, u64)> = (0..trials)
                .map(|i| (m.clone(), if trials == 1 { seed } else { derive_seed(seed, i as u64) }))
                .collect();
            let results = lyapunov_batch(&inputs, &cfg, s.jobs.unwrap_or(1))
                .into_iter()
                .collect::<fallingballs::Result<Vec<_>>>()?;
            write_json_lines(open_out(out)?, &results)?;
        }
        Command::QformAudit => {
            let m = MassVector::with_mode(s.masses.clone().unwrap_or_default(), MassOrdering::Nonincreasing)?;
            let m = if s.normalize == Some(true) { m.normalized() } else { m };
            let audit = qform_audit(&m, seed, events, s.vectors.unwrap_or(8), &dynamics)?;
            write_cone_csv(open_out(out)?, &audit)?;
            let summary = ConeSummary {
                collisions: audit.collisions,
                vectors_per_collision: audit.vectors_per_collision,
                min_delta_q: audit.min_delta_q,
                max_floor_rel_error: audit.max_floor_rel_error,
                min_strict_pair_margin: audit.min_strict_pair_margin,
            };
            write_side(&side_path(out, "summary.json"), &summary, &mut outputs)?;
        }
        Command::RankTest => {
            let m = s.mass_vector()?;
            let locus = s.locus()?;
            let tol = s.tol.unwrap_or(1e-9);
            let results = s
                .k
                .clone()
                .unwrap_or_default()
                .iter()
                .map(|&k| rank_test(&m, seed, k, s.mode()?, tol, locus, &dynamics).map_err(CliError::from))
                .collect::<Result<Vec<_>, CliError>>()?;
            let record = RankRecord {
                masses: m.as_slice().to_vec(),
                seed,
                locus,
                results,
            };
            write_json(open_out(out)?, &record)?;
        }
        Command::Oracle => {
            let m = match &s.masses {
                Some(_) => s.mass_vector()?,
                None => {
                    let n = s.n.unwrap_or(4);
                    MassVector::equal(n, 1.0 / n as f64)?
                }
            };
            let start = sample_state(&m, seed, s.locus()?);
            let max_residual = equal_mass_oracle(&start, &m, events, &dynamics)?;
            let record = OracleRecord {
                masses: m.as_slice().to_vec(),
                seed,
                n_events: events,
                max_residual,
            };
            write_json(open_out(out)?, &record)?;
        }
        Command::MassScan => {
            let mut cfg = ScanConfig::new(
                s.n.unwrap_or(3),
                s.k.clone().unwrap_or_default(),
                s.trials.unwrap_or(1),
                seed,
            );
            cfg.mode = s.mode()?;
            cfg.locus = s.locus()?;
            cfg.rank_tol = s.tol.unwrap_or(cfg.rank_tol);
            cfg.jobs = s.jobs.unwrap_or(1);
            cfg.dynamics = dynamics;
            let table = mass_scan(&cfg)?;
            write_scan_csv(open_out(out)?, &table)?;
            write_side(&side_path(out, "summary.json"), &table.summary, &mut outputs)?;
        }
        Command::StableOrbit => {
            let m = s.mass_vector()?;
            let search = OrbitSearch {
                max_period: s.max_period.unwrap_or(8),
                dynamics,
                ..OrbitSearch::default()
            };
            let orbit = stable_orbit_probe(&m, &search)?;
            write_json(open_out(out)?, &orbit)?;
        }
    }

    if let Some(path) = side_path(out, "manifest.json") {
        let manifest = RunManifest {
            tool: "fallingballs".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: command.name().into(),
            config: serde_json::to_value(s).map_err(|e| CliError::Io(e.to_string()))?,
            outputs,
            exit_code: 0,
            wall_time_seconds: started.elapsed().as_secs_f64(),
        };
        write_json(BufWriter::new(File::create(path)?), &manifest)?;
    }
    Ok(())
}
