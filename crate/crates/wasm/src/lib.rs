//! WebAssembly bindings for the browser demo. Every export takes plain
//! numbers and returns a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fallingballs::transversality::{mass_scan, ScanConfig};
use fallingballs::{lyapunov_spectrum, sample_state, simulate, FloorDerivativeMode, Locus, LyapunovConfig, MassVector};

const MAX_EVENTS: usize = 200_000;
const MAX_LYAPUNOV_EVENTS: usize = 2_000_000;
const MAX_TRIALS: usize = 5_000;

#[derive(Serialize)]
struct Path {
    masses: Vec<f64>,
    /// Event times, starting with the initial time.
    times: Vec<f64>,
    /// Heights per ball, aligned with `times`.
    heights: Vec<Vec<f64>>,
    symbols: String,
    max_energy_drift: f64,
}

#[derive(Serialize)]
struct Histogram {
    n: usize,
    k: usize,
    trials: usize,
    full_rank_fraction: f64,
    quantiles: Vec<(f64, f64)>,
    ratios: Vec<f64>,
}

fn masses(raw: &[f64]) -> Result<MassVector, String> {
    MassVector::new(raw.to_vec()).map_err(|e| e.to_string())
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn trajectory_json(raw_masses: &[f64], seed: u64, events: usize) -> Result<String, String> {
    if events == 0 || events > MAX_EVENTS {
        return Err(format!("events must be in 1..={MAX_EVENTS}"));
    }
    let m = masses(raw_masses)?;
    let start = sample_state(&m, seed, Locus::Interior);
    let t = simulate(&start, &m, events, &Default::default()).map_err(|e| e.to_string())?;
    let mut times = vec![start.t];
    times.extend(t.records.iter().map(|r| r.time));
    let heights = (0..m.n())
        .map(|i| std::iter::once(start.q[i]).chain(t.records.iter().map(|r| r.q[i])).collect())
        .collect();
    json(&Path {
        masses: m.as_slice().to_vec(),
        times,
        heights,
        symbols: t.sequence.symbol_string(),
        max_energy_drift: t.max_energy_drift(1.0),
    })
}

pub fn lyapunov_json(raw_masses: &[f64], seed: u64, events: usize) -> Result<String, String> {
    if !(1_000..=MAX_LYAPUNOV_EVENTS).contains(&events) {
        return Err(format!("events must be in 1000..={MAX_LYAPUNOV_EVENTS}"));
    }
    let m = masses(raw_masses)?;
    let r = lyapunov_spectrum(&m, seed, &LyapunovConfig::new(events, 1)).map_err(|e| e.to_string())?;
    json(&r)
}

pub fn rank_scan_json(n: usize, k: usize, trials: usize, seed: u64, reflect_only: bool) -> Result<String, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be in 1..={MAX_TRIALS}"));
    }
    let mut cfg = ScanConfig::new(n, vec![k], trials, seed);
    if reflect_only {
        cfg.mode = FloorDerivativeMode::ReflectOnly;
    }
    let table = mass_scan(&cfg).map_err(|e| e.to_string())?;
    let s = &table.summary[0];
    json(&Histogram {
        n,
        k,
        trials,
        full_rank_fraction: s.full_rank_fraction,
        quantiles: s.quantile_levels.iter().copied().zip(s.sigma_ratio_quantiles.iter().copied()).collect(),
        ratios: table.rows.iter().map(|r| r.sigma_ratio).collect(),
    })
}

#[wasm_bindgen]
pub fn trajectory(masses: &[f64], seed: u32, events: u32) -> Result<String, JsError> {
    trajectory_json(masses, seed.into(), events as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lyapunov(masses: &[f64], seed: u32, events: u32) -> Result<String, JsError> {
    lyapunov_json(masses, seed.into(), events as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rankScan)]
pub fn rank_scan(n: u32, k: u32, trials: u32, seed: u32, reflect_only: bool) -> Result<String, JsError> {
    rank_scan_json(n as usize, k as usize, trials as usize, seed.into(), reflect_only).map_err(|e| JsError::new(&e))
}
