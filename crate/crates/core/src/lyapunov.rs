//! Lyapunov spectrum of the billiard map on the reduced `2n - 2` space.
//!
//! A frame of reduced symplectic vectors is pushed through every collision
//! and re-orthonormalized by Gram-Schmidt every `reortho_interval` events;
//! the logarithms of the triangular diagonal accumulate into per-direction
//! growth rates. Error bars come from non-overlapping batch means.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::run_ordered;
use crate::dynamics::{Billiard, DynamicsConfig};
use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, CompensatedSum};
use crate::masses::MassVector;
use crate::sampling::{derive_seed, rng_from_seed, sample_state, Locus};
use crate::tangent::{collision_hv_in_place, project_in_place, reduce_in_place, FloorDerivativeMode, TangentHV};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub n_events: usize,
    pub reortho_interval: usize,
    pub batches: usize,
    /// Raise the `non_convergence` flag when any stderr exceeds this.
    pub stderr_cap: Option<f64>,
    pub dynamics: DynamicsConfig,
}

impl LyapunovConfig {
    pub fn new(n_events: usize, reortho_interval: usize) -> Self {
        Self {
            n_events,
            reortho_interval,
            batches: 10,
            stderr_cap: None,
            dynamics: DynamicsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub masses: Vec<f64>,
    pub seed: u64,
    pub n_events: usize,
    pub mean_return_time: f64,
    /// Per collision, sorted descending.
    pub exponents_map: Vec<f64>,
    /// Per unit time.
    pub exponents_flow: Vec<f64>,
    pub stderr: Vec<f64>,
    pub flags: Vec<String>,
}

impl LyapunovResult {
    pub fn max_abs(&self) -> f64 {
        self.exponents_map.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Largest `|lambda_i + lambda_{d+1-i}|`.
    pub fn pairing_defect(&self) -> f64 {
        let d = self.exponents_map.len();
        (0..d / 2)
            .map(|i| (self.exponents_map[i] + self.exponents_map[d - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.exponents_map.iter().sum()
    }
}

/// Seeded orthonormal frame spanning the reduced space.
pub fn initial_frame(n: usize, seed: u64) -> Vec<TangentHV> {
    let mut rng = rng_from_seed(derive_seed(seed, u64::MAX - 1));
    let d = 2 * n - 2;
    loop {
        let mut frame: Vec<TangentHV> = (0..d)
            .map(|_| {
                let mut tau = TangentHV {
                    dh: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
                    dv: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
                };
                let mean = tau.sum_dh() / n as f64;
                tau.dh.iter_mut().for_each(|x| *x -= mean);
                project_in_place(&mut tau);
                tau
            })
            .collect();
        let r = gram_schmidt(&mut frame);
        if r.iter().all(|x| *x > 1e-8) {
            return frame;
        }
    }
}

/// Estimates the map and flow spectra from a seeded interior state.
pub fn lyapunov_spectrum(masses: &MassVector, seed: u64, cfg: &LyapunovConfig) -> Result<LyapunovResult> {
    if cfg.reortho_interval == 0 {
        return Err(Error::InvalidArgument("reortho_interval must be >= 1".into()));
    }
    if cfg.batches == 0 || cfg.n_events < cfg.batches {
        return Err(Error::InvalidArgument(format!(
            "need at least {} events for {} batches",
            cfg.batches, cfg.batches
        )));
    }
    let n = masses.n();
    let d = 2 * n - 2;
    let state = sample_state(masses, seed, Locus::Interior);
    let t0 = state.t;
    let mut billiard = Billiard::new(state, masses.clone(), cfg.dynamics)?;
    let mut frame = initial_frame(n, seed);

    let batch_len = cfg.n_events / cfg.batches;
    let mut totals = vec![CompensatedSum::default(); d];
    let mut batch_sums = vec![CompensatedSum::default(); d];
    let mut batch_means: Vec<Vec<f64>> = Vec::with_capacity(cfg.batches);
    let mut in_batch = 0usize;
    let mut since_reortho = 0usize;

    for event in 0..cfg.n_events {
        let hit = billiard.step()?;
        let post = billiard.state();
        for tau in frame.iter_mut() {
            collision_hv_in_place(tau, &hit, post, masses, FloorDerivativeMode::Full);
            reduce_in_place(tau);
        }
        since_reortho += 1;
        in_batch += 1;
        let batch_done = batch_means.len() + 1 < cfg.batches && in_batch == batch_len;
        let last = event + 1 == cfg.n_events;
        if since_reortho == cfg.reortho_interval || batch_done || last {
            let r = gram_schmidt(&mut frame);
            for (j, rj) in r.iter().enumerate() {
                if !(*rj > 0.0 && rj.is_finite()) {
                    return Err(Error::InvalidState(format!(
                        "frame collapsed at event {event} (r = {rj})"
                    )));
                }
                let l = rj.ln();
                totals[j].add(l);
                batch_sums[j].add(l);
            }
            since_reortho = 0;
        }
        if batch_done || last {
            batch_means.push(batch_sums.iter().map(|s| s.value() / in_batch as f64).collect());
            batch_sums = vec![CompensatedSum::default(); d];
            in_batch = 0;
        }
    }

    let elapsed = billiard.state().t - t0;
    let mean_return_time = elapsed / cfg.n_events as f64;
    let raw: Vec<f64> = totals.iter().map(|s| s.value() / cfg.n_events as f64).collect();
    let b = batch_means.len() as f64;
    let raw_stderr: Vec<f64> = (0..d)
        .map(|j| {
            let mean = batch_means.iter().map(|m| m[j]).sum::<f64>() / b;
            let var = batch_means.iter().map(|m| (m[j] - mean).powi(2)).sum::<f64>() / (b - 1.0);
            (var / b).sqrt()
        })
        .collect();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).unwrap_or(std::cmp::Ordering::Equal));
    let exponents_map: Vec<f64> = order.iter().map(|&j| raw[j]).collect();
    let stderr: Vec<f64> = order.iter().map(|&j| raw_stderr[j]).collect();
    let exponents_flow = exponents_map.iter().map(|x| x / mean_return_time).collect();

    let mut flags = Vec::new();
    if let Some(cap) = cfg.stderr_cap {
        if stderr.iter().any(|s| *s > cap) {
            flags.push("non_convergence".to_string());
        }
    }
    Ok(LyapunovResult {
        masses: masses.as_slice().to_vec(),
        seed,
        n_events: cfg.n_events,
        mean_return_time,
        exponents_map,
        exponents_flow,
        stderr,
        flags,
    })
}

/// Independent `(masses, seed)` spectra, returned in input order.
pub fn lyapunov_batch(
    inputs: &[(MassVector, u64)],
    cfg: &LyapunovConfig,
    jobs: usize,
) -> Vec<Result<LyapunovResult>> {
    run_ordered(jobs, inputs.len(), |i| lyapunov_spectrum(&inputs[i].0, inputs[i].1, cfg))
}
