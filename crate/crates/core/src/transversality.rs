//! Rank probes of the position map restricted to velocity perturbations at a
//! fixed configuration.
//!
//! Starting from a boundary point, the candle basis spans the velocity
//! perturbations that keep the configuration and the energy fixed. Each
//! basis vector is pushed through `k` collisions in ambient coordinates and
//! the position part at the incoming side of the `k`-th collision forms an
//! `n x (n-1)` Jacobian. Full column rank means no nonzero perturbation of
//! this kind leaves the configuration at the `k`-th collision unchanged to
//! first order. Singular values are always reported so near-degeneracy stays
//! visible.

use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::batch::run_ordered;
use crate::dynamics::{Billiard, DynamicsConfig};
use crate::error::{Error, Result};
use crate::linalg::{complement_basis, singular_values};
use crate::masses::{MassOrdering, MassVector};
use crate::sampling::{derive_seed, rng_from_seed, sample_decreasing_masses, sample_state_with_contacts, Locus};
use crate::state::{EventKind, PhaseState, SymbolicSequence};
use crate::tangent::{collision_qv_in_place, flight_qv_in_place, FloorDerivativeMode, TangentQV};

/// Orthonormal velocity perturbations with `dq = 0` and
/// `sum_i m_i v_i dv_i = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandleBasis {
    pub vectors: Vec<TangentQV>,
}

pub fn candle_basis(state: &PhaseState, masses: &MassVector) -> Result<CandleBasis> {
    let n = masses.n();
    if state.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: state.n(),
        });
    }
    let w: Vec<f64> = (0..n).map(|i| masses[i] * state.v[i]).collect();
    if w.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-12 {
        return Err(Error::DegenerateVelocity);
    }
    let basis = complement_basis(&w).ok_or(Error::DegenerateVelocity)?;
    Ok(CandleBasis {
        vectors: basis
            .into_iter()
            .map(|dv| TangentQV {
                dq: vec![0.0; n],
                dv,
            })
            .collect(),
    })
}

/// Jacobians at the `k`-th collision.
#[derive(Debug, Clone, PartialEq)]
pub struct CandleJacobian {
    pub k: usize,
    /// Position part of the propagated candle vectors at the incoming limit
    /// of the `k`-th collision (fixed time), one column per basis vector.
    pub matrix: DMatrix<f64>,
    /// The same columns moved along the incoming velocity to the perturbed
    /// collision time: the derivative of the configuration reached at the
    /// `k`-th collision.
    pub boundary: DMatrix<f64>,
    pub sequence: SymbolicSequence,
    /// Time from the start to the `k`-th collision.
    pub elapsed: f64,
}

/// Jacobians for every `k` in `ks`, computed along one trajectory. Entries
/// past a dynamics failure carry that error.
pub fn candle_jacobians(
    state: &PhaseState,
    masses: &MassVector,
    ks: &[usize],
    mode: FloorDerivativeMode,
    cfg: &DynamicsConfig,
) -> Vec<Result<CandleJacobian>> {
    let k_max = ks.iter().copied().max().unwrap_or(0);
    let mut slots: Vec<Option<Result<CandleJacobian>>> = vec![None; ks.len()];
    if ks.contains(&0) {
        for (slot, &k) in slots.iter_mut().zip(ks) {
            if k == 0 {
                *slot = Some(Err(Error::InvalidArgument("k must be at least 1".into())));
            }
        }
    }
    let mut run = || -> Result<()> {
        let basis = candle_basis(state, masses)?;
        let mut vectors = basis.vectors;
        let n = masses.n();
        let mut billiard = Billiard::new(state.clone(), masses.clone(), *cfg)?;
        let mut sequence = SymbolicSequence::default();
        for step in 1..=k_max {
            let hit = billiard.step()?;
            sequence.push(&hit.event);
            let post = billiard.state();
            for tau in vectors.iter_mut() {
                flight_qv_in_place(tau, hit.dt);
            }
            if ks.contains(&step) {
                let matrix = DMatrix::from_fn(n, n - 1, |r, c| vectors[c].dq[r]);
                let mut v_in = post.v.clone();
                match hit.event.kind {
                    EventKind::Floor => v_in[0] = hit.v_pre[0],
                    EventKind::Pair(i) => {
                        v_in[i] = hit.v_pre[0];
                        v_in[i + 1] = hit.v_pre[1];
                    }
                }
                let boundary = DMatrix::from_fn(n, n - 1, |r, c| {
                    let dq = &vectors[c].dq;
                    let shift = match hit.event.kind {
                        EventKind::Floor => -dq[0] / v_in[0],
                        EventKind::Pair(i) => (dq[i + 1] - dq[i]) / (v_in[i] - v_in[i + 1]),
                    };
                    dq[r] + v_in[r] * shift
                });
                let jac = CandleJacobian {
                    k: step,
                    matrix,
                    boundary,
                    sequence: sequence.clone(),
                    elapsed: post.t - state.t,
                };
                for (slot, &k) in slots.iter_mut().zip(ks) {
                    if k == step {
                        *slot = Some(Ok(jac.clone()));
                    }
                }
            }
            for tau in vectors.iter_mut() {
                collision_qv_in_place(tau, &hit, post, masses, mode);
            }
        }
        Ok(())
    };
    if let Err(e) = run() {
        for slot in slots.iter_mut().filter(|s| s.is_none()) {
            *slot = Some(Err(e.clone()));
        }
    }
    slots
        .into_iter()
        .map(|s| s.expect("every requested k is filled"))
        .collect()
}

pub fn candle_jacobian(
    state: &PhaseState,
    masses: &MassVector,
    k: usize,
    mode: FloorDerivativeMode,
    cfg: &DynamicsConfig,
) -> Result<CandleJacobian> {
    candle_jacobians(state, masses, &[k], mode, cfg)
        .pop()
        .expect("one entry per k")
}

/// Default relative threshold for counting a singular value as nonzero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// Sorted descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub tol: f64,
    pub k: Option<usize>,
    pub mode: Option<FloorDerivativeMode>,
}

impl RankReport {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// `sigma_min / sigma_max`, zero for a vanishing matrix.
    pub fn sigma_ratio(&self) -> f64 {
        let max = self.sigma_max();
        if max > 0.0 {
            self.sigma_min() / max
        } else {
            0.0
        }
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.singular_values.len()
    }

    pub fn with_context(mut self, k: usize, mode: FloorDerivativeMode) -> Self {
        self.k = Some(k);
        self.mode = Some(mode);
        self
    }
}

/// Numerical rank: the number of singular values above `tol_factor * sigma_1`.
pub fn rank_report(matrix: &DMatrix<f64>, tol_factor: f64) -> RankReport {
    let singular_values = singular_values(matrix);
    let top = singular_values.first().copied().unwrap_or(0.0);
    let rank = if top > 0.0 {
        singular_values.iter().filter(|s| **s > tol_factor * top).count()
    } else {
        0
    };
    RankReport {
        singular_values,
        rank,
        tol: tol_factor,
        k: None,
        mode: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTestReport {
    pub report: RankReport,
    /// Symbols of the contacts the start point was placed on.
    pub contacts: Vec<usize>,
    pub symbols: String,
}

/// Rank probe from a seeded start point on `locus`.
pub fn rank_test(
    masses: &MassVector,
    seed: u64,
    k: usize,
    mode: FloorDerivativeMode,
    tol_factor: f64,
    locus: Locus,
    cfg: &DynamicsConfig,
) -> Result<RankTestReport> {
    let sample = sample_state_with_contacts(masses, seed, locus);
    let jac = candle_jacobian(&sample.state, masses, k, mode, cfg)?;
    Ok(RankTestReport {
        report: rank_report(&jac.matrix, tol_factor).with_context(k, mode),
        contacts: sample.contacts,
        symbols: jac.sequence.symbol_string(),
    })
}

/// Rank probe from a seeded point with two simultaneous contacts.
pub fn singular_rank_test(
    masses: &MassVector,
    seed: u64,
    k: usize,
    mode: FloorDerivativeMode,
    tol_factor: f64,
    cfg: &DynamicsConfig,
) -> Result<RankTestReport> {
    rank_test(masses, seed, k, mode, tol_factor, Locus::SingularDouble, cfg)
}

/// Equal-mass pass-through oracle.
///
/// With equal masses a pair collision only exchanges labels, so particles
/// are tracked by identity through an explicit permutation and the floor
/// flips `dq` and `dv` of whichever particle sits lowest. Starting from
/// `dq = 0` this keeps `dq(t) = t dv(t)`; the return value is the largest
/// violation `max |dq - t dv|` over all events and candle vectors.
pub fn equal_mass_oracle(
    state: &PhaseState,
    masses: &MassVector,
    n_events: usize,
    cfg: &DynamicsConfig,
) -> Result<f64> {
    if masses.mode() != MassOrdering::Equal {
        return Err(Error::InvalidMasses(format!(
            "oracle needs equal masses, got {:?}",
            masses.as_slice()
        )));
    }
    let n = masses.n();
    let mut vectors = candle_basis(state, masses)?.vectors;
    // slot_owner[s] = label of the particle currently at height rank s.
    let mut slot_owner: Vec<usize> = (0..n).collect();
    let mut billiard = Billiard::new(state.clone(), masses.clone(), *cfg)?;
    let mut worst: f64 = 0.0;
    let residual = |vectors: &[TangentQV], t: f64| {
        vectors
            .iter()
            .map(|tau| {
                tau.dq
                    .iter()
                    .zip(&tau.dv)
                    .map(|(q, v)| (q - t * v).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    };
    for _ in 0..n_events {
        let hit = billiard.step()?;
        for tau in vectors.iter_mut() {
            flight_qv_in_place(tau, hit.dt);
        }
        let t = billiard.state().t - state.t;
        worst = worst.max(residual(&vectors, t));
        match hit.event.kind {
            EventKind::Pair(i) => slot_owner.swap(i, i + 1),
            EventKind::Floor => {
                let label = slot_owner[0];
                for tau in vectors.iter_mut() {
                    tau.dq[label] = -tau.dq[label];
                    tau.dv[label] = -tau.dv[label];
                }
            }
        }
        worst = worst.max(residual(&vectors, t));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub n: usize,
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub mode: FloorDerivativeMode,
    pub locus: Locus,
    pub rank_tol: f64,
    pub min_mass_gap: f64,
    pub jobs: usize,
    pub dynamics: DynamicsConfig,
}

impl ScanConfig {
    pub fn new(n: usize, k_list: Vec<usize>, trials: usize, master_seed: u64) -> Self {
        Self {
            n,
            k_list,
            trials,
            master_seed,
            mode: FloorDerivativeMode::Full,
            locus: Locus::Boundary,
            rank_tol: DEFAULT_RANK_TOL,
            min_mass_gap: 1e-3,
            jobs: 1,
            dynamics: DynamicsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub mode: FloorDerivativeMode,
    pub symbol_string: String,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_ratio: f64,
    pub rank: usize,
    /// Empty on success, otherwise the error code.
    pub flag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub n: usize,
    pub k: usize,
    pub mode: FloorDerivativeMode,
    pub locus: Locus,
    pub trials: usize,
    pub flagged: usize,
    pub full_rank_fraction: f64,
    /// Quantile levels in percent and the matching `sigma_ratio` values.
    pub quantile_levels: Vec<f64>,
    pub sigma_ratio_quantiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub summary: Vec<ScanSummary>,
}

pub const QUANTILE_LEVELS: [f64; 5] = [1.0, 5.0, 50.0, 95.0, 99.0];

/// Linear-interpolation quantile of sorted data, `level` in percent.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = level / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn scan_trial(cfg: &ScanConfig, trial: usize) -> Vec<ScanRow> {
    let seed = derive_seed(cfg.master_seed, trial as u64);
    let mut rng = rng_from_seed(seed);
    let masses = sample_decreasing_masses(cfg.n, cfg.min_mass_gap, &mut rng);
    let state_seed = rng.next_u64();
    let start = sample_state_with_contacts(&masses, state_seed, cfg.locus).state;
    let results = candle_jacobians(&start, &masses, &cfg.k_list, cfg.mode, &cfg.dynamics);
    cfg.k_list
        .iter()
        .zip(results)
        .map(|(&k, res)| match res {
            Ok(jac) => {
                let report = rank_report(&jac.matrix, cfg.rank_tol);
                ScanRow {
                    trial,
                    seed,
                    n: cfg.n,
                    k,
                    mode: cfg.mode,
                    symbol_string: jac.sequence.symbol_string(),
                    sigma_min: report.sigma_min(),
                    sigma_max: report.sigma_max(),
                    sigma_ratio: report.sigma_ratio(),
                    rank: report.rank,
                    flag: String::new(),
                }
            }
            Err(e) => ScanRow {
                trial,
                seed,
                n: cfg.n,
                k,
                mode: cfg.mode,
                symbol_string: String::new(),
                sigma_min: f64::NAN,
                sigma_max: f64::NAN,
                sigma_ratio: f64::NAN,
                rank: 0,
                flag: e.code().to_string(),
            },
        })
        .collect()
}

/// Monte-Carlo rank scan over random strictly decreasing mass vectors.
///
/// Trial `i` uses `derive_seed(master_seed, i)` for both the masses and the
/// start point, so the table is identical for any `jobs`. Failed trials are
/// kept as flagged rows.
pub fn mass_scan(cfg: &ScanConfig) -> Result<ScanTable> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if cfg.n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    if cfg.k_list.is_empty() || cfg.k_list.contains(&0) {
        return Err(Error::InvalidArgument("k values must be positive".into()));
    }
    let rows: Vec<ScanRow> = run_ordered(cfg.jobs, cfg.trials, |t| scan_trial(cfg, t))
        .into_iter()
        .flatten()
        .collect();

    let summary = cfg
        .k_list
        .iter()
        .map(|&k| {
            let of_k: Vec<&ScanRow> = rows.iter().filter(|r| r.k == k).collect();
            let mut ratios: Vec<f64> = of_k
                .iter()
                .filter(|r| r.flag.is_empty())
                .map(|r| r.sigma_ratio)
                .collect();
            ratios.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let full = of_k
                .iter()
                .filter(|r| r.flag.is_empty() && r.rank == cfg.n - 1)
                .count();
            ScanSummary {
                n: cfg.n,
                k,
                mode: cfg.mode,
                locus: cfg.locus,
                trials: of_k.len(),
                flagged: of_k.len() - ratios.len(),
                full_rank_fraction: full as f64 / of_k.len() as f64,
                quantile_levels: QUANTILE_LEVELS.to_vec(),
                sigma_ratio_quantiles: QUANTILE_LEVELS.iter().map(|&l| quantile(&ratios, l)).collect(),
            }
        })
        .collect();
    Ok(ScanTable { rows, summary })
}
