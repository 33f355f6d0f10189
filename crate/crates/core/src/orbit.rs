//! Periodic orbits of the two-ball billiard map and their linear stability.
//!
//! Floor collisions on the `H = 1` shell are charted by `(q_2, v_2)`; the
//! outgoing floor speed follows from the energy. Periodic points are found
//! by a grid scan of the floor-return residual followed by damped Newton
//! iterations, and the monodromy is the reduced symplectic cocycle over one
//! period.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Billiard, DynamicsConfig};
use crate::error::{Error, Result};
use crate::masses::MassVector;
use crate::state::{EventKind, PhaseState, SymbolicSequence};
use crate::tangent::{collision_hv_in_place, reduce_in_place, reduced_basis, FloorDerivativeMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSearch {
    /// Longest period, in billiard-map steps.
    pub max_period: usize,
    pub grid: usize,
    /// Newton starts tried per period.
    pub starts: usize,
    pub newton_iters: usize,
    pub tol: f64,
    pub dynamics: DynamicsConfig,
}

impl Default for OrbitSearch {
    fn default() -> Self {
        Self {
            max_period: 8,
            grid: 160,
            starts: 24,
            newton_iters: 60,
            tol: 1e-10,
            dynamics: DynamicsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Post-floor-collision representative.
    pub state: PhaseState,
    pub period: usize,
    pub sequence: SymbolicSequence,
    /// `||T^p(x) - x||` over positions and velocities.
    pub residual: f64,
    /// Return map of the reduced tangent space, row-major.
    pub monodromy: [[f64; 2]; 2],
    pub eigen_moduli: [f64; 2],
    pub elliptic: bool,
}

struct Chart<'a> {
    masses: &'a MassVector,
}

impl Chart<'_> {
    fn state(&self, x: [f64; 2]) -> Option<PhaseState> {
        let (m1, m2) = (self.masses[0], self.masses[1]);
        let rad = 2.0 * (1.0 - m2 * x[0] - 0.5 * m2 * x[1] * x[1]) / m1;
        if x[0] < 0.0 || !(rad > 0.0) {
            return None;
        }
        Some(PhaseState {
            t: 0.0,
            q: vec![0.0, x[0]],
            v: vec![rad.sqrt(), x[1]],
        })
    }

    fn coords(state: &PhaseState) -> [f64; 2] {
        [state.q[1], state.v[1]]
    }
}

/// Floor returns of `start` within `max_steps` billiard steps, as
/// `(steps, state)` pairs.
fn floor_returns(start: &PhaseState, masses: &MassVector, max_steps: usize, cfg: &DynamicsConfig) -> Vec<(usize, PhaseState)> {
    let mut out = Vec::new();
    let Ok(mut b) = Billiard::new(start.clone(), masses.clone(), *cfg) else {
        return out;
    };
    for step in 1..=max_steps {
        match b.step() {
            Ok(hit) if hit.event.kind == EventKind::Floor => out.push((step, b.state().clone())),
            Ok(_) => {}
            Err(_) => break,
        }
    }
    out
}

/// State after exactly `steps` billiard steps, if all succeed.
fn iterate(start: &PhaseState, masses: &MassVector, steps: usize, cfg: &DynamicsConfig) -> Option<(PhaseState, SymbolicSequence)> {
    let mut b = Billiard::new(start.clone(), masses.clone(), *cfg).ok()?;
    let mut seq = SymbolicSequence::default();
    for _ in 0..steps {
        let hit = b.step().ok()?;
        seq.push(&hit.event);
    }
    Some((b.into_state(), seq))
}

fn displacement(chart: &Chart, x: [f64; 2], steps: usize, cfg: &DynamicsConfig) -> Option<[f64; 2]> {
    let s = chart.state(x)?;
    let (end, seq) = iterate(&s, chart.masses, steps, cfg)?;
    if seq.symbols.last() != Some(&0) {
        return None;
    }
    let y = Chart::coords(&end);
    Some([y[0] - x[0], y[1] - x[1]])
}

fn newton(chart: &Chart, mut x: [f64; 2], steps: usize, search: &OrbitSearch) -> Option<[f64; 2]> {
    let cfg = &search.dynamics;
    let mut g = displacement(chart, x, steps, cfg)?;
    for _ in 0..search.newton_iters {
        let norm = g[0].hypot(g[1]);
        if norm < 1e-14 {
            break;
        }
        let h = 1e-7 * (1.0 + x[0].abs().max(x[1].abs()));
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let gp = displacement(chart, xp, steps, cfg)?;
            let gm = displacement(chart, xm, steps, cfg)?;
            for r in 0..2 {
                jac[r][k] = (gp[r] - gm[r]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let dx = [
            -(jac[1][1] * g[0] - jac[0][1] * g[1]) / det,
            -(-jac[1][0] * g[0] + jac[0][0] * g[1]) / det,
        ];
        let mut lambda = 1.0;
        loop {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Some(gt) = displacement(chart, trial, steps, cfg) {
                if gt[0].hypot(gt[1]) < norm {
                    x = trial;
                    g = gt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Some(x);
            }
        }
    }
    Some(x)
}

fn monodromy(state: &PhaseState, masses: &MassVector, steps: usize, cfg: &DynamicsConfig) -> Result<[[f64; 2]; 2]> {
    let basis = reduced_basis(2);
    let mut frame = basis.clone();
    let mut b = Billiard::new(state.clone(), masses.clone(), *cfg)?;
    for _ in 0..steps {
        let hit = b.step()?;
        for tau in frame.iter_mut() {
            collision_hv_in_place(tau, &hit, b.state(), masses, FloorDerivativeMode::Full);
            reduce_in_place(tau);
        }
    }
    let mut m = [[0.0; 2]; 2];
    for (col, tau) in frame.iter().enumerate() {
        for (row, e) in basis.iter().enumerate() {
            m[row][col] = tau.dot(e);
        }
    }
    Ok(m)
}

fn eigen_moduli(m: &[[f64; 2]; 2]) -> ([f64; 2], bool) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        let r = det.abs().sqrt();
        ([r, r], true)
    } else {
        let s = disc.sqrt();
        let a = (tr / 2.0 + s).abs();
        let b = (tr / 2.0 - s).abs();
        ([a.max(b), a.min(b)], false)
    }
}

fn state_distance(a: &PhaseState, b: &PhaseState) -> f64 {
    a.q.iter()
        .zip(&b.q)
        .chain(a.v.iter().zip(&b.v))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// All distinct periodic orbits found by the search, shortest period first.
pub fn find_periodic_orbits(masses: &MassVector, search: &OrbitSearch) -> Result<Vec<PeriodicOrbit>> {
    if masses.n() != 2 {
        return Err(Error::InvalidMasses("periodic-orbit search needs n = 2".into()));
    }
    let chart = Chart { masses };
    let cfg = &search.dynamics;
    let q_max = 1.0 / masses[1];
    let v_max = (2.0 / masses[1]).sqrt();

    // candidates[p] holds (residual, x) for floor returns after p steps.
    let mut candidates: Vec<Vec<(f64, [f64; 2])>> = vec![Vec::new(); search.max_period + 1];
    for a in 0..search.grid {
        for c in 0..search.grid {
            let x = [
                q_max * (a as f64 + 0.5) / search.grid as f64,
                v_max * (2.0 * (c as f64 + 0.5) / search.grid as f64 - 1.0),
            ];
            let Some(s) = chart.state(x) else { continue };
            for (steps, end) in floor_returns(&s, masses, search.max_period, cfg) {
                let y = Chart::coords(&end);
                let r = (y[0] - x[0]).hypot(y[1] - x[1]);
                candidates[steps].push((r, x));
            }
        }
    }

    let mut found: Vec<PeriodicOrbit> = Vec::new();
    for (steps, list) in candidates.iter_mut().enumerate() {
        list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        for &(_, x0) in list.iter().take(search.starts) {
            let Some(x) = newton(&chart, x0, steps, search) else { continue };
            let Some(state) = chart.state(x) else { continue };
            let Some((end, sequence)) = iterate(&state, masses, steps, cfg) else { continue };
            let residual = state_distance(&state, &end);
            if residual >= search.tol {
                continue;
            }
            let duplicate = found.iter().any(|o| {
                steps % o.period == 0
                    && floor_returns(&o.state, masses, steps, cfg)
                        .iter()
                        .any(|(_, s)| state_distance(s, &state) < 1e-7)
            });
            if duplicate {
                continue;
            }
            let monodromy = monodromy(&state, masses, steps, cfg)?;
            let (eigen_moduli, elliptic) = eigen_moduli(&monodromy);
            found.push(PeriodicOrbit {
                state,
                period: steps,
                sequence,
                residual,
                monodromy,
                eigen_moduli,
                elliptic,
            });
        }
    }
    Ok(found)
}

/// Locates a periodic orbit for two balls with a lighter bottom ball and
/// returns it with its monodromy; linearly stable orbits are preferred.
pub fn stable_orbit_probe(masses: &MassVector, search: &OrbitSearch) -> Result<PeriodicOrbit> {
    if masses.n() != 2 || !(masses[0] < masses[1]) {
        return Err(Error::InvalidMasses(format!(
            "stable-orbit probe needs n = 2 and m_1 < m_2, got {:?}",
            masses.as_slice()
        )));
    }
    let orbits = find_periodic_orbits(masses, search)?;
    orbits
        .iter()
        .find(|o| o.elliptic)
        .or_else(|| orbits.first())
        .cloned()
        .ok_or_else(|| {
            Error::OrbitNotFound(format!(
                "no orbit of period <= {} on a {}x{} grid",
                search.max_period, search.grid, search.grid
            ))
        })
}
