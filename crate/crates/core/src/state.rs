use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masses::MassVector;

/// A point of the phase space: absolute time, heights and velocities.
///
/// Index 0 is the lowest ball. Boundary points (collision states) are always
/// stored with outgoing velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhaseState {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if q.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                got: v.len(),
            });
        }
        if q.len() < 2 {
            return Err(Error::InvalidState("need at least two balls".into()));
        }
        if !t.is_finite() || q.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        if q[0] < 0.0 || q.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidState(format!(
                "positions must satisfy 0 <= q_1 <= ... <= q_n, got {q:?}"
            )));
        }
        Ok(Self { t, q, v })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Image under the exact symmetry `(q, v, t) -> (s q, sqrt(s) v, sqrt(s) t)`,
    /// which multiplies the energy by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let r = s.sqrt();
        Self {
            t: self.t * r,
            q: self.q.iter().map(|x| x * s).collect(),
            v: self.v.iter().map(|x| x * r).collect(),
        }
    }

    /// Smallest of `q_1` and the gaps `q_{i+1} - q_i`.
    pub fn min_clearance(&self) -> f64 {
        self.q
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(self.q[0], f64::min)
    }
}

/// `H = sum_i (m_i q_i + m_i v_i^2 / 2)` with unit downward acceleration.
pub fn total_energy(state: &PhaseState, masses: &MassVector) -> Result<f64> {
    if state.n() != masses.n() {
        return Err(Error::DimensionMismatch {
            expected: masses.n(),
            got: state.n(),
        });
    }
    Ok(energy_unchecked(&state.q, &state.v, masses.as_slice()))
}

pub(crate) fn energy_unchecked(q: &[f64], v: &[f64], m: &[f64]) -> f64 {
    q.iter()
        .zip(v)
        .zip(m)
        .map(|((q, v), m)| m * q + 0.5 * m * v * v)
        .sum()
}

/// What collides: the lowest ball with the floor, or balls `lower` and
/// `lower + 1` (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Floor,
    Pair(usize),
}

impl EventKind {
    /// Collision symbol: 0 for the floor, `i` for the pair `(i, i+1)` in
    /// one-based ball numbering.
    pub fn symbol(self) -> usize {
        match self {
            EventKind::Floor => 0,
            EventKind::Pair(lower) => lower + 1,
        }
    }

    pub fn from_symbol(symbol: usize, n: usize) -> Result<Self> {
        match symbol {
            0 => Ok(EventKind::Floor),
            s if s < n => Ok(EventKind::Pair(s - 1)),
            s => Err(Error::IndexOutOfRange { index: s, n }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Absolute time of the collision.
    pub time: f64,
}

/// Collision symbols along a trajectory segment together with their times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolicSequence {
    pub symbols: Vec<usize>,
    pub times: Vec<f64>,
}

impl SymbolicSequence {
    pub fn push(&mut self, event: &Event) {
        self.symbols.push(event.kind.symbol());
        self.times.push(event.time);
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbols as a compact string, e.g. `"0102"`; symbols above 9 are
    /// dot-separated.
    pub fn symbol_string(&self) -> String {
        if self.symbols.iter().all(|s| *s < 10) {
            self.symbols.iter().map(|s| s.to_string()).collect()
        } else {
            self.symbols
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(".")
        }
    }
}
