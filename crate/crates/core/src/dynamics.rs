//! Exact event-driven evolution: free fall under unit gravity, elastic pair
//! collisions and elastic floor bounces.
//!
//! Between collisions every ball follows `q(t) = q + v t - t^2/2`, so pair
//! gaps close linearly and only the floor needs a square root. Each step of
//! the billiard map advances to the next event, snaps the contact exactly and
//! applies the velocity map.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masses::MassVector;
use crate::state::{energy_unchecked, Event, EventKind, PhaseState, SymbolicSequence};

/// What to do when the two earliest candidate events are closer than `eps_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimultaneityPolicy {
    Abort,
    /// Take the floor first, then pairs in ascending index order.
    Resolve,
}

impl std::str::FromStr for SimultaneityPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abort" => Ok(SimultaneityPolicy::Abort),
            "resolve" => Ok(SimultaneityPolicy::Resolve),
            other => Err(Error::InvalidArgument(format!("unknown simultaneity policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    /// Relative simultaneity tolerance; the absolute one is `eps_t_rel * (|t| + 1)`.
    pub eps_t_rel: f64,
    /// Contact tolerance checked before applying a collision.
    pub eps_q: f64,
    pub policy: SimultaneityPolicy,
    pub zeno_max: usize,
    pub zeno_window: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            eps_t_rel: 1e-12,
            eps_q: 1e-10,
            policy: SimultaneityPolicy::Abort,
            zeno_max: 1_000_000,
            zeno_window: 1.0,
        }
    }
}

impl DynamicsConfig {
    pub fn eps_t(&self, t: f64) -> f64 {
        self.eps_t_rel * (t.abs() + 1.0)
    }
}

/// Time until the lowest ball reaches the floor, `0` if it is there and falling.
fn floor_delay(q1: f64, v1: f64) -> f64 {
    let q1 = q1.max(0.0);
    let root = (v1 * v1 + 2.0 * q1).sqrt();
    if v1 < 0.0 {
        // Avoids cancellation in v1 + root.
        2.0 * q1 / (root - v1)
    } else {
        v1 + root
    }
}

/// Delay to the next collision, or `None` if the state is at rest on the floor.
fn next_delay(q: &[f64], v: &[f64], t: f64, cfg: &DynamicsConfig) -> Result<(f64, EventKind)> {
    if q[0] <= 0.0 && v[0] == 0.0 {
        return Err(Error::DegenerateRest);
    }
    let mut best = (floor_delay(q[0], v[0]), EventKind::Floor);
    let mut second = f64::INFINITY;
    for i in 0..q.len() - 1 {
        let closing = v[i] - v[i + 1];
        if closing > 0.0 {
            let dt = (q[i + 1] - q[i]).max(0.0) / closing;
            if dt < best.0 {
                second = best.0;
                best = (dt, EventKind::Pair(i));
            } else if dt < second {
                second = dt;
            }
        }
    }
    let eps = cfg.eps_t(t);
    if second - best.0 < eps {
        match cfg.policy {
            SimultaneityPolicy::Abort => {
                return Err(Error::NearSimultaneous {
                    time: t + best.0,
                    gap: second - best.0,
                })
            }
            SimultaneityPolicy::Resolve => {
                let limit = best.0 + eps;
                let floor = floor_delay(q[0], v[0]);
                if floor <= limit {
                    return Ok((floor, EventKind::Floor));
                }
                for i in 0..q.len() - 1 {
                    let closing = v[i] - v[i + 1];
                    if closing > 0.0 {
                        let dt = (q[i + 1] - q[i]).max(0.0) / closing;
                        if dt <= limit {
                            return Ok((dt, EventKind::Pair(i)));
                        }
                    }
                }
            }
        }
    }
    Ok(best)
}

/// Earliest future collision of `state`.
///
/// A floor candidate always exists for admissible states, so `None` is only
/// returned for inputs that cannot be evolved; the resting degeneracy
/// `q_1 = v_1 = 0` is reported as [`Error::DegenerateRest`].
pub fn next_event(state: &PhaseState, cfg: &DynamicsConfig) -> Result<Option<Event>> {
    let (dt, kind) = next_delay(&state.q, &state.v, state.t, cfg)?;
    if !dt.is_finite() {
        return Ok(None);
    }
    Ok(Some(Event {
        kind,
        time: state.t + dt,
    }))
}

fn drift(q: &mut [f64], v: &mut [f64], dt: f64) {
    let fall = 0.5 * dt * dt;
    for (q, v) in q.iter_mut().zip(v.iter_mut()) {
        *q += *v * dt - fall;
        *v -= dt;
    }
}

fn ordering_residual(q: &[f64]) -> (f64, String) {
    let mut worst = (q[0], "floor".to_string());
    for i in 0..q.len() - 1 {
        let gap = q[i + 1] - q[i];
        if gap < worst.0 {
            worst = (gap, format!("pair {}", i + 1));
        }
    }
    worst
}

/// Free fall for `dt` with no collision in between.
pub fn advance_free(state: &PhaseState, dt: f64, cfg: &DynamicsConfig) -> Result<PhaseState> {
    if dt < 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("free-flight duration {dt}")));
    }
    let mut out = state.clone();
    drift(&mut out.q, &mut out.v, dt);
    out.t += dt;
    let (worst, what) = ordering_residual(&out.q);
    if worst < -cfg.eps_q {
        return Err(Error::OrderingViolated {
            dt,
            detail: format!("{what} at {worst:.3e}"),
        });
    }
    Ok(out)
}

/// Outgoing velocities of the pair `(lower, lower+1)`.
pub fn pair_velocities(masses: &MassVector, lower: usize, v_lower: f64, v_upper: f64) -> (f64, f64) {
    let g = masses.gamma(lower);
    (
        g * v_lower + (1.0 - g) * v_upper,
        (1.0 + g) * v_lower - g * v_upper,
    )
}

fn collide_in_place(
    state: &mut PhaseState,
    kind: EventKind,
    masses: &MassVector,
    cfg: &DynamicsConfig,
) -> Result<[f64; 2]> {
    let n = state.n();
    match kind {
        EventKind::Floor => {
            if state.q[0].abs() > cfg.eps_q {
                return Err(Error::NotInContact {
                    symbol: 0,
                    residual: state.q[0],
                });
            }
            if state.v[0] >= 0.0 {
                return Err(Error::NotApproaching { symbol: 0 });
            }
            let pre = [state.v[0], state.v[1]];
            state.v[0] = -state.v[0];
            Ok(pre)
        }
        EventKind::Pair(i) => {
            if i + 1 >= n {
                return Err(Error::IndexOutOfRange { index: i + 1, n });
            }
            let gap = state.q[i + 1] - state.q[i];
            if gap.abs() > cfg.eps_q {
                return Err(Error::NotInContact {
                    symbol: i + 1,
                    residual: gap,
                });
            }
            let pre = [state.v[i], state.v[i + 1]];
            if pre[0] <= pre[1] {
                return Err(Error::NotApproaching { symbol: i + 1 });
            }
            let (a, b) = pair_velocities(masses, i, pre[0], pre[1]);
            state.v[i] = a;
            state.v[i + 1] = b;
            Ok(pre)
        }
    }
}

/// Velocity jump at a collision; positions are unchanged.
pub fn apply_collision(
    state: &PhaseState,
    event: &Event,
    masses: &MassVector,
    cfg: &DynamicsConfig,
) -> Result<PhaseState> {
    if state.n() != masses.n() {
        return Err(Error::DimensionMismatch {
            expected: masses.n(),
            got: state.n(),
        });
    }
    let mut out = state.clone();
    collide_in_place(&mut out, event.kind, masses, cfg)?;
    Ok(out)
}

/// One step of the billiard map, returning the post-collision representative.
pub fn billiard_step(
    state: &PhaseState,
    masses: &MassVector,
    cfg: &DynamicsConfig,
) -> Result<(PhaseState, Event)> {
    let mut out = state.clone();
    let hit = step_in_place(&mut out, masses, cfg)?;
    Ok((out, hit.event))
}

/// Everything the tangent maps need to know about one collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub event: Event,
    /// Free-flight time before the collision.
    pub dt: f64,
    /// Incoming velocities of the colliding balls; for a floor hit only the
    /// first entry is meaningful.
    pub v_pre: [f64; 2],
}

pub(crate) fn step_in_place(
    state: &mut PhaseState,
    masses: &MassVector,
    cfg: &DynamicsConfig,
) -> Result<Collision> {
    if state.n() != masses.n() {
        return Err(Error::DimensionMismatch {
            expected: masses.n(),
            got: state.n(),
        });
    }
    let (dt, kind) = next_delay(&state.q, &state.v, state.t, cfg)?;
    if !dt.is_finite() {
        return Err(Error::NoEvent);
    }
    drift(&mut state.q, &mut state.v, dt);
    state.t += dt;
    let (worst, what) = ordering_residual(&state.q);
    if worst < -cfg.eps_q {
        return Err(Error::OrderingViolated {
            dt,
            detail: format!("{what} at {worst:.3e}"),
        });
    }
    match kind {
        EventKind::Floor => {
            if state.q[0].abs() <= cfg.eps_q {
                state.q[0] = 0.0;
            }
        }
        EventKind::Pair(i) => {
            if (state.q[i + 1] - state.q[i]).abs() <= cfg.eps_q {
                let mid = 0.5 * (state.q[i] + state.q[i + 1]);
                state.q[i] = mid;
                state.q[i + 1] = mid;
            }
        }
    }
    let v_pre = collide_in_place(state, kind, masses, cfg)?;
    Ok(Collision {
        event: Event {
            kind,
            time: state.t,
        },
        dt,
        v_pre,
    })
}

/// Sliding-window counter rejecting accumulating collision times.
#[derive(Debug, Clone)]
pub struct ZenoGuard {
    max_events: usize,
    window: f64,
    recent: VecDeque<f64>,
}

impl ZenoGuard {
    pub fn new(cfg: &DynamicsConfig) -> Self {
        Self {
            max_events: cfg.zeno_max,
            window: cfg.zeno_window,
            recent: VecDeque::new(),
        }
    }

    pub fn record(&mut self, time: f64) -> Result<()> {
        self.recent.push_back(time);
        while let Some(&front) = self.recent.front() {
            if front < time - self.window {
                self.recent.pop_front();
            } else {
                break;
            }
        }
        if self.recent.len() > self.max_events {
            return Err(Error::ZenoGuardTripped {
                max_events: self.max_events,
                window: self.window,
                time,
            });
        }
        Ok(())
    }
}

/// Stateful billiard-map iterator used by the long-running routines.
#[derive(Debug, Clone)]
pub struct Billiard {
    state: PhaseState,
    masses: MassVector,
    cfg: DynamicsConfig,
    guard: ZenoGuard,
    events: u64,
}

impl Billiard {
    pub fn new(state: PhaseState, masses: MassVector, cfg: DynamicsConfig) -> Result<Self> {
        if state.n() != masses.n() {
            return Err(Error::DimensionMismatch {
                expected: masses.n(),
                got: state.n(),
            });
        }
        let guard = ZenoGuard::new(&cfg);
        Ok(Self {
            state,
            masses,
            cfg,
            guard,
            events: 0,
        })
    }

    pub fn step(&mut self) -> Result<Collision> {
        let hit = step_in_place(&mut self.state, &self.masses, &self.cfg)?;
        self.guard.record(hit.event.time)?;
        self.events += 1;
        Ok(hit)
    }

    pub fn state(&self) -> &PhaseState {
        &self.state
    }

    pub fn masses(&self) -> &MassVector {
        &self.masses
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.cfg
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn energy(&self) -> f64 {
        energy_unchecked(&self.state.q, &self.state.v, self.masses.as_slice())
    }

    pub fn into_state(self) -> PhaseState {
        self.state
    }
}

/// Post-collision snapshot emitted by [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub index: usize,
    pub time: f64,
    pub symbol: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<EventRecord>,
    pub sequence: SymbolicSequence,
}

impl Trajectory {
    /// Largest `|H - H_0| / |H_0|` over the records, relative to `initial`.
    pub fn max_energy_drift(&self, initial: f64) -> f64 {
        self.records
            .iter()
            .map(|r| ((r.energy - initial) / initial).abs())
            .fold(0.0, f64::max)
    }
}

/// Iterates the billiard map `n_events` times, recording every collision.
pub fn simulate(
    state: &PhaseState,
    masses: &MassVector,
    n_events: usize,
    cfg: &DynamicsConfig,
) -> Result<Trajectory> {
    if n_events == 0 {
        return Err(Error::InvalidArgument("n_events must be at least 1".into()));
    }
    let mut billiard = Billiard::new(state.clone(), masses.clone(), *cfg)?;
    let mut records = Vec::with_capacity(n_events);
    let mut sequence = SymbolicSequence::default();
    for index in 0..n_events {
        let hit = billiard.step()?;
        sequence.push(&hit.event);
        let s = billiard.state();
        records.push(EventRecord {
            index,
            time: hit.event.time,
            symbol: hit.event.kind.symbol(),
            q: s.q.clone(),
            v: s.v.clone(),
            energy: billiard.energy(),
        });
    }
    Ok(Trajectory { records, sequence })
}
