//! Linearized dynamics along a trajectory.
//!
//! Two coordinate systems are carried. Ambient `(dq, dv)` vectors evolve by
//! `dq += dt * dv` in flight and by the collision derivatives at events.
//! Symplectic `(dh, dv)` vectors, with `dh_i = m_i dq_i + m_i v_i dv_i`, are
//! constant in flight, so only collisions act on them:
//!
//! * pair `(i, i+1)`: `dh+ = R^T (dh- + S dv-)`, `dv+ = R dv-`, where `R`
//!   holds the block `[[g, 1-g], [1+g, -g]]` and `S` the block
//!   `alpha [[1, -1], [-1, 1]]`;
//! * floor: `dh` unchanged, `dv_1 += 2 dh_1 / (m_1 v_1+)`.
//!
//! The energy variation is `sum(dh)` and the flow direction is
//! `(dh, dv) = (0, -1)`, so the reduced space is `sum(dh) = sum(dv) = 0`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{advance_free, next_event, Billiard, Collision, DynamicsConfig};
use crate::error::{Error, Result};
use crate::masses::MassVector;
use crate::state::{EventKind, PhaseState, SymbolicSequence};

/// Ambient tangent vector `(dq, dv)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentQV {
    pub dq: Vec<f64>,
    pub dv: Vec<f64>,
}

/// Tangent vector in symplectic coordinates `(dh, dv)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentHV {
    pub dh: Vec<f64>,
    pub dv: Vec<f64>,
}

impl TangentQV {
    pub fn zeros(n: usize) -> Self {
        Self {
            dq: vec![0.0; n],
            dv: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.dq.len()
    }
}

impl TangentHV {
    pub fn zeros(n: usize) -> Self {
        Self {
            dh: vec![0.0; n],
            dv: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.dh.len()
    }

    pub fn norm(&self) -> f64 {
        self.dh.iter().chain(&self.dv).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TangentHV) -> f64 {
        self.dh
            .iter()
            .zip(&other.dh)
            .chain(self.dv.iter().zip(&other.dv))
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scale(&mut self, c: f64) {
        self.dh.iter_mut().chain(self.dv.iter_mut()).for_each(|x| *x *= c);
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &TangentHV) {
        for (a, b) in self.dh.iter_mut().zip(&other.dh) {
            *a += c * b;
        }
        for (a, b) in self.dv.iter_mut().zip(&other.dv) {
            *a += c * b;
        }
    }

    pub fn sum_dh(&self) -> f64 {
        self.dh.iter().sum()
    }

    pub fn sum_dv(&self) -> f64 {
        self.dv.iter().sum()
    }
}

/// Which linearization to use at floor collisions in `(dq, dv)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloorDerivativeMode {
    /// Fixed-time derivative including the `2 dq_1 / v_1+` shear.
    Full,
    /// Plain sign flip of `dq_1` and `dv_1`.
    ReflectOnly,
}

impl FloorDerivativeMode {
    pub fn name(self) -> &'static str {
        match self {
            FloorDerivativeMode::Full => "full",
            FloorDerivativeMode::ReflectOnly => "reflect-only",
        }
    }
}

impl std::str::FromStr for FloorDerivativeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FloorDerivativeMode::Full),
            "reflect-only" | "reflect" => Ok(FloorDerivativeMode::ReflectOnly),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

fn check_dims(n: usize, got: usize) -> Result<()> {
    if n != got {
        return Err(Error::DimensionMismatch { expected: n, got });
    }
    Ok(())
}

pub fn to_symplectic(state: &PhaseState, masses: &MassVector, tau: &TangentQV) -> Result<TangentHV> {
    let n = masses.n();
    check_dims(n, state.n())?;
    check_dims(n, tau.n())?;
    let dh = (0..n)
        .map(|i| masses[i] * tau.dq[i] + masses[i] * state.v[i] * tau.dv[i])
        .collect();
    Ok(TangentHV {
        dh,
        dv: tau.dv.clone(),
    })
}

pub fn from_symplectic(state: &PhaseState, masses: &MassVector, tau: &TangentHV) -> Result<TangentQV> {
    let n = masses.n();
    check_dims(n, state.n())?;
    check_dims(n, tau.n())?;
    let dq = (0..n)
        .map(|i| tau.dh[i] / masses[i] - state.v[i] * tau.dv[i])
        .collect();
    Ok(TangentQV {
        dq,
        dv: tau.dv.clone(),
    })
}

/// Symplectic coordinates do not change between collisions.
pub fn propagate_free_hv(tau: &TangentHV, _dt: f64) -> TangentHV {
    tau.clone()
}

pub fn propagate_free_qv(tau: &TangentQV, dt: f64) -> TangentQV {
    let mut out = tau.clone();
    flight_qv(&mut out, dt);
    out
}

fn flight_qv(tau: &mut TangentQV, dt: f64) {
    for (q, v) in tau.dq.iter_mut().zip(&tau.dv) {
        *q += dt * v;
    }
}

pub(crate) fn pair_hv_in_place(tau: &mut TangentHV, masses: &MassVector, lower: usize, v_pre: [f64; 2]) {
    let (i, j) = (lower, lower + 1);
    let g = masses.gamma(lower);
    let alpha = masses.alpha(lower, v_pre[0], v_pre[1]);
    let (dvi, dvj) = (tau.dv[i], tau.dv[j]);
    let shear = alpha * (dvi - dvj);
    let (hi, hj) = (tau.dh[i] + shear, tau.dh[j] - shear);
    // R^T has rows (g, 1+g) and (1-g, -g).
    tau.dh[i] = g * hi + (1.0 + g) * hj;
    tau.dh[j] = (1.0 - g) * hi - g * hj;
    tau.dv[i] = g * dvi + (1.0 - g) * dvj;
    tau.dv[j] = (1.0 + g) * dvi - g * dvj;
}

pub(crate) fn floor_hv_in_place(tau: &mut TangentHV, m1: f64, v1_post: f64) {
    tau.dv[0] += 2.0 * tau.dh[0] / (m1 * v1_post);
}

/// Pair-collision cocycle in symplectic coordinates.
///
/// `pre_state` is the state at the collision with incoming velocities and
/// `lower` the zero-based index of the lower ball.
pub fn apply_pair_hv(
    tau: &TangentHV,
    pre_state: &PhaseState,
    masses: &MassVector,
    lower: usize,
) -> Result<TangentHV> {
    let n = masses.n();
    check_dims(n, tau.n())?;
    check_dims(n, pre_state.n())?;
    if lower + 1 >= n {
        return Err(Error::IndexOutOfRange { index: lower + 1, n });
    }
    let v_pre = [pre_state.v[lower], pre_state.v[lower + 1]];
    if v_pre[0] <= v_pre[1] {
        return Err(Error::NotApproaching { symbol: lower + 1 });
    }
    let mut out = tau.clone();
    pair_hv_in_place(&mut out, masses, lower, v_pre);
    Ok(out)
}

/// Floor-collision cocycle in symplectic coordinates; `post_state` carries
/// the outgoing velocity.
pub fn apply_floor_hv(tau: &TangentHV, post_state: &PhaseState, masses: &MassVector) -> Result<TangentHV> {
    check_dims(masses.n(), tau.n())?;
    let v1 = post_state.v[0];
    if !(v1 > 0.0) {
        return Err(Error::NonPositiveFloorVelocity(v1));
    }
    let mut out = tau.clone();
    floor_hv_in_place(&mut out, masses[0], v1);
    Ok(out)
}

pub(crate) fn pair_qv_in_place(tau: &mut TangentQV, masses: &MassVector, lower: usize) {
    let (i, j) = (lower, lower + 1);
    let g = masses.gamma(lower);
    for x in [&mut tau.dq, &mut tau.dv] {
        let (a, b) = (x[i], x[j]);
        x[i] = g * a + (1.0 - g) * b;
        x[j] = (1.0 + g) * a - g * b;
    }
}

pub(crate) fn floor_qv_in_place(tau: &mut TangentQV, v1_post: f64, mode: FloorDerivativeMode) {
    let dq1 = tau.dq[0];
    tau.dq[0] = -dq1;
    tau.dv[0] = -tau.dv[0];
    if mode == FloorDerivativeMode::Full {
        tau.dv[0] += 2.0 * dq1 / v1_post;
    }
}

/// Pair collision in ambient coordinates: `R` acts on both `dq` and `dv`.
pub fn apply_pair_qv(tau: &TangentQV, masses: &MassVector, lower: usize) -> Result<TangentQV> {
    let n = masses.n();
    check_dims(n, tau.n())?;
    if lower + 1 >= n {
        return Err(Error::IndexOutOfRange { index: lower + 1, n });
    }
    let mut out = tau.clone();
    pair_qv_in_place(&mut out, masses, lower);
    Ok(out)
}

pub fn apply_floor_qv(tau: &TangentQV, post_state: &PhaseState, mode: FloorDerivativeMode) -> Result<TangentQV> {
    let v1 = post_state.v[0];
    if !(v1 > 0.0) {
        return Err(Error::NonPositiveFloorVelocity(v1));
    }
    let mut out = tau.clone();
    floor_qv_in_place(&mut out, v1, mode);
    Ok(out)
}

/// Relative tolerance on `sum(dh)` accepted by [`project_transversal`].
pub const TANGENCY_TOL: f64 = 1e-9;

pub(crate) fn project_in_place(tau: &mut TangentHV) {
    let mean = tau.sum_dv() / tau.n() as f64;
    tau.dv.iter_mut().for_each(|x| *x -= mean);
}

/// Projects onto `sum(dh) = sum(dv) = 0`. Exact cocycle maps keep
/// `sum(dh)` fixed; removing its mean only discards rounding, which
/// otherwise leaks out of the reduced space after strong stretching.
pub(crate) fn reduce_in_place(tau: &mut TangentHV) {
    let mean = tau.sum_dh() / tau.n() as f64;
    tau.dh.iter_mut().for_each(|x| *x -= mean);
    project_in_place(tau);
}

/// Removes the flow component `(0, -1, ..., -1)` so that `sum(dv) = 0`.
pub fn project_transversal(tau: &TangentHV) -> Result<TangentHV> {
    let sum = tau.sum_dh();
    let scale = tau.dh.iter().map(|x| x * x).sum::<f64>().sqrt();
    if sum.abs() > TANGENCY_TOL * scale {
        return Err(Error::EnergyTangencyViolated { sum });
    }
    let mut out = tau.clone();
    project_in_place(&mut out);
    Ok(out)
}

/// `Q(dh, dv) = sum_i dh_i dv_i`.
pub fn qform(tau: &TangentHV) -> f64 {
    tau.dh.iter().zip(&tau.dv).map(|(h, v)| h * v).sum()
}

/// `omega(a, b) = sum_i (a.dh_i b.dv_i - b.dh_i a.dv_i)`.
pub fn symplectic_product(a: &TangentHV, b: &TangentHV) -> f64 {
    (0..a.n())
        .map(|i| a.dh[i] * b.dv[i] - b.dh[i] * a.dv[i])
        .sum()
}

/// Applies the collision `hit` to a symplectic vector. `post` is the state
/// right after the collision. No projection is performed.
pub(crate) fn collision_hv_in_place(
    tau: &mut TangentHV,
    hit: &Collision,
    post: &PhaseState,
    masses: &MassVector,
    mode: FloorDerivativeMode,
) {
    match hit.event.kind {
        EventKind::Pair(lower) => pair_hv_in_place(tau, masses, lower, hit.v_pre),
        EventKind::Floor => match mode {
            FloorDerivativeMode::Full => floor_hv_in_place(tau, masses[0], post.v[0]),
            FloorDerivativeMode::ReflectOnly => {
                let m = masses[0];
                let dq1 = tau.dh[0] / m - hit.v_pre[0] * tau.dv[0];
                let dv1 = -tau.dv[0];
                tau.dv[0] = dv1;
                tau.dh[0] = -m * dq1 + m * post.v[0] * dv1;
            }
        },
    }
}

pub(crate) fn collision_qv_in_place(
    tau: &mut TangentQV,
    hit: &Collision,
    post: &PhaseState,
    masses: &MassVector,
    mode: FloorDerivativeMode,
) {
    match hit.event.kind {
        EventKind::Pair(lower) => pair_qv_in_place(tau, masses, lower),
        EventKind::Floor => floor_qv_in_place(tau, post.v[0], mode),
    }
}

pub(crate) fn flight_qv_in_place(tau: &mut TangentQV, dt: f64) {
    flight_qv(tau, dt);
}

/// Output of [`propagate_frame`].
#[derive(Debug, Clone, PartialEq)]
pub struct FramePropagation {
    pub state: PhaseState,
    pub frame: Vec<TangentHV>,
    pub elapsed: f64,
    pub sequence: SymbolicSequence,
}

/// Co-evolves `frame` with the base trajectory through `n_events` collisions.
///
/// In `Full` mode every vector is projected back to `sum(dv) = 0` after each
/// collision. The reflect-only floor map does not preserve `sum(dh)`, so in
/// that mode vectors are left unprojected.
pub fn propagate_frame(
    state: &PhaseState,
    masses: &MassVector,
    frame: &[TangentHV],
    n_events: usize,
    mode: FloorDerivativeMode,
    cfg: &DynamicsConfig,
) -> Result<FramePropagation> {
    for tau in frame {
        check_dims(masses.n(), tau.n())?;
        if mode == FloorDerivativeMode::Full {
            let scale = tau.dh.iter().map(|x| x * x).sum::<f64>().sqrt();
            if tau.sum_dh().abs() > TANGENCY_TOL * scale {
                return Err(Error::EnergyTangencyViolated { sum: tau.sum_dh() });
            }
        }
    }
    let mut billiard = Billiard::new(state.clone(), masses.clone(), *cfg)?;
    let mut frame = frame.to_vec();
    let mut sequence = SymbolicSequence::default();
    for _ in 0..n_events {
        let hit = billiard.step()?;
        sequence.push(&hit.event);
        for tau in frame.iter_mut() {
            collision_hv_in_place(tau, &hit, billiard.state(), masses, mode);
            if mode == FloorDerivativeMode::Full {
                project_in_place(tau);
            }
        }
    }
    let elapsed = billiard.state().t - state.t;
    Ok(FramePropagation {
        state: billiard.into_state(),
        frame,
        elapsed,
        sequence,
    })
}

/// Output of [`flow_qv`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowQV {
    pub state: PhaseState,
    pub tangent: TangentQV,
    pub sequence: SymbolicSequence,
}

/// Fixed-time derivative of the flow: carries `state` and the ambient
/// vector `tau` forward by `duration`, through every collision on the way.
pub fn flow_qv(
    state: &PhaseState,
    masses: &MassVector,
    tau: &TangentQV,
    duration: f64,
    mode: FloorDerivativeMode,
    cfg: &DynamicsConfig,
) -> Result<FlowQV> {
    check_dims(masses.n(), tau.n())?;
    if !(duration >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative duration {duration}")));
    }
    let t_end = state.t + duration;
    let mut billiard = Billiard::new(state.clone(), masses.clone(), *cfg)?;
    let mut tangent = tau.clone();
    let mut sequence = SymbolicSequence::default();
    loop {
        let now = billiard.state();
        match next_event(now, cfg)? {
            Some(ev) if ev.time <= t_end => {
                let hit = billiard.step()?;
                sequence.push(&hit.event);
                flight_qv(&mut tangent, hit.dt);
                collision_qv_in_place(&mut tangent, &hit, billiard.state(), masses, mode);
            }
            _ => {
                let rest = t_end - now.t;
                let state = advance_free(now, rest, cfg)?;
                flight_qv(&mut tangent, rest);
                return Ok(FlowQV {
                    state,
                    tangent,
                    sequence,
                });
            }
        }
    }
}

/// Orthonormal basis (Euclidean in `(dh, dv)`) of the reduced space
/// `sum(dh) = sum(dv) = 0`, with `n - 1` vectors in `dh` followed by `n - 1`
/// in `dv`.
pub fn reduced_basis(n: usize) -> Vec<TangentHV> {
    let mut out = Vec::with_capacity(2 * n - 2);
    for part in 0..2 {
        for k in 1..n {
            // Helmert contrast: (1, ..., 1, -k, 0, ...) / sqrt(k (k+1)).
            let c = 1.0 / ((k * (k + 1)) as f64).sqrt();
            let mut e = vec![0.0; n];
            e[..k].iter_mut().for_each(|x| *x = c);
            e[k] = -(k as f64) * c;
            let mut tau = TangentHV::zeros(n);
            if part == 0 {
                tau.dh = e;
            } else {
                tau.dv = e;
            }
            out.push(tau);
        }
    }
    out
}
