//! Audit of the quadratic form `Q = sum dh_i dv_i` across collisions.
//!
//! At every collision a batch of fresh random reduced vectors is pushed
//! through the collision map. For nonincreasing masses the increment is
//! `alpha (dv_i - dv_{i+1})^2` at a pair and `2 dh_1^2 / (m_1 v_1+)` at the
//! floor, both nonnegative.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Billiard, DynamicsConfig};
use crate::error::{Error, Result};
use crate::masses::{MassOrdering, MassVector};
use crate::sampling::{derive_seed, rng_from_seed, sample_state, Locus};
use crate::state::EventKind;
use crate::tangent::{collision_hv_in_place, project_in_place, qform, FloorDerivativeMode, TangentHV};

/// One audited collision; the reported vector is the one with the smallest
/// increment among the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeRow {
    pub event_index: usize,
    pub time: f64,
    pub symbol: usize,
    pub q_before: f64,
    pub q_after: f64,
    pub delta_q: f64,
    /// `alpha_i` at a pair collision, the predicted increment at the floor.
    pub alpha_or_floor_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeAudit {
    pub rows: Vec<ConeRow>,
    pub collisions: usize,
    pub vectors_per_collision: usize,
    /// Smallest increment seen over all vectors.
    pub min_delta_q: f64,
    /// Largest mismatch between a floor increment and its formula, relative
    /// to `max(increment, |tau|^2)`.
    pub max_floor_rel_error: f64,
    /// Smallest strictly positive increment at a pair with distinct masses.
    pub min_strict_pair_margin: f64,
}

fn random_reduced<R: Rng>(rng: &mut R, n: usize) -> TangentHV {
    let mut tau = TangentHV {
        dh: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        dv: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
    };
    let mean = tau.sum_dh() / n as f64;
    tau.dh.iter_mut().for_each(|x| *x -= mean);
    project_in_place(&mut tau);
    tau
}

/// Runs `n_events` collisions from a seeded interior state and audits
/// `vectors` random reduced tangent vectors at each one.
pub fn qform_audit(
    masses: &MassVector,
    seed: u64,
    n_events: usize,
    vectors: usize,
    cfg: &DynamicsConfig,
) -> Result<ConeAudit> {
    if !masses.mode().satisfies(MassOrdering::Nonincreasing) {
        return Err(Error::InvalidMasses(format!(
            "cone audit needs nonincreasing masses, got {:?}",
            masses.as_slice()
        )));
    }
    if vectors == 0 {
        return Err(Error::InvalidArgument("at least one audit vector".into()));
    }
    let n = masses.n();
    let state = sample_state(masses, seed, Locus::Interior);
    let mut rng = rng_from_seed(derive_seed(seed, u64::MAX));
    let mut billiard = Billiard::new(state, masses.clone(), *cfg)?;
    let mut rows = Vec::with_capacity(n_events);
    let mut min_delta_q = f64::INFINITY;
    let mut max_floor_rel_error: f64 = 0.0;
    let mut min_strict_pair_margin = f64::INFINITY;

    for event_index in 0..n_events {
        let hit = billiard.step()?;
        let post = billiard.state();
        let mut worst: Option<ConeRow> = None;
        for _ in 0..vectors {
            let mut tau = random_reduced(&mut rng, n);
            let before = qform(&tau);
            let dh1 = tau.dh[0];
            let scale = tau.norm().powi(2);
            collision_hv_in_place(&mut tau, &hit, post, masses, FloorDerivativeMode::Full);
            project_in_place(&mut tau);
            let after = qform(&tau);
            let delta = after - before;
            let reference = match hit.event.kind {
                EventKind::Pair(lower) => {
                    let a = masses.alpha(lower, hit.v_pre[0], hit.v_pre[1]);
                    if masses[lower] > masses[lower + 1] && delta > 0.0 {
                        min_strict_pair_margin = min_strict_pair_margin.min(delta);
                    }
                    a
                }
                EventKind::Floor => {
                    let predicted = 2.0 * dh1 * dh1 / (masses[0] * post.v[0]);
                    // Relative to the larger of the increment and |tau|^2,
                    // the magnitude of the terms cancelling in delta.
                    let rel = (delta - predicted).abs() / predicted.max(scale);
                    max_floor_rel_error = max_floor_rel_error.max(rel);
                    predicted
                }
            };
            min_delta_q = min_delta_q.min(delta);
            if worst.as_ref().is_none_or(|w| delta < w.delta_q) {
                worst = Some(ConeRow {
                    event_index,
                    time: hit.event.time,
                    symbol: hit.event.kind.symbol(),
                    q_before: before,
                    q_after: after,
                    delta_q: delta,
                    alpha_or_floor_increment: reference,
                });
            }
        }
        rows.extend(worst);
    }
    Ok(ConeAudit {
        rows,
        collisions: n_events,
        vectors_per_collision: vectors,
        min_delta_q,
        max_floor_rel_error,
        min_strict_pair_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_increasing_masses() {
        let m = MassVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            qform_audit(&m, 1, 10, 2, &Default::default()),
            Err(Error::InvalidMasses(_))
        ));
    }

    #[test]
    fn increments_are_nonnegative() {
        let m = MassVector::new(vec![3.0, 2.0, 1.0]).unwrap().normalized();
        let audit = qform_audit(&m, 3, 2000, 5, &Default::default()).unwrap();
        assert_eq!(audit.rows.len(), 2000);
        assert!(audit.min_delta_q >= -1e-12, "{}", audit.min_delta_q);
        assert!(audit.max_floor_rel_error <= 1e-10);
        assert!(audit.rows.iter().any(|r| r.symbol == 0));
        assert!(audit.rows.iter().any(|r| r.symbol != 0));
    }

    #[test]
    fn equal_masses_pair_increment_vanishes() {
        let m = MassVector::equal(3, 1.0).unwrap();
        let audit = qform_audit(&m, 4, 500, 3, &Default::default()).unwrap();
        for r in audit.rows.iter().filter(|r| r.symbol != 0) {
            assert_eq!(r.alpha_or_floor_increment, 0.0);
            assert!(r.delta_q.abs() < 1e-12);
        }
    }
}
