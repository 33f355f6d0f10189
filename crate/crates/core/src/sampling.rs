//! Seeded sampling of phase points and mass vectors.
//!
//! Raw draws: `q_1 ~ U(0,1)`, gaps `q_{i+1} - q_i ~ U(0,1)`, velocities
//! `v_i ~ N(0,1)`. Contacts requested by the locus zero the corresponding
//! height or gap, and velocities are redrawn until every contact is
//! outgoing. The draw is then moved onto the `H = 1` shell with the exact
//! scaling `(q, v) -> (q/H, v/sqrt(H))`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::masses::MassVector;
use crate::state::{energy_unchecked, PhaseState};

/// Where in phase space a sample is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Locus {
    /// No contact.
    Interior,
    /// Exactly one contact, on the floor or between a pair (post-collision).
    Boundary,
    /// Two independent simultaneous contacts.
    SingularDouble,
}

impl Locus {
    pub fn name(self) -> &'static str {
        match self {
            Locus::Interior => "interior",
            Locus::Boundary => "boundary",
            Locus::SingularDouble => "singular-double",
        }
    }
}

impl std::str::FromStr for Locus {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "interior" => Ok(Locus::Interior),
            "boundary" => Ok(Locus::Boundary),
            "singular-double" | "singular" => Ok(Locus::SingularDouble),
            other => Err(crate::error::Error::InvalidArgument(format!("unknown locus {other:?}"))),
        }
    }
}

const MAX_ATTEMPTS: usize = 10_000;
/// Minimum separation speed at a sampled contact.
const MIN_SEPARATION: f64 = 1e-9;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stateless seed mixing: SplitMix64 finalizer of `master + (index + 1) * golden`.
///
/// The finalizer is a bijection of `u64` and the pre-image is injective in
/// `index`, so distinct trial indices never share a seed.
pub fn derive_seed(master_seed: u64, trial_index: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = master_seed.wrapping_add(trial_index.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A sampled state together with the contacts it was placed on (symbols).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledState {
    pub state: PhaseState,
    pub contacts: Vec<usize>,
}

fn outgoing(v: &[f64], contacts: &[usize]) -> bool {
    contacts.iter().all(|&c| {
        if c == 0 {
            v[0] > MIN_SEPARATION
        } else {
            v[c] - v[c - 1] > MIN_SEPARATION
        }
    })
}

pub fn sample_state(masses: &MassVector, seed: u64, locus: Locus) -> PhaseState {
    sample_state_with_contacts(masses, seed, locus).state
}

pub fn sample_state_with_contacts(masses: &MassVector, seed: u64, locus: Locus) -> SampledState {
    let mut rng = rng_from_seed(seed);
    let n = masses.n();
    let contacts: Vec<usize> = match locus {
        Locus::Interior => Vec::new(),
        Locus::Boundary => vec![rng.random_range(0..n)],
        Locus::SingularDouble => {
            let mut c = sample(&mut rng, n, 2).into_vec();
            c.sort_unstable();
            c
        }
    };

    // Heights: entry 0 is q_1, entry i the gap below ball i.
    let mut spacing: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    for &c in &contacts {
        spacing[c] = 0.0;
    }
    let q: Vec<f64> = spacing
        .iter()
        .scan(0.0, |acc, g| {
            *acc += g;
            Some(*acc)
        })
        .collect();

    let mut v: Vec<f64> = vec![0.0; n];
    let mut found = false;
    for _ in 0..MAX_ATTEMPTS {
        for x in v.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        if outgoing(&v, &contacts) {
            found = true;
            break;
        }
    }
    if !found {
        // Ascending positive velocities make every contact outgoing.
        v = (0..n).map(|i| (i + 1) as f64).collect();
    }

    let h = energy_unchecked(&q, &v, masses.as_slice());
    let s = 1.0 / h;
    let r = s.sqrt();
    let mut q: Vec<f64> = q.iter().map(|x| x * s).collect();
    let v: Vec<f64> = v.iter().map(|x| x * r).collect();
    // Scaling cannot break equalities, but keep contacts bit-exact anyway.
    for &c in &contacts {
        if c == 0 {
            q[0] = 0.0;
        } else {
            q[c] = q[c - 1];
        }
    }
    SampledState {
        state: PhaseState { t: 0.0, q, v },
        contacts,
    }
}

/// Strictly decreasing masses drawn uniformly from the unit simplex, sorted,
/// with adjacent gaps of at least `min_gap` (rejection).
pub fn sample_decreasing_masses<R: Rng>(n: usize, min_gap: f64, rng: &mut R) -> MassVector {
    loop {
        let mut m: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = m.iter().sum();
        m.iter_mut().for_each(|x| *x /= total);
        m.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if m.windows(2).all(|w| w[0] - w[1] >= min_gap) && m[n - 1] > 0.0 {
            return MassVector::new(m).expect("positive sorted masses");
        }
    }
}
