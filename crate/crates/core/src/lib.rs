//! Event-driven simulation and numerical audits of elastic balls falling on a
//! half line under unit gravity.
//!
//! The crate covers the exact dynamics ([`dynamics`]), the linearized
//! cocycle in ambient and symplectic coordinates ([`tangent`]), the
//! quadratic-form cone audit ([`cone`]), Lyapunov spectra and periodic-orbit
//! stability ([`lyapunov`], [`orbit`]) and rank probes of the position map
//! restricted to fixed-configuration velocity perturbations
//! ([`transversality`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod cone;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod masses;
pub mod orbit;
pub mod output;
pub mod sampling;
pub mod state;
pub mod tangent;
pub mod transversality;

pub use dynamics::{
    advance_free, apply_collision, billiard_step, next_event, simulate, Billiard, Collision,
    DynamicsConfig, SimultaneityPolicy, Trajectory,
};
pub use error::{Error, Result};
pub use masses::{MassOrdering, MassVector};
pub use sampling::{derive_seed, sample_state, Locus};
pub use state::{total_energy, Event, EventKind, PhaseState, SymbolicSequence};
pub use tangent::{FloorDerivativeMode, TangentHV, TangentQV};
pub use cone::{qform_audit, ConeAudit, ConeRow};
pub use lyapunov::{lyapunov_batch, lyapunov_spectrum, LyapunovConfig, LyapunovResult};
pub use orbit::{find_periodic_orbits, stable_orbit_probe, OrbitSearch, PeriodicOrbit};
pub use transversality::{
    candle_basis, candle_jacobian, equal_mass_oracle, mass_scan, rank_report, rank_test, singular_rank_test,
    RankReport, ScanConfig, ScanTable, RankTestReport,
};
