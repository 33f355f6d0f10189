use thiserror::Error;

/// Errors raised by the dynamics, cocycle and probe routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid masses: {0}")]
    InvalidMasses(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("two events within {gap:.3e} of each other at t = {time}")]
    NearSimultaneous { time: f64, gap: f64 },

    #[error("lowest ball resting on the floor with zero velocity")]
    DegenerateRest,

    #[error("no future collision exists")]
    NoEvent,

    #[error("free flight of {dt} overshoots an event ({detail})")]
    OrderingViolated { dt: f64, detail: String },

    #[error("collision {symbol} requested but contact residual is {residual:.3e}")]
    NotInContact { symbol: usize, residual: f64 },

    #[error("collision {symbol} requested but particles are not approaching")]
    NotApproaching { symbol: usize },

    #[error("more than {max_events} events within {window} time units (t = {time})")]
    ZenoGuardTripped {
        max_events: usize,
        window: f64,
        time: f64,
    },

    #[error("pair index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("outgoing floor velocity must be positive, got {0}")]
    NonPositiveFloorVelocity(f64),

    #[error("tangent vector leaves the energy shell: sum(dh) = {sum:.3e}")]
    EnergyTangencyViolated { sum: f64 },

    #[error("velocity vector too small to define a candle basis")]
    DegenerateVelocity,

    #[error("periodic orbit not found: {0}")]
    OrbitNotFound(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors that come from a numerical guard rather than bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::NearSimultaneous { .. }
                | Error::DegenerateRest
                | Error::NoEvent
                | Error::OrderingViolated { .. }
                | Error::NotInContact { .. }
                | Error::NotApproaching { .. }
                | Error::ZenoGuardTripped { .. }
                | Error::NonPositiveFloorVelocity(_)
                | Error::EnergyTangencyViolated { .. }
                | Error::DegenerateVelocity
                | Error::OrbitNotFound(_)
        )
    }

    /// Short stable identifier used in machine-readable diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidMasses(_) => "invalid_masses",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidState(_) => "invalid_state",
            Error::NearSimultaneous { .. } => "near_simultaneous",
            Error::DegenerateRest => "degenerate_rest",
            Error::NoEvent => "no_event",
            Error::OrderingViolated { .. } => "ordering_violated",
            Error::NotInContact { .. } => "not_in_contact",
            Error::NotApproaching { .. } => "not_approaching",
            Error::ZenoGuardTripped { .. } => "zeno_guard",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::NonPositiveFloorVelocity(_) => "nonpositive_floor_velocity",
            Error::EnergyTangencyViolated { .. } => "energy_tangency",
            Error::DegenerateVelocity => "degenerate_velocity",
            Error::OrbitNotFound(_) => "orbit_not_found",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
