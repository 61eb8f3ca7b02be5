use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("sensor {sensor} at {distance:.3} m from its collection point is outside ground coverage")]
    CoverageViolation { sensor: usize, distance: f64 },

    #[error("collection point {cp} at {distance:.3} m from the base station lies beyond the outermost ring ({outer:.3} m)")]
    InfeasibleTopology { cp: usize, distance: f64, outer: f64 },

    #[error("no feasible waypoint: {0}")]
    InfeasibleWaypoint(String),

    #[error("scenario validation failed: {0}")]
    Validation(String),

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that mean the configured scenario cannot be served at all.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_)
                | Error::InfeasibleTopology { .. }
                | Error::InfeasibleWaypoint(_)
                | Error::CoverageViolation { .. }
        )
    }
}
