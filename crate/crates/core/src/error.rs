use thiserror::Error;

/// Every failure the library can report. Stage labels are attached by the
/// planner through [`Error::Stage`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("waypoints {index} and {next} coincide", next = .index + 1)]
    DuplicateConsecutiveWaypoint { index: usize },
    #[error("too few waypoints: need {needed}, got {got}")]
    TooFewWaypoints { needed: usize, got: usize },
    #[error("parameter {value} outside [{lo}, {hi}]")]
    ParamOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("derivative order {order} exceeds supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("singular collocation matrix (condition estimate {condition:e})")]
    SingularCollocationMatrix { condition: f64 },
    #[error("adaptive quadrature hit depth limit {depth} near u = {at}")]
    QuadratureDepthExceeded { depth: usize, at: f64 },
    #[error("curve speed {speed:e} too small at u = {u}")]
    SingularParameterization { u: f64, speed: f64 },
    #[error("rank-deficient KKT system")]
    RankDeficientKkt,
    #[error("arc length {value} outside [0, {total}]")]
    ArcLengthOutOfRange { value: f64, total: f64 },
    #[error("not a rotation matrix (orthogonality error {orth_err:e}, det {det})")]
    NotARotation { orth_err: f64, det: f64 },
    #[error("rotation angle is pi: interpolation axis is not unique")]
    AntipodalAmbiguity,
    #[error("orientation {index} is at least 90 degrees (half-angle) from the first orientation")]
    HemisphereCrossing { index: usize },
    #[error("orientation parameters must be nondecreasing")]
    InfeasibleMonotonicity,
    #[error("{what}: iteration limit {iterations} reached")]
    SolverStall { what: &'static str, iterations: usize },
    #[error("non-positive segment duration {tau} at segment {segment}")]
    NonPositiveDuration { segment: usize, tau: f64 },
    #[error("inconsistent derivative specification: {0}")]
    InconsistentSpec(String),
    #[error("singular reduced system near segment {segment}")]
    SingularRuu { segment: usize },
    #[error("kinematic limit {name} must be positive, got {value}")]
    InfeasibleLimits { name: String, value: f64 },
    #[error("pose unreachable by limb {limb} (radicand {radicand:e})")]
    Unreachable { limb: usize, radicand: f64 },
    #[error("limb {limb} at branch singularity (radicand {radicand:e})")]
    BranchSingularity { limb: usize, radicand: f64 },
    #[error("forward kinematics did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("singular Jacobian (det {det:e})")]
    SingularJacobian { det: f64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("time {t} outside [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },
    #[error("streams differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("config {field}: {message}")]
    Config { field: String, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps the error with the planner stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Strips stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::DuplicateConsecutiveWaypoint { .. }
                | Error::TooFewWaypoints { .. }
                | Error::ParamOutOfRange { .. }
                | Error::OrderTooHigh { .. }
                | Error::ArcLengthOutOfRange { .. }
                | Error::NotARotation { .. }
                | Error::HemisphereCrossing { .. }
                | Error::InfeasibleMonotonicity
                | Error::NonPositiveDuration { .. }
                | Error::InconsistentSpec(_)
                | Error::InfeasibleLimits { .. }
                | Error::InvalidPath(_)
                | Error::TimeOutOfRange { .. }
                | Error::Unsupported(_)
                | Error::Unreachable { .. }
                | Error::Parse { .. }
                | Error::Config { .. }
                | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
