use alloc::boxed::Box;
use core::fmt;

/// Errors raised by the numerical core.
///
/// Admissibility failures name the violated condition in their message so a
/// caller can surface it verbatim.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidDimension(usize),
    GridTooSmall(usize),
    NonpositiveLength(f64),
    NonpositiveEigenvalue(f64),
    SizeMismatch { expected: usize, found: usize },
    NonnegativityViolated { a: f64 },
    DampingThreshold { a: f64, b: f64, lambda_1: f64 },
    ExponentRange { p: f64, n: usize },
    NontrivialityViolated,
    NonpositiveAmplitude(f64),
    InvalidProfile(&'static str),
    NonpositiveY(f64),
    InvalidTimeStep(f64),
    StepControl(&'static str),
    BlowupOverflow { t: f64 },
    StabilityBound { dt: f64, suggested: f64 },
    InsufficientCrossings(usize),
    InsufficientSamples(usize),
    DegenerateTrajectory { t: f64 },
    InsufficientRows(usize),
    InadmissibleExponent { q: f64, dim: usize },
    SweepRun { rho: f64, source: Box<Error> },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension(d) => {
                write!(f, "invalid dimension {d}: only dim = 1 or dim = 2 is supported")
            }
            Error::GridTooSmall(n) => write!(f, "grid too small: n_grid = {n}, require n_grid >= 8"),
            Error::NonpositiveLength(l) => write!(f, "domain length must be positive, got {l}"),
            Error::NonpositiveEigenvalue(l) => {
                write!(f, "first Dirichlet eigenvalue must be positive, got lambda1 = {l}")
            }
            Error::SizeMismatch { expected, found } => {
                write!(f, "size mismatch: expected {expected} values, found {found}")
            }
            Error::NonnegativityViolated { a } => {
                write!(f, "strong damping must be nonnegative: a = {a} < 0 (require a >= 0)")
            }
            Error::DampingThreshold { a, b, lambda_1 } => write!(
                f,
                "damping threshold violated: b <= -a*lambda1 (b = {b}, -a*lambda1 = {}); require b > -a*lambda1",
                -a * lambda_1
            ),
            Error::ExponentRange { p, n } => {
                if *n <= 2 {
                    write!(f, "exponent out of range: p = {p}, require 2 < p < inf for n = {n}")
                } else {
                    let cap = (2.0 * *n as f64 - 2.0) / (*n as f64 - 2.0);
                    write!(
                        f,
                        "exponent out of range: p = {p}, require 2 < p <= (2n-2)/(n-2) = {cap} for n = {n}"
                    )
                }
            }
            Error::NontrivialityViolated => write!(
                f,
                "profiles are trivial: ||grad phi||_2^2 + ||h||_2^2 must be > 0"
            ),
            Error::NonpositiveAmplitude(rho) => write!(f, "amplitude must satisfy rho > 0, got {rho}"),
            Error::InvalidProfile(msg) => write!(f, "invalid profile: {msg}"),
            Error::NonpositiveY(y) => write!(f, "phase-space norm must be positive, got Y = {y}"),
            Error::InvalidTimeStep(dt) => write!(f, "time step must be positive and finite, got {dt}"),
            Error::StepControl(msg) => write!(f, "invalid step control: {msg}"),
            Error::BlowupOverflow { t } => write!(f, "non-finite state at t = {t}"),
            Error::StabilityBound { dt, suggested } => write!(
                f,
                "explicit stability bound violated: dt = {dt}, use dt <= {suggested}"
            ),
            Error::InsufficientCrossings(n) => {
                write!(f, "need at least 3 threshold crossings, got {n}")
            }
            Error::InsufficientSamples(n) => write!(f, "need at least 3 samples, got {n}"),
            Error::DegenerateTrajectory { t } => {
                write!(f, "degenerate trajectory: Y vanishes at t = {t}")
            }
            Error::InsufficientRows(n) => {
                write!(f, "need at least 3 blow-up rows to fit a scaling law, got {n}")
            }
            Error::InadmissibleExponent { q, dim } => write!(
                f,
                "embedding exponent q = {q} is not admissible in dimension {dim}"
            ),
            Error::SweepRun { rho, source } => write!(f, "sweep run at rho = {rho} failed: {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::SweepRun { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
