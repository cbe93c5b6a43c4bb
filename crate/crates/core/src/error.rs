use thiserror::Error;

use crate::kernels::KernelKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel exponent must be positive and finite, got {0}")]
    InvalidExponent(f64),
    #[error("{kind:?} weight evaluated outside its domain at s = {s}")]
    Domain { kind: KernelKind, s: f64 },
    #[error("primitive requires s > 0, got {0}")]
    PrimitiveDomain(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParticleError {
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("particles {i} and {j} from distinct classes overlap (distance {distance:e}) at t = {t}")]
    SingularOverlap {
        i: usize,
        j: usize,
        distance: f64,
        t: f64,
    },
    #[error("step size {h:e} fell below the floor at t = {t} (min inter-class distance {d_min:e})")]
    StepUnderflow { t: f64, h: f64, d_min: f64 },
    #[error("step budget of {0} steps exhausted")]
    TooManySteps(usize),
    #[error("pair ({i}, {j}) is not stuck: |dx| = {dx:e}, |dv| = {dv:e}")]
    PairNotStuck { i: usize, j: usize, dx: f64, dv: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("bound violated at sample {index} (t = {t}): observed {observed:e} > bound {bound:e}")]
    ReportViolation {
        index: usize,
        t: f64,
        observed: f64,
        bound: f64,
    },
    #[error("asymptotic collision suspected: late-window minimum distance {0:e}")]
    AsymptoticCollisionSuspected(f64),
    #[error("non-positive value {value} at t = {t} in decay series")]
    NonPositiveValue { t: f64, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanFieldError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("linear program failed: {0}")]
    LpFailure(String),
    #[error(transparent)]
    Particle(#[from] ParticleError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TorusError {
    #[error("invalid periodic field: {0}")]
    InvalidField(String),
    #[error("time step {dt:e} violates CFL bound {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("density reached {min_rho:e} at t = {t}")]
    DensityFloorBreach { t: f64, min_rho: f64 },
    #[error("mean of e + Lambda^gamma rho is {0:e}; velocity recovery not solvable")]
    Solvability(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineError {
    #[error("invalid grid or parameters: {0}")]
    Invalid(String),
    #[error("Newton iteration diverged at t = {t} (residual {residual:e})")]
    NewtonDivergence { t: f64, residual: f64 },
    #[error("negative density {min_rho:e} at t = {t}")]
    NegativeDensity { t: f64, min_rho: f64 },
    #[error("fields carry different mass (difference {0:e})")]
    MassMismatch(f64),
}
