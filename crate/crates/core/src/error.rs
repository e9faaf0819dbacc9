use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModelParams(String),
    #[error("convention mismatch: expected {expected}, found {found}")]
    ConventionMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("non-finite coefficient at t = {t}")]
    NonFiniteCoefficient { t: f64 },
    #[error("singular coefficient at t = {t}")]
    SingularCoefficient { t: f64 },
    #[error("tolerance not met in {what}: {detail}")]
    ToleranceNotMet { what: &'static str, detail: String },
    #[error("caustic at t = {t} (bracket {lo}..{hi})")]
    CausticEncountered { t: f64, lo: f64, hi: f64 },
    #[error("no closed form for {0}")]
    NoClosedForm(String),
    #[error("state is not normalizable (Im Lambda = {im_lambda})")]
    NonNormalizable { im_lambda: f64 },
    #[error("degenerate width: |gamma + Lambda| = {modulus}")]
    DegenerateWidth { modulus: f64 },
    #[error("quadrature under-resolved: {0}")]
    UnderResolved(String),
    #[error("boundary leak at t = {t}: edge mass fraction {fraction:e}")]
    BoundaryLeak { t: f64, fraction: f64 },
    #[error("negative variance {variance:e}")]
    NegativeVariance { variance: f64 },
    #[error("kappa collapsed below guard at t = {t}")]
    KappaCollapse { t: f64 },
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("quadratic form not positive at t = {t}")]
    NonPositiveForm { t: f64 },
    #[error("auxiliary residual {residual:e} exceeds {limit:e}")]
    AuxiliaryResidualTooLarge { residual: f64, limit: f64 },
    #[error("mu vanishes at t = {t}")]
    MuVanishes { t: f64 },
    #[error("residual {residual:e} exceeds {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },
    #[error("C0 must be positive, got {0}")]
    InvalidC0(f64),
    #[error("invalid moments: {0}")]
    InvalidMoments(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case identifier used in machine-readable error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidModelParams(_) => "invalid_model_params",
            Error::ConventionMismatch { .. } => "convention_mismatch",
            Error::NonFiniteCoefficient { .. } => "non_finite_coefficient",
            Error::SingularCoefficient { .. } => "singular_coefficient",
            Error::ToleranceNotMet { .. } => "tolerance_not_met",
            Error::CausticEncountered { .. } => "caustic_encountered",
            Error::NoClosedForm(_) => "no_closed_form",
            Error::NonNormalizable { .. } => "non_normalizable",
            Error::DegenerateWidth { .. } => "degenerate_width",
            Error::UnderResolved(_) => "under_resolved",
            Error::BoundaryLeak { .. } => "boundary_leak",
            Error::NegativeVariance { .. } => "negative_variance",
            Error::KappaCollapse { .. } => "kappa_collapse",
            Error::ConstraintViolated(_) => "constraint_violated",
            Error::NonPositiveForm { .. } => "non_positive_form",
            Error::AuxiliaryResidualTooLarge { .. } => "auxiliary_residual_too_large",
            Error::MuVanishes { .. } => "mu_vanishes",
            Error::ResidualTooLarge { .. } => "residual_too_large",
            Error::InvalidC0(_) => "invalid_c0",
            Error::InvalidMoments(_) => "invalid_moments",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Module that owns the error kind.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidModelParams(_)
            | Error::ConventionMismatch { .. }
            | Error::NonFiniteCoefficient { .. } => "coefficients",
            Error::SingularCoefficient { .. }
            | Error::CausticEncountered { .. }
            | Error::NoClosedForm(_) => "characteristic",
            Error::NonNormalizable { .. }
            | Error::DegenerateWidth { .. }
            | Error::UnderResolved(_) => "propagator",
            Error::KappaCollapse { .. }
            | Error::ConstraintViolated(_)
            | Error::NonPositiveForm { .. }
            | Error::AuxiliaryResidualTooLarge { .. }
            | Error::MuVanishes { .. }
            | Error::ResidualTooLarge { .. }
            | Error::InvalidC0(_) => "invariants",
            Error::InvalidMoments(_) => "dynamics",
            Error::BoundaryLeak { .. } | Error::NegativeVariance { .. } => "gridsim",
            Error::ToleranceNotMet { .. } => "ode",
            Error::InvalidInput(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => "cli",
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModelParams(_)
                | Error::ConventionMismatch { .. }
                | Error::InvalidInput(_)
                | Error::InvalidC0(_)
                | Error::NonNormalizable { .. }
                | Error::NoClosedForm(_)
        )
    }
}
