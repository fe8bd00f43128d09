use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular coupling matrix (|det|/norm^n = {det_ratio:.3e}, cond = {condition:.3e})")]
    SingularCoupling { det_ratio: f64, condition: f64 },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("empty design: no samples left after deadband exclusion")]
    EmptyDesign,

    #[error("design has fewer rows ({rows}) than parameters ({params})")]
    Underdetermined { rows: usize, params: usize },

    #[error("rank-deficient design; dependent columns: {}", dependent.join(", "))]
    RankDeficient { dependent: Vec<String> },

    #[error("infeasible or degenerate constraint: {0}")]
    InfeasibleConstraint(String),

    #[error("phase-1 data must have zero PWM; {count} samples are driven (first at t = {first_time})")]
    NonZeroPwm { count: usize, first_time: f64 },

    #[error("insufficient velocity sign coverage: {0}")]
    SignCoverage(String),

    #[error(
        "blocked-motor violation on {rejected}/{total} samples (limit {limit:.1}%), spans: {}",
        format_spans(spans)
    )]
    BlockedMotorViolation {
        rejected: usize,
        total: usize,
        limit: f64,
        spans: Vec<(f64, f64)>,
    },

    #[error("invalid excitation profile: {0}")]
    InvalidProfile(String),

    #[error("degenerate integration: {0}")]
    DegenerateIntegration(String),

    #[error("invalid dataset: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("toml parse: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml write: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

fn format_spans(spans: &[(f64, f64)]) -> String {
    spans
        .iter()
        .map(|(a, b)| format!("[{a}, {b}]"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Error {
    /// Stable machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } => "dimension",
            Error::SingularCoupling { .. } => "singular-coupling-matrix",
            Error::EmptyDesign | Error::Underdetermined { .. } => "empty-design",
            Error::RankDeficient { .. } => "rank-deficient",
            Error::InfeasibleConstraint(_) => "infeasible-constraint",
            Error::NonZeroPwm { .. } => "nonzero-pwm",
            Error::SignCoverage(_) => "sign-coverage",
            Error::BlockedMotorViolation { .. } => "blocked-motor-violation",
            Error::InvalidProfile(_) | Error::DegenerateIntegration(_) => "simulation",
            Error::Data(_) | Error::Csv(_) => "data",
            Error::Config(_) | Error::TomlDe(_) | Error::TomlSer(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code associated with the category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "io" => 2,
            "config" => 3,
            "data" => 4,
            "singular-coupling-matrix" => 5,
            "rank-deficient" | "empty-design" | "infeasible-constraint" => 6,
            "nonzero-pwm" | "sign-coverage" | "blocked-motor-violation" => 7,
            "simulation" => 8,
            _ => 1,
        }
    }
}
