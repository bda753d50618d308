use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("register label `{0}` appears more than once")]
    LabelCollision(String),
    #[error("unknown register label `{0}`")]
    UnknownLabel(String),
    #[error("register `{label}` has dimension {expected}, found {found}")]
    RegisterDim {
        label: String,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("total dimension {dim} exceeds the cap of {cap} (raise it with ONESHOT_QCAP_DIM_CAP)")]
    DimensionCap { dim: usize, cap: usize },
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("trace {found} violates the requirement {expected}")]
    Trace { found: f64, expected: &'static str },
    #[error("squared norm {0} is not 1")]
    NotNormalized(f64),
    #[error("invalid cut: {0}")]
    InvalidCut(String),
    #[error("support condition violated: weight {0:e} of the first argument lies outside the support of the second")]
    Support(f64),
    #[error("parameter `{name}` = {value} is outside {range}")]
    Parameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("not a channel: {0}")]
    InvalidChannel(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("not a projector (idempotence residual {0:e})")]
    NotProjector(f64),
    #[error("product condition violated: {0}")]
    ProductCondition(String),
    #[error("register `{label}` is not classical (off-diagonal weight {deviation:e})")]
    NotClassical { label: String, deviation: f64 },
    #[error("decoder completion is not positive (min eigenvalue {0:e})")]
    Completion(f64),
    #[error("{count} candidate strings exceed the enumeration cap {cap}")]
    EnumerationCap { count: f64, cap: usize },
    #[error("state is not pure (largest eigenvalue {0})")]
    NotPure(f64),
    #[error("{0}")]
    Unsupported(String),
    #[error("{path}: {message}")]
    Spec { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64, allow_one: bool) -> Result<()> {
    let ok = value.is_finite() && value >= 0.0 && (value < 1.0 || (allow_one && value <= 1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter {
            name,
            value,
            range: if allow_one { "[0, 1]" } else { "[0, 1)" },
        })
    }
}
