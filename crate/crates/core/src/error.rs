use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalues span [{min:e}, {max:e}])")]
    NotPsd { min: f64, max: f64 },
    #[error("near-singular operator: relative spectral ratio {ratio:e} at or below floor {floor:e}{}",
        .last_good_t.map(|t| format!(" (last good time {t})")).unwrap_or_default())]
    NearSingular {
        ratio: f64,
        floor: f64,
        last_good_t: Option<f64>,
    },
    #[error("time {t} outside profile domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("power series requires constant Hamiltonian and field profiles")]
    RequiresConstantCoefficients,
    #[error(
        "series truncation dominates: last term norm {last_term:e} exceeds 1e-10 * |U| = {bound:e}"
    )]
    TruncationDominates { last_term: f64, bound: f64 },
    #[error("basis columns are not orthonormal (Gram defect {0:e})")]
    NotOrthonormal(f64),
    #[error("operator rank {found} differs from expected rank {expected}")]
    RankDeficient { expected: usize, found: usize },
    #[error("gauge matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitianGauge(f64),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error(
        "nu = {nu} does not strictly dominate the largest Hamiltonian eigenvalue {max_eigenvalue}"
    )]
    NuDoesNotDominate { nu: f64, max_eigenvalue: f64 },
    #[error("Hamiltonian is not diagonal (off-diagonal mass {0:e})")]
    NotDiagonal(f64),
    #[error("operator maps the coherent state to zero")]
    ZeroImage,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Attaches the last successfully integrated time to a `NearSingular` error.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            Error::NearSingular { ratio, floor, .. } => Error::NearSingular {
                ratio,
                floor,
                last_good_t: Some(t),
            },
            other => other,
        }
    }
}
