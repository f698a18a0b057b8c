use thiserror::Error;

/// Errors raised by the operator algebra, dressing, flows, Darboux and
/// Hamiltonian routines. Variant names are reported verbatim by the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmthError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("lattice mismatch between operands")]
    LatticeMismatch,

    #[error("summation kernel obstruction: lattice mean {mean:.3e} on coset {coset}")]
    SummationObstruction { coset: usize, mean: f64 },

    #[error("barred dressing undefined: v singular at site {site}")]
    BarredDressingUndefined { site: usize },

    #[error("singular leading coefficient at site {site}")]
    SingularLeading { site: usize },

    #[error("truncation order {have} too small, need at least {required}")]
    InsufficientOrder { required: usize, have: usize },

    #[error("flow leaves Lax manifold: leakage {leakage:.3e} on power {power}")]
    LaxManifoldLeak { power: i32, leakage: f64 },

    #[error("component index {k} outside 1..={n}")]
    ComponentOutOfRange { k: usize, n: usize },

    #[error("negative band powers present in adjoint argument (lowest power {lo})")]
    NegativePowers { lo: i32 },

    #[error("Darboux singularity at sites {sites:?}")]
    DarbouxSingularity { sites: Vec<usize> },

    #[error("degenerate spectral data at site {site} (condition {condition:.3e})")]
    DegenerateSpectralData { site: usize, condition: f64 },

    #[error("invalid wave data: {0}")]
    InvalidWaveData(String),

    #[error("numerical abort at step {step}: {reason}")]
    NumericalAbort { step: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, EmthError>;

impl EmthError {
    /// Variant name, as printed by front ends.
    pub fn name(&self) -> &'static str {
        match self {
            EmthError::InvalidLattice(_) => "InvalidLattice",
            EmthError::DimensionMismatch { .. } => "DimensionMismatch",
            EmthError::LatticeMismatch => "LatticeMismatch",
            EmthError::SummationObstruction { .. } => "SummationObstruction",
            EmthError::BarredDressingUndefined { .. } => "BarredDressingUndefined",
            EmthError::SingularLeading { .. } => "SingularLeading",
            EmthError::InsufficientOrder { .. } => "InsufficientOrder",
            EmthError::LaxManifoldLeak { .. } => "LaxManifoldLeak",
            EmthError::ComponentOutOfRange { .. } => "ComponentOutOfRange",
            EmthError::NegativePowers { .. } => "NegativePowers",
            EmthError::DarbouxSingularity { .. } => "DarbouxSingularity",
            EmthError::DegenerateSpectralData { .. } => "DegenerateSpectralData",
            EmthError::InvalidWaveData(_) => "InvalidWaveData",
            EmthError::NumericalAbort { .. } => "NumericalAbort",
            EmthError::InvalidInput(_) => "InvalidInput",
        }
    }

    /// Errors caused by the request itself rather than by the numerics.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            EmthError::InvalidLattice(_)
                | EmthError::DimensionMismatch { .. }
                | EmthError::LatticeMismatch
                | EmthError::InsufficientOrder { .. }
                | EmthError::ComponentOutOfRange { .. }
                | EmthError::NegativePowers { .. }
                | EmthError::InvalidWaveData(_)
                | EmthError::InvalidInput(_)
        )
    }
}
