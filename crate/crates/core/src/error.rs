use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate lattice: |det| = {0:e} Å³")]
    DegenerateLattice(f64),
    #[error("invalid crystal: {0}")]
    InvalidCrystal(String),
    #[error("unknown element: {0}")]
    UnknownElement(String),
    #[error("invalid cutoffs: {0}")]
    InvalidCutoffs(String),
    #[error("no atom has a neighbor within the edge cutoff of {0} Å")]
    EmptyGraph(f64),
    #[error("angle requested for a zero-length vector")]
    ZeroVector,
    #[error("distance {distance} Å outside (0, {cutoff}]")]
    OutOfRange { distance: f64, cutoff: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward already ran on this graph")]
    GraphConsumed,
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged in epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("crystal generation failed after {0} attempts")]
    GenerationFailed(usize),
}

impl Error {
    /// Errors caused by bad input rather than a broken internal invariant.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::ShapeMismatch(_) | Error::GraphConsumed | Error::NonFinite(_))
    }
}
