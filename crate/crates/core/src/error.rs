use crate::recon::ConvergenceTrace;
use crate::volume::ScalarVolume;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample at linear index {index}")]
    NonFinite { index: usize },

    #[error("data length {got} does not match grid voxel count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("symbol vanishes at frequency index {index} and no zero-frequency override applies")]
    SingularSymbol { index: usize },

    #[error("imaginary residue {residue:e} exceeds bound {bound:e}; symbol is not real and even")]
    ImaginaryResidue { residue: f64, bound: f64 },

    #[error("filter bank violates the unitary extension principle (deviation {deviation:e})")]
    NotTightFrame { deviation: f64 },

    #[error("missing frame band (level {level}, band {band:?})")]
    MissingBand { level: usize, band: [u8; 3] },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("phase {phase:.4} rad at echo {echo} reaches pi; unwrapping is not supported")]
    PhaseWrapRisk { echo: usize, phase: f64 },

    #[error("region of interest has no interior voxel")]
    NoInterior,

    #[error("region of interest is empty")]
    EmptyRoi,

    #[error("conjugate gradient stopped after {iterations} iterations at relative residual {residual:e}")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        last: Box<ScalarVolume>,
    },

    #[error("split Bregman iterate became non-finite at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<ConvergenceTrace>,
    },

    #[error("SNR weight policy `estimated` needs an estimated weight volume")]
    MissingEstimate,

    #[error("reference has zero norm over the region of interest")]
    ZeroNormReference,

    #[error("reference has zero dynamic range over the region of interest")]
    DegenerateRange,
}
