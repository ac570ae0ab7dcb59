use thiserror::Error;

use crate::jets::JetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("point {0:?} lies outside the chart domain")]
    OutsideDomain(Vec<f64>),
    #[error("singular parametrization: jacobian rank {rank} < {dim}")]
    SingularPoint { rank: usize, dim: usize },
    #[error("rank deficiency: {0}")]
    RankDeficient(String),
    #[error("marginal rank decision: {0}")]
    Marginal(String),
    #[error("first normal space has dimension {0}, expected 2")]
    NormalSpaceDim(usize),
    #[error("not parabolic: {0}")]
    NotParabolic(String),
    #[error("frame degenerate: {0}")]
    FrameDegenerate(String),
    #[error("unstable frame: {0}")]
    UnstableFrame(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("theta degenerate: {0}")]
    ThetaDegenerate(String),
    #[error("integrability violated: {0}")]
    Integrability(String),
    #[error("grids incompatible: {0}")]
    GridMismatch(String),
}

pub type GeomResult<T> = Result<T, GeomError>;
