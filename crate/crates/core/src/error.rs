use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (defect {defect:e})")]
    NotSkew { defect: f64 },
    #[error("rotation axis is not a unit vector (norm {norm})")]
    NonUnitAxis { norm: f64 },
    #[error("axis is not fixed by the rotation (defect {defect:e})")]
    AxisMismatch { defect: f64 },
    #[error("matrix is not a proper rotation (orthonormality defect {orth:e}, det {det})")]
    NotRotation { orth: f64, det: f64 },
    #[error("matrix has non-positive determinant {det}")]
    Singular { det: f64 },
    #[error("chart point ({x1}, {x2}) lies outside the surface domain")]
    OutsideDomain { x1: f64, x2: f64 },
    #[error("surface is not regular at ({x1}, {x2})")]
    Degenerate { x1: f64, x2: f64 },
    #[error("unknown surface kind `{0}`")]
    UnknownKind(String),
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("grid needs at least {min} nodes per direction, got {n}")]
    GridTooSmall { n: usize, min: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("grid bounds are not contained in the surface domain")]
    DomainMismatch,
    #[error("invalid boundary selection: {0}")]
    InvalidMask(String),
    #[error("incompatible differential: residual {residual_linf:e} exceeds tolerance {tolerance:e}")]
    Incompatible { residual_linf: f64, tolerance: f64 },
    #[error("surfaces are not isometric (first fundamental form defect {defect:e})")]
    NonIsometric { defect: f64 },
    #[error("surface normals differ (defect {defect:e})")]
    NormalMismatch { defect: f64 },
    #[error("moving frame is degenerate at node {node}")]
    FrameDegenerate { node: usize },
    #[error("invalid material parameters: {0}")]
    InvalidParams(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("malformed data: {0}")]
    Format(String),
}
