//! Drilling rotations of Cosserat shells: rotation algebra, surface
//! geometry, grid calculus, compatibility, drill analysis and a discrete
//! shell energy.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common `f64` instantiation.

pub mod compat;
pub mod drill;
pub mod energy;
pub mod error;
pub mod expr;
pub mod grid;
pub mod rotalg;
pub mod scalar;
pub mod surface;

pub use compat::{
    compat_tolerance, curl_residual, pair_rotation_extract, reconstruct_potential, CompatReport,
};
pub use drill::{
    associate_verify, drill_relax, drill_residual, obstruction_report, rigidity_certificate,
    Classification, DrillDiagnostics, DrillField, ResidualMode,
};
pub use energy::{
    fd_gradient, minimize, spring_probe, total_energy, EnergyBreakdown, MaterialParams,
    MinimizeOptions, ShellState,
};
pub use error::{Error, Result};
pub use expr::Expr;
pub use rotalg::{
    anti, axl, exp_so3, extract_angle, polar3, rodrigues, sym_skew, AngleExtraction, Mat2, Mat3,
    Rotation, Vec3,
};
pub use grid::{
    fd_derivative, integrate, make_mask, sample_surface, BoundaryMask, Dir, DomainGrid, Field,
    SurfaceBundle,
};
pub use scalar::Real;
pub use surface::{
    darboux_frame, fundamental_forms, make_surface, mean_curvature, tangent_frame, ChartDomain,
    SurfaceConfig, SurfaceJet, SurfaceKind, SurfaceSpec,
};

pub type Vec3d = Vec3<f64>;
pub type Mat3d = Mat3<f64>;
pub type Mat2d = Mat2<f64>;
pub type Rotationd = Rotation<f64>;
pub type SurfaceSpecd = SurfaceSpec<f64>;
pub type SurfaceJetd = SurfaceJet<f64>;
pub type DomainGridd = DomainGrid<f64>;
pub type SurfaceBundled = SurfaceBundle<f64>;
pub type MaterialParamsd = MaterialParams<f64>;
pub type ShellStated = ShellState<f64>;

pub type Vec3f = Vec3<f32>;
pub type Mat3f = Mat3<f32>;
pub type Rotationf = Rotation<f32>;
pub type DomainGridf = DomainGrid<f32>;
pub type SurfaceBundlef = SurfaceBundle<f32>;
