//! Fixture generators: ruled parabolic submanifolds from moving frames,
//! their isometric gauge deformations, parabolic surfaces, and the polar
//! construction in both directions.

mod coeffs;
mod polar;
mod reconstruct;
mod ruled;
mod surface;

pub use coeffs::{Coeff1D, PolyTable};
pub use polar::{polar_extension, section_map, LocalSection, PolarChart, SectionMap};
pub use reconstruct::{construct_polar, curl_convergence, PolarIntegrationState, PolarSeed, ReconstructOptions, Reconstruction};
pub use ruled::{
    gauge_deformation, integrate_frame, random_ruled_input, ruled_chart, ruled_dim_checks,
    ruling_tangency_residual, ConnectionEntry, DimCheck, FramePath, RuledFrameInput,
};
pub use surface::{parabolic_surface_chart, PolarSurfaceInput, SurfaceFamily, SurfaceReport};
