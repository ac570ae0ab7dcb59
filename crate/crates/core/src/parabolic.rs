//! Rank-two analysis: asymptotic directions, canonical frames, the splitting
//! tensor, ruled and surface-like detectors, and residuals of the structure
//! equations.

mod analysis;
mod classify;
mod frame;
mod fundamental;
mod structure;

pub use analysis::{
    analyze_point, congruence_invariants, CongruenceRow, PointAnalysis, PointContext, PointStatus,
};
pub use classify::{asymptotic_directions, asymptotic_directions_with, Rank2Classification, Rank2Kind};
pub use frame::{
    canonical_frame, canonical_frame_with, frame_jets, orientation_reference, FrameJets,
    ParabolicFrame,
};
pub use fundamental::{
    fundamental_residuals, fundamental_residuals_corrupted, Corruption, FundamentalResiduals,
};
pub use structure::{
    codazzi_identity_residuals, ruled_residual, splitting_tensor, surface_like_residual,
    CodazziIdentityResiduals, SplittingEntry, SplittingTensorSample,
};
