//! Immersion charts and the pointwise extrinsic geometry of a chart.

mod chart;
mod sample;

pub use chart::{
    builtin, AffineReparam, ChartFn, DomainBox, ImmersionChart, PolyTerm, RigidMotion,
};
pub use sample::{
    covariant_derivative, evaluate_sample, evaluate_sample_with, first_fundamental_form,
    normal_frame, relative_nullity, sample_jets, shape_operator, write_sample_csv,
    GeometrySample, NullityData, SampleJets,
};
pub(crate) use chart::eval_poly;
pub(crate) use sample::{bilinear, covariant_from_jets};
