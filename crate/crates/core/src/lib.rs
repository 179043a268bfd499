//! Information geometry of finite exponential families: Fisher metrics,
//! dual connections, curvature, multiplication tensors with WDVV checks,
//! paracomplex arithmetic, and moment-matching estimation.

// The numerical kernels index several tensors (or disjoint rows of one
// matrix) per loop; iterator rewrites obscure the math.
#![allow(clippy::needless_range_loop)]

pub mod expfam;
pub mod frobenius;
pub mod geometry;
pub mod learning;
pub mod paracomplex;
pub mod tensor;

pub use expfam::{
    canonical_to_prob, ceva_line, ExponentialFamily, FamilyError, GaussianFamily, ProbVector,
    SampleSpace, ThetaPoint,
};
pub use frobenius::{monge_ampere_density, FrobeniusError, PreFrobeniusData};
pub use geometry::{
    alpha_connection, alpha_connection_displacement, amari_chentsov, bianchi_residual, curvature,
    fisher_metric, fisher_metric_field, geodesic, levi_civita, metric_compatibility_residual,
    parallel_transport, sectional_curvature, torsion, ConnectionField, ConnectionKind,
    GeodesicPath, GeomError,
};
pub use learning::{
    fit_ahs, fit_ahs_observed, gws_correlator, kl_divergence, kl_gradient,
    trace_split_diagnostics, CorrelatorTensor, LearnError, LearningTrace, TraceEntry,
};
pub use paracomplex::{
    join, join_scalar, pc_mul, pc_norm, project_plus, split, split_scalar, ParacomplexError,
    ParacomplexNumber, SplitVector,
};
pub use tensor::{
    finite_diff, lower_index, metric_inverse, raise_index, MixedTensor12, SymTensor, Tensor3,
    Tensor4, TensorError,
};
