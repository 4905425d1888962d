mod domain;
mod model;
mod policy;
mod tree;

pub use domain::{hol_conditions, ExtensionDomain, HolConditions};
pub use policy::{default_depth, TruncationPolicy, MAX_DEPTH_CAP};
pub use model::{
    limit_at_zero, psi_constants, psi_from_limits, richardson3, script_l, EmptyProbabilities, Extrapolant, FTransforms, GForm, GValue, MVector,
    Model, PsiConstants, EMPTY_NODES, KERNEL_GUARD, MAX_EXTRA_HALVINGS, PSI_NODES,
};
pub use tree::{evaluate, SeriesValue, GUARD_START_DEPTH, PARALLEL_DEPTH};

use core_params::ParamError;
use cubic_geometry::GeometryError;
use iteration_maps::IterError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error(transparent)]
    Iter(#[from] IterError),
    #[error("invalid truncation policy")]
    InvalidPolicy,
    #[error("z = {z} lies outside the admissible domain (floor {floor})")]
    OutsideDomain { z: f64, floor: f64 },
    #[error("series diverges at z = {z}: layer ratio {ratio} exceeds guard {guard}")]
    Divergence { z: f64, ratio: f64, guard: f64 },
    #[error("{quantity}: extrapolation unstable (window spread {spread} at node {finest_node})")]
    Extrapolation {
        quantity: &'static str,
        spread: f64,
        finest_node: f64,
    },
    #[error("kernel too close to zero at ({s1}, {s2})")]
    KernelZero { s1: f64, s2: f64 },
}

impl SeriesError {
    pub fn code(&self) -> &'static str {
        match self {
            SeriesError::Iter(e) => e.code(),
            SeriesError::InvalidPolicy => "invalid_policy",
            SeriesError::OutsideDomain { .. } => "outside_domain",
            SeriesError::Divergence { .. } => "divergence",
            SeriesError::Extrapolation { .. } => "extrapolation_instability",
            SeriesError::KernelZero { .. } => "kernel_zero",
        }
    }
}

impl From<ParamError> for SeriesError {
    fn from(e: ParamError) -> Self {
        SeriesError::Iter(IterError::Params(e))
    }
}

impl From<GeometryError> for SeriesError {
    fn from(e: GeometryError) -> Self {
        SeriesError::Iter(IterError::Geometry(e))
    }
}
