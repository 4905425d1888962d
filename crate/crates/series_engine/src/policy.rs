use core_params::SystemParams;
use serde::{Deserialize, Serialize};

/// Hard cap on the tree depth; products contract geometrically so deeper words are negligible.
pub const MAX_DEPTH_CAP: usize = 35;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub max_depth: usize,
    pub tol: f64,
    /// Largest admissible ratio between successive layer norms.
    pub decay_guard: f64,
}

impl TruncationPolicy {
    /// `tol = 1e-8`, `K = ceil(ln tol / ln ϱ)` capped at [`MAX_DEPTH_CAP`], guard `ϱ + 0.15`.
    pub fn for_params(params: &SystemParams) -> Self {
        Self::with_tol(params, 1e-8)
    }

    pub fn with_tol(params: &SystemParams, tol: f64) -> Self {
        TruncationPolicy {
            max_depth: default_depth(params.rho(), tol),
            tol,
            decay_guard: params.rho() + 0.15,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    /// Partial products with row norm below `tol / 2^K` are not expanded.
    pub fn prune_threshold(&self) -> f64 {
        self.tol / 2f64.powi(self.max_depth as i32)
    }

    pub fn is_valid(&self) -> bool {
        self.tol > 0.0 && self.tol.is_finite() && self.decay_guard > 0.0
    }
}

pub fn default_depth(rho: f64, tol: f64) -> usize {
    let k = (tol.ln() / rho.ln()).ceil();
    if k.is_finite() && k >= 1.0 {
        (k as usize).min(MAX_DEPTH_CAP)
    } else {
        MAX_DEPTH_CAP
    }
}
