//! Depth-first evaluation of `𝓛^(i)(z) = Σ_k Σ_{i1..ik} Q_{i1}(z)·Q_{i2}(h_{i1}z)···L^(i)(h_{i1..ik}z)`.
//!
//! All three forcing terms share the same matrix products, so they are summed in one pass.
//! The tree splits into `rayon::join` tasks above [`PARALLEL_DEPTH`]; partial sums are always
//! combined as `node + left + right`, so the floating-point reduction order depends only on
//! the tree shape and never on the number of worker threads.

use cubic_geometry::Geometry;
use iteration_maps::{mat_mul, mat_vec, row_norm, step_matrices, Mat2, Vec2, IDENTITY};
use serde::Serialize;

use crate::{ExtensionDomain, SeriesError, TruncationPolicy};

pub const PARALLEL_DEPTH: usize = 6;

/// Layers shallower than this are exempt from the decay guard (the first ratios are transient).
pub const GUARD_START_DEPTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesValue {
    pub z: f64,
    /// `[𝓛^(0)(z), 𝓛^(1)(z), 𝓛^(2)(z)]`.
    pub values: [Vec2; 3],
    /// Per depth, the sum over words of `max_i ‖P·L^(i)‖∞`.
    pub layer_norms: Vec<f64>,
    /// Norm of the deepest evaluated layer plus the bound on pruned subtrees.
    pub error_estimate: f64,
    pub pruned_bound: f64,
    pub nodes: u64,
    pub max_ratio: f64,
}

impl SeriesValue {
    pub fn combine(&self, psi1: f64, psi2: f64) -> Vec2 {
        let [l0, l1, l2] = self.values;
        [
            l0[0] + psi1 * l1[0] + psi2 * l2[0],
            l0[1] + psi1 * l1[1] + psi2 * l2[1],
        ]
    }

    /// Largest layer-to-layer ratio from `from` onwards, over layers still above `floor`.
    pub fn layer_ratio_max(&self, from: usize, floor: f64) -> f64 {
        let mut worst = 0.0f64;
        for k in from.max(1)..self.layer_norms.len() {
            let prev = self.layer_norms[k - 1];
            if prev > floor && self.layer_norms[k] > floor {
                worst = worst.max(self.layer_norms[k] / prev);
            }
        }
        worst
    }
}

struct Acc {
    sum: [Vec2; 3],
    layers: Vec<f64>,
    nodes: u64,
    pruned: f64,
}

impl Acc {
    fn new(depth: usize) -> Self {
        Acc {
            sum: [[0.0; 2]; 3],
            layers: vec![0.0; depth + 1],
            nodes: 0,
            pruned: 0.0,
        }
    }

    fn absorb(&mut self, other: Acc) {
        for i in 0..3 {
            self.sum[i][0] += other.sum[i][0];
            self.sum[i][1] += other.sum[i][1];
        }
        for (a, b) in self.layers.iter_mut().zip(other.layers) {
            *a += b;
        }
        self.nodes += other.nodes;
        self.pruned += other.pruned;
    }
}

struct Ctx<'a> {
    geom: &'a Geometry,
    max_depth: usize,
    prune: f64,
}

fn norm_inf(v: &Vec2) -> f64 {
    v[0].abs().max(v[1].abs())
}

fn visit(ctx: &Ctx, z: f64, prod: &Mat2, depth: usize, acc: &mut Acc) -> Result<(), SeriesError> {
    let st = step_matrices(ctx.geom, z, None)?;
    let forcing = st.forcing();
    let mut layer = 0.0f64;
    let mut local_l = 0.0f64;
    for (i, l) in forcing.iter().enumerate() {
        let t = mat_vec(prod, l);
        acc.sum[i][0] += t[0];
        acc.sum[i][1] += t[1];
        layer = layer.max(norm_inf(&t));
        local_l = local_l.max(norm_inf(l));
    }
    acc.layers[depth] += layer;
    acc.nodes += 1;
    if depth == ctx.max_depth {
        return Ok(());
    }
    let p1 = mat_mul(prod, &st.Q1);
    let p2 = mat_mul(prod, &st.Q2);
    let n1 = row_norm(&p1);
    let n2 = row_norm(&p2);
    let go1 = n1 >= ctx.prune;
    let go2 = n2 >= ctx.prune;
    // Unexpanded subtrees are bounded by their leading term with the parent's forcing scale.
    if !go1 {
        acc.pruned += n1 * local_l;
    }
    if !go2 {
        acc.pruned += n2 * local_l;
    }
    if depth < PARALLEL_DEPTH && go1 && go2 {
        let (a, b) = rayon::join(
            || {
                let mut a = Acc::new(ctx.max_depth);
                visit(ctx, st.h1, &p1, depth + 1, &mut a).map(|_| a)
            },
            || {
                let mut b = Acc::new(ctx.max_depth);
                visit(ctx, st.h2, &p2, depth + 1, &mut b).map(|_| b)
            },
        );
        acc.absorb(a?);
        acc.absorb(b?);
    } else {
        if go1 {
            visit(ctx, st.h1, &p1, depth + 1, acc)?;
        }
        if go2 {
            visit(ctx, st.h2, &p2, depth + 1, acc)?;
        }
    }
    Ok(())
}

/// Evaluates all three series at `z`. Arguments `z ≤ 0` must lie inside `domain` and the layer
/// norms must then decay by at least `policy.decay_guard` per level.
pub fn evaluate(
    geom: &Geometry,
    domain: &ExtensionDomain,
    z: f64,
    policy: &TruncationPolicy,
) -> Result<SeriesValue, SeriesError> {
    if !policy.is_valid() {
        return Err(SeriesError::InvalidPolicy);
    }
    if !z.is_finite() || !domain.admits(z) {
        return Err(SeriesError::OutsideDomain { z, floor: domain.floor() });
    }
    let ctx = Ctx {
        geom,
        max_depth: policy.max_depth,
        prune: policy.prune_threshold(),
    };
    let mut acc = Acc::new(policy.max_depth);
    visit(&ctx, z, &IDENTITY, 0, &mut acc)?;
    let last = acc.layers.iter().rposition(|&x| x > 0.0).unwrap_or(0);
    let mut value = SeriesValue {
        z,
        values: acc.sum,
        error_estimate: acc.layers[last] + acc.pruned,
        pruned_bound: acc.pruned,
        nodes: acc.nodes,
        max_ratio: 0.0,
        layer_norms: acc.layers,
    };
    // Layers already far below the tolerance carry no information about divergence.
    let floor = 1e-2 * policy.tol;
    value.max_ratio = value.layer_ratio_max(GUARD_START_DEPTH, floor);
    if z <= 0.0 && value.max_ratio > policy.decay_guard {
        return Err(SeriesError::Divergence {
            z,
            ratio: value.max_ratio,
            guard: policy.decay_guard,
        });
    }
    Ok(value)
}
