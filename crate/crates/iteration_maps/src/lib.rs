//! Chord maps `h1`, `h2` and the matrices `Q1(z)`, `Q2(z)`, `L(z)` of the functional equation
//! `M(z) = Q1(z)M(h1(z)) + Q2(z)M(h2(z)) + L(z)`.
//!
//! At slice `z` the relevant intersection points are `(a1, s2)` on curve 1 with
//! `a1 = z + α1 = ξ1−(s2)`, `s2 = z − α1`, and `(s1, c2)` on curve 2 with
//! `s1 = z + γ2`, `c2 = z − γ2 = ξ2−(s1)`. The companion branches follow from the involutions:
//! `ξ1+(s2) = ι1(a1)` and `ξ2+(s1) = ι2(c2)`.

use core_params::{ParamError, Queue, SystemParams};
use cubic_geometry::{Geometry, GeometryError};
use serde::Serialize;
use thiserror::Error;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn mat_vec(a: &Mat2, v: &Vec2) -> Vec2 {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub fn mat_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

/// Maximum absolute row sum.
pub fn row_norm(a: &Mat2) -> f64 {
    (a[0][0].abs() + a[0][1].abs()).max(a[1][0].abs() + a[1][1].abs())
}

fn scale(k: f64, a: &Mat2) -> Mat2 {
    [[k * a[0][0], k * a[0][1]], [k * a[1][0], k * a[1][1]]]
}

fn vscale(k: f64, v: &Vec2) -> Vec2 {
    [k * v[0], k * v[1]]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IterError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("involution pole: coordinate equals -mu{queue}")]
    InvolutionPole { queue: u8 },
    #[error("q-factor pole at z = {z}, epsilon = {epsilon}")]
    QPole { z: f64, epsilon: f64 },
    #[error("determinant D vanishes at z = {z}")]
    SingularD { z: f64 },
}

impl IterError {
    pub fn code(&self) -> &'static str {
        match self {
            IterError::Geometry(e) => e.code(),
            IterError::Params(e) => e.code(),
            IterError::InvolutionPole { .. } => "involution_pole",
            IterError::QPole { .. } => "q_pole",
            IterError::SingularD { .. } => "singular_d",
        }
    }
}

/// `ι_j(x) = −μj(x + μj − λj)/(x + μj)`; it exchanges `ξ_j−` and `ξ_j+` at a common argument.
pub fn involution_image(params: &SystemParams, j: Queue, x: f64) -> Result<f64, IterError> {
    let (l, m) = (params.arrival(j), params.service(j));
    let d = x + m;
    if d.abs() <= 1e-14 * m {
        return Err(IterError::InvolutionPole { queue: j.index() });
    }
    Ok(-m * (x + m - l) / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QFactors {
    pub q1: f64,
    pub q2: f64,
}

/// `q1 = λ1μ1/(μ1 + z + ε)`, `q2 = λ2μ2/(μ2 + z − ε)`.
pub fn q_factors(params: &SystemParams, z: f64, epsilon: f64) -> Result<QFactors, IterError> {
    let d1 = params.mu1() + z + epsilon;
    let d2 = params.mu2() + z - epsilon;
    let tiny = 1e-14 * (params.mu1() + params.mu2() + z.abs() + epsilon.abs());
    if d1.abs() <= tiny || d2.abs() <= tiny {
        return Err(IterError::QPole { z, epsilon });
    }
    Ok(QFactors {
        q1: params.lambda1() * params.mu1() / d1,
        q2: params.lambda2() * params.mu2() / d2,
    })
}

/// `h_j(z)`: `2h1 = 2z − (a1+μ1) + λ1μ1/(a1+μ1)` and `2h2 = 2z − (c2+μ2) + λ2μ2/(c2+μ2)`.
pub fn h_map(geom: &Geometry, j: Queue, z: f64) -> Result<f64, IterError> {
    let p = &geom.params;
    let x = match j {
        Queue::One => z + geom.roots(Queue::One, z)?.alpha,
        Queue::Two => z - geom.roots(Queue::Two, z)?.gamma,
    };
    let (l, m) = (p.arrival(j), p.service(j));
    let d = x + m;
    if d.abs() <= 1e-14 * m {
        return Err(IterError::InvolutionPole { queue: j.index() });
    }
    Ok(0.5 * (2.0 * z - d + l * m / d))
}

/// Per-slice objects of the functional equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct StepMatrices {
    pub z: f64,
    pub h1: f64,
    pub h2: f64,
    pub alpha1: f64,
    pub gamma2: f64,
    /// `s1 = z + γ2(z)`.
    pub s1: f64,
    /// `s2 = z − α1(z)`.
    pub s2: f64,
    pub xi1_plus: f64,
    pub xi1_minus: f64,
    pub xi2_plus: f64,
    pub xi2_minus: f64,
    /// `β1(h1(z))`.
    pub beta1_star: f64,
    /// `β2(h2(z))`.
    pub beta2_star: f64,
    pub D: f64,
    pub k1: f64,
    pub k2: f64,
    pub Pi1: Mat2,
    pub Pi2: Mat2,
    pub Q1: Mat2,
    pub Q2: Mat2,
    pub e1: Vec2,
    pub e2: Vec2,
    pub L0: Vec2,
    pub L1vec: Vec2,
    pub L2vec: Vec2,
    pub L: Option<Vec2>,
}

impl StepMatrices {
    /// Forcing vectors `[L^(0), L^(1), L^(2)]`.
    pub fn forcing(&self) -> [Vec2; 3] {
        [self.L0, self.L1vec, self.L2vec]
    }
}

/// Closed form of `D` through the cubic values `R1(γ2, z)` and `R2(α1, z)`.
pub fn determinant_closed_form(params: &SystemParams, z: f64, alpha1: f64, gamma2: f64) -> f64 {
    let r1 = cubic_geometry::r_eval(params, Queue::One, gamma2, z);
    let r2 = cubic_geometry::r_eval(params, Queue::Two, alpha1, z);
    4.0 * params.lambda1() * params.mu1() * params.lambda2() * params.mu2()
        * (params.mu1() + params.mu2() + 2.0 * z)
        * alpha1
        * gamma2
        * (alpha1 - gamma2)
        / (r1 * r2)
}

pub fn step_matrices(geom: &Geometry, z: f64, psi: Option<(f64, f64)>) -> Result<StepMatrices, IterError> {
    let p = &geom.params;
    let alpha1 = geom.roots(Queue::One, z)?.alpha;
    let gamma2 = geom.roots(Queue::Two, z)?.gamma;
    let s1 = z + gamma2;
    let s2 = z - alpha1;
    let xi1_minus = z + alpha1;
    let xi1_plus = involution_image(p, Queue::One, xi1_minus)?;
    let xi2_minus = z - gamma2;
    let xi2_plus = involution_image(p, Queue::Two, xi2_minus)?;
    let h1 = 0.5 * (s2 + xi1_plus);
    let h2 = 0.5 * (s1 + xi2_plus);
    // B1* = (ξ1+(s2), s2) on the chord 2h1; B2** = (s1, ξ2+(s1)) on the chord 2h2.
    let beta1_star = xi1_plus - h1;
    let beta2_star = h2 - xi2_plus;

    let qa = q_factors(p, z, alpha1)?;
    let qg = q_factors(p, z, gamma2)?;
    let q1_b1 = q_factors(p, h1, beta1_star)?.q1;
    let q2_b2 = q_factors(p, h2, beta2_star)?.q2;

    let d = qg.q1 * qa.q2 - qg.q2 * qa.q1;
    if !(d.is_finite()) || d.abs() <= 1e-300 {
        return Err(IterError::SingularD { z });
    }
    let k1 = (s2 - xi1_minus) / (s2 - xi1_plus) / d;
    let k2 = (s1 - xi2_minus) / (s1 - xi2_plus) / d;
    let pi1 = [
        [-qg.q2 * q1_b1, qg.q2 * qa.q2],
        [-qg.q1 * q1_b1, qg.q1 * qa.q2],
    ];
    let pi2 = [
        [qa.q2 * qg.q1, -qa.q2 * q2_b2],
        [qa.q1 * qg.q1, -qa.q1 * q2_b2],
    ];
    let e1 = [qg.q2, qg.q1];
    let e2 = [qa.q2, qa.q1];
    let c1 = (xi1_plus - xi1_minus) / (s2 - xi1_plus);
    let c2 = (xi2_plus - xi2_minus) / (s1 - xi2_plus);
    let lam = p.lambda();
    let f1 = lam - p.lambda1() * p.service_transform(Queue::One, s1);
    let f2 = lam - p.lambda2() * p.service_transform(Queue::Two, s2);
    let w = -(1.0 - p.rho()) / d;
    let l0 = [
        w * (c2 * f1 * e2[0] + c1 * f2 * e1[0]),
        w * (c2 * f1 * e2[1] + c1 * f2 * e1[1]),
    ];
    let l1 = vscale(c1 / d, &e1);
    let l2 = vscale(c2 / d, &e2);
    let l = psi.map(|(p1, p2)| [l0[0] + p1 * l1[0] + p2 * l2[0], l0[1] + p1 * l1[1] + p2 * l2[1]]);
    Ok(StepMatrices {
        z,
        h1,
        h2,
        alpha1,
        gamma2,
        s1,
        s2,
        xi1_plus,
        xi1_minus,
        xi2_plus,
        xi2_minus,
        beta1_star,
        beta2_star,
        D: d,
        k1,
        k2,
        Pi1: pi1,
        Pi2: pi2,
        Q1: scale(k1, &pi1),
        Q2: scale(k2, &pi2),
        e1,
        e2,
        L0: l0,
        L1vec: l1,
        L2vec: l2,
        L: l,
    })
}

/// `r_j = (μj + σj−)/(μj + σj+)`, the large-`z` diagonal entry of `Q_j`.
pub fn contraction_limit(params: &SystemParams, j: Queue) -> f64 {
    let (sm, sp) = params.t_poles(j);
    let m = params.service(j);
    (m + sm) / (m + sp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core_params::SystemParams;

    fn worked() -> (SystemParams, Geometry) {
        let p = SystemParams::new(1.0, 1.0, 3.0, 4.5).unwrap();
        let g = Geometry::new(&p).unwrap();
        (p, g)
    }

    #[test]
    fn h_grows_and_matches_step() {
        let (_, g) = worked();
        let st = step_matrices(&g, 1.0, None).unwrap();
        let h1 = h_map(&g, Queue::One, 1.0).unwrap();
        let h2 = h_map(&g, Queue::Two, 1.0).unwrap();
        assert!(h1 > 1.0 && h2 > 1.0);
        assert!((st.h1 - h1).abs() < 1e-12 && (st.h2 - h2).abs() < 1e-12);
    }

    #[test]
    fn involution_is_an_involution_with_fixed_points() {
        let (p, _) = worked();
        let (am, ap) = p.stationary_points(Queue::One);
        for a in [am, ap] {
            assert!((involution_image(&p, Queue::One, a).unwrap() - a).abs() < 1e-12);
        }
        assert_eq!(
            involution_image(&p, Queue::One, -3.0).unwrap_err().code(),
            "involution_pole"
        );
    }

    #[test]
    fn q_factors_at_origin() {
        let (p, _) = worked();
        let q = q_factors(&p, 0.0, 0.0).unwrap();
        assert!((q.q1 - 1.0).abs() < 1e-15 && (q.q2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_combination() {
        let (_, g) = worked();
        let st = step_matrices(&g, 0.7, Some((0.3, 0.5))).unwrap();
        let l = st.L.unwrap();
        for i in 0..2 {
            let want = st.L0[i] + 0.3 * st.L1vec[i] + 0.5 * st.L2vec[i];
            assert!((l[i] - want).abs() < 1e-15);
        }
    }
}
