//! The kernel curves in `(w, z)` coordinates, `s1 = z + w`, `s2 = z − w`.
//!
//! `R_j(·, z)` is monic in `w`; its real roots are the abscissae of the intersection of the
//! line `s1 + s2 = 2z` with curve `j`. For `z > 0` the three roots bracket `±z`; for
//! `z ≤ 0` they are continued from `z > 0` while the discriminant stays positive.

use core_params::{characteristic_constants, DerivedConstants, EtaPair, ParamError, Queue, SystemParams};
use nalgebra::{Complex, Matrix3, Matrix4, SMatrix, SVector};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("roots of R{queue}(., {z}) violate alpha < -z < beta < z < gamma: {roots:?}")]
    OrderingViolation { queue: u8, z: f64, roots: [f64; 3] },
    #[error("R{queue}(., {z}) does not have three real roots")]
    ComplexRoots { queue: u8, z: f64 },
    #[error("expected two real tangency points for curve {queue}, found {found}")]
    RootCount { queue: u8, found: usize },
    #[error("z = {z} is at or below the branch point {eta} of curve {queue}")]
    OutsideTrackedDomain { queue: u8, z: f64, eta: f64 },
    #[error("real_roots needs z > 0, got {z}")]
    NonPositiveSlice { z: f64 },
}

impl GeometryError {
    pub fn code(&self) -> &'static str {
        match self {
            GeometryError::Params(e) => e.code(),
            GeometryError::OrderingViolation { .. } => "ordering_violation",
            GeometryError::ComplexRoots { .. } => "complex_roots",
            GeometryError::RootCount { .. } => "root_count",
            GeometryError::OutsideTrackedDomain { .. } => "outside_tracked_domain",
            GeometryError::NonPositiveSlice { .. } => "non_positive_slice",
        }
    }
}

/// `R_j(w, z) = w³ + R_j1(z)w² + R_j2(z)w + R_j3(z)` at a fixed `z`, with its depressed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicCoeffs {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub p_tilde: f64,
    pub q_tilde: f64,
    pub delta: f64,
}

impl CubicCoeffs {
    pub fn eval(&self, w: f64) -> f64 {
        ((w + self.r1) * w + self.r2) * w + self.r3
    }

    pub fn deriv(&self, w: f64) -> f64 {
        (3.0 * w + 2.0 * self.r1) * w + self.r2
    }

    /// Magnitude against which `delta` is compared.
    pub fn delta_scale(&self) -> f64 {
        4.0 * self.p_tilde.abs().powi(3) + 27.0 * self.q_tilde * self.q_tilde
    }
}

pub fn cubic_coeffs(params: &SystemParams, j: Queue, z: f64) -> CubicCoeffs {
    let (l1, l2, m1, m2) = (params.lambda1(), params.lambda2(), params.mu1(), params.mu2());
    let lam = l1 + l2;
    let pz = params.p_poly(z);
    let (r1, r2, r3) = match j {
        Queue::One => (
            -(lam - m1 + m2 - z),
            l1 * m2 - l2 * m1 - m1 * m2 - 2.0 * m2 * z - z * z,
            -z * pz,
        ),
        Queue::Two => (
            lam + m1 - m2 - z,
            l2 * m1 - l1 * m2 - m1 * m2 - 2.0 * m1 * z - z * z,
            z * pz,
        ),
    };
    let p_tilde = r2 - r1 * r1 / 3.0;
    let q_tilde = r3 - r1 * r2 / 3.0 + 2.0 * r1.powi(3) / 27.0;
    let delta = -(4.0 * p_tilde.powi(3) + 27.0 * q_tilde * q_tilde);
    CubicCoeffs {
        r1,
        r2,
        r3,
        p_tilde,
        q_tilde,
        delta,
    }
}

/// `R_j(w, z)`.
pub fn r_eval(params: &SystemParams, j: Queue, w: f64, z: f64) -> f64 {
    cubic_coeffs(params, j, z).eval(w)
}

pub fn discriminant(params: &SystemParams, j: Queue, z: f64) -> f64 {
    cubic_coeffs(params, j, z).delta
}

/// Ordered real roots of `R_j(·, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub z: f64,
}

impl RootTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

fn newton_polish(c: &CubicCoeffs, w: f64) -> f64 {
    let d = c.deriv(w);
    if d == 0.0 {
        return w;
    }
    let step = c.eval(w) / d;
    if step.is_finite() {
        w - step
    } else {
        w
    }
}

fn companion_roots(c: &CubicCoeffs) -> [Complex<f64>; 3] {
    let m = Matrix3::new(0.0, 0.0, -c.r3, 1.0, 0.0, -c.r2, 0.0, 1.0, -c.r1);
    let ev = m.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

/// Sorted real roots, or `None` if the cubic has a complex pair.
fn sorted_real_roots(c: &CubicCoeffs) -> Option<[f64; 3]> {
    let scale = c.delta_scale();
    let mut roots = if c.delta > 1e-10 * scale && c.p_tilde < 0.0 {
        let m = 2.0 * (-c.p_tilde / 3.0).sqrt();
        let arg = (3.0 * c.q_tilde / (2.0 * c.p_tilde)) * (-3.0 / c.p_tilde).sqrt();
        let theta = arg.clamp(-1.0, 1.0).acos() / 3.0;
        let shift = c.r1 / 3.0;
        [0, 1, 2].map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos() - shift)
    } else {
        let ev = companion_roots(c);
        let mag = 1.0 + ev.iter().map(|e| e.norm()).fold(0.0, f64::max);
        if ev.iter().any(|e| e.im.abs() > 1e-7 * mag) {
            return None;
        }
        ev.map(|e| e.re)
    };
    for r in roots.iter_mut() {
        *r = newton_polish(c, *r);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Some(roots)
}

/// Three real roots for `z > 0`, checked against `α < −z < β < z < γ`.
pub fn real_roots(params: &SystemParams, j: Queue, z: f64) -> Result<RootTriple, GeometryError> {
    if !(z > 0.0) {
        return Err(GeometryError::NonPositiveSlice { z });
    }
    let c = cubic_coeffs(params, j, z);
    let r = sorted_real_roots(&c).ok_or(GeometryError::ComplexRoots {
        queue: j.index(),
        z,
    })?;
    if !(r[0] < -z && -z < r[1] && r[1] < z && z < r[2]) {
        return Err(GeometryError::OrderingViolation {
            queue: j.index(),
            z,
            roots: r,
        });
    }
    Ok(RootTriple {
        alpha: r[0],
        beta: r[1],
        gamma: r[2],
        z,
    })
}

/// Real tangency points of curve `j` with lines `s1 + s2 = 2η`, plus the full root set of `Δ_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoints {
    /// `η_j^(1)`, the larger real root of `Δ_j`.
    pub eta_1: f64,
    /// `η_j^(2)`.
    pub eta_2: f64,
    /// Points `s` with `T_j'(s) = −1` producing `η_j^(1)` and `η_j^(2)`.
    pub tangency_1: f64,
    pub tangency_2: f64,
    /// Roots of the quartic `Δ_j(z)`, real pair first.
    pub delta_roots: [(f64, f64); 4],
    /// Leading coefficient of `Δ_j` in `z⁴`.
    pub leading_coefficient: f64,
    /// Smallest pairwise distance between the four roots of `Δ_j`.
    pub min_root_separation: f64,
}

impl BranchPoints {
    /// Fewer than four distinct discriminant roots (non-generic parameters).
    pub fn coalescing(&self) -> bool {
        self.min_root_separation < 1e-6
    }
}

fn polish_quartic(c: &[f64; 5], mut s: f64) -> f64 {
    for _ in 0..3 {
        let f = (((c[0] * s + c[1]) * s + c[2]) * s + c[3]) * s + c[4];
        let d = ((4.0 * c[0] * s + 3.0 * c[1]) * s + 2.0 * c[2]) * s + c[3];
        if d == 0.0 {
            break;
        }
        let step = f / d;
        if !step.is_finite() {
            break;
        }
        s -= step;
    }
    s
}

fn quartic_roots(c: &[f64; 5]) -> [Complex<f64>; 4] {
    let m = Matrix4::new(
        0.0,
        0.0,
        0.0,
        -c[4] / c[0],
        1.0,
        0.0,
        0.0,
        -c[3] / c[0],
        0.0,
        1.0,
        0.0,
        -c[2] / c[0],
        0.0,
        0.0,
        1.0,
        -c[1] / c[0],
    );
    let ev = m.complex_eigenvalues();
    [ev[0], ev[1], ev[2], ev[3]]
}

/// Branch points of curve `j` from the tangency condition `T_j'(s) = −1`.
pub fn branch_points(params: &SystemParams, j: Queue) -> Result<BranchPoints, GeometryError> {
    // Curve j seen from queue j; z is invariant under the queue exchange.
    let p = params.oriented(j);
    let (l1, l2, m1, m2) = (p.lambda1(), p.lambda2(), p.mu1(), p.mu2());
    let a = l1 + l2 - m1;
    let b = l2 * m1;
    let k = l2 * m2;
    // d(s)² + λ2μ2((s+μ1)² − λ1μ1) = 0 with d(s) = s² − a s − b.
    let quartic = [
        1.0,
        -2.0 * a,
        a * a - 2.0 * b + k,
        2.0 * a * b + 2.0 * k * m1,
        b * b + k * m1 * (m1 - l1),
    ];
    let (sig_m, _) = p.t_poles(Queue::One);
    let (a_m, a_p) = p.stationary_points(Queue::One);
    let mut found = Vec::new();
    for r in quartic_roots(&quartic) {
        if r.im.abs() > 1e-7 * (1.0 + r.re.abs()) {
            continue;
        }
        let s = polish_quartic(&quartic, r.re);
        if (s > a_m && s < sig_m) || (s > sig_m && s < a_p) {
            found.push(s);
        }
    }
    if found.len() != 2 {
        return Err(GeometryError::RootCount {
            queue: j.index(),
            found: found.len(),
        });
    }
    let mut pts = [0.0; 2];
    for (slot, s) in pts.iter_mut().zip(&found) {
        *slot = 0.5 * (s + p.t_map(Queue::One, *s)?);
    }
    let (eta_1, t1, eta_2, t2) = if pts[0] >= pts[1] {
        (pts[0], found[0], pts[1], found[1])
    } else {
        (pts[1], found[1], pts[0], found[0])
    };

    let (lead, droots) = discriminant_quartic(params, j, eta_1, eta_2);
    let mut min_sep = f64::INFINITY;
    for i in 0..4 {
        for k in (i + 1)..4 {
            min_sep = min_sep.min((droots[i] - droots[k]).norm());
        }
    }
    let mut delta_roots = droots.map(|c| (c.re, c.im));
    delta_roots.sort_by(|x, y| x.1.abs().total_cmp(&y.1.abs()).then(y.0.total_cmp(&x.0)));
    Ok(BranchPoints {
        eta_1,
        eta_2,
        tangency_1: t1,
        tangency_2: t2,
        delta_roots,
        leading_coefficient: lead,
        min_root_separation: min_sep,
    })
}

/// Interpolates the quartic `Δ_j(z)` on nodes spread around the real branch points and returns
/// its leading coefficient and roots.
fn discriminant_quartic(params: &SystemParams, j: Queue, e1: f64, e2: f64) -> (f64, [Complex<f64>; 4]) {
    let centre = 0.5 * (e1 + e2);
    let width = (e1 - e2).abs().max(1.0);
    let nodes: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0].map(|t| centre + width * t);
    // Fit in the shifted variable x = (z − centre)/width for conditioning.
    let mut v = SMatrix::<f64, 5, 5>::zeros();
    let mut rhs = SVector::<f64, 5>::zeros();
    for (i, &z) in nodes.iter().enumerate() {
        let x = (z - centre) / width;
        for k in 0..5 {
            v[(i, k)] = x.powi(4 - k as i32);
        }
        rhs[i] = discriminant(params, j, z);
    }
    let coef = v.lu().solve(&rhs).unwrap_or_else(SVector::<f64, 5>::zeros);
    let c = [coef[0], coef[1], coef[2], coef[3], coef[4]];
    let lead = c[0] / width.powi(4);
    if c[0] == 0.0 {
        return (lead, [Complex::new(f64::NAN, 0.0); 4]);
    }
    let xs = quartic_roots(&c);
    (lead, xs.map(|x| x * width + Complex::new(centre, 0.0)))
}

/// `C_j0 = 16[(μj−λj)² + λ_{3−j}² + 2λ_{3−j}(λj+μj)]`.
pub fn discriminant_leading_coefficient(params: &SystemParams, j: Queue) -> f64 {
    let p = params.oriented(j);
    let (l1, l2, m1) = (p.lambda1(), p.lambda2(), p.mu1());
    16.0 * ((m1 - l1).powi(2) + l2 * l2 + 2.0 * l2 * (l1 + m1))
}

/// Constants with the branch points filled in.
pub fn complete_constants(params: &SystemParams) -> Result<DerivedConstants, GeometryError> {
    let mut c = characteristic_constants(params);
    let b1 = branch_points(params, Queue::One)?;
    let b2 = branch_points(params, Queue::Two)?;
    c.eta1 = Some(EtaPair {
        eta_1: b1.eta_1,
        eta_2: b1.eta_2,
    });
    c.eta2 = Some(EtaPair {
        eta_1: b2.eta_1,
        eta_2: b2.eta_2,
    });
    Ok(c)
}

/// Intersection points of the line `s1 + s2 = 2z` with both curves.
///
/// Curve 1 points are `(a1, A1)`, `(b1, B1)`, `(c1, C1)` with lower case the `s1` coordinate;
/// curve 2 points are `(A2, a2)`, `(B2, b2)`, `(C2, c2)` with upper case the `s1` coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct IntersectionFrame {
    pub w1: RootTriple,
    pub w2: RootTriple,
    pub z: f64,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub A1: f64,
    pub B1: f64,
    pub C1: f64,
    pub A2: f64,
    pub B2: f64,
    pub C2: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

/// Root continuation for both curves, valid on `z > η_j^(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    pub params: SystemParams,
    pub constants: DerivedConstants,
    pub branch1: BranchPoints,
    pub branch2: BranchPoints,
}

impl Geometry {
    pub fn new(params: &SystemParams) -> Result<Self, GeometryError> {
        let branch1 = branch_points(params, Queue::One)?;
        let branch2 = branch_points(params, Queue::Two)?;
        let mut constants = characteristic_constants(params);
        constants.eta1 = Some(EtaPair {
            eta_1: branch1.eta_1,
            eta_2: branch1.eta_2,
        });
        constants.eta2 = Some(EtaPair {
            eta_1: branch2.eta_1,
            eta_2: branch2.eta_2,
        });
        Ok(Geometry {
            params: *params,
            constants,
            branch1,
            branch2,
        })
    }

    pub fn branch(&self, j: Queue) -> &BranchPoints {
        match j {
            Queue::One => &self.branch1,
            Queue::Two => &self.branch2,
        }
    }

    /// Lower edge of the slice range on which the roots of both cubics are tracked.
    pub fn tracked_floor(&self) -> f64 {
        self.branch1.eta_1.max(self.branch2.eta_1)
    }

    /// Roots of `R_j(·, z)` continued from `z > 0`.
    ///
    /// `Δ_j` has no real root above `η_j^(1)`, so the three real roots never meet on that
    /// half-line and ascending order is the continuous labelling.
    pub fn roots(&self, j: Queue, z: f64) -> Result<RootTriple, GeometryError> {
        if z > 0.0 {
            return real_roots(&self.params, j, z);
        }
        let eta = self.branch(j).eta_1;
        if !(z > eta) {
            return Err(GeometryError::OutsideTrackedDomain {
                queue: j.index(),
                z,
                eta,
            });
        }
        let c = cubic_coeffs(&self.params, j, z);
        let r = sorted_real_roots(&c).ok_or(GeometryError::ComplexRoots {
            queue: j.index(),
            z,
        })?;
        if !(r[0] < r[1] && r[1] < r[2]) {
            return Err(GeometryError::OrderingViolation {
                queue: j.index(),
                z,
                roots: r,
            });
        }
        Ok(RootTriple {
            alpha: r[0],
            beta: r[1],
            gamma: r[2],
            z,
        })
    }

    pub fn frame(&self, z: f64) -> Result<IntersectionFrame, GeometryError> {
        let w1 = self.roots(Queue::One, z)?;
        let w2 = self.roots(Queue::Two, z)?;
        Ok(IntersectionFrame {
            w1,
            w2,
            z,
            a1: z + w1.alpha,
            b1: z + w1.beta,
            c1: z + w1.gamma,
            A1: z - w1.alpha,
            B1: z - w1.beta,
            C1: z - w1.gamma,
            A2: z + w2.alpha,
            B2: z + w2.beta,
            C2: z + w2.gamma,
            a2: z - w2.alpha,
            b2: z - w2.beta,
            c2: z - w2.gamma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> SystemParams {
        SystemParams::new(1.0, 1.0, 3.0, 4.5).unwrap()
    }

    #[test]
    fn boundary_evaluations() {
        let p = worked();
        assert!((r_eval(&p, Queue::One, -1.0, 1.0) - 6.0).abs() < 1e-12);
        assert!((r_eval(&p, Queue::One, 1.0, 1.0) + 36.0).abs() < 1e-12);
        assert!((r_eval(&p, Queue::Two, 1.0, 1.0) + 9.0).abs() < 1e-12);
        assert!((r_eval(&p, Queue::Two, -1.0, 1.0) - 2.0 * 3.0 * (2.0 - 1.0 + 4.5)).abs() < 1e-12);
    }

    #[test]
    fn roots_bracket_and_solve() {
        let p = worked();
        for j in [Queue::One, Queue::Two] {
            for z in [1e-6, 0.01, 0.5, 1.0, 7.0, 1e3] {
                let t = real_roots(&p, j, z).unwrap();
                for r in t.as_array() {
                    let res = r_eval(&p, j, r, z);
                    assert!(res.abs() < 1e-9 * r.abs().powi(3).max(1.0), "j={j:?} z={z} r={r} res={res}");
                }
            }
        }
        assert!(real_roots(&p, Queue::One, 0.0).is_err());
    }

    #[test]
    fn worked_branch_points() {
        let p = worked();
        let b1 = branch_points(&p, Queue::One).unwrap();
        let b2 = branch_points(&p, Queue::Two).unwrap();
        assert!(b1.eta_2 < b1.eta_1 && b1.eta_1 < 0.0);
        assert!((b1.eta_1 + 1.506).abs() < 1e-3, "{}", b1.eta_1);
        assert!((b2.eta_1 + 2.255).abs() < 1e-3, "{}", b2.eta_1);
        for (j, b) in [(Queue::One, b1), (Queue::Two, b2)] {
            let c = cubic_coeffs(&p, j, b.eta_1);
            assert!(c.delta.abs() < 1e-7 * c.delta_scale(), "{:?}", c);
            let c2 = cubic_coeffs(&p, j, b.eta_2);
            assert!(c2.delta.abs() < 1e-7 * c2.delta_scale());
            let lead = discriminant_leading_coefficient(&p, j);
            assert!(lead > 0.0);
            assert!((b.leading_coefficient - lead).abs() < 1e-6 * lead);
            assert!(!b.coalescing());
            // The real pair of the quartic matches the tangency construction.
            assert!((b.delta_roots[0].0 - b.eta_1).abs() < 1e-6);
            assert!((b.delta_roots[1].0 - b.eta_2).abs() < 1e-6);
            assert!(b.delta_roots[2].1.abs() > 1e-6);
        }
    }

    #[test]
    fn continuation_below_zero() {
        let g = Geometry::new(&worked()).unwrap();
        let prev = g.roots(Queue::One, 1e-9).unwrap();
        let next = g.roots(Queue::One, -1e-9).unwrap();
        for (a, b) in prev.as_array().iter().zip(next.as_array()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(g.roots(Queue::One, -1.5).is_ok());
        assert_eq!(
            g.roots(Queue::One, -1.51).unwrap_err().code(),
            "outside_tracked_domain"
        );
    }

    #[test]
    fn frame_points_lie_on_curves() {
        let p = worked();
        let g = Geometry::new(&p).unwrap();
        for z in [-1.0, 0.3, 2.0] {
            let f = g.frame(z).unwrap();
            for (s1, s2) in [(f.a1, f.A1), (f.b1, f.B1), (f.c1, f.C1)] {
                let k = p.kernels(s1, s2).unwrap();
                assert!(k.k1.abs() < 1e-9 * (1.0 + s1.abs()));
            }
            for (s1, s2) in [(f.A2, f.a2), (f.B2, f.b2), (f.C2, f.c2)] {
                let k = p.kernels(s1, s2).unwrap();
                assert!(k.k2.abs() < 1e-9 * (1.0 + s2.abs()));
            }
        }
    }
}
