use core_params::{Queue, SystemParams};
use cubic_geometry::Geometry;
use iteration_maps::Vec2;
use serde::Serialize;

use crate::{evaluate, ExtensionDomain, SeriesError, SeriesValue, TruncationPolicy};

/// Abscissae for the `z → 0+` limit of the series.
pub const PSI_NODES: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
/// Abscissae for the `s → 0+` limit of the boundary transforms.
pub const EMPTY_NODES: [f64; 3] = [5e-2, 2.5e-2, 1.25e-2];
/// Kernel values closer to zero than this make the quotients numerically indeterminate.
pub const KERNEL_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiConstants {
    pub psi1_0: f64,
    pub psi2_0: f64,
}

impl PsiConstants {
    pub fn sum(&self) -> f64 {
        self.psi1_0 + self.psi2_0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MVector {
    pub m1: f64,
    pub m2: f64,
}

/// Extra halvings allowed beyond the prescribed nodes before a limit is declared unstable.
pub const MAX_EXTRA_HALVINGS: usize = 8;

/// Three-point Richardson value on `x, x/2, x/4`, exact for `f0 + c1·x + c2·x²`.
pub fn richardson3(v: [f64; 3]) -> f64 {
    let r0 = 2.0 * v[1] - v[0];
    let r1 = 2.0 * v[2] - v[1];
    (4.0 * r1 - r0) / 3.0
}

/// Result of a guarded `x → 0+` limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extrapolant {
    pub value: Vec<f64>,
    /// Componentwise gap between the last two three-point windows.
    pub spread: f64,
    /// Smallest abscissa evaluated.
    pub finest_node: f64,
    /// Three-point minus two-point extrapolant on the prescribed nodes (diagnostic only).
    pub prescribed_two_point_gap: f64,
}

/// Limits `x → 0+` of a vector function from the halving sequence starting at `nodes`.
///
/// Windows `(x_k, x_{k+1}, x_{k+2})` are extrapolated and successive windows compared; the
/// sequence is refined until two agree within `100·tol`.
pub fn limit_at_zero<F>(
    quantity: &'static str,
    nodes: [f64; 3],
    tol: f64,
    mut f: F,
) -> Result<Extrapolant, SeriesError>
where
    F: FnMut(f64) -> Result<Vec<f64>, SeriesError>,
{
    let mut xs: Vec<f64> = nodes.to_vec();
    let mut vals: Vec<Vec<f64>> = xs.iter().map(|&x| f(x)).collect::<Result<_, _>>()?;
    let n = vals[0].len();
    let window = |vals: &[Vec<f64>], k: usize| -> Vec<f64> {
        (0..n)
            .map(|c| richardson3([vals[k][c], vals[k + 1][c], vals[k + 2][c]]))
            .collect()
    };
    let mut prev = window(&vals, 0);
    let prescribed_two_point_gap = (0..n)
        .map(|c| (prev[c] - (2.0 * vals[2][c] - vals[1][c])).abs())
        .fold(0.0, f64::max);
    let mut spread = f64::INFINITY;
    for _ in 0..MAX_EXTRA_HALVINGS {
        let x = 0.5 * xs[xs.len() - 1];
        vals.push(f(x)?);
        xs.push(x);
        let next = window(&vals, xs.len() - 3);
        spread = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev = next;
        if spread <= 100.0 * tol {
            return Ok(Extrapolant {
                value: prev,
                spread,
                finest_node: x,
                prescribed_two_point_gap,
            });
        }
    }
    Err(SeriesError::Extrapolation {
        quantity,
        spread,
        finest_node: xs[xs.len() - 1],
    })
}

/// Which display produced a boundary-transform value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GForm {
    /// `M` evaluated at `(s + ξ−(s))/2`.
    Minus,
    /// `M` evaluated at `h(z) = (s + ξ+(s))/2`.
    Plus,
    /// Limit at the origin.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GValue {
    pub value: f64,
    pub form: GForm,
    /// The other display, when it is also evaluable.
    pub cross_check: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FTransforms {
    pub f1: f64,
    pub f2: f64,
    pub g1: f64,
    pub g2: f64,
    pub h: f64,
    pub f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmptyProbabilities {
    pub p_u1_0: f64,
    pub p_u2_0: f64,
    pub g1_0: f64,
    pub g2_0: f64,
}

/// The solved model: geometry, admissible domain, policy and the boundary constants.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: SystemParams,
    pub geometry: Geometry,
    pub domain: ExtensionDomain,
    pub policy: TruncationPolicy,
    pub psi: PsiConstants,
}

pub fn script_l(
    geom: &Geometry,
    i: usize,
    z: f64,
    policy: &TruncationPolicy,
) -> Result<(Vec2, f64), SeriesError> {
    let domain = ExtensionDomain::new(geom);
    let v = evaluate(geom, &domain, z, policy)?;
    Ok((v.values[i.min(2)], v.error_estimate))
}

/// `ψ1(0)`, `ψ2(0)` from the series limits `𝓛^(i)(0+)`.
pub fn psi_constants(geom: &Geometry, policy: &TruncationPolicy) -> Result<PsiConstants, SeriesError> {
    let domain = ExtensionDomain::new(geom);
    let lim = limit_at_zero("series_at_origin", PSI_NODES, policy.tol, |z| {
        let v = evaluate(geom, &domain, z, policy)?.values;
        Ok(v.iter().flat_map(|c| c.iter().copied()).collect())
    })?;
    let mut l0 = [[0.0; 2]; 3];
    for i in 0..3 {
        for j in 0..2 {
            l0[i][j] = lim.value[2 * i + j];
        }
    }
    Ok(psi_from_limits(&geom.params, &l0))
}

pub fn psi_from_limits(p: &SystemParams, l0: &[Vec2; 3]) -> PsiConstants {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    let a: Vec<f64> = l0.iter().map(|v| l1 * v[0] - l2 * v[1]).collect();
    let c = 1.0 - p.rho();
    let den = 1.0 - a[1] + a[2];
    PsiConstants {
        psi1_0: (l1 * c + a[0] + p.lambda() * c * a[2]) / den,
        psi2_0: (l2 * c - a[0] - p.lambda() * c * a[1]) / den,
    }
}

impl Model {
    pub fn new(params: &SystemParams, policy: TruncationPolicy) -> Result<Self, SeriesError> {
        let geometry = Geometry::new(params)?;
        let psi = psi_constants(&geometry, &policy)?;
        Ok(Model {
            params: *params,
            domain: ExtensionDomain::new(&geometry),
            geometry,
            policy,
            psi,
        })
    }

    pub fn with_default_policy(params: &SystemParams) -> Result<Self, SeriesError> {
        Self::new(params, TruncationPolicy::for_params(params))
    }

    pub fn series(&self, z: f64) -> Result<SeriesValue, SeriesError> {
        evaluate(&self.geometry, &self.domain, z, &self.policy)
    }

    pub fn m_eval(&self, z: f64) -> Result<MVector, SeriesError> {
        let v = self.series(z)?.combine(self.psi.psi1_0, self.psi.psi2_0);
        Ok(MVector { m1: v[0], m2: v[1] })
    }

    /// `J1(s) = (1−ϱ)(λ − λ1 b1(s)) − ψ2(0)`, `J2` symmetrically.
    pub fn j_value(&self, j: Queue, s: f64) -> f64 {
        let p = &self.params;
        let other_psi = match j {
            Queue::One => self.psi.psi2_0,
            Queue::Two => self.psi.psi1_0,
        };
        (1.0 - p.rho()) * (p.lambda() - p.arrival(j) * p.service_transform(j, s)) - other_psi
    }

    /// `G_j(s)` through a companion value `x = ξ_{3−j}±(s)` and `M((s + x)/2)`.
    pub fn g_at_companion(&self, j: Queue, s: f64, x: f64) -> Result<f64, SeriesError> {
        let p = &self.params;
        let m = self.m_eval(0.5 * (s + x))?;
        let (k1, k2) = (p.lambda1() * p.mu1(), p.lambda2() * p.mu2());
        let num = match j {
            Queue::One => self.j_value(j, s) - k1 * m.m1 / (p.mu1() + s) + k2 * m.m2 / (p.mu2() + x),
            Queue::Two => self.j_value(j, s) + k1 * m.m1 / (p.mu1() + x) - k2 * m.m2 / (p.mu2() + s),
        };
        Ok(num / (s - x))
    }

    /// `G_j(s)` by the `ξ+` display.
    pub fn g_plus(&self, j: Queue, s: f64) -> Result<f64, SeriesError> {
        let x = self.params.xi_branches(j.other(), s)?.plus;
        self.g_at_companion(j, s, x)
    }

    /// `G_j(s)` by the `ξ−` display; requires `(s + ξ−(s))/2` inside the admissible domain.
    pub fn g_minus(&self, j: Queue, s: f64) -> Result<f64, SeriesError> {
        let x = self.params.xi_branches(j.other(), s)?.minus;
        self.g_at_companion(j, s, x)
    }

    /// Argument of `M` used by the `ξ−` display; it solves `s = z + γ2(z)` (j = 1) or `s = z − α1(z)` (j = 2).
    pub fn minus_form_argument(&self, j: Queue, s: f64) -> Result<f64, SeriesError> {
        let x = self.params.xi_branches(j.other(), s)?.minus;
        Ok(0.5 * (s + x))
    }

    /// Principal value of `G_j(s)`: the `ξ−` display where it is evaluable, else the `ξ+` one;
    /// at `s = 0` both are `0/0` and the extrapolated limit is returned.
    pub fn g_boundary(&self, j: Queue, s: f64) -> Result<GValue, SeriesError> {
        if s == 0.0 {
            return Ok(GValue {
                value: self.g_at_origin(j)?,
                form: GForm::Limit,
                cross_check: None,
            });
        }
        let minus = self.g_minus(j, s);
        let plus = self.g_plus(j, s);
        match (minus, plus) {
            (Ok(m), Ok(p)) => Ok(GValue {
                value: m,
                form: GForm::Minus,
                cross_check: Some(p),
            }),
            (Ok(m), Err(_)) => Ok(GValue {
                value: m,
                form: GForm::Minus,
                cross_check: None,
            }),
            (Err(_), Ok(p)) => Ok(GValue {
                value: p,
                form: GForm::Plus,
                cross_check: None,
            }),
            (Err(e), Err(_)) => Err(e),
        }
    }

    /// `G_j(0) = lim_{s→0+} G_j(s)`, extrapolated from [`EMPTY_NODES`].
    pub fn g_at_origin(&self, j: Queue) -> Result<f64, SeriesError> {
        let lim = limit_at_zero("boundary_transform_at_origin", EMPTY_NODES, self.policy.tol, |s| {
            Ok(vec![self.g_plus(j, s)?])
        })?;
        Ok(lim.value[0])
    }

    pub fn empty_probabilities(&self) -> Result<EmptyProbabilities, SeriesError> {
        let g1_0 = self.g_at_origin(Queue::One)?;
        let g2_0 = self.g_at_origin(Queue::Two)?;
        let base = 1.0 - self.params.rho();
        Ok(EmptyProbabilities {
            p_u1_0: base + g2_0,
            p_u2_0: base + g1_0,
            g1_0,
            g2_0,
        })
    }

    fn g_value(&self, j: Queue, s: f64) -> Result<f64, SeriesError> {
        Ok(self.g_boundary(j, s)?.value)
    }

    /// `H(s1, s2)` from `M((s1+s2)/2)`.
    pub fn h_value(&self, s1: f64, s2: f64) -> Result<f64, SeriesError> {
        let p = &self.params;
        let m = self.m_eval(0.5 * (s1 + s2))?;
        Ok(p.lambda1() * p.mu1() / (p.mu1() + s1) * m.m1 - p.lambda2() * p.mu2() / (p.mu2() + s2) * m.m2)
    }

    pub fn f_transforms(&self, s1: f64, s2: f64) -> Result<FTransforms, SeriesError> {
        let p = &self.params;
        let k = p.kernels(s1, s2)?;
        if k.k1.abs() < KERNEL_GUARD || k.k2.abs() < KERNEL_GUARD {
            return Err(SeriesError::KernelZero { s1, s2 });
        }
        let h = self.h_value(s1, s2)?;
        let g1 = self.g_value(Queue::One, s1)?;
        let g2 = self.g_value(Queue::Two, s2)?;
        let f1 = (self.j_value(Queue::Two, s2) - k.k2 * g2 + h) / k.k1;
        let f2 = (self.j_value(Queue::One, s1) - k.k1 * g1 - h) / k.k2;
        Ok(FTransforms {
            f1,
            f2,
            g1,
            g2,
            h,
            f: 1.0 - p.rho() + f1 + g1 + f2 + g2,
        })
    }

    /// Laplace transform of the workload `U_j` alone: `F(s, 0)` for j = 1, `F(0, s)` for j = 2.
    pub fn marginal(&self, j: Queue, s: f64) -> Result<f64, SeriesError> {
        let t = match j {
            Queue::One => self.f_transforms(s, 0.0)?,
            Queue::Two => self.f_transforms(0.0, s)?,
        };
        Ok(t.f)
    }

    /// Total mass `F(0+, 0+)`, extrapolated along the diagonal.
    pub fn total_mass(&self) -> Result<f64, SeriesError> {
        let lim = limit_at_zero("total_mass", EMPTY_NODES, self.policy.tol, |s| {
            Ok(vec![self.f_transforms(s, s)?.f])
        })?;
        Ok(lim.value[0])
    }
}
