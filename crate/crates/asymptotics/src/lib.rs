//! Singularity regimes of the boundary transforms, their residues, and the resulting tail
//! estimates for the workloads `U1`, `U2`.

mod regions;

pub use regions::{boundary_f, boundary_g, region_grid, GridMode, RegionCell, RegionGrid};

use core_params::{characteristic_constants, ParamError, Queue, SystemParams};
use serde::Serialize;
use cubic_geometry::Geometry;
use series_engine::{hol_conditions, ExtensionDomain, Model, SeriesError};
use std::f64::consts::PI;
use thiserror::Error;

/// Margins smaller than this make the `(I±)`/`(II±)` classification unstable.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Step of the central difference used for `M′`.
pub const DERIVATIVE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("s = {s} does not exceed the singularity {threshold} of queue {queue}")]
    BelowSingularity { queue: u8, s: f64, threshold: f64 },
}

impl AsymptoticsError {
    pub fn code(&self) -> &'static str {
        match self {
            AsymptoticsError::Params(e) => e.code(),
            AsymptoticsError::Series(e) => e.code(),
            AsymptoticsError::BelowSingularity { .. } => "below_singularity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    A1,
    A2,
    A3,
    A4,
}

impl CaseLabel {
    pub fn from_conditions(i_plus: bool, ii_plus: bool) -> Self {
        match (i_plus, ii_plus) {
            (true, true) => CaseLabel::A1,
            (false, true) => CaseLabel::A2,
            (true, false) => CaseLabel::A3,
            (false, false) => CaseLabel::A4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::A1 => "a1",
            CaseLabel::A2 => "a2",
            CaseLabel::A3 => "a3",
            CaseLabel::A4 => "a4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityType {
    SimplePole,
    AlgebraicOrder1,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub case_label: CaseLabel,
    pub cond_i: Sign,
    pub cond_ii: Sign,
    pub margin_i: f64,
    pub margin_ii: f64,
    /// Labels consistent with a margin within [`TIE_TOLERANCE`] flipping sign; a single entry when stable.
    pub tie_cases: Vec<CaseLabel>,
    pub tie: bool,
    pub s_tilde_1: f64,
    pub s_tilde_2: f64,
    pub singularity_type_1: SingularityType,
    pub singularity_type_2: SingularityType,
    pub vm_abscissa: f64,
}

impl Classification {
    pub fn s_tilde(&self, j: Queue) -> f64 {
        match j {
            Queue::One => self.s_tilde_1,
            Queue::Two => self.s_tilde_2,
        }
    }

    pub fn pole(&self, j: Queue) -> bool {
        match j {
            Queue::One => self.cond_i == Sign::Plus,
            Queue::Two => self.cond_ii == Sign::Plus,
        }
    }
}

fn sign(plus: bool) -> Sign {
    if plus {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

fn singularity(plus: bool) -> SingularityType {
    if plus {
        SingularityType::SimplePole
    } else {
        SingularityType::AlgebraicOrder1
    }
}

/// Case `a1`–`a4` from the two rate conditions, with the decay rates `s̃1`, `s̃2` and the left
/// edge of the half-plane on which `M` extends.
pub fn classify_case(params: &SystemParams) -> Result<Classification, AsymptoticsError> {
    let c = characteristic_constants(params);
    let hc = hol_conditions(params);
    let (ip, iip) = (hc.i_plus(), hc.ii_plus());
    let flips = |m: f64, v: bool| -> Vec<bool> {
        if m.abs() < TIE_TOLERANCE {
            vec![v, !v]
        } else {
            vec![v]
        }
    };
    let mut tie_cases = Vec::new();
    for a in flips(hc.margin_i, ip) {
        for b in flips(hc.margin_ii, iip) {
            tie_cases.push(CaseLabel::from_conditions(a, b));
        }
    }
    let s0 = c.sigma0_plus;
    let geom = Geometry::new(params).map_err(SeriesError::from)?;
    let domain = ExtensionDomain::new(&geom);
    Ok(Classification {
        case_label: CaseLabel::from_conditions(ip, iip),
        cond_i: sign(ip),
        cond_ii: sign(iip),
        margin_i: hc.margin_i,
        margin_ii: hc.margin_ii,
        tie: tie_cases.len() > 1,
        tie_cases,
        s_tilde_1: if ip { s0 } else { c.zeta1_plus },
        s_tilde_2: if iip { s0 } else { c.zeta2_plus },
        singularity_type_1: singularity(ip),
        singularity_type_2: singularity(iip),
        vm_abscissa: domain.abscissa,
    })
}

/// Workload transform of queue `j` when the other queue has preemptive priority:
/// `(1−ϱ)(μ1+s)ξ2+(s) / (λ1(s − ξ2+(s)))` for j = 1.
pub fn hol_transform(params: &SystemParams, j: Queue, s: f64) -> Result<f64, AsymptoticsError> {
    let p = params.oriented(j);
    let (l1, m1) = (p.lambda1(), p.mu1());
    let class = classify_case(params)?;
    let threshold = class.s_tilde(j);
    if !(s > threshold) {
        return Err(AsymptoticsError::BelowSingularity {
            queue: j.index(),
            s,
            threshold,
        });
    }
    if s.abs() < 1e-7 {
        // ξ2+(s) ≈ s/T2′(0): the quotient tends to μ1(1−ϱ)/(λ1(T2′(0) − 1)) = 1.
        let t = p.t_prime(Queue::Two, 0.0)?;
        return Ok(m1 * (1.0 - p.rho()) / (l1 * (t - 1.0)));
    }
    let x = p.xi_branches(Queue::Two, s)?.plus;
    Ok((1.0 - p.rho()) * (m1 + s) * x / (l1 * (s - x)))
}

/// A constant that could not be computed, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unavailable {
    pub constant: &'static str,
    pub code: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub classification: Classification,
    pub sigma0_plus: f64,
    pub zeta1_plus: f64,
    pub zeta2_plus: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub r01: Option<f64>,
    pub r02: Option<f64>,
    pub r1_plus: Option<f64>,
    pub r2_plus: Option<f64>,
    /// `r1+` without the `M′` terms, as printed in the source derivation (diagnostic).
    pub r1_plus_uncorrected: Option<f64>,
    pub r2_plus_uncorrected: Option<f64>,
    pub d01: f64,
    pub d02: f64,
    pub e01: f64,
    pub e02: f64,
    pub z1_plus: f64,
    pub z2_plus: f64,
    /// `T2′(σ0+)/(T2′(σ0+) − 1)` and its mirror; `None` if the denominator is below 1e−8.
    pub pole_factor_1: Option<f64>,
    pub pole_factor_2: Option<f64>,
    pub unavailable: Vec<Unavailable>,
}

/// `D_{0,1} = 4λ1λ2 + (μ2 + λ1 − λ2)²`; `D_{0,2}` by permutation.
pub fn d0(params: &SystemParams, j: Queue) -> f64 {
    let p = params.oriented(j);
    4.0 * p.lambda1() * p.lambda2() + (p.mu2() + p.lambda1() - p.lambda2()).powi(2)
}

/// `E_{0,1} = √(D_{0,1}(ζ1+ − ζ1−)) / (2(μ1 + ζ1+))`, so that `ξ2+(s) = a2+ + E_{0,1}√(s − ζ1+) + o(√·)`.
pub fn e0(params: &SystemParams, j: Queue) -> f64 {
    let p = params.oriented(j);
    let (zm, zp) = p.branch_cut(Queue::One);
    (d0(params, j) * (zp - zm)).sqrt() / (2.0 * (p.mu1() + zp))
}

/// `M′(z)` by a fourth-order central difference of the series.
pub fn m_derivative(model: &Model, z: f64) -> Result<(f64, f64), SeriesError> {
    let h = DERIVATIVE_STEP;
    let f = |x: f64| model.m_eval(x);
    let (a, b, c, d) = (f(z - 2.0 * h)?, f(z - h)?, f(z + h)?, f(z + 2.0 * h)?);
    let g = |a: f64, b: f64, c: f64, d: f64| (a - 8.0 * b + 8.0 * c - d) / (12.0 * h);
    Ok((g(a.m1, b.m1, c.m1, d.m1), g(a.m2, b.m2, c.m2, d.m2)))
}

struct Residue {
    corrected: f64,
    uncorrected: f64,
}

/// Residue of `G_j` at its simple pole `σ0+`.
fn pole_residue(model: &Model, j: Queue) -> Result<f64, AsymptoticsError> {
    let p = &model.params;
    let s0 = model.geometry.constants.sigma0_plus;
    let t = p.t_prime(j.other(), s0)?;
    let m = model.m_eval(s0)?;
    let (k1, k2) = (p.lambda1() * p.mu1(), p.lambda2() * p.mu2());
    let bracket = match j {
        Queue::One => model.j_value(j, s0) - k1 * m.m1 / (p.mu1() + s0) + k2 * m.m2 / (p.mu2() + s0),
        Queue::Two => model.j_value(j, s0) + k1 * m.m1 / (p.mu1() + s0) - k2 * m.m2 / (p.mu2() + s0),
    };
    Ok(t / (t - 1.0) * bracket)
}

/// Coefficient of `√(s − ζ_j+)` in `G_j` at its branch point.
///
/// Along the `ξ+` display both `ξ_{3−j}+(s)` and the argument `(s + ξ+(s))/2` of `M` move by
/// `O(√t)`; the expansion therefore carries `M′` terms next to the `M` term.
fn algebraic_residue(model: &Model, j: Queue) -> Result<Residue, AsymptoticsError> {
    let p = &model.params;
    let c = &model.geometry.constants;
    let (zeta, a_other) = match j {
        Queue::One => (c.zeta1_plus, c.a2_plus),
        Queue::Two => (c.zeta2_plus, c.a1_plus),
    };
    let z = 0.5 * (zeta + a_other);
    let e = e0(p, j);
    let g0 = model.g_at_companion(j, zeta, a_other)?;
    let m = model.m_eval(z)?;
    let (dm1, dm2) = m_derivative(model, z)?;
    let (l1m1, l2m2) = (p.lambda1() * p.mu1(), p.lambda2() * p.mu2());
    let (m1, m2) = (p.mu1(), p.mu2());
    let (static_term, moving) = match j {
        Queue::One => (
            -l2m2 * m.m2 / (m2 + a_other).powi(2),
            -l1m1 * dm1 / (2.0 * (m1 + zeta)) + l2m2 * dm2 / (2.0 * (m2 + a_other)),
        ),
        Queue::Two => (
            -l1m1 * m.m1 / (m1 + a_other).powi(2),
            -l2m2 * dm2 / (2.0 * (m2 + zeta)) + l1m1 * dm1 / (2.0 * (m1 + a_other)),
        ),
    };
    let scale = e / (zeta - a_other);
    Ok(Residue {
        corrected: scale * (g0 + static_term + moving),
        uncorrected: scale * (g0 + static_term),
    })
}

fn pole_factor(params: &SystemParams, j: Queue, s0: f64) -> Option<f64> {
    let t = params.t_prime(j.other(), s0).ok()?;
    if (t - 1.0).abs() < 1e-8 {
        None
    } else {
        Some(t / (t - 1.0))
    }
}

/// Fills the residues applicable to the case. Constants needing `M` where the series is not
/// admissible are listed in `unavailable`; the rates are always reported.
pub fn tail_constants(model: &Model) -> Result<TailReport, AsymptoticsError> {
    let p = &model.params;
    let classification = classify_case(p)?;
    let c = &model.geometry.constants;
    let mut report = TailReport {
        sigma0_plus: c.sigma0_plus,
        zeta1_plus: c.zeta1_plus,
        zeta2_plus: c.zeta2_plus,
        tau1: c.tau1,
        tau2: c.tau2,
        r01: None,
        r02: None,
        r1_plus: None,
        r2_plus: None,
        r1_plus_uncorrected: None,
        r2_plus_uncorrected: None,
        d01: d0(p, Queue::One),
        d02: d0(p, Queue::Two),
        e01: e0(p, Queue::One),
        e02: e0(p, Queue::Two),
        z1_plus: 0.5 * (c.zeta2_plus + c.a1_plus),
        z2_plus: 0.5 * (c.zeta1_plus + c.a2_plus),
        pole_factor_1: pole_factor(p, Queue::One, c.sigma0_plus),
        pole_factor_2: pole_factor(p, Queue::Two, c.sigma0_plus),
        unavailable: Vec::new(),
        classification,
    };
    for j in [Queue::One, Queue::Two] {
        let pole = report.classification.pole(j);
        let name = match (j, pole) {
            (Queue::One, true) => "r01",
            (Queue::Two, true) => "r02",
            (Queue::One, false) => "r1_plus",
            (Queue::Two, false) => "r2_plus",
        };
        let outcome = if pole {
            pole_residue(model, j).map(|r| (r, None))
        } else {
            algebraic_residue(model, j).map(|r| (r.corrected, Some(r.uncorrected)))
        };
        match outcome {
            Ok((r, raw)) => match (j, pole) {
                (Queue::One, true) => report.r01 = Some(r),
                (Queue::Two, true) => report.r02 = Some(r),
                (Queue::One, false) => {
                    report.r1_plus = Some(r);
                    report.r1_plus_uncorrected = raw;
                }
                (Queue::Two, false) => {
                    report.r2_plus = Some(r);
                    report.r2_plus_uncorrected = raw;
                }
            },
            Err(e) => report.unavailable.push(Unavailable {
                constant: name,
                code: e.code(),
                detail: e.to_string(),
            }),
        }
    }
    Ok(report)
}

/// Leading-order estimate of `P(U_j > u)`: `−(σ0+ + μ1) r0,1 e^{σ0+ u} / (λ1 σ0+)` under `(I+)`,
/// `(ζ1+ + μ1) r1+ e^{ζ1+ u} / (2 λ1 ζ1+ √π u^{3/2})` under `(I−)`; queue 2 by permutation.
/// `None` when the needed residue is unavailable.
pub fn tail_estimate(params: &SystemParams, report: &TailReport, j: Queue, u: f64) -> Option<f64> {
    let (l, m) = (params.arrival(j), params.service(j));
    if report.classification.pole(j) {
        let r = match j {
            Queue::One => report.r01?,
            Queue::Two => report.r02?,
        };
        let s0 = report.sigma0_plus;
        Some(-(s0 + m) * r / (l * s0) * (s0 * u).exp())
    } else {
        let (r, zeta) = match j {
            Queue::One => (report.r1_plus?, report.zeta1_plus),
            Queue::Two => (report.r2_plus?, report.zeta2_plus),
        };
        Some((zeta + m) * r / (2.0 * l * zeta * PI.sqrt()) * (zeta * u).exp() / u.powf(1.5))
    }
}
