use core_params::SystemParams;
use cubic_geometry::Geometry;
use serde::Serialize;

/// Margins of the two rate conditions; condition `(I+)` holds iff `margin_i ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolConditions {
    /// `μ2 + λ − (2μ2 − μ1)√ϱ2 − μ1`.
    pub margin_i: f64,
    /// `μ1 + λ − (2μ1 − μ2)√ϱ1 − μ2`.
    pub margin_ii: f64,
}

impl HolConditions {
    pub fn i_plus(&self) -> bool {
        self.margin_i >= 0.0
    }
    pub fn ii_plus(&self) -> bool {
        self.margin_ii >= 0.0
    }
}

pub fn hol_conditions(p: &SystemParams) -> HolConditions {
    let (l, m1, m2) = (p.lambda(), p.mu1(), p.mu2());
    HolConditions {
        margin_i: m2 + l - (2.0 * m2 - m1) * p.rho2().sqrt() - m1,
        margin_ii: m1 + l - (2.0 * m1 - m2) * p.rho1().sqrt() - m2,
    }
}

/// Half-plane `Re z > abscissa` on which `M` extends analytically, together with the
/// floor below which the real roots of the cubics can no longer be tracked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionDomain {
    pub conditions: HolConditions,
    pub abscissa: f64,
    pub tracked_floor: f64,
}

impl ExtensionDomain {
    pub fn new(geom: &Geometry) -> Self {
        let c = &geom.constants;
        let conditions = hol_conditions(&geom.params);
        let eta1 = geom.branch1.eta_1;
        let eta2 = geom.branch2.eta_1;
        let half1 = 0.5 * (c.sigma0_plus + c.tau1);
        let half2 = 0.5 * (c.sigma0_plus + c.tau2);
        let abscissa = match (conditions.i_plus(), conditions.ii_plus()) {
            (true, true) => half1.max(half2),
            (false, true) => half1.max(eta2),
            (true, false) => eta1.max(half2),
            (false, false) => eta1.max(eta2),
        };
        ExtensionDomain {
            conditions,
            abscissa,
            tracked_floor: geom.tracked_floor(),
        }
    }

    /// Lowest real argument at which the series may be attempted.
    pub fn floor(&self) -> f64 {
        self.abscissa.max(self.tracked_floor)
    }

    pub fn admits(&self, z: f64) -> bool {
        z > 0.0 || z > self.floor()
    }
}
