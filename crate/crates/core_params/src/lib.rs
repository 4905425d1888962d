//! System parameters and closed-form kernel geometry for the two-queue
//! Shortest-Queue-First system with Poisson arrivals and exponential services.
//!
//! Every queue-2 quantity is obtained from its queue-1 counterpart evaluated on
//! [`SystemParams::swapped`], so the formulas below are written once.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative threshold under which a denominator is treated as an exact pole.
const POLE_EPS: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("rate {name} must be finite and strictly positive, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("unstable system: rho = {rho} >= 1")]
    Instability { rho: f64 },
    #[error("kernel pole: s{queue} = -mu{queue}")]
    KernelPole { queue: u8 },
    #[error("T{queue} has a pole at s = {s}")]
    TPole { queue: u8, s: f64 },
    #[error("s = {s} lies inside the branch cut ({lo}, {hi}) of xi{queue}")]
    InsideCut { queue: u8, s: f64, lo: f64, hi: f64 },
    #[error("xi{queue}+ has a pole at s = {s}")]
    XiPole { queue: u8, s: f64 },
}

impl ParamError {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            ParamError::InvalidRate { .. } => "invalid_rate",
            ParamError::Instability { .. } => "instability",
            ParamError::KernelPole { .. } => "kernel_pole",
            ParamError::TPole { .. } => "t_pole",
            ParamError::InsideCut { .. } => "inside_cut",
            ParamError::XiPole { .. } => "xi_pole",
        }
    }
}

/// Queue index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Queue {
    One,
    Two,
}

impl Queue {
    pub fn other(self) -> Queue {
        match self {
            Queue::One => Queue::Two,
            Queue::Two => Queue::One,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Queue::One => 1,
            Queue::Two => 2,
        }
    }

    pub fn from_index(j: u8) -> Option<Queue> {
        match j {
            1 => Some(Queue::One),
            2 => Some(Queue::Two),
            _ => None,
        }
    }
}

/// Arrival and service rates. Construction enforces positivity and `rho < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    lambda1: f64,
    lambda2: f64,
    mu1: f64,
    mu2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Loads {
    pub rho1: f64,
    pub rho2: f64,
    pub rho: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kernels {
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
}

/// The two solutions of a kernel equation, labelled per the real-axis branch convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiPair {
    pub plus: f64,
    pub minus: f64,
}

impl SystemParams {
    pub fn new(lambda1: f64, lambda2: f64, mu1: f64, mu2: f64) -> Result<Self, ParamError> {
        for (name, value) in [
            ("lambda1", lambda1),
            ("lambda2", lambda2),
            ("mu1", mu1),
            ("mu2", mu2),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::InvalidRate { name, value });
            }
        }
        let rho = lambda1 / mu1 + lambda2 / mu2;
        if !(rho < 1.0) {
            return Err(ParamError::Instability { rho });
        }
        Ok(SystemParams {
            lambda1,
            lambda2,
            mu1,
            mu2,
        })
    }

    /// Parse `"l1,l2,m1,m2"`.
    pub fn parse_list(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected four comma-separated rates, got {:?}", text));
        }
        let mut v = [0.0; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse::<f64>().map_err(|e| format!("bad rate {p:?}: {e}"))?;
        }
        SystemParams::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    pub fn mu1(&self) -> f64 {
        self.mu1
    }
    pub fn mu2(&self) -> f64 {
        self.mu2
    }
    pub fn rho1(&self) -> f64 {
        self.lambda1 / self.mu1
    }
    pub fn rho2(&self) -> f64 {
        self.lambda2 / self.mu2
    }
    pub fn rho(&self) -> f64 {
        self.rho1() + self.rho2()
    }
    pub fn lambda(&self) -> f64 {
        self.lambda1 + self.lambda2
    }

    pub fn arrival(&self, j: Queue) -> f64 {
        match j {
            Queue::One => self.lambda1,
            Queue::Two => self.lambda2,
        }
    }

    pub fn service(&self, j: Queue) -> f64 {
        match j {
            Queue::One => self.mu1,
            Queue::Two => self.mu2,
        }
    }

    /// Exchange the roles of the two queues.
    pub fn swapped(&self) -> SystemParams {
        SystemParams {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
            mu1: self.mu2,
            mu2: self.mu1,
        }
    }

    /// Parameters seen from queue `j`: identity for queue 1, swapped for queue 2.
    pub fn oriented(&self, j: Queue) -> SystemParams {
        match j {
            Queue::One => *self,
            Queue::Two => self.swapped(),
        }
    }

    pub fn loads(&self) -> Loads {
        Loads {
            rho1: self.rho1(),
            rho2: self.rho2(),
            rho: self.rho(),
            lambda: self.lambda(),
        }
    }

    /// Laplace transform of the exponential service time of queue `j`.
    pub fn service_transform(&self, j: Queue, s: f64) -> f64 {
        let mu = self.service(j);
        mu / (mu + s)
    }

    pub fn kernels(&self, s1: f64, s2: f64) -> Result<Kernels, ParamError> {
        if (s1 + self.mu1).abs() <= POLE_EPS * self.mu1 {
            return Err(ParamError::KernelPole { queue: 1 });
        }
        if (s2 + self.mu2).abs() <= POLE_EPS * self.mu2 {
            return Err(ParamError::KernelPole { queue: 2 });
        }
        let k = self.lambda1 * s1 / (s1 + self.mu1) + self.lambda2 * s2 / (s2 + self.mu2);
        Ok(Kernels {
            k,
            k1: s1 - k,
            k2: s2 - k,
        })
    }

    /// `P(s) = s² + (μ1+μ2−λ)s + μ1μ2(1−ϱ)`; its roots are the diagonal points of both curves.
    pub fn p_poly(&self, s: f64) -> f64 {
        s * s + (self.mu1 + self.mu2 - self.lambda()) * s + self.mu1 * self.mu2 * (1.0 - self.rho())
    }

    // Denominator of T1: d1(s) = s² − (λ−μ1)s − λ2μ1, roots σ1±.
    fn d1(&self, s: f64) -> f64 {
        s * s - (self.lambda() - self.mu1) * s - self.lambda2 * self.mu1
    }

    fn t1_checked(&self, s: f64) -> Result<f64, ParamError> {
        let d = self.d1(s);
        let scale = s * s + (self.lambda() - self.mu1).abs() * s.abs() + self.lambda2 * self.mu1;
        if d.abs() <= POLE_EPS * scale {
            return Err(ParamError::TPole { queue: 1, s });
        }
        Ok(-self.mu2 * s * (s + self.mu1 - self.lambda1) / d)
    }

    /// The rational parametrisation `T_j`: `K1(s, T1(s)) = 0` and `K2(T2(s), s) = 0`.
    pub fn t_map(&self, j: Queue, s: f64) -> Result<f64, ParamError> {
        self.oriented(j).t1_checked(s).map_err(|e| relabel(e, j))
    }

    /// `T_j'(s)` from the closed-form rational derivative.
    pub fn t_prime(&self, j: Queue, s: f64) -> Result<f64, ParamError> {
        let p = self.oriented(j);
        p.t1_checked(s).map_err(|e| relabel(e, j))?;
        let d = p.d1(s);
        let num = p.lambda2 * p.mu2 * ((s + p.mu1).powi(2) - p.lambda1 * p.mu1);
        Ok(num / (d * d))
    }

    /// `T_j''(s) = −2λ2μ2 C(s)/d(s)³` with `C` the cubic of the convexity remark.
    pub fn t_second(&self, j: Queue, s: f64) -> Result<f64, ParamError> {
        let p = self.oriented(j);
        p.t1_checked(s).map_err(|e| relabel(e, j))?;
        let d = p.d1(s);
        let (m, l1, l2) = (p.mu1, p.lambda1, p.lambda2);
        let c = s * s * s
            + 3.0 * m * s * s
            + 3.0 * m * (m - l1) * s
            + m * ((m - l1).powi(2) + l1 * l2);
        Ok(-2.0 * l2 * p.mu2 * c / (d * d * d))
    }

    /// Poles `(σ_j−, σ_j+)` of `T_j`.
    pub fn t_poles(&self, j: Queue) -> (f64, f64) {
        let p = self.oriented(j);
        let b = p.lambda() - p.mu1;
        let r = (b * b + 4.0 * p.lambda2 * p.mu1).sqrt();
        // σ− σ+ = −λ2μ1; use the product for the cancelling root.
        let plus = (b + r) / 2.0;
        (-p.lambda2 * p.mu1 / plus, plus)
    }

    /// Stationary points `(a_j−, a_j+) = −μj ∓ √(λjμj)` of `T_j`.
    pub fn stationary_points(&self, j: Queue) -> (f64, f64) {
        let (l, m) = (self.arrival(j), self.service(j));
        let r = (l * m).sqrt();
        (-m - r, -m + r)
    }

    /// Branch points `(ζ_j−, ζ_j+)` of the `ξ_{3−j}` branches, in the `s_j` variable.
    pub fn branch_cut(&self, j: Queue) -> (f64, f64) {
        // ζ_j± = T_{3−j}(a_{3−j}±); written with the queue-j parameters as (l1, m1) and the other as (l2, m2).
        let p = self.oriented(j);
        let (sm, sl) = (p.mu2.sqrt(), p.lambda2.sqrt());
        let wide = (sm + sl).powi(2);
        let narrow = (sm - sl).powi(2);
        let lo = -p.mu1 * wide / (p.lambda1 + wide);
        let hi = -p.mu1 * narrow / (p.lambda1 + narrow);
        (lo, hi)
    }

    /// `ξ_j±(s)`: the two roots of `K_j = 0` in `s_j` given `s_{3−j} = s` on the real axis.
    ///
    /// Labels follow the quadratic-formula convention right of the cut `[ζ_{3−j}−, ζ_{3−j}+]`
    /// and are swapped left of its midpoint, so `ξ−` stays analytic through `−μ_{3−j}` and
    /// `ξ+` carries the pole there.
    pub fn xi_branches(&self, j: Queue, s: f64) -> Result<XiPair, ParamError> {
        // Oriented so that the branch solves K2 = 0 in s2 for given s1 = s.
        let p = self.oriented(j.other());
        let (l1, l2, m1, m2) = (p.lambda1, p.lambda2, p.mu1, p.mu2);
        let a = s + m1;
        let b = m1 * m2 - l2 * m1 + (m2 - l1 - l2) * s;
        let c = -l1 * m2 * s;
        let disc = b * b + 4.0 * l1 * m2 * s * (m1 + s);
        let (lo, hi) = p.branch_cut(Queue::One);
        let disc = if disc < 0.0 {
            if s > lo && s < hi && disc < -1e-12 * (b * b).max(1e-300) {
                return Err(ParamError::InsideCut {
                    queue: j.index(),
                    s,
                    lo,
                    hi,
                });
            }
            0.0
        } else {
            disc
        };
        let r = disc.sqrt();
        if a.abs() <= POLE_EPS * m1 {
            return Err(ParamError::XiPole {
                queue: j.index(),
                s,
            });
        }
        // Standard labels: plus = (−b + r)/(2a), minus = (−b − r)/(2a), computed without cancellation.
        let (std_plus, std_minus) = if b >= 0.0 {
            let q = -b - r;
            let minus = q / (2.0 * a);
            let plus = if q == 0.0 { 0.0 } else { 2.0 * c / q };
            (plus, minus)
        } else {
            let q = -b + r;
            (q / (2.0 * a), 2.0 * c / q)
        };
        if s < 0.5 * (lo + hi) {
            Ok(XiPair {
                plus: std_minus,
                minus: std_plus,
            })
        } else {
            Ok(XiPair {
                plus: std_plus,
                minus: std_minus,
            })
        }
    }

    /// Roots `(σ0−, σ0+)` of `P`.
    pub fn p_roots(&self) -> (f64, f64) {
        let b = self.mu1 + self.mu2 - self.lambda();
        let disc = (self.mu1 - self.mu2 - self.lambda1 + self.lambda2).powi(2)
            + 4.0 * self.lambda1 * self.lambda2;
        let r = disc.sqrt();
        let c = self.mu1 * self.mu2 * (1.0 - self.rho());
        // b > 0 since μ1+μ2 > λ under stability.
        let minus = (-b - r) / 2.0;
        (minus, c / minus)
    }

    pub fn mu_equal(&self) -> bool {
        (self.mu1 - self.mu2).abs() <= 1e-12 * self.mu1.max(self.mu2)
    }
}

fn relabel(e: ParamError, j: Queue) -> ParamError {
    match e {
        ParamError::TPole { s, .. } => ParamError::TPole { queue: j.index(), s },
        other => other,
    }
}

/// Real discriminant roots `η_j^(2) < η_j^(1) < 0` of one cubic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaPair {
    pub eta_1: f64,
    pub eta_2: f64,
}

/// Characteristic points of the kernel curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub sigma0_minus: f64,
    pub sigma0_plus: f64,
    pub sigma1_minus: f64,
    pub sigma1_plus: f64,
    pub sigma2_minus: f64,
    pub sigma2_plus: f64,
    pub a1_minus: f64,
    pub a1_plus: f64,
    pub a2_minus: f64,
    pub a2_plus: f64,
    pub zeta1_minus: f64,
    pub zeta1_plus: f64,
    pub zeta2_minus: f64,
    pub zeta2_plus: f64,
    /// `ξ1−(σ0+)`.
    pub tau1: f64,
    /// `ξ2−(σ0+)`.
    pub tau2: f64,
    /// Branch points of cubic 1; `None` until computed by the geometry layer.
    pub eta1: Option<EtaPair>,
    pub eta2: Option<EtaPair>,
    /// `μ1 = μ2`: the second root of `P` coincides with a kernel pole.
    pub mu_equal_flag: bool,
}

pub fn derived_loads(params: &SystemParams) -> Loads {
    params.loads()
}

pub fn characteristic_constants(params: &SystemParams) -> DerivedConstants {
    let (mut s0m, mut s0p) = params.p_roots();
    let mu_equal = params.mu_equal();
    if mu_equal {
        let mu = params.mu1();
        s0p = -mu * (1.0 - params.rho());
        s0m = -mu;
    }
    let (s1m, s1p) = params.t_poles(Queue::One);
    let (s2m, s2p) = params.t_poles(Queue::Two);
    let (a1m, a1p) = params.stationary_points(Queue::One);
    let (a2m, a2p) = params.stationary_points(Queue::Two);
    let (z1m, z1p) = params.branch_cut(Queue::One);
    let (z2m, z2p) = params.branch_cut(Queue::Two);
    // σ0+ ≥ ζ_j+ so both branches are real there.
    let tau1 = params
        .xi_branches(Queue::One, s0p)
        .map(|x| x.minus)
        .unwrap_or(f64::NAN);
    let tau2 = params
        .xi_branches(Queue::Two, s0p)
        .map(|x| x.minus)
        .unwrap_or(f64::NAN);
    DerivedConstants {
        sigma0_minus: s0m,
        sigma0_plus: s0p,
        sigma1_minus: s1m,
        sigma1_plus: s1p,
        sigma2_minus: s2m,
        sigma2_plus: s2p,
        a1_minus: a1m,
        a1_plus: a1p,
        a2_minus: a2m,
        a2_plus: a2p,
        zeta1_minus: z1m,
        zeta1_plus: z1p,
        zeta2_minus: z2m,
        zeta2_plus: z2p,
        tau1,
        tau2,
        eta1: None,
        eta2: None,
        mu_equal_flag: mu_equal,
    }
}

impl DerivedConstants {
    pub fn sigma(&self, j: Queue) -> (f64, f64) {
        match j {
            Queue::One => (self.sigma1_minus, self.sigma1_plus),
            Queue::Two => (self.sigma2_minus, self.sigma2_plus),
        }
    }

    pub fn a(&self, j: Queue) -> (f64, f64) {
        match j {
            Queue::One => (self.a1_minus, self.a1_plus),
            Queue::Two => (self.a2_minus, self.a2_plus),
        }
    }

    pub fn zeta(&self, j: Queue) -> (f64, f64) {
        match j {
            Queue::One => (self.zeta1_minus, self.zeta1_plus),
            Queue::Two => (self.zeta2_minus, self.zeta2_plus),
        }
    }

    pub fn tau(&self, j: Queue) -> f64 {
        match j {
            Queue::One => self.tau1,
            Queue::Two => self.tau2,
        }
    }

    pub fn eta(&self, j: Queue) -> Option<EtaPair> {
        match j {
            Queue::One => self.eta1,
            Queue::Two => self.eta2,
        }
    }
}
