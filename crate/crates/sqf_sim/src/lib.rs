//! Discrete-event simulation of the workload pair `(U1, U2)` under SQF or a static HoL priority.
//!
//! Between events exactly one queue (or none) drains at unit rate, so every statistic is the
//! integral of an elementary function over a linear segment and is accumulated exactly.

mod accumulate;
mod fit;

pub use fit::{fit_log_slope, SlopeFit};

use accumulate::{Accumulator, Segment};
use core_params::SystemParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimPolicy {
    /// Serve the smaller nonempty workload; `U1 = U2 > 0` serves queue 1.
    Sqf,
    HolPriorityTo1,
    HolPriorityTo2,
}

impl SimPolicy {
    /// Index (1 or 2) of the queue in service at state `u`, 0 when idle.
    pub fn served(&self, u: [f64; 2]) -> u8 {
        let (b1, b2) = (u[0] > 0.0, u[1] > 0.0);
        match (b1, b2) {
            (false, false) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (true, true) => match self {
                SimPolicy::Sqf => {
                    if u[0] <= u[1] {
                        1
                    } else {
                        2
                    }
                }
                SimPolicy::HolPriorityTo1 => 1,
                SimPolicy::HolPriorityTo2 => 2,
            },
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SimPolicy::Sqf => "sqf",
            SimPolicy::HolPriorityTo1 => "hol1",
            SimPolicy::HolPriorityTo2 => "hol2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        "sim_config"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub params: SystemParams,
    pub policy: SimPolicy,
    /// Simulated time per replica, warmup included.
    pub horizon: f64,
    pub warmup: f64,
    pub replicas: usize,
    pub seed: u64,
    pub tail_levels: Vec<f64>,
    pub transform_points: Vec<f64>,
    /// Width of the strip `0 < Uj ≤ δ, U_{3−j} = 0` used to estimate the boundary densities `ψj(0)`.
    pub boundary_delta: f64,
}

impl SimConfig {
    /// Horizon chosen so that the expected number of arrivals over all replicas is `events`;
    /// the warmup adds 5% on top.
    pub fn with_events(params: SystemParams, policy: SimPolicy, events: u64, replicas: usize, seed: u64) -> Self {
        let per = events as f64 / (replicas.max(1) as f64 * params.lambda());
        let warmup = 0.05 * per;
        SimConfig {
            params,
            policy,
            horizon: per + warmup,
            warmup,
            replicas,
            seed,
            tail_levels: Vec::new(),
            transform_points: Vec::new(),
            boundary_delta: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.horizon.is_finite() && self.warmup >= 0.0 && self.horizon > self.warmup) {
            return bad("need horizon > warmup >= 0");
        }
        if self.replicas == 0 {
            return bad("need at least one replica");
        }
        if self.tail_levels.iter().any(|u| !(*u >= 0.0)) {
            return bad("tail levels must be non-negative");
        }
        if self.transform_points.iter().any(|s| !(*s >= 0.0)) {
            return bad("transform points must be non-negative");
        }
        if !(self.boundary_delta > 0.0) {
            return bad("boundary_delta must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error from the between-replica variance; 0 with a single replica.
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let se = if x.len() > 1 {
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Estimate { mean, se }
    }

    /// `(mean − target)/se`, infinite when the error is zero and the values differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEstimate {
    pub at: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub policy: SimPolicy,
    pub replicas: usize,
    pub arrivals: u64,
    pub events: u64,
    pub observed_time: f64,
    pub p_empty_1: Estimate,
    pub p_empty_2: Estimate,
    pub p_both_empty: Estimate,
    /// `P(U1 = 0 < U2)`, the mass of `G2`.
    pub p_only_2_busy: Estimate,
    /// `P(U2 = 0 < U1)`, the mass of `G1`.
    pub p_only_1_busy: Estimate,
    pub tail_1: Vec<PointEstimate>,
    pub tail_2: Vec<PointEstimate>,
    pub transform_1: Vec<PointEstimate>,
    pub transform_2: Vec<PointEstimate>,
    pub mean_workload_1: Estimate,
    pub mean_workload_2: Estimate,
    pub busy_fraction: Estimate,
    pub diagonal_mass: Estimate,
    /// `P(0 < Uj ≤ δ, U_{3−j} = 0)/δ`, estimating `ψj(0)`.
    pub boundary_density_1: Estimate,
    pub boundary_density_2: Estimate,
}

impl SimStats {
    pub fn transform(&self, j: u8, s: f64) -> Option<Estimate> {
        let v = if j == 1 { &self.transform_1 } else { &self.transform_2 };
        v.iter().find(|p| p.at == s).map(|p| p.estimate)
    }

    pub fn tail(&self, j: u8) -> &[PointEstimate] {
        if j == 1 {
            &self.tail_1
        } else {
            &self.tail_2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival1,
    Arrival2,
    Empty1,
    Empty2,
}

/// One line of the audit dump: state and served queue right after an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub u1: f64,
    pub u2: f64,
    pub served: u8,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        let kind = match self.kind {
            EventKind::Arrival1 => "arrival1",
            EventKind::Arrival2 => "arrival2",
            EventKind::Empty1 => "empty1",
            EventKind::Empty2 => "empty2",
        };
        format!("{:.17e} {} {:.17e} {:.17e} {}", self.time, kind, self.u1, self.u2, self.served)
    }
}

/// Independent stream for arrival process `process` (0 or 1) of replica `replica`.
pub fn stream_rng(seed: u64, replica: usize, process: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replica as u64) * 2 + process as u64);
    rng
}

struct ArrivalProcess {
    rng: ChaCha8Rng,
    gap: Exp<f64>,
    size: Exp<f64>,
    next: f64,
}

impl ArrivalProcess {
    fn new(mut rng: ChaCha8Rng, rate: f64, service: f64) -> Self {
        let gap = Exp::new(rate).expect("positive rate");
        let size = Exp::new(service).expect("positive rate");
        let next = gap.sample(&mut rng);
        ArrivalProcess { rng, gap, size, next }
    }

    fn fire(&mut self) -> f64 {
        let work = self.size.sample(&mut self.rng);
        self.next += self.gap.sample(&mut self.rng);
        work
    }
}

struct ReplicaOutcome {
    acc: Accumulator,
    arrivals: u64,
    events: u64,
}

fn run_replica(config: &SimConfig, replica: usize, mut log: Option<&mut Vec<EventRecord>>, log_cap: usize) -> ReplicaOutcome {
    let p = &config.params;
    let mut procs = [
        ArrivalProcess::new(stream_rng(config.seed, replica, 0), p.lambda1(), p.mu1()),
        ArrivalProcess::new(stream_rng(config.seed, replica, 1), p.lambda2(), p.mu2()),
    ];
    let mut acc = Accumulator::new(config);
    let mut u = [0.0f64; 2];
    let mut t = 0.0f64;
    let (mut arrivals, mut events) = (0u64, 0u64);
    loop {
        let served = config.policy.served(u);
        let arrival_at = procs[0].next.min(procs[1].next);
        let empty_at = if served > 0 { t + u[served as usize - 1] } else { f64::INFINITY };
        let t_next = arrival_at.min(empty_at).min(config.horizon);
        // Record only the part of [t, t_next] after the warmup.
        if t_next > config.warmup {
            let start = t.max(config.warmup);
            let mut v = u;
            if served > 0 {
                v[served as usize - 1] -= start - t;
            }
            acc.add(&Segment {
                u: v,
                served,
                dt: t_next - start,
            });
        }
        if served > 0 {
            let k = served as usize - 1;
            u[k] = (u[k] - (t_next - t)).max(0.0);
        }
        t = t_next;
        if t >= config.horizon {
            break;
        }
        let kind = if empty_at <= arrival_at {
            let k = served as usize - 1;
            u[k] = 0.0;
            if k == 0 {
                EventKind::Empty1
            } else {
                EventKind::Empty2
            }
        } else {
            let k = if procs[0].next <= procs[1].next { 0 } else { 1 };
            u[k] += procs[k].fire();
            arrivals += 1;
            if k == 0 {
                EventKind::Arrival1
            } else {
                EventKind::Arrival2
            }
        };
        events += 1;
        if let Some(l) = log.as_deref_mut() {
            if l.len() < log_cap {
                l.push(EventRecord {
                    time: t,
                    kind,
                    u1: u[0],
                    u2: u[1],
                    served: config.policy.served(u),
                });
            }
        }
    }
    ReplicaOutcome { acc, arrivals, events }
}

/// Runs all replicas (in parallel) and pools them in replica order.
pub fn simulate(config: &SimConfig) -> Result<SimStats, SimError> {
    config.validate()?;
    let outcomes: Vec<ReplicaOutcome> = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, r, None, 0))
        .collect();
    Ok(pool(config, &outcomes))
}

/// Event log of one replica, truncated to `cap` records.
pub fn event_log(config: &SimConfig, replica: usize, cap: usize) -> Result<Vec<EventRecord>, SimError> {
    config.validate()?;
    let mut log = Vec::new();
    run_replica(config, replica, Some(&mut log), cap);
    Ok(log)
}

/// Records whose served index contradicts the policy rule for the recorded state.
pub fn audit_log(policy: SimPolicy, log: &[EventRecord]) -> Vec<EventRecord> {
    log.iter()
        .filter(|r| policy.served([r.u1, r.u2]) != r.served)
        .copied()
        .collect()
}

/// Time average of `exp(−s Uj)`; exactly 1 at `s = 0`.
pub fn estimate_transform(config: &SimConfig, j: u8, s: f64) -> Result<Estimate, SimError> {
    if s == 0.0 {
        config.validate()?;
        return Ok(Estimate { mean: 1.0, se: 0.0 });
    }
    let mut c = config.clone();
    c.transform_points = vec![s];
    c.tail_levels.clear();
    let stats = simulate(&c)?;
    Ok(stats.transform(j, s).expect("requested point"))
}

fn pool(config: &SimConfig, outcomes: &[ReplicaOutcome]) -> SimStats {
    let per: Vec<accumulate::Averages> = outcomes.iter().map(|o| o.acc.averages(config.boundary_delta)).collect();
    let est = |f: &dyn Fn(&accumulate::Averages) -> f64| {
        let v: Vec<f64> = per.iter().map(f).collect();
        Estimate::from_samples(&v)
    };
    let points = |xs: &[f64], f: &dyn Fn(&accumulate::Averages, usize) -> f64| -> Vec<PointEstimate> {
        xs.iter()
            .enumerate()
            .map(|(k, &x)| PointEstimate {
                at: x,
                estimate: Estimate::from_samples(&per.iter().map(|a| f(a, k)).collect::<Vec<_>>()),
            })
            .collect()
    };
    SimStats {
        policy: config.policy,
        replicas: config.replicas,
        arrivals: outcomes.iter().map(|o| o.arrivals).sum(),
        events: outcomes.iter().map(|o| o.events).sum(),
        observed_time: outcomes.iter().map(|o| o.acc.time).sum(),
        p_empty_1: est(&|a| a.empty[0]),
        p_empty_2: est(&|a| a.empty[1]),
        p_both_empty: est(&|a| a.both_empty),
        p_only_2_busy: est(&|a| a.empty[0] - a.both_empty),
        p_only_1_busy: est(&|a| a.empty[1] - a.both_empty),
        tail_1: points(&config.tail_levels, &|a, k| a.tail[0][k]),
        tail_2: points(&config.tail_levels, &|a, k| a.tail[1][k]),
        transform_1: points(&config.transform_points, &|a, k| a.transform[0][k]),
        transform_2: points(&config.transform_points, &|a, k| a.transform[1][k]),
        mean_workload_1: est(&|a| a.mean[0]),
        mean_workload_2: est(&|a| a.mean[1]),
        busy_fraction: est(&|a| a.busy),
        diagonal_mass: est(&|a| a.diagonal),
        boundary_density_1: est(&|a| a.strip[0]),
        boundary_density_2: est(&|a| a.strip[1]),
    }
}
