//! Flat key-value configuration: file values, then flag overrides, then explicit defaults.
//! The resolved [`RunConfig`] is embedded in every report and can be fed back with `--config`.

use serde::{Deserialize, Serialize};

use asymptotics::{classify_case, GridMode};
use core_params::SystemParams;
use series_engine::TruncationPolicy;
use sqf_sim::{SimConfig, SimPolicy};

use crate::error::CliError;

pub const DEFAULT_PARAMS: [f64; 4] = [1.0, 1.0, 3.0, 4.5];
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_EVENTS: u64 = 10_000_000;
pub const DEFAULT_REPLICAS: usize = 20;
pub const DEFAULT_TRANSFORM_POINTS: [f64; 3] = [0.5, 1.0, 2.0];
pub const DEFAULT_BOUNDARY_DELTA: f64 = 0.05;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.05;
pub const DEFAULT_RESOLUTION: usize = 50;
pub const DEFAULT_SWEEP_RHO: f64 = 0.8;
pub const DEFAULT_SWEEP_POINTS: usize = 15;
/// Automatic tail grid: this many steps, reaching `TAIL_SPAN/|s̃|` for the slower queue.
const TAIL_STEPS: usize = 160;
const TAIL_SPAN: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    EqualMu,
    EqualLambda,
}

impl Mode {
    pub fn grid_mode(self) -> GridMode {
        match self {
            Mode::EqualMu => GridMode::EqualMu,
            Mode::EqualLambda => GridMode::EqualLambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PolicyArg {
    Sqf,
    Hol1,
    Hol2,
}

impl PolicyArg {
    pub fn sim_policy(self) -> SimPolicy {
        match self {
            PolicyArg::Sqf => SimPolicy::Sqf,
            PolicyArg::Hol1 => SimPolicy::HolPriorityTo1,
            PolicyArg::Hol2 => SimPolicy::HolPriorityTo2,
        }
    }
}

/// Every field optional; used for the config file and for flag overrides alike.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub command: Option<String>,
    pub params: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub depth: Option<usize>,
    pub seed: Option<u64>,
    pub events: Option<u64>,
    pub replicas: Option<usize>,
    pub warmup_fraction: Option<f64>,
    pub policy: Option<PolicyArg>,
    pub tail_levels: Option<Vec<f64>>,
    pub transform_points: Option<Vec<f64>>,
    pub boundary_delta: Option<f64>,
    pub mode: Option<Mode>,
    pub resolution: Option<usize>,
    pub sweep_rho: Option<f64>,
    pub sweep_points: Option<usize>,
    pub format: Option<Format>,
}

impl Overrides {
    /// `b` wins wherever it is set.
    pub fn merged(self, b: Overrides) -> Overrides {
        Overrides {
            command: b.command.or(self.command),
            params: b.params.or(self.params),
            tol: b.tol.or(self.tol),
            depth: b.depth.or(self.depth),
            seed: b.seed.or(self.seed),
            events: b.events.or(self.events),
            replicas: b.replicas.or(self.replicas),
            warmup_fraction: b.warmup_fraction.or(self.warmup_fraction),
            policy: b.policy.or(self.policy),
            tail_levels: b.tail_levels.or(self.tail_levels),
            transform_points: b.transform_points.or(self.transform_points),
            boundary_delta: b.boundary_delta.or(self.boundary_delta),
            mode: b.mode.or(self.mode),
            resolution: b.resolution.or(self.resolution),
            sweep_rho: b.sweep_rho.or(self.sweep_rho),
            sweep_points: b.sweep_points.or(self.sweep_points),
            format: b.format.or(self.format),
        }
    }

    /// Accepts a flat TOML file, a JSON report (its `config` object), or a CSV report
    /// (its `# config {...}` header line).
    pub fn from_text(text: &str) -> Result<Overrides, CliError> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::config("config_parse", e.to_string()))?;
            let cfg = v.get("config").cloned().unwrap_or(v);
            return serde_json::from_value(cfg).map_err(|e| CliError::config("config_parse", e.to_string()));
        }
        if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# config ")) {
            return serde_json::from_str(line).map_err(|e| CliError::config("config_parse", e.to_string()));
        }
        toml::from_str(text).map_err(|e| CliError::config("config_parse", e.to_string()))
    }
}

/// Fully resolved configuration; every default is explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub params: [f64; 4],
    pub tol: f64,
    pub depth: usize,
    pub seed: u64,
    /// Expected arrivals summed over replicas.
    pub events: u64,
    pub replicas: usize,
    pub warmup_fraction: f64,
    pub policy: PolicyArg,
    pub tail_levels: Vec<f64>,
    pub transform_points: Vec<f64>,
    pub boundary_delta: f64,
    pub mode: Mode,
    pub resolution: usize,
    pub sweep_rho: f64,
    pub sweep_points: usize,
    pub format: Format,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config("invalid_value", format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn resolve(command: &str, o: Overrides) -> Result<RunConfig, CliError> {
        let raw = o.params.unwrap_or_else(|| DEFAULT_PARAMS.to_vec());
        let params: [f64; 4] = raw
            .as_slice()
            .try_into()
            .map_err(|_| CliError::config("invalid_params", format!("params needs 4 values λ1,λ2,μ1,μ2, got {}", raw.len())))?;
        let sp = SystemParams::new(params[0], params[1], params[2], params[3])?;
        let tol = positive("tol", o.tol.unwrap_or(DEFAULT_TOL))?;
        let depth = o.depth.unwrap_or_else(|| TruncationPolicy::with_tol(&sp, tol).max_depth);
        if depth == 0 {
            return Err(CliError::config("invalid_value", "depth must be at least 1"));
        }
        let replicas = o.replicas.unwrap_or(DEFAULT_REPLICAS);
        if replicas == 0 {
            return Err(CliError::config("invalid_value", "replicas must be at least 1"));
        }
        let warmup_fraction = o.warmup_fraction.unwrap_or(DEFAULT_WARMUP_FRACTION);
        if !(0.0..1.0).contains(&warmup_fraction) {
            return Err(CliError::config("invalid_value", "warmup_fraction must lie in [0, 1)"));
        }
        let tail_levels = match o.tail_levels {
            Some(v) => v,
            None => auto_tail_levels(&sp)?,
        };
        if tail_levels.iter().any(|u| !(*u >= 0.0 && u.is_finite())) {
            return Err(CliError::config("invalid_value", "tail levels must be finite and non-negative"));
        }
        let transform_points = o.transform_points.unwrap_or_else(|| DEFAULT_TRANSFORM_POINTS.to_vec());
        if transform_points.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(CliError::config("invalid_value", "transform points must be finite and non-negative"));
        }
        let sweep_rho = o.sweep_rho.unwrap_or(DEFAULT_SWEEP_RHO);
        if !(sweep_rho > 0.0 && sweep_rho < 1.0) {
            return Err(CliError::config("instability", format!("sweep_rho must lie in (0, 1), got {sweep_rho}")));
        }
        let resolution = o.resolution.unwrap_or(DEFAULT_RESOLUTION);
        if resolution < 2 {
            return Err(CliError::config("invalid_value", "resolution must be at least 2"));
        }
        let sweep_points = o.sweep_points.unwrap_or(DEFAULT_SWEEP_POINTS);
        if sweep_points == 0 {
            return Err(CliError::config("invalid_value", "sweep_points must be at least 1"));
        }
        Ok(RunConfig {
            command: command.to_string(),
            params,
            tol,
            depth,
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            events: o.events.unwrap_or(DEFAULT_EVENTS),
            replicas,
            warmup_fraction,
            policy: o.policy.unwrap_or(PolicyArg::Sqf),
            tail_levels,
            transform_points,
            boundary_delta: positive("boundary_delta", o.boundary_delta.unwrap_or(DEFAULT_BOUNDARY_DELTA))?,
            mode: o.mode.unwrap_or(Mode::EqualMu),
            resolution,
            sweep_rho,
            sweep_points,
            format: o.format.unwrap_or(Format::Json),
        })
    }

    pub fn system_params(&self) -> Result<SystemParams, CliError> {
        let [l1, l2, m1, m2] = self.params;
        Ok(SystemParams::new(l1, l2, m1, m2)?)
    }

    pub fn truncation(&self) -> Result<TruncationPolicy, CliError> {
        let p = self.system_params()?;
        let pol = TruncationPolicy::with_tol(&p, self.tol).with_depth(self.depth);
        if !pol.is_valid() {
            return Err(CliError::config("invalid_policy", "truncation policy rejected"));
        }
        Ok(pol)
    }

    /// Simulation setup; the horizon yields `events` expected arrivals over all replicas.
    pub fn sim_config(&self, params: SystemParams) -> SimConfig {
        let per = self.events as f64 / (self.replicas as f64 * params.lambda());
        let horizon = per / (1.0 - self.warmup_fraction);
        SimConfig {
            params,
            policy: self.policy.sim_policy(),
            horizon,
            warmup: horizon - per,
            replicas: self.replicas,
            seed: self.seed,
            tail_levels: self.tail_levels.clone(),
            transform_points: self.transform_points.clone(),
            boundary_delta: self.boundary_delta,
        }
    }
}

/// Uniform grid from 0 reaching `TAIL_SPAN/|s̃|` for the queue with the slower decay.
pub fn auto_tail_levels(p: &SystemParams) -> Result<Vec<f64>, CliError> {
    let c = classify_case(p)?;
    let slow = c.s_tilde_1.abs().min(c.s_tilde_2.abs());
    let h = TAIL_SPAN / slow / TAIL_STEPS as f64;
    Ok((0..=TAIL_STEPS).map(|k| k as f64 * h).collect())
}
