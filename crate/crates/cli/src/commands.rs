use rayon::prelude::*;
use serde::Serialize;

use asymptotics::{
    classify_case, hol_transform, region_grid, tail_constants, tail_estimate, Classification, RegionCell, TailReport,
    Unavailable,
};
use core_params::{DerivedConstants, Loads, Queue, SystemParams};
use series_engine::{EmptyProbabilities, Model, PsiConstants, TruncationPolicy};
use sqf_sim::{event_log, fit_log_slope, simulate, Estimate, SimPolicy, SimStats};

use crate::config::{PolicyArg, RunConfig};
use crate::error::CliError;
use crate::output::{render, Cell, Table};

/// Window of simulated tail probabilities used for slope fits.
pub const TAIL_FIT_WINDOW: (f64, f64) = (1e-4, 1e-2);
/// Pass threshold for analytic vs simulated values, in pooled standard errors.
pub const Z_THRESHOLD: f64 = 3.0;
/// Pass threshold for tail slopes, relative.
pub const SLOPE_TOLERANCE: f64 = 0.1;
/// Argument at which the truncation diagnostics of `analyze` are sampled.
pub const DIAGNOSTIC_Z: f64 = 1.0;
const HOL_DERIVATIVE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Analyze,
    Sweep,
    Regions,
    Simulate,
    Validate,
    Tail,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Sweep => "sweep",
            Command::Regions => "regions",
            Command::Simulate => "simulate",
            Command::Validate => "validate",
            Command::Tail => "tail",
        }
    }
}

/// Rendered report plus, for `validate`, the failure to signal after writing it.
pub struct RunOutput {
    pub text: String,
    pub failure: Option<CliError>,
}

pub fn run(command: Command, config: &RunConfig) -> Result<RunOutput, CliError> {
    let ok = |text| RunOutput { text, failure: None };
    match command {
        Command::Analyze => {
            let r = analyze(config)?;
            Ok(ok(render(config, &r, None)?))
        }
        Command::Sweep => {
            let r = sweep(config)?;
            let table = sweep_table(&r);
            Ok(ok(render(config, &r, Some(table))?))
        }
        Command::Regions => {
            let r = regions(config);
            let table = regions_table(&r);
            Ok(ok(render(config, &r, Some(table))?))
        }
        Command::Simulate => {
            let r = simulate_report(config)?;
            Ok(ok(render(config, &r, None)?))
        }
        Command::Validate => {
            let r = validate(config)?;
            let failure = (!r.pass).then(|| CliError::Validation {
                message: format!(
                    "{} of {} comparisons failed",
                    r.comparisons.iter().filter(|c| !c.pass).count(),
                    r.comparisons.len()
                ),
            });
            Ok(RunOutput {
                text: render(config, &r, None)?,
                failure,
            })
        }
        Command::Tail => {
            let r = tail(config)?;
            let table = tail_table(&r);
            Ok(ok(render(config, &r, Some(table))?))
        }
    }
}

fn model(config: &RunConfig) -> Result<Model, CliError> {
    let p = config.system_params()?;
    Ok(Model::new(&p, config.truncation()?)?)
}

/// A residue value, or the reason it is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Residue {
    Value(f64),
    Marker(&'static str),
}

impl Residue {
    fn new(applicable: bool, v: Option<f64>) -> Self {
        match (applicable, v) {
            (false, _) => Residue::Marker("not_applicable"),
            (true, Some(x)) => Residue::Value(x),
            (true, None) => Residue::Marker("unavailable"),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Residue::Value(v) => Some(*v),
            Residue::Marker(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residues {
    pub r01: Residue,
    pub r02: Residue,
    pub r1_plus: Residue,
    pub r2_plus: Residue,
    pub r1_plus_uncorrected: Residue,
    pub r2_plus_uncorrected: Residue,
    pub pole_factor_1: Residue,
    pub pole_factor_2: Residue,
}

impl Residues {
    fn from_report(t: &TailReport) -> Self {
        let p1 = t.classification.pole(Queue::One);
        let p2 = t.classification.pole(Queue::Two);
        Residues {
            r01: Residue::new(p1, t.r01),
            r02: Residue::new(p2, t.r02),
            r1_plus: Residue::new(!p1, t.r1_plus),
            r2_plus: Residue::new(!p2, t.r2_plus),
            r1_plus_uncorrected: Residue::new(!p1, t.r1_plus_uncorrected),
            r2_plus_uncorrected: Residue::new(!p2, t.r2_plus_uncorrected),
            pole_factor_1: Residue::new(p1, t.pole_factor_1),
            pole_factor_2: Residue::new(p2, t.pole_factor_2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub policy: TruncationPolicy,
    pub prune_threshold: f64,
    pub vm_abscissa: f64,
    pub domain_floor: f64,
    pub probe_z: f64,
    pub probe_nodes: u64,
    pub probe_error_estimate: f64,
    pub probe_max_layer_ratio: f64,
    pub probe_layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub case: &'static str,
    pub tie: bool,
    pub tie_cases: Vec<&'static str>,
    pub s_tilde_1: f64,
    pub s_tilde_2: f64,
    pub margin_i: f64,
    pub margin_ii: f64,
    pub loads: Loads,
    pub constants: DerivedConstants,
    pub psi: PsiConstants,
    pub empty: EmptyProbabilities,
    pub residues: Residues,
    pub unavailable: Vec<Unavailable>,
    pub diagnostics: Diagnostics,
}

pub fn analyze(config: &RunConfig) -> Result<AnalyzeReport, CliError> {
    let m = model(config)?;
    let c = classify_case(&m.params)?;
    let empty = m.empty_probabilities()?;
    let tails = tail_constants(&m)?;
    let probe = m.series(DIAGNOSTIC_Z)?;
    Ok(AnalyzeReport {
        case: c.case_label.as_str(),
        tie: c.tie,
        tie_cases: c.tie_cases.iter().map(|l| l.as_str()).collect(),
        s_tilde_1: c.s_tilde_1,
        s_tilde_2: c.s_tilde_2,
        margin_i: c.margin_i,
        margin_ii: c.margin_ii,
        loads: m.params.loads(),
        constants: m.geometry.constants,
        psi: m.psi,
        empty,
        residues: Residues::from_report(&tails),
        unavailable: tails.unavailable.clone(),
        diagnostics: Diagnostics {
            policy: m.policy,
            prune_threshold: m.policy.prune_threshold(),
            vm_abscissa: m.domain.abscissa,
            domain_floor: m.domain.floor(),
            probe_z: DIAGNOSTIC_Z,
            probe_nodes: probe.nodes,
            probe_error_estimate: probe.error_estimate,
            probe_max_layer_ratio: probe.max_ratio,
            probe_layers: probe.layer_norms.len(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rho1: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub p_u1_0: Option<f64>,
    pub p_u2_0: Option<f64>,
    pub one_minus_rho1: f64,
    /// `ok`, or the error code of the failed point.
    pub status: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rho: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub rows: Vec<SweepRow>,
}

/// `ϱ1 = ϱ·k/(n+1)`, k = 1..n, with the service rates of the base parameters. Each point uses
/// the default truncation depth for its own load at the configured tolerance.
pub fn sweep_grid(config: &RunConfig) -> Vec<f64> {
    let n = config.sweep_points;
    (1..=n)
        .map(|k| config.sweep_rho * k as f64 / (n + 1) as f64)
        .collect()
}

pub fn sweep(config: &RunConfig) -> Result<SweepReport, CliError> {
    let [_, _, mu1, mu2] = config.params;
    let rho = config.sweep_rho;
    let rows = sweep_grid(config)
        .into_par_iter()
        .map(|rho1| {
            let (l1, l2) = (rho1 * mu1, (rho - rho1) * mu2);
            let outcome = SystemParams::new(l1, l2, mu1, mu2)
                .map_err(CliError::from)
                .and_then(|p| {
                    let m = Model::new(&p, TruncationPolicy::with_tol(&p, config.tol))?;
                    Ok(m.empty_probabilities()?)
                });
            let (p1, p2, status, message) = match outcome {
                Ok(e) => (Some(e.p_u1_0), Some(e.p_u2_0), "ok".to_string(), String::new()),
                Err(e) => (None, None, e.code().to_string(), e.to_string()),
            };
            SweepRow {
                rho1,
                lambda1: l1,
                lambda2: l2,
                p_u1_0: p1,
                p_u2_0: p2,
                one_minus_rho1: 1.0 - rho1,
                status,
                message,
            }
        })
        .collect();
    Ok(SweepReport { rho, mu1, mu2, rows })
}

fn opt(v: Option<f64>) -> Cell {
    v.map(Cell::Num).unwrap_or(Cell::Empty)
}

fn sweep_table(r: &SweepReport) -> Table {
    Table {
        columns: vec!["rho1", "lambda1", "lambda2", "p_u1_0", "p_u2_0", "one_minus_rho1", "status", "message"],
        rows: r
            .rows
            .iter()
            .map(|x| {
                vec![
                    Cell::Num(x.rho1),
                    Cell::Num(x.lambda1),
                    Cell::Num(x.lambda2),
                    opt(x.p_u1_0),
                    opt(x.p_u2_0),
                    Cell::Num(x.one_minus_rho1),
                    Cell::Text(x.status.clone()),
                    Cell::Text(x.message.clone()),
                ]
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionsReport {
    pub mode: asymptotics::GridMode,
    pub resolution: usize,
    pub boundary_pairs_i: usize,
    pub boundary_pairs_ii: usize,
    pub cells: Vec<RegionCell>,
}

pub fn regions(config: &RunConfig) -> RegionsReport {
    let g = region_grid(config.mode.grid_mode(), config.resolution);
    RegionsReport {
        mode: g.mode,
        resolution: g.resolution,
        boundary_pairs_i: g.boundary_pairs_i().len(),
        boundary_pairs_ii: g.boundary_pairs_ii().len(),
        cells: g.iter().copied().collect(),
    }
}

fn regions_table(r: &RegionsReport) -> Table {
    Table {
        columns: vec!["row", "col", "rho1", "rho2", "case", "margin_i", "margin_ii"],
        rows: r
            .cells
            .iter()
            .map(|c| {
                vec![
                    Cell::Int(c.row as i64),
                    Cell::Int(c.col as i64),
                    Cell::Num(c.rho1),
                    Cell::Num(c.rho2),
                    Cell::Text(c.case_label.as_str().to_string()),
                    Cell::Num(c.margin_i),
                    Cell::Num(c.margin_ii),
                ]
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub horizon: f64,
    pub warmup: f64,
    pub stats: SimStats,
}

pub fn simulate_report(config: &RunConfig) -> Result<SimulateReport, CliError> {
    let sc = config.sim_config(config.system_params()?);
    let stats = simulate(&sc)?;
    Ok(SimulateReport {
        horizon: sc.horizon,
        warmup: sc.warmup,
        stats,
    })
}

/// Line-delimited event log of replica 0 (`time kind u1 u2 served`).
pub fn audit_dump(config: &RunConfig, cap: usize) -> Result<String, CliError> {
    let sc = config.sim_config(config.system_params()?);
    let log = event_log(&sc, 0, cap)?;
    let mut s = String::new();
    for r in &log {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `|analytic − mean| ≤ 3·se`.
    ZScore,
    /// `|fitted − analytic| ≤ 10%·|analytic|`.
    RelativeSlope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub quantity: String,
    pub analytic: f64,
    pub simulated: f64,
    pub standard_error: f64,
    pub z_score: f64,
    pub relative_error: f64,
    pub criterion: Criterion,
    pub pass: bool,
}

impl Comparison {
    pub fn z(quantity: String, analytic: f64, e: Estimate) -> Self {
        let z = e.z_score(analytic);
        Comparison {
            quantity,
            analytic,
            simulated: e.mean,
            standard_error: e.se,
            z_score: z,
            relative_error: (e.mean - analytic) / analytic,
            criterion: Criterion::ZScore,
            pass: z.abs() <= Z_THRESHOLD,
        }
    }

    fn slope(quantity: String, analytic: f64, fitted: Option<f64>) -> Self {
        let simulated = fitted.unwrap_or(f64::NAN);
        let rel = (simulated - analytic) / analytic;
        Comparison {
            quantity,
            analytic,
            simulated,
            standard_error: f64::NAN,
            z_score: f64::NAN,
            relative_error: rel,
            criterion: Criterion::RelativeSlope,
            pass: rel.abs() <= SLOPE_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub queue: u8,
    pub levels_used: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub fitted_slope: Option<f64>,
    pub analytic_slope: f64,
}

/// Least-squares slope over the simulated window, and the slope of the leading analytic form
/// over the same levels: `s̃` for a pole, `s̃ − 3/(2u)` averaged by least squares for the
/// square-root branch point (the `u^{−3/2}` factor).
pub fn tail_fit(stats: &SimStats, levels: &[f64], j: Queue, rate: f64, pole: bool) -> TailFit {
    let ys: Vec<f64> = stats.tail(j.index()).iter().map(|p| p.estimate.mean).collect();
    let (lo, hi) = TAIL_FIT_WINDOW;
    let used: Vec<f64> = levels
        .iter()
        .zip(&ys)
        .filter(|(_, &y)| y >= lo && y <= hi && y > 0.0)
        .map(|(&u, _)| u)
        .collect();
    let fitted = fit_log_slope(levels, &ys, lo, hi).map(|f| f.slope);
    let analytic_slope = if pole || used.len() < 2 || used[0] <= 0.0 {
        rate
    } else {
        let g: Vec<f64> = used.iter().map(|u| (rate * u - 1.5 * u.ln()).exp()).collect();
        fit_log_slope(&used, &g, 0.0, f64::INFINITY).map_or(rate, |f| f.slope)
    };
    TailFit {
        queue: j.index(),
        levels_used: used.len(),
        u_min: used.first().copied().unwrap_or(f64::NAN),
        u_max: used.last().copied().unwrap_or(f64::NAN),
        fitted_slope: fitted,
        analytic_slope,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub policy: SimPolicy,
    pub case: &'static str,
    pub events: u64,
    pub arrivals: u64,
    pub comparisons: Vec<Comparison>,
    pub tail_fits: Vec<TailFit>,
    pub pass: bool,
}

fn empty_of(stats: &SimStats, j: Queue) -> Estimate {
    match j {
        Queue::One => stats.p_empty_1,
        Queue::Two => stats.p_empty_2,
    }
}

fn mean_of(stats: &SimStats, j: Queue) -> Estimate {
    match j {
        Queue::One => stats.mean_workload_1,
        Queue::Two => stats.mean_workload_2,
    }
}

/// Analytic versus simulated values. Under SQF: empty probabilities, marginal transforms
/// and tail slopes. Under a HoL mode: the priority queue against M/M/1, the other queue
/// against the HoL transform, its mean (−d/ds at 0) and its tail slope.
pub fn validate(config: &RunConfig) -> Result<ValidateReport, CliError> {
    let p = config.system_params()?;
    let class = classify_case(&p)?;
    let sc = config.sim_config(p);
    let stats = simulate(&sc)?;
    let mut comparisons = Vec::new();
    let mut tail_fits = Vec::new();
    let points: Vec<f64> = config.transform_points.iter().copied().filter(|&s| s > 0.0).collect();
    match config.policy {
        PolicyArg::Sqf => {
            let m = Model::new(&p, config.truncation()?)?;
            let e = m.empty_probabilities()?;
            comparisons.push(Comparison::z("p_u1_0".into(), e.p_u1_0, stats.p_empty_1));
            comparisons.push(Comparison::z("p_u2_0".into(), e.p_u2_0, stats.p_empty_2));
            for j in [Queue::One, Queue::Two] {
                for &s in &points {
                    let a = m.marginal(j, s)?;
                    let d = stats.transform(j.index(), s).expect("configured point");
                    comparisons.push(Comparison::z(format!("transform_{}({s})", j.index()), a, d));
                }
            }
            for j in [Queue::One, Queue::Two] {
                tail_fits.push(tail_fit(&stats, &config.tail_levels, j, class.s_tilde(j), class.pole(j)));
            }
        }
        hol => {
            let (high, low) = match hol {
                PolicyArg::Hol1 => (Queue::One, Queue::Two),
                _ => (Queue::Two, Queue::One),
            };
            let (lh, mh) = (p.arrival(high), p.service(high));
            let rho_h = lh / mh;
            comparisons.push(Comparison::z(format!("p_u{}_0", high.index()), 1.0 - rho_h, empty_of(&stats, high)));
            for &s in &points {
                let mm1 = (1.0 - rho_h) * (mh + s) / (mh + s - lh);
                let d = stats.transform(high.index(), s).expect("configured point");
                comparisons.push(Comparison::z(format!("transform_{}({s})", high.index()), mm1, d));
                let a = hol_transform(&p, low, s)?;
                let d = stats.transform(low.index(), s).expect("configured point");
                comparisons.push(Comparison::z(format!("transform_{}({s})", low.index()), a, d));
            }
            let h = HOL_DERIVATIVE_STEP;
            let mean = -(hol_transform(&p, low, h)? - hol_transform(&p, low, -h)?) / (2.0 * h);
            comparisons.push(Comparison::z(format!("mean_workload_{}", low.index()), mean, mean_of(&stats, low)));
            tail_fits.push(tail_fit(&stats, &config.tail_levels, low, class.s_tilde(low), class.pole(low)));
        }
    }
    for f in &tail_fits {
        comparisons.push(Comparison::slope(format!("tail_slope_{}", f.queue), f.analytic_slope, f.fitted_slope));
    }
    let pass = comparisons.iter().all(|c| c.pass);
    Ok(ValidateReport {
        policy: sc.policy,
        case: class.case_label.as_str(),
        events: config.events,
        arrivals: stats.arrivals,
        comparisons,
        tail_fits,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub u: f64,
    pub tail_1: Option<f64>,
    pub tail_2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCommandReport {
    pub classification: Classification,
    pub constants: TailReport,
    pub rows: Vec<TailRow>,
}

/// Leading-order tail estimates at the configured levels (`u > 0` only).
pub fn tail(config: &RunConfig) -> Result<TailCommandReport, CliError> {
    let m = model(config)?;
    let report = tail_constants(&m)?;
    let rows = config
        .tail_levels
        .iter()
        .filter(|&&u| u > 0.0)
        .map(|&u| TailRow {
            u,
            tail_1: tail_estimate(&m.params, &report, Queue::One, u),
            tail_2: tail_estimate(&m.params, &report, Queue::Two, u),
        })
        .collect();
    Ok(TailCommandReport {
        classification: report.classification.clone(),
        constants: report,
        rows,
    })
}

fn tail_table(r: &TailCommandReport) -> Table {
    Table {
        columns: vec!["u", "tail_1", "tail_2"],
        rows: r
            .rows
            .iter()
            .map(|x| vec![Cell::Num(x.u), opt(x.tail_1), opt(x.tail_2)])
            .collect(),
    }
}
