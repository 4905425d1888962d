use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use sqf_cli::config::{Mode, PolicyArg};
use sqf_cli::{commands, CliError, Command, Format, Overrides, RunConfig};

/// Stationary workload analysis and simulation of the two-queue Shortest-Queue-First system.
#[derive(Debug, Parser)]
#[command(name = "sqf", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// λ1,λ2,μ1,μ2
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Option<Vec<f64>>,
    #[arg(long)]
    tol: Option<f64>,
    /// Series truncation depth K (default: chosen from ϱ and the tolerance).
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Expected arrivals summed over all replicas.
    #[arg(long)]
    events: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    /// Simulated service discipline.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long, value_delimiter = ',')]
    tail_levels: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    transform_points: Option<Vec<f64>>,
    #[arg(long)]
    boundary_delta: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    sweep_rho: Option<f64>,
    #[arg(long)]
    sweep_points: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file, or a previous JSON/CSV report whose embedded config is reused.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// `simulate` only: write the event log of replica 0 (at most `--audit-cap` lines).
    #[arg(long)]
    audit_log: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    audit_cap: usize,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            command: None,
            params: self.params.clone(),
            tol: self.tol,
            depth: self.depth,
            seed: self.seed,
            events: self.events,
            replicas: self.replicas,
            warmup_fraction: self.warmup_fraction,
            policy: self.policy,
            tail_levels: self.tail_levels.clone(),
            transform_points: self.transform_points.clone(),
            boundary_delta: self.boundary_delta,
            mode: self.mode,
            resolution: self.resolution,
            sweep_rho: self.sweep_rho,
            sweep_points: self.sweep_points,
            format: self.format,
        }
    }
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::config("io", format!("{}: {e}", path.display()))
}

fn execute(cli: &Cli) -> Result<Option<CliError>, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("invalid_value", "threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    let base = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            Overrides::from_text(&text)?
        }
        None => Overrides::default(),
    };
    let config = RunConfig::resolve(cli.command.as_str(), base.merged(cli.overrides()))?;
    let out = commands::run(cli.command, &config)?;
    match &cli.out {
        Some(path) => std::fs::write(path, &out.text).map_err(|e| io_error(path, e))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(out.text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(CliError::config("io", format!("stdout: {e}")));
                }
                _ => {}
            }
        }
    }
    if let (Command::Simulate, Some(path)) = (cli.command, &cli.audit_log) {
        let log = commands::audit_dump(&config, cli.audit_cap)?;
        std::fs::write(path, log).map_err(|e| io_error(path, e))?;
    }
    Ok(out.failure)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let failure = match execute(&cli) {
        Ok(None) => return ExitCode::SUCCESS,
        Ok(Some(f)) => f,
        Err(e) => e,
    };
    let record = serde_json::json!({ "error": failure.record() });
    eprintln!("{record}");
    ExitCode::from(failure.exit_code() as u8)
}
