//! Command implementations behind the `freezer` binary.

pub mod api;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use log::{info, warn};
use thiserror::Error;

use freezer_core::gateway::Gateway;
use freezer_core::scenario::Scenario;
use freezer_core::sensing::{fit_calibration, read_pairs, CalibrationParams};
use freezer_core::sim::{RunReport, SimConfig, Simulation};
use freezer_core::tables::{recompute, table, ErrorFormula};

pub const EVENTS_FILE: &str = "events.log";
pub const TRACE_FILE: &str = "sms.trace";
pub const REPORT_FILE: &str = "report.json";

/// Wall-clock period of the serve loop.
const SERVE_STEP: Duration = Duration::from_millis(50);

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or unparseable input.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn runtime(context: &str) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Scenario::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn build_simulation(scenario: Scenario, seed: u64, log: Option<&Path>) -> Result<Simulation, CliError> {
    let cfg = SimConfig::new(seed);
    let gateway = match log {
        Some(path) => Gateway::open(
            cfg.gateway_msisdn.clone(),
            Some(cfg.device_msisdn.clone()),
            path,
        )
        .map_err(|e| CliError::Runtime(e.to_string()))?,
        None => Gateway::new(cfg.gateway_msisdn.clone(), Some(cfg.device_msisdn.clone())),
    };
    Simulation::new(cfg, scenario, gateway).map_err(|e| CliError::Usage(e.to_string()))
}

/// Runs a scenario to completion and writes the event log, SMS trace and
/// report into `out`. An existing event log there is replaced.
pub fn simulate(scenario: &Path, seed: u64, out: &Path, drain_ms: u64) -> Result<RunReport, CliError> {
    let scenario = load_scenario(scenario)?;
    fs::create_dir_all(out).map_err(|e| runtime("creating output directory")(e.to_string()))?;
    let log_path = out.join(EVENTS_FILE);
    match fs::remove_file(&log_path) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(runtime("removing old event log")(e.to_string())),
    }
    let mut sim = build_simulation(scenario, seed, Some(&log_path))?;
    let report = sim
        .run_scenario(drain_ms)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for w in sim.warnings() {
        warn!(
            "t={} {:?}: removal of {} kg exceeded the load by {} kg",
            w.t_ms, w.platform, w.requested_kg, w.shortfall_kg
        );
    }

    let mut trace = String::new();
    for line in sim.network().trace_lines() {
        trace.push_str(&line);
        trace.push('\n');
    }
    fs::write(out.join(TRACE_FILE), trace).map_err(|e| runtime("writing SMS trace")(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(out.join(REPORT_FILE), format!("{json}\n"))
        .map_err(|e| runtime("writing report")(e.to_string()))?;
    Ok(report)
}

pub fn calibrate(pairs: &Path) -> Result<CalibrationParams, CliError> {
    let file = fs::File::open(pairs)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", pairs.display())))?;
    let pairs = read_pairs(file).map_err(|e| CliError::Usage(e.to_string()))?;
    fit_calibration(&pairs).map_err(|e| CliError::Usage(e.to_string()))
}

/// Renders one error table: printed value, recomputed value and delta per row.
pub fn errors(number: u8, out: &mut impl Write) -> Result<(), CliError> {
    let t = table(number).ok_or_else(|| CliError::Usage(format!("no table {number}; use 1, 2 or 3")))?;
    let report = recompute(t).map_err(|e| CliError::Runtime(e.to_string()))?;
    let formula = match t.formula {
        ErrorFormula::RelativeDifference => "|a-m| / ((a+m)/2) * 100",
        ErrorFormula::Reference => "|a-m| / |a| * 100",
    };
    let io = |e: std::io::Error| CliError::Runtime(e.to_string());
    writeln!(out, "Table {}: {}", t.number, t.title).map_err(io)?;
    writeln!(out, "error = {formula}").map_err(io)?;
    writeln!(
        out,
        "{:>10} {:>10} {:>10} {:>12} {:>8}",
        format!("actual {}", t.unit),
        "measured",
        "printed %",
        "recomputed %",
        "delta"
    )
    .map_err(io)?;
    for r in &report.rows {
        writeln!(
            out,
            "{:>10} {:>10} {:>10} {:>12.4} {:>8.4}",
            r.actual, r.measured, r.printed, r.recomputed, r.delta
        )
        .map_err(io)?;
    }
    writeln!(
        out,
        "success rate: recomputed {:.3}%, quoted {}%",
        report.success_rate, report.quoted_success_rate
    )
    .map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub port: u16,
    pub scenario: PathBuf,
    pub seed: u64,
    /// Simulated milliseconds per wall-clock millisecond.
    pub realtime_factor: f64,
    pub log: Option<PathBuf>,
}

/// Serves the HTTP API while a background task advances the simulation.
pub async fn serve(opts: ServeOptions) -> Result<(), CliError> {
    if !(opts.realtime_factor.is_finite() && opts.realtime_factor > 0.0) {
        return Err(CliError::Usage(format!(
            "--realtime-factor must be positive, got {}",
            opts.realtime_factor
        )));
    }
    let scenario = load_scenario(&opts.scenario)?;
    let sim = build_simulation(scenario, opts.seed, opts.log.as_deref())?;
    let shared: api::Shared = Arc::new(Mutex::new(sim));

    let listener = tokio::net::TcpListener::bind(("0.0.0.0", opts.port))
        .await
        .map_err(|e| CliError::Runtime(format!("binding port {}: {e}", opts.port)))?;
    let addr = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
    info!("listening on http://{addr}");

    let stepper = tokio::spawn(advance_forever(shared.clone(), opts.realtime_factor));
    let result = axum::serve(listener, api::router(shared))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Runtime(e.to_string()));
    stepper.abort();
    result
}

async fn advance_forever(sim: api::Shared, factor: f64) {
    let mut interval = tokio::time::interval(SERVE_STEP);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let step_ms = (SERVE_STEP.as_millis() as f64 * factor).max(1.0) as u64;
    loop {
        interval.tick().await;
        let mut guard = sim.lock().unwrap_or_else(|p| p.into_inner());
        let target = guard.now_ms() + step_ms;
        if let Err(err) = guard.run_until(target) {
            warn!("simulation stopped: {err}");
            return;
        }
    }
}
