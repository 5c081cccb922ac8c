//! Scenario scripts: one timed directive per line.
//!
//! ```text
//! # comment
//! t=0     set tick_ms 500
//! t=1000  add main 30.0
//! t=2000  add elev 4.91
//! t=5000  call +639170000001
//! ```

use std::str::FromStr;

use thiserror::Error;

use crate::device::Platform;
use crate::gsmlink::Msisdn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

/// Tunable knobs reachable through `set <param> <value>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetParam {
    TickMs(u64),
    SigmaCounts(f64),
    LossProb(f64),
    DupProb(f64),
    LatencyMinMs(u64),
    LatencyMaxMs(u64),
    CallSetupMs(u64),
    TempC(f64),
    AmbientC(f64),
    SetpointC(f64),
    KClosed(f64),
    KOpen(f64),
    ElevUnitKg(f64),
    MainUnitKg(f64),
    ElevTareKg(f64),
    MainTareKg(f64),
    ElevLimitKg(f64),
    MainLimitKg(f64),
    HysteresisKg(f64),
    Distribution([f64; 4]),
    CornerGains([f64; 4]),
}

pub const PARAM_NAMES: &[&str] = &[
    "tick_ms",
    "sigma",
    "loss",
    "dup",
    "latency_min",
    "latency_max",
    "call_setup_ms",
    "temp",
    "ambient",
    "setpoint",
    "k_closed",
    "k_open",
    "elev_unit",
    "main_unit",
    "elev_tare",
    "main_tare",
    "elev_limit",
    "main_limit",
    "hysteresis",
    "distribution",
    "gains",
];

impl SetParam {
    fn parse(name: &str, value: &str) -> Result<Self, String> {
        let real = || -> Result<f64, String> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{value}` is not a number"))
        };
        let positive = || real().and_then(|v| if v > 0.0 { Ok(v) } else { Err(format!("{name} must be > 0")) });
        let non_negative = || real().and_then(|v| if v >= 0.0 { Ok(v) } else { Err(format!("{name} must be >= 0")) });
        let probability = || {
            real().and_then(|v| {
                if (0.0..=1.0).contains(&v) {
                    Ok(v)
                } else {
                    Err(format!("{name} must be in [0, 1]"))
                }
            })
        };
        let millis = || value.parse::<u64>().map_err(|_| format!("`{value}` is not a millisecond count"));
        let quad = || -> Result<[f64; 4], String> {
            let parts: Vec<f64> = value
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| format!("`{value}` is not four comma-separated numbers"))?;
            parts
                .try_into()
                .map_err(|_| format!("`{value}` is not four comma-separated numbers"))
        };
        Ok(match name {
            "tick_ms" => match millis()? {
                0 => return Err("tick_ms must be > 0".into()),
                ms => SetParam::TickMs(ms),
            },
            "sigma" => SetParam::SigmaCounts(non_negative()?),
            "loss" => SetParam::LossProb(probability()?),
            "dup" => SetParam::DupProb(probability()?),
            "latency_min" => SetParam::LatencyMinMs(millis()?),
            "latency_max" => SetParam::LatencyMaxMs(millis()?),
            "call_setup_ms" => SetParam::CallSetupMs(millis()?),
            "temp" => SetParam::TempC(real()?),
            "ambient" => SetParam::AmbientC(real()?),
            "setpoint" => SetParam::SetpointC(real()?),
            "k_closed" => SetParam::KClosed(positive()?),
            "k_open" => SetParam::KOpen(positive()?),
            "elev_unit" => SetParam::ElevUnitKg(positive()?),
            "main_unit" => SetParam::MainUnitKg(positive()?),
            "elev_tare" => SetParam::ElevTareKg(non_negative()?),
            "main_tare" => SetParam::MainTareKg(non_negative()?),
            "elev_limit" => SetParam::ElevLimitKg(positive()?),
            "main_limit" => SetParam::MainLimitKg(positive()?),
            "hysteresis" => SetParam::HysteresisKg(non_negative()?),
            "distribution" => {
                let d = quad()?;
                crate::sensing::validate_distribution(&d).map_err(|e| e.to_string())?;
                SetParam::Distribution(d)
            }
            "gains" => {
                let g = quad()?;
                crate::sensing::CornerGains::new(g).map_err(|e| e.to_string())?;
                SetParam::CornerGains(g)
            }
            other => {
                return Err(format!(
                    "unknown parameter `{other}` (expected one of {})",
                    PARAM_NAMES.join(", ")
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Add(Platform, f64),
    Remove(Platform, f64),
    Door { open: bool },
    /// A call from the given number to the device.
    Call(Msisdn),
    Set(SetParam),
    Tare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub t_ms: u64,
    pub action: Action,
    /// 1-based source line.
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn last_event_ms(&self) -> u64 {
        self.events.last().map_or(0, |e| e.t_ms)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut events = Vec::new();
        let mut last_t = 0u64;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ScenarioError { line, message };
            let mut words = content.split_whitespace();
            let t_word = words.next().unwrap_or_default();
            let t_ms = t_word
                .strip_prefix("t=")
                .and_then(|v| v.parse::<u64>().ok())
                .ok_or_else(|| err(format!("expected `t=<ms>`, found `{t_word}`")))?;
            if t_ms < last_t {
                return Err(err(format!(
                    "time {t_ms} ms goes backwards (previous directive at {last_t} ms)"
                )));
            }
            last_t = t_ms;
            let verb = words
                .next()
                .ok_or_else(|| err("missing verb".into()))?;
            let args: Vec<&str> = words.collect();
            let action = parse_action(verb, &args).map_err(err)?;
            events.push(ScenarioEvent { t_ms, action, line });
        }
        Ok(Scenario { events })
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::parse(s)
    }
}

fn expect_args(verb: &str, args: &[&str], n: usize) -> Result<(), String> {
    if args.len() == n {
        Ok(())
    } else {
        Err(format!("`{verb}` takes {n} argument(s), got {}", args.len()))
    }
}

fn parse_platform(s: &str) -> Result<Platform, String> {
    match s {
        "elev" => Ok(Platform::Elev),
        "main" => Ok(Platform::Main),
        other => Err(format!("unknown platform `{other}` (expected elev or main)")),
    }
}

fn parse_kg(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(kg) if kg.is_finite() && kg > 0.0 => Ok(kg),
        _ => Err(format!("`{s}` is not a positive weight")),
    }
}

fn parse_action(verb: &str, args: &[&str]) -> Result<Action, String> {
    match verb {
        "add" | "remove" => {
            expect_args(verb, args, 2)?;
            let platform = parse_platform(args[0])?;
            let kg = parse_kg(args[1])?;
            Ok(if verb == "add" {
                Action::Add(platform, kg)
            } else {
                Action::Remove(platform, kg)
            })
        }
        "door" => {
            expect_args(verb, args, 1)?;
            match args[0] {
                "open" => Ok(Action::Door { open: true }),
                "close" => Ok(Action::Door { open: false }),
                other => Err(format!("door state `{other}` (expected open or close)")),
            }
        }
        "call" => {
            expect_args(verb, args, 1)?;
            args[0].parse().map(Action::Call).map_err(|e| e.to_string())
        }
        "set" => {
            expect_args(verb, args, 2)?;
            SetParam::parse(args[0], args[1]).map(Action::Set)
        }
        "tare" => {
            expect_args(verb, args, 0)?;
            Ok(Action::Tare)
        }
        other => Err(format!("unknown verb `{other}`")),
    }
}
