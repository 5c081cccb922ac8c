//! Freezer controller firmware, modelled as pure state transitions.
//!
//! Each sensor frame is checked against the per-platform weight limits. An
//! over-limit platform raises one ALRT to the owner and latches; the latch
//! re-arms only once the weight drops below `limit - hysteresis`. A ring from
//! an authorized number is hung up and answered with a STAT message.

use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gsmlink::{
    encode_alert, encode_status, Centi, MessageError, Msisdn, WireAlert, WirePlatform, WireStatus,
};
use crate::sensing::{raw_to_weight, CalibrationParams, RawAdc, TempReading};

pub type Platform = WirePlatform;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no sensor frame has been read yet")]
    NoFrame,
    #[error("frame time {now_ms} ms precedes previous frame at {last_ms} ms")]
    TimeWentBackwards { last_ms: u64, now_ms: u64 },
    #[error("payload does not fit: {0}")]
    Payload(#[from] MessageError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    pub elev_limit_kg: f64,
    pub main_limit_kg: f64,
    pub elev_unit_kg: f64,
    pub main_unit_kg: f64,
    pub elev_tare_kg: f64,
    pub main_tare_kg: f64,
    pub hysteresis_kg: f64,
    pub owner_msisdn: Msisdn,
    pub authorized: BTreeSet<Msisdn>,
    pub elev_cal: CalibrationParams,
    pub main_cal: CalibrationParams,
}

impl DeviceConfig {
    /// Default limits and calibration, 0.5 kg items, no tare.
    pub fn new(owner: Msisdn) -> Self {
        DeviceConfig {
            elev_limit_kg: 20.0,
            main_limit_kg: 80.0,
            elev_unit_kg: 0.5,
            main_unit_kg: 0.5,
            elev_tare_kg: 0.0,
            main_tare_kg: 0.0,
            hysteresis_kg: 0.5,
            authorized: BTreeSet::from([owner.clone()]),
            owner_msisdn: owner,
            elev_cal: CalibrationParams::ELEVATED,
            main_cal: CalibrationParams::MAIN,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(DeviceError::Config(format!("{name} must be > 0, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(DeviceError::Config(format!("{name} must be >= 0, got {v}")))
            }
        };
        positive("elevLimitKg", self.elev_limit_kg)?;
        positive("mainLimitKg", self.main_limit_kg)?;
        positive("elevUnitKg", self.elev_unit_kg)?;
        positive("mainUnitKg", self.main_unit_kg)?;
        non_negative("elevTareKg", self.elev_tare_kg)?;
        non_negative("mainTareKg", self.main_tare_kg)?;
        non_negative("hysteresisKg", self.hysteresis_kg)?;
        if !self.authorized.contains(&self.owner_msisdn) {
            return Err(DeviceError::Config(format!(
                "owner {} is not in the authorized set",
                self.owner_msisdn
            )));
        }
        Ok(())
    }

    fn limit(&self, platform: Platform) -> f64 {
        match platform {
            Platform::Elev => self.elev_limit_kg,
            Platform::Main => self.main_limit_kg,
        }
    }
}

/// One synchronized read of both weight channels and the thermometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SensorFrame {
    pub t_ms: u64,
    pub elev_raw: RawAdc,
    pub main_raw: RawAdc,
    pub temp: TempReading,
}

impl SensorFrame {
    pub fn gross_kg(&self, platform: Platform, cfg: &DeviceConfig) -> f64 {
        match platform {
            Platform::Elev => raw_to_weight(self.elev_raw, &cfg.elev_cal),
            Platform::Main => raw_to_weight(self.main_raw, &cfg.main_cal),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeviceState {
    /// Sequence number the next outgoing message will carry.
    pub seq: u64,
    pub elev_alert_latched: bool,
    pub main_alert_latched: bool,
    pub last_frame: Option<SensorFrame>,
}

impl DeviceState {
    fn latch_mut(&mut self, platform: Platform) -> &mut bool {
        match platform {
            Platform::Elev => &mut self.elev_alert_latched,
            Platform::Main => &mut self.main_alert_latched,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeviceAction {
    SendSms { to: Msisdn, payload: String },
    Hangup,
}

/// Samples one frame: updates alert latches and emits ALRT messages.
pub fn tick(
    frame: SensorFrame,
    state: &DeviceState,
    cfg: &DeviceConfig,
) -> Result<(DeviceState, Vec<DeviceAction>), DeviceError> {
    if let Some(last) = &state.last_frame {
        if frame.t_ms < last.t_ms {
            return Err(DeviceError::TimeWentBackwards {
                last_ms: last.t_ms,
                now_ms: frame.t_ms,
            });
        }
    }
    let mut next = state.clone();
    let mut actions = Vec::new();
    for platform in [Platform::Elev, Platform::Main] {
        let gross = frame.gross_kg(platform, cfg);
        let limit = cfg.limit(platform);
        let latch = next.latch_mut(platform);
        if *latch {
            if gross < limit - cfg.hysteresis_kg {
                *latch = false;
            }
        } else if gross >= limit {
            *latch = true;
            let payload = encode_alert(&WireAlert {
                seq: next.seq,
                platform,
                kg: Centi::from_f64(gross),
                limit_kg: Centi::from_f64(limit),
            })?;
            next.seq += 1;
            actions.push(DeviceAction::SendSms {
                to: cfg.owner_msisdn.clone(),
                payload,
            });
        }
    }
    next.last_frame = Some(frame);
    Ok((next, actions))
}

/// Answers an incoming call.
///
/// Unauthorized callers get a hangup and nothing else. Before the first frame
/// there is nothing to report and [`DeviceError::NoFrame`] is returned; the
/// caller should still hang up.
pub fn handle_ring(
    caller: &Msisdn,
    state: &DeviceState,
    cfg: &DeviceConfig,
) -> Result<(DeviceState, Vec<DeviceAction>), DeviceError> {
    if !cfg.authorized.contains(caller) {
        return Ok((state.clone(), vec![DeviceAction::Hangup]));
    }
    let frame = state.last_frame.as_ref().ok_or(DeviceError::NoFrame)?;
    let payload = compose_status(frame, cfg, state.seq)?;
    let mut next = state.clone();
    next.seq += 1;
    Ok((
        next,
        vec![
            DeviceAction::Hangup,
            DeviceAction::SendSms {
                to: caller.clone(),
                payload,
            },
        ],
    ))
}

/// Items on a platform: net weight over unit weight, rounded, never negative.
pub fn count_items(gross_kg: f64, tare_kg: f64, unit_kg: f64) -> Result<u32, DeviceError> {
    if unit_kg.is_nan() || unit_kg <= 0.0 {
        return Err(DeviceError::Config(format!(
            "unit weight must be > 0, got {unit_kg}"
        )));
    }
    let count = ((gross_kg - tare_kg) / unit_kg).round();
    Ok(if count.is_nan() || count <= 0.0 {
        0
    } else {
        count.min(u32::MAX as f64) as u32
    })
}

pub fn status_fields(
    frame: &SensorFrame,
    cfg: &DeviceConfig,
    seq: u64,
) -> Result<WireStatus, DeviceError> {
    let elev = frame.gross_kg(Platform::Elev, cfg);
    let main = frame.gross_kg(Platform::Main, cfg);
    Ok(WireStatus {
        seq,
        elev_kg: Centi::from_f64(elev),
        main_kg: Centi::from_f64(main),
        c_elev: count_items(elev, cfg.elev_tare_kg, cfg.elev_unit_kg)?,
        c_main: count_items(main, cfg.main_tare_kg, cfg.main_unit_kg)?,
        temp_c: Centi::from_f64(frame.temp.celsius()),
    })
}

/// The STAT payload for `frame`.
pub fn compose_status(
    frame: &SensorFrame,
    cfg: &DeviceConfig,
    seq: u64,
) -> Result<String, DeviceError> {
    Ok(encode_status(&status_fields(frame, cfg, seq)?)?)
}

/// Single-owner controller instance.
#[derive(Debug, Clone)]
pub struct Device {
    msisdn: Msisdn,
    cfg: DeviceConfig,
    state: DeviceState,
}

impl Device {
    pub fn new(msisdn: Msisdn, cfg: DeviceConfig) -> Result<Self, DeviceError> {
        cfg.validate()?;
        Ok(Device {
            msisdn,
            cfg,
            state: DeviceState::default(),
        })
    }

    pub fn msisdn(&self) -> &Msisdn {
        &self.msisdn
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.cfg
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }

    /// Applies a config change, rejecting it if it would be invalid.
    pub fn reconfigure(&mut self, f: impl FnOnce(&mut DeviceConfig)) -> Result<(), DeviceError> {
        let mut cfg = self.cfg.clone();
        f(&mut cfg);
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    /// Zeroes both platforms at the weights last read.
    pub fn tare(&mut self) -> Result<(), DeviceError> {
        let frame = self.state.last_frame.ok_or(DeviceError::NoFrame)?;
        let elev = frame.gross_kg(Platform::Elev, &self.cfg).max(0.0);
        let main = frame.gross_kg(Platform::Main, &self.cfg).max(0.0);
        self.reconfigure(|c| {
            c.elev_tare_kg = elev;
            c.main_tare_kg = main;
        })
    }

    pub fn tick(&mut self, frame: SensorFrame) -> Result<Vec<DeviceAction>, DeviceError> {
        let (state, actions) = tick(frame, &self.state, &self.cfg)?;
        self.state = state;
        Ok(actions)
    }

    pub fn handle_ring(&mut self, caller: &Msisdn) -> Vec<DeviceAction> {
        match handle_ring(caller, &self.state, &self.cfg) {
            Ok((state, actions)) => {
                self.state = state;
                actions
            }
            Err(err) => {
                warn!("ring from {caller} not answered: {err}");
                vec![DeviceAction::Hangup]
            }
        }
    }
}
