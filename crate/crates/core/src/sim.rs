//! Lockstep simulation loop: plant, device, cellular link and gateway.
//!
//! At any instant, scenario directives run first, then due link events in
//! FIFO order, then the device tick. Time only moves forward.

use std::collections::VecDeque;

use log::warn;
use serde::Serialize;
use thiserror::Error;

use crate::device::{Device, DeviceAction, DeviceConfig, DeviceError};
use crate::gateway::{Gateway, GatewayError, InventoryRecord};
use crate::gsmlink::{GsmNetwork, LinkError, LinkEvent, LinkParams, Msisdn, SmsMessage};
use crate::plant::{apply_event, step, FloorWarning, NoiseParams, PlantState, Sampler, Signal, ThermalParams};
use crate::scenario::{Scenario, ScenarioEvent, SetParam};
use crate::sensing::CornerGains;

pub const DEFAULT_DEVICE_MSISDN: &str = "+639170000000";
pub const DEFAULT_GATEWAY_MSISDN: &str = "+639170000001";
pub const DEFAULT_TICK_MS: u64 = 1000;
pub const DEFAULT_DRAIN_MS: u64 = 60_000;

/// Mixed into the run seed so ADC noise and the link draw from unrelated streams.
const NOISE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    pub device_msisdn: Msisdn,
    pub gateway_msisdn: Msisdn,
    pub device: DeviceConfig,
    /// The link seed is replaced by `seed`.
    pub link: LinkParams,
    pub thermal: ThermalParams,
    pub sigma_counts: f64,
    pub gains: CornerGains,
    pub tick_ms: u64,
    pub initial: PlantState,
}

impl SimConfig {
    /// Owner is the gateway, which is also the only authorized caller.
    pub fn new(seed: u64) -> Self {
        let gateway: Msisdn = DEFAULT_GATEWAY_MSISDN.parse().expect("valid default");
        SimConfig {
            seed,
            device_msisdn: DEFAULT_DEVICE_MSISDN.parse().expect("valid default"),
            device: DeviceConfig::new(gateway.clone()),
            gateway_msisdn: gateway,
            link: LinkParams::default(),
            thermal: ThermalParams::default(),
            sigma_counts: 0.0,
            gains: CornerGains::IDEAL,
            tick_ms: DEFAULT_TICK_MS,
            initial: PlantState::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub frames_processed: u64,
    pub sms_submitted: u64,
    pub sms_delivered: u64,
    pub sms_duplicated: u64,
    pub alerts_emitted: u64,
    pub checks_served: u64,
    pub final_snapshot: Option<InventoryRecord>,
}

pub struct Simulation {
    plant: PlantState,
    thermal: ThermalParams,
    sampler: Sampler,
    device: Device,
    network: GsmNetwork,
    gateway: Gateway,
    pending: VecDeque<ScenarioEvent>,
    tick_ms: u64,
    next_tick_ms: u64,
    last_tick_ms: Option<u64>,
    now_ms: u64,
    warnings: Vec<FloorWarning>,
    frames: u64,
    alerts: u64,
    checks: u64,
}

impl Simulation {
    pub fn new(cfg: SimConfig, scenario: Scenario, gateway: Gateway) -> Result<Self, SimError> {
        let link = LinkParams {
            seed: cfg.seed,
            ..cfg.link
        };
        let mut network = GsmNetwork::new(link)?;
        network.register(cfg.device_msisdn.clone());
        network.register(cfg.gateway_msisdn.clone());
        network.register(cfg.device.owner_msisdn.clone());
        let noise = NoiseParams {
            sigma_counts: cfg.sigma_counts,
            seed: cfg.seed ^ NOISE_SEED_SALT,
        };
        Ok(Simulation {
            plant: cfg.initial.clone(),
            thermal: cfg.thermal,
            sampler: Sampler::new(noise, cfg.gains),
            device: Device::new(cfg.device_msisdn, cfg.device)?,
            network,
            gateway,
            pending: scenario.events.into(),
            tick_ms: cfg.tick_ms.max(1),
            next_tick_ms: cfg.initial.t_ms,
            last_tick_ms: None,
            now_ms: cfg.initial.t_ms,
            warnings: Vec::new(),
            frames: 0,
            alerts: 0,
            checks: 0,
        })
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn network(&self) -> &GsmNetwork {
        &self.network
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn warnings(&self) -> &[FloorWarning] {
        &self.warnings
    }

    pub fn scenario_done(&self) -> bool {
        self.pending.is_empty()
    }

    /// The "Check" button: the gateway rings the device.
    pub fn trigger_check(&mut self) -> Result<u64, SimError> {
        Ok(self.gateway.trigger_check(&mut self.network, self.now_ms)?)
    }

    pub fn report(&self) -> RunReport {
        let stats = self.network.stats();
        RunReport {
            frames_processed: self.frames,
            sms_submitted: stats.sms_submitted,
            sms_delivered: stats.sms_delivered,
            sms_duplicated: stats.sms_duplicated,
            alerts_emitted: self.alerts,
            checks_served: self.checks,
            final_snapshot: self.gateway.query_latest(),
        }
    }

    /// Runs every directive, then keeps ticking for `drain_ms` so in-flight
    /// messages land.
    pub fn run_scenario(&mut self, drain_ms: u64) -> Result<RunReport, SimError> {
        let end = self
            .pending
            .back()
            .map_or(self.now_ms, |e| e.t_ms)
            .saturating_add(drain_ms);
        self.run_until(end)?;
        Ok(self.report())
    }

    /// Processes everything due at or before `t_end`.
    pub fn run_until(&mut self, t_end: u64) -> Result<(), SimError> {
        loop {
            let scenario_at = self.pending.front().map(|e| e.t_ms);
            let link_at = self.network.next_event_at();
            let t = [scenario_at, link_at, Some(self.next_tick_ms)]
                .into_iter()
                .flatten()
                .min()
                .expect("tick is always scheduled");
            if t > t_end {
                break;
            }
            self.now_ms = t;
            if scenario_at == Some(t) {
                let ev = self.pending.pop_front().expect("peeked");
                self.run_directive(&ev)?;
            } else if link_at == Some(t) {
                let ev = self.network.pop_due(t).expect("peeked");
                self.run_link_event(ev.event)?;
            } else {
                self.run_tick()?;
            }
        }
        self.now_ms = self.now_ms.max(t_end);
        Ok(())
    }

    fn advance_plant(&mut self) {
        if self.now_ms > self.plant.t_ms {
            self.plant = step(&self.plant, self.now_ms - self.plant.t_ms, &self.thermal);
        }
    }

    fn run_tick(&mut self) -> Result<(), SimError> {
        self.advance_plant();
        let frame = self.sampler.sample(&self.plant, self.device.config());
        self.frames += 1;
        let actions = self.device.tick(frame)?;
        self.alerts += actions.len() as u64;
        self.dispatch(actions);
        self.last_tick_ms = Some(self.now_ms);
        self.next_tick_ms = self.now_ms + self.tick_ms;
        Ok(())
    }

    fn dispatch(&mut self, actions: Vec<DeviceAction>) -> u64 {
        let mut sent = 0;
        for action in actions {
            if let DeviceAction::SendSms { to, payload } = action {
                match SmsMessage::new(self.device.msisdn().clone(), to, payload, self.now_ms) {
                    Ok(msg) => {
                        self.network.submit_sms(msg);
                        sent += 1;
                    }
                    Err(err) => warn!("device produced an unsendable SMS: {err}"),
                }
            }
        }
        sent
    }

    fn run_link_event(&mut self, event: LinkEvent) -> Result<(), SimError> {
        match event {
            LinkEvent::Ring { from, to } => {
                if &to == self.device.msisdn() {
                    let actions = self.device.handle_ring(&from);
                    self.checks += self.dispatch(actions);
                }
            }
            LinkEvent::SmsDelivered(msg) => {
                if msg.to() == self.gateway.own_msisdn() {
                    self.gateway.ingest_sms(&msg, self.now_ms)?;
                }
            }
        }
        Ok(())
    }

    fn run_directive(&mut self, ev: &ScenarioEvent) -> Result<(), SimError> {
        self.advance_plant();
        let applied = apply_event(&self.plant, ev);
        self.plant = applied.state;
        self.warnings.extend(applied.warning);
        match applied.signal {
            None => {}
            Some(Signal::Call(from)) => {
                if &from == self.gateway.own_msisdn() {
                    self.gateway.trigger_check(&mut self.network, self.now_ms)?;
                } else {
                    self.network
                        .place_call(from, self.device.msisdn().clone(), self.now_ms);
                }
            }
            Some(Signal::Tare) => {
                if let Err(err) = self.device.tare() {
                    warn!("line {}: tare ignored: {err}", ev.line);
                }
            }
            Some(Signal::Set(param)) => self.apply_setting(param)?,
        }
        Ok(())
    }

    fn apply_setting(&mut self, param: SetParam) -> Result<(), SimError> {
        let mut link = self.network.params().clone();
        match param {
            SetParam::TickMs(ms) => {
                self.tick_ms = ms.max(1);
                if let Some(last) = self.last_tick_ms {
                    self.next_tick_ms = (last + self.tick_ms).max(self.now_ms);
                }
            }
            SetParam::SigmaCounts(s) => self.sampler.set_sigma(s),
            SetParam::CornerGains(g) => self.sampler.set_gains(CornerGains::new(g).map_err(|e| {
                DeviceError::Config(e.to_string())
            })?),
            // a range edge moved past the other edge drags it along
            SetParam::LatencyMinMs(ms) => {
                link.latency_ms_min = ms;
                link.latency_ms_max = link.latency_ms_max.max(ms);
            }
            SetParam::LatencyMaxMs(ms) => {
                link.latency_ms_max = ms;
                link.latency_ms_min = link.latency_ms_min.min(ms);
            }
            SetParam::LossProb(p) => link.loss_prob = p,
            SetParam::DupProb(p) => link.dup_prob = p,
            SetParam::CallSetupMs(ms) => link.call_setup_ms = ms,
            SetParam::AmbientC(c) => self.thermal.ambient_c = c,
            SetParam::SetpointC(c) => self.thermal.setpoint_c = c,
            SetParam::KClosed(k) => self.thermal.k_closed = k,
            SetParam::KOpen(k) => self.thermal.k_open = k,
            SetParam::ElevUnitKg(v) => self.device.reconfigure(|c| c.elev_unit_kg = v)?,
            SetParam::MainUnitKg(v) => self.device.reconfigure(|c| c.main_unit_kg = v)?,
            SetParam::ElevTareKg(v) => self.device.reconfigure(|c| c.elev_tare_kg = v)?,
            SetParam::MainTareKg(v) => self.device.reconfigure(|c| c.main_tare_kg = v)?,
            SetParam::ElevLimitKg(v) => self.device.reconfigure(|c| c.elev_limit_kg = v)?,
            SetParam::MainLimitKg(v) => self.device.reconfigure(|c| c.main_limit_kg = v)?,
            SetParam::HysteresisKg(v) => self.device.reconfigure(|c| c.hysteresis_kg = v)?,
            // handled by the plant
            SetParam::TempC(_) | SetParam::Distribution(_) => {}
        }
        if &link != self.network.params() {
            self.network.set_params(link)?;
        }
        Ok(())
    }
}
