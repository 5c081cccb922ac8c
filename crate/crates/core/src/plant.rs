//! The physical freezer: true weights, air temperature, and the sensors
//! that observe them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::device::{DeviceConfig, Platform, SensorFrame};
use crate::gsmlink::Msisdn;
use crate::scenario::{Action, ScenarioEvent, SetParam};
use crate::sensing::{bridge_raw, quantize_temp, weight_to_raw, CornerGains, RawAdc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlantState {
    pub t_ms: u64,
    pub elev_kg: f64,
    pub main_kg: f64,
    pub temp_c: f64,
    pub door_open: bool,
    /// Share of the main-platform load on each bridge corner.
    pub distribution: [f64; 4],
}

impl Default for PlantState {
    fn default() -> Self {
        PlantState {
            t_ms: 0,
            elev_kg: 0.0,
            main_kg: 0.0,
            temp_c: -18.0,
            door_open: false,
            distribution: [0.25; 4],
        }
    }
}

impl PlantState {
    fn weight_mut(&mut self, platform: Platform) -> &mut f64 {
        match platform {
            Platform::Elev => &mut self.elev_kg,
            Platform::Main => &mut self.main_kg,
        }
    }
}

/// First-order freezer air model. Rates are per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThermalParams {
    pub setpoint_c: f64,
    pub ambient_c: f64,
    pub k_closed: f64,
    pub k_open: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams {
            setpoint_c: -18.0,
            ambient_c: 25.0,
            k_closed: 0.01,
            k_open: 0.05,
        }
    }
}

/// One explicit Euler step of `dT/dt = -k (T - target)`.
///
/// The target is the setpoint with the door closed and ambient with it open.
/// The step gain `k * dt` is capped at 1 so a long step lands on the target
/// instead of overshooting it.
pub fn step(state: &PlantState, dt_ms: u64, tp: &ThermalParams) -> PlantState {
    let (k, target) = if state.door_open {
        (tp.k_open, tp.ambient_c)
    } else {
        (tp.k_closed, tp.setpoint_c)
    };
    let gain = (k * dt_ms as f64 / 1000.0).min(1.0);
    PlantState {
        t_ms: state.t_ms + dt_ms,
        temp_c: state.temp_c - gain * (state.temp_c - target),
        ..state.clone()
    }
}

/// Effects of a directive that the plant itself cannot carry out.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Call(Msisdn),
    Set(SetParam),
    Tare,
}

/// A removal asked for more than was on the platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FloorWarning {
    pub t_ms: u64,
    pub platform: Platform,
    pub requested_kg: f64,
    /// Part of the request that could not be removed.
    pub shortfall_kg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub state: PlantState,
    pub signal: Option<Signal>,
    pub warning: Option<FloorWarning>,
}

/// Applies one directive at the current plant time.
///
/// Weight and door changes land in the returned state; `set temp` and
/// `set distribution` too. Everything else comes back as a [`Signal`].
pub fn apply_event(state: &PlantState, ev: &ScenarioEvent) -> Applied {
    let mut next = state.clone();
    let mut signal = None;
    let mut warning = None;
    match &ev.action {
        Action::Add(platform, kg) => *next.weight_mut(*platform) += kg,
        Action::Remove(platform, kg) => {
            let w = next.weight_mut(*platform);
            if *kg > *w {
                warning = Some(FloorWarning {
                    t_ms: state.t_ms,
                    platform: *platform,
                    requested_kg: *kg,
                    shortfall_kg: *kg - *w,
                });
                log::warn!(
                    "t={} remove {kg} kg from {} floors at zero",
                    state.t_ms,
                    platform.token()
                );
                *w = 0.0;
            } else {
                *w -= kg;
            }
        }
        Action::Door { open } => next.door_open = *open,
        Action::Set(SetParam::TempC(c)) => next.temp_c = *c,
        Action::Set(SetParam::Distribution(d)) => next.distribution = *d,
        Action::Set(p) => signal = Some(Signal::Set(*p)),
        Action::Call(from) => signal = Some(Signal::Call(from.clone())),
        Action::Tare => signal = Some(Signal::Tare),
    }
    Applied {
        state: next,
        signal,
        warning,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoiseParams {
    /// Standard deviation of additive ADC noise, in counts.
    pub sigma_counts: f64,
    pub seed: u64,
}

/// Produces sensor frames from plant state, with seeded Gaussian ADC noise.
#[derive(Debug, Clone)]
pub struct Sampler {
    sigma_counts: f64,
    gains: CornerGains,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(noise: NoiseParams, gains: CornerGains) -> Self {
        Sampler {
            sigma_counts: noise.sigma_counts.max(0.0),
            gains,
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
        }
    }

    pub fn set_sigma(&mut self, sigma_counts: f64) {
        self.sigma_counts = sigma_counts.max(0.0);
    }

    pub fn set_gains(&mut self, gains: CornerGains) {
        self.gains = gains;
    }

    fn noisy(&mut self, raw: RawAdc) -> RawAdc {
        // always draw, so the stream does not depend on sigma
        let z: f64 = Normal::new(0.0, 1.0)
            .expect("unit normal")
            .sample(&mut self.rng);
        if self.sigma_counts == 0.0 {
            return raw;
        }
        RawAdc::from_f64(raw.counts() as f64 + z * self.sigma_counts)
    }

    /// Reads both channels (elevated first) and the thermometer.
    pub fn sample(&mut self, state: &PlantState, cfg: &DeviceConfig) -> SensorFrame {
        let elev = weight_to_raw(state.elev_kg, &cfg.elev_cal);
        // plant state keeps a valid distribution; fall back to an even split
        let main = bridge_raw(state.main_kg, &state.distribution, &self.gains, &cfg.main_cal)
            .unwrap_or_else(|_| weight_to_raw(state.main_kg, &cfg.main_cal));
        SensorFrame {
            t_ms: state.t_ms,
            elev_raw: self.noisy(elev),
            main_raw: self.noisy(main),
            temp: quantize_temp(state.temp_c),
        }
    }
}
