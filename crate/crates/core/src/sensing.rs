//! Numeric core of the weighing and temperature channels.
//!
//! Load cells are read through a 24-bit amplifier ADC. Counts map to
//! kilograms through a linear [`CalibrationParams`] transform,
//! `kg = (raw - offset) / factor`. The main platform is a four-cell bridge
//! feeding a single channel; the elevated platform is a single bar cell.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest count the 24-bit ADC can report.
pub const ADC_MAX: i32 = (1 << 23) - 1;
/// Smallest count the 24-bit ADC can report.
pub const ADC_MIN: i32 = -(1 << 23);

/// Thermometer range in degrees Celsius.
pub const TEMP_MIN_C: f64 = -55.0;
pub const TEMP_MAX_C: f64 = 125.0;
/// Steps per degree in 12-bit mode.
const TEMP_STEPS_PER_C: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("calibration factor must be finite and non-zero, got {0}")]
    InvalidFactor(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("undefined denominator for actual={actual}, measured={measured}")]
    UndefinedDenominator { actual: f64, measured: f64 },
    #[error("load distribution must be non-negative and sum to 1, got {0:?}")]
    InvalidDistribution([f64; 4]),
    #[error("corner gains must be positive and finite, got {0:?}")]
    InvalidGains([f64; 4]),
    #[error("calibration pairs file: {0}")]
    PairsFile(String),
}

/// Linear counts-per-kilogram transform of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    factor: f64,
    offset: i64,
}

impl CalibrationParams {
    /// Main (bridge) platform constants.
    pub const MAIN: CalibrationParams = CalibrationParams {
        factor: -9475.0,
        offset: -922_696,
    };
    /// Elevated (bar cell) platform constants.
    pub const ELEVATED: CalibrationParams = CalibrationParams {
        factor: 40100.0,
        offset: 190_468,
    };

    pub fn new(factor: f64, offset: i64) -> Result<Self, SensingError> {
        if factor == 0.0 || !factor.is_finite() {
            return Err(SensingError::InvalidFactor(factor));
        }
        Ok(Self { factor, offset })
    }

    /// ADC counts per kilogram.
    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// ADC counts at zero load.
    pub fn offset(&self) -> i64 {
        self.offset
    }
}

/// One 24-bit ADC conversion result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawAdc(i32);

impl RawAdc {
    /// Saturates to the 24-bit range.
    pub fn saturating(counts: i64) -> Self {
        RawAdc(counts.clamp(ADC_MIN as i64, ADC_MAX as i64) as i32)
    }

    /// Rounds (ties away from zero) and saturates. NaN maps to zero.
    pub fn from_f64(counts: f64) -> Self {
        if counts.is_nan() {
            return RawAdc(0);
        }
        let clamped = counts.round().clamp(ADC_MIN as f64, ADC_MAX as f64);
        RawAdc(clamped as i32)
    }

    pub fn counts(self) -> i32 {
        self.0
    }
}

/// A thermometer reading on the 1/16 °C grid.
///
/// Stored as sixteenths of a degree so the grid invariant holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TempReading {
    sixteenths: i16,
}

impl TempReading {
    pub fn celsius(self) -> f64 {
        self.sixteenths as f64 / TEMP_STEPS_PER_C
    }

    pub fn sixteenths(self) -> i16 {
        self.sixteenths
    }
}

/// Per-corner sensitivity multipliers of the main bridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerGains([f64; 4]);

impl CornerGains {
    pub const IDEAL: CornerGains = CornerGains([1.0; 4]);

    pub fn new(gains: [f64; 4]) -> Result<Self, SensingError> {
        if gains.iter().all(|g| g.is_finite() && *g > 0.0) {
            Ok(CornerGains(gains))
        } else {
            Err(SensingError::InvalidGains(gains))
        }
    }

    pub fn values(&self) -> [f64; 4] {
        self.0
    }
}

impl Default for CornerGains {
    fn default() -> Self {
        Self::IDEAL
    }
}

pub fn raw_to_weight(raw: RawAdc, cal: &CalibrationParams) -> f64 {
    (raw.0 as i64 - cal.offset) as f64 / cal.factor
}

/// Inverse calibration: the count the ADC would report for `kg`, saturated.
pub fn weight_to_raw(kg: f64, cal: &CalibrationParams) -> RawAdc {
    RawAdc::from_f64(cal.offset as f64 + cal.factor * kg)
}

/// Tolerance on the distribution sum.
const DISTRIBUTION_EPS: f64 = 1e-9;

pub fn validate_distribution(distribution: &[f64; 4]) -> Result<(), SensingError> {
    let sum: f64 = distribution.iter().sum();
    let non_negative = distribution.iter().all(|d| d.is_finite() && *d >= 0.0);
    if !non_negative || (sum - 1.0).abs() > DISTRIBUTION_EPS {
        return Err(SensingError::InvalidDistribution(*distribution));
    }
    Ok(())
}

/// Reading of a four-cell bridge carrying `total_kg` split over its corners.
///
/// The bridge sums the corner signals, so each corner contributes its share of
/// the load scaled by its gain.
pub fn bridge_raw(
    total_kg: f64,
    distribution: &[f64; 4],
    gains: &CornerGains,
    cal: &CalibrationParams,
) -> Result<RawAdc, SensingError> {
    validate_distribution(distribution)?;
    let gains = gains.values();
    // Ideal bridges skip the weighted sum so the result is independent of the
    // distribution down to the last bit.
    let effective = if gains == CornerGains::IDEAL.0 {
        total_kg
    } else {
        total_kg
            * distribution
                .iter()
                .zip(gains.iter())
                .map(|(d, g)| d * g)
                .sum::<f64>()
    };
    Ok(weight_to_raw(effective, cal))
}

/// Nearest 1/16 °C (ties away from zero), clamped to the sensor range.
pub fn quantize_temp(celsius: f64) -> TempReading {
    let c = if celsius.is_nan() { 0.0 } else { celsius };
    let steps = (c * TEMP_STEPS_PER_C).round().clamp(
        TEMP_MIN_C * TEMP_STEPS_PER_C,
        TEMP_MAX_C * TEMP_STEPS_PER_C,
    );
    TempReading {
        sixteenths: steps as i16,
    }
}

/// Ordinary least squares fit of `raw = offset + factor * kg`.
///
/// The offset is rounded to the nearest count.
pub fn fit_calibration(pairs: &[(RawAdc, f64)]) -> Result<CalibrationParams, SensingError> {
    if pairs.len() < 2 {
        return Err(SensingError::DegenerateInput("need at least two pairs"));
    }
    let n = pairs.len() as f64;
    let mean_kg = pairs.iter().map(|(_, kg)| kg).sum::<f64>() / n;
    let mean_raw = pairs.iter().map(|(r, _)| r.0 as f64).sum::<f64>() / n;
    let (sxx, sxy) = pairs.iter().fold((0.0, 0.0), |(sxx, sxy), (r, kg)| {
        let dx = kg - mean_kg;
        (sxx + dx * dx, sxy + dx * (r.0 as f64 - mean_raw))
    });
    let distinct = pairs.iter().any(|(_, kg)| *kg != pairs[0].1);
    if !distinct || sxx == 0.0 {
        return Err(SensingError::DegenerateInput(
            "need at least two distinct kilogram values",
        ));
    }
    let factor = sxy / sxx;
    let offset = (mean_raw - factor * mean_kg).round() as i64;
    CalibrationParams::new(factor, offset)
}

#[derive(Debug, Deserialize)]
struct PairRow {
    raw: i64,
    kg: f64,
}

/// Reads a `raw,kg` CSV of calibration pairs.
pub fn read_pairs<R: Read>(reader: R) -> Result<Vec<(RawAdc, f64)>, SensingError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SensingError::PairsFile(e.to_string()))?
        .clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["raw", "kg"] {
        return Err(SensingError::PairsFile(format!(
            "expected header `raw,kg`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut pairs = Vec::new();
    for (i, row) in rdr.deserialize::<PairRow>().enumerate() {
        // header is line 1
        let row = row.map_err(|e| SensingError::PairsFile(format!("line {}: {e}", i + 2)))?;
        if !row.kg.is_finite() {
            return Err(SensingError::PairsFile(format!(
                "line {}: kg is not finite",
                i + 2
            )));
        }
        pairs.push((RawAdc::saturating(row.raw), row.kg));
    }
    Ok(pairs)
}

/// Relative percent difference: `|a - m| / ((a + m) / 2) * 100`.
pub fn percent_error_rpd(actual: f64, measured: f64) -> Result<f64, SensingError> {
    let mean = (actual + measured) / 2.0;
    if mean == 0.0 {
        return Err(SensingError::UndefinedDenominator { actual, measured });
    }
    Ok((actual - measured).abs() / mean.abs() * 100.0)
}

/// Percent error against the reference: `|a - m| / |a| * 100`, zero when equal.
pub fn percent_error_ref(actual: f64, measured: f64) -> Result<f64, SensingError> {
    if actual == measured {
        return Ok(0.0);
    }
    if actual == 0.0 {
        return Err(SensingError::UndefinedDenominator { actual, measured });
    }
    Ok((actual - measured).abs() / actual.abs() * 100.0)
}

/// `100 - mean(errors)`.
pub fn success_rate(errors: &[f64]) -> Result<f64, SensingError> {
    if errors.is_empty() {
        return Err(SensingError::DegenerateInput("no error samples"));
    }
    Ok(100.0 - errors.iter().sum::<f64>() / errors.len() as f64)
}
