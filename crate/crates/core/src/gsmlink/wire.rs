//! Text-mode payload grammar.
//!
//! ```text
//! STAT;v=1;seq=<u>;elev=<f2>;main=<f2>;cElev=<u>;cMain=<u>;t=<f2>;cs=<hex4>
//! ALRT;v=1;seq=<u>;plat=<ELEV|MAIN>;w=<f2>;lim=<f2>;cs=<hex4>
//! ```
//!
//! `<f2>` is a fixed two-decimal number with an optional leading `-`.
//! `<hex4>` is the byte sum (mod 2^16) of everything up to and including
//! `;cs=`, as four upper-case hex digits.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_payload, MessageError, MAX_PAYLOAD_LEN};

pub const WIRE_VERSION: u32 = 1;
const STAT_TAG: &str = "STAT";
const ALRT_TAG: &str = "ALRT";
const CS_MARKER: &str = ";cs=";

/// A fixed-point value in hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Centi(pub i64);

impl Centi {
    /// Rounds to the nearest hundredth, ties away from zero.
    pub fn from_f64(value: f64) -> Self {
        let scaled = (value * 100.0).round();
        Centi(if scaled.is_nan() { 0 } else { scaled as i64 })
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Centi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WirePlatform {
    #[serde(rename = "ELEV")]
    Elev,
    #[serde(rename = "MAIN")]
    Main,
}

impl WirePlatform {
    pub fn token(self) -> &'static str {
        match self {
            WirePlatform::Elev => "ELEV",
            WirePlatform::Main => "MAIN",
        }
    }
}

/// Periodic or on-demand inventory status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireStatus {
    pub seq: u64,
    pub elev_kg: Centi,
    pub main_kg: Centi,
    pub c_elev: u32,
    pub c_main: u32,
    pub temp_c: Centi,
}

/// Over-limit notification for one platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireAlert {
    pub seq: u64,
    pub platform: WirePlatform,
    pub kg: Centi,
    pub limit_kg: Centi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    Status(WireStatus),
    Alert(WireAlert),
}

impl Payload {
    pub fn seq(&self) -> u64 {
        match self {
            Payload::Status(s) => s.seq,
            Payload::Alert(a) => a.seq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeErrorKind {
    NonAscii,
    TooLong,
    BadPrefix,
    UnknownVersion,
    FieldOrder,
    ChecksumMismatch,
    InvalidNumber,
    NumericOverflow,
    InvalidPlatform,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?}: {detail}")]
pub struct DecodeError {
    pub kind: DecodeErrorKind,
    pub detail: String,
}

impl DecodeError {
    fn new(kind: DecodeErrorKind, detail: impl Into<String>) -> Self {
        DecodeError {
            kind,
            detail: detail.into(),
        }
    }
}

/// Byte sum mod 65536 as four upper-case hex digits.
pub fn checksum(text: &str) -> Result<String, MessageError> {
    if !text.is_ascii() {
        return Err(MessageError::NonAscii);
    }
    Ok(format!("{:04X}", checksum_value(text.as_bytes())))
}

fn checksum_value(bytes: &[u8]) -> u16 {
    bytes
        .iter()
        .fold(0u16, |acc, &b| acc.wrapping_add(b as u16))
}

fn seal(mut body: String) -> Result<String, MessageError> {
    body.push_str(CS_MARKER);
    let cs = checksum(&body)?;
    body.push_str(&cs);
    validate_payload(&body)?;
    Ok(body)
}

pub fn encode_status(ws: &WireStatus) -> Result<String, MessageError> {
    seal(format!(
        "{STAT_TAG};v={WIRE_VERSION};seq={};elev={};main={};cElev={};cMain={};t={}",
        ws.seq, ws.elev_kg, ws.main_kg, ws.c_elev, ws.c_main, ws.temp_c
    ))
}

pub fn encode_alert(wa: &WireAlert) -> Result<String, MessageError> {
    seal(format!(
        "{ALRT_TAG};v={WIRE_VERSION};seq={};plat={};w={};lim={}",
        wa.seq,
        wa.platform.token(),
        wa.kg,
        wa.limit_kg
    ))
}

/// Validated fields between the version and checksum tokens.
struct Fields<'a> {
    tokens: Vec<&'a str>,
    next: usize,
}

impl<'a> Fields<'a> {
    fn take(&mut self, key: &str) -> Result<&'a str, DecodeError> {
        let token = self.tokens.get(self.next).ok_or_else(|| {
            DecodeError::new(DecodeErrorKind::FieldOrder, format!("missing `{key}`"))
        })?;
        self.next += 1;
        match token.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(DecodeError::new(
                DecodeErrorKind::FieldOrder,
                format!("expected `{key}=`, found `{token}`"),
            )),
        }
    }

    fn finish(self) -> Result<(), DecodeError> {
        if self.next == self.tokens.len() {
            Ok(())
        } else {
            Err(DecodeError::new(
                DecodeErrorKind::FieldOrder,
                format!("unexpected field `{}`", self.tokens[self.next]),
            ))
        }
    }
}

/// Checks framing, version and checksum, and hands back the body fields.
fn open<'a>(text: &'a str, tag: &str) -> Result<Fields<'a>, DecodeError> {
    if !text.is_ascii() {
        return Err(DecodeError::new(DecodeErrorKind::NonAscii, "payload is not ASCII"));
    }
    if text.len() > MAX_PAYLOAD_LEN {
        return Err(DecodeError::new(
            DecodeErrorKind::TooLong,
            format!("{} characters", text.len()),
        ));
    }
    let mut tokens: Vec<&str> = text.split(';').collect();
    if tokens[0] != tag {
        return Err(DecodeError::new(
            DecodeErrorKind::BadPrefix,
            format!("expected `{tag}`"),
        ));
    }
    match tokens.get(1).and_then(|t| t.split_once('=')) {
        Some(("v", "1")) => {}
        Some(("v", v)) => {
            return Err(DecodeError::new(
                DecodeErrorKind::UnknownVersion,
                format!("version `{v}`"),
            ))
        }
        _ => {
            return Err(DecodeError::new(
                DecodeErrorKind::FieldOrder,
                "version must follow the tag",
            ))
        }
    }
    let cs = match tokens.last().and_then(|t| t.strip_prefix("cs=")) {
        Some(cs) if tokens.len() > 2 => cs,
        _ => {
            return Err(DecodeError::new(
                DecodeErrorKind::FieldOrder,
                "checksum must be the last field",
            ))
        }
    };
    let covered = &text[..text.len() - cs.len()];
    let expected = format!("{:04X}", checksum_value(covered.as_bytes()));
    if cs != expected {
        return Err(DecodeError::new(
            DecodeErrorKind::ChecksumMismatch,
            format!("got `{cs}`, computed `{expected}`"),
        ));
    }
    tokens.pop();
    Ok(Fields {
        tokens: tokens.split_off(2),
        next: 0,
    })
}

fn parse_digits(s: &str) -> Result<&str, DecodeError> {
    let canonical = !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_digit())
        && (s == "0" || !s.starts_with('0'));
    if canonical {
        Ok(s)
    } else {
        Err(DecodeError::new(
            DecodeErrorKind::InvalidNumber,
            format!("`{s}` is not an unsigned integer"),
        ))
    }
}

fn overflow(s: &str) -> DecodeError {
    DecodeError::new(DecodeErrorKind::NumericOverflow, format!("`{s}` out of range"))
}

fn parse_u64(s: &str) -> Result<u64, DecodeError> {
    parse_digits(s)?.parse().map_err(|_| overflow(s))
}

fn parse_u32(s: &str) -> Result<u32, DecodeError> {
    parse_digits(s)?.parse().map_err(|_| overflow(s))
}

fn parse_f2(s: &str) -> Result<Centi, DecodeError> {
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let invalid = || {
        DecodeError::new(
            DecodeErrorKind::InvalidNumber,
            format!("`{s}` is not a two-decimal number"),
        )
    };
    let (int, frac) = body.split_once('.').ok_or_else(invalid)?;
    if frac.len() != 2 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(invalid());
    }
    let int = parse_digits(int).map_err(|_| invalid())?;
    let magnitude = int
        .parse::<i128>()
        .ok()
        .and_then(|i| i.checked_mul(100))
        .and_then(|i| i.checked_add(frac.parse::<i128>().ok()?))
        .ok_or_else(|| overflow(s))?;
    if negative && magnitude == 0 {
        return Err(invalid());
    }
    let value = if negative { -magnitude } else { magnitude };
    i64::try_from(value).map(Centi).map_err(|_| overflow(s))
}

pub fn decode_status(text: &str) -> Result<WireStatus, DecodeError> {
    let mut f = open(text, STAT_TAG)?;
    let seq = f.take("seq")?;
    let elev = f.take("elev")?;
    let main = f.take("main")?;
    let c_elev = f.take("cElev")?;
    let c_main = f.take("cMain")?;
    let t = f.take("t")?;
    f.finish()?;
    Ok(WireStatus {
        seq: parse_u64(seq)?,
        elev_kg: parse_f2(elev)?,
        main_kg: parse_f2(main)?,
        c_elev: parse_u32(c_elev)?,
        c_main: parse_u32(c_main)?,
        temp_c: parse_f2(t)?,
    })
}

/// Decodes an alert. The `w >= lim` device policy is not re-checked here.
pub fn decode_alert(text: &str) -> Result<WireAlert, DecodeError> {
    let mut f = open(text, ALRT_TAG)?;
    let seq = f.take("seq")?;
    let plat = f.take("plat")?;
    let w = f.take("w")?;
    let lim = f.take("lim")?;
    f.finish()?;
    let platform = match plat {
        "ELEV" => WirePlatform::Elev,
        "MAIN" => WirePlatform::Main,
        other => {
            return Err(DecodeError::new(
                DecodeErrorKind::InvalidPlatform,
                format!("platform `{other}`"),
            ))
        }
    };
    Ok(WireAlert {
        seq: parse_u64(seq)?,
        platform,
        kg: parse_f2(w)?,
        limit_kg: parse_f2(lim)?,
    })
}

/// Dispatches on the leading tag.
pub fn decode(text: &str) -> Result<Payload, DecodeError> {
    if text.starts_with("ALRT;") {
        decode_alert(text).map(Payload::Alert)
    } else {
        decode_status(text).map(Payload::Status)
    }
}
