//! SMS wire format and the simulated cellular link.

mod link;
mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use link::{
    submit, DeadLetter, GsmNetwork, LinkError, LinkEvent, LinkParams, LinkStats, ScheduledEvent,
};
pub use wire::{
    checksum, decode_alert, decode_status, encode_alert, encode_status, Centi, DecodeError,
    DecodeErrorKind, Payload, WireAlert, WirePlatform, WireStatus, decode,
};

/// Longest payload a single text-mode SMS carries.
pub const MAX_PAYLOAD_LEN: usize = 160;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageError {
    #[error("invalid MSISDN `{0}`: expected `+` followed by 7-15 digits")]
    InvalidMsisdn(String),
    #[error("payload is not ASCII")]
    NonAscii,
    #[error("payload is {0} characters, limit is 160")]
    TooLong(usize),
}

/// A subscriber number: `+` followed by 7 to 15 digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Msisdn(String);

impl Msisdn {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Msisdn {
    type Err = MessageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix('+').unwrap_or("");
        let ok = s.starts_with('+')
            && (7..=15).contains(&digits.len())
            && digits.bytes().all(|b| b.is_ascii_digit());
        if ok {
            Ok(Msisdn(s.to_owned()))
        } else {
            Err(MessageError::InvalidMsisdn(s.to_owned()))
        }
    }
}

impl TryFrom<String> for Msisdn {
    type Error = MessageError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Msisdn> for String {
    fn from(m: Msisdn) -> String {
        m.0
    }
}

impl fmt::Display for Msisdn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Checks the payload is ASCII and fits in one SMS.
pub fn validate_payload(payload: &str) -> Result<(), MessageError> {
    if !payload.is_ascii() {
        return Err(MessageError::NonAscii);
    }
    if payload.len() > MAX_PAYLOAD_LEN {
        return Err(MessageError::TooLong(payload.len()));
    }
    Ok(())
}

/// A text message in flight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SmsMessage {
    from: Msisdn,
    to: Msisdn,
    payload: String,
    submitted_at_ms: u64,
}

impl SmsMessage {
    pub fn new(
        from: Msisdn,
        to: Msisdn,
        payload: impl Into<String>,
        submitted_at_ms: u64,
    ) -> Result<Self, MessageError> {
        let payload = payload.into();
        validate_payload(&payload)?;
        Ok(Self {
            from,
            to,
            payload,
            submitted_at_ms,
        })
    }

    pub fn from(&self) -> &Msisdn {
        &self.from
    }

    pub fn to(&self) -> &Msisdn {
        &self.to
    }

    pub fn payload(&self) -> &str {
        &self.payload
    }

    pub fn submitted_at_ms(&self) -> u64 {
        self.submitted_at_ms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msisdn_grammar() {
        assert!("+639170000001".parse::<Msisdn>().is_ok());
        assert!("+1234567".parse::<Msisdn>().is_ok());
        assert!("+123456789012345".parse::<Msisdn>().is_ok());
        for bad in ["639170000001", "+123456", "+1234567890123456", "+63917x000001", "+", ""] {
            assert!(bad.parse::<Msisdn>().is_err(), "{bad}");
        }
    }

    #[test]
    fn message_limits() {
        let a: Msisdn = "+639170000000".parse().unwrap();
        let b: Msisdn = "+639170000001".parse().unwrap();
        assert!(SmsMessage::new(a.clone(), b.clone(), "x".repeat(160), 0).is_ok());
        assert_eq!(
            SmsMessage::new(a.clone(), b.clone(), "x".repeat(161), 0),
            Err(MessageError::TooLong(161))
        );
        assert_eq!(
            SmsMessage::new(a, b, "température", 0),
            Err(MessageError::NonAscii)
        );
    }
}
