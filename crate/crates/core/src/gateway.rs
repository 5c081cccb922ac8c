//! Phone-side backend: turns delivered SMS into an append-only event log and
//! the inventory views derived from it.
//!
//! All state is a fold over the log. Ingesting a message decides which entry
//! to append and then applies that entry exactly as a replay would, so a
//! gateway restarted from its log file answers every query identically.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::Platform;
use crate::gsmlink::{decode, DecodeErrorKind, GsmNetwork, Msisdn, Payload, SmsMessage};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("device MSISDN is not configured")]
    Unconfigured,
    #[error("event log I/O: {0}")]
    Io(#[from] io::Error),
    #[error("event log line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InventoryRecord {
    pub device_msisdn: Msisdn,
    pub seq: u64,
    pub received_at_ms: u64,
    pub elev_kg: f64,
    pub main_kg: f64,
    pub c_elev: u32,
    pub c_main: u32,
    pub temp_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertRecord {
    pub device_msisdn: Msisdn,
    pub seq: u64,
    pub received_at_ms: u64,
    pub platform: Platform,
    pub kg: f64,
    pub limit_kg: f64,
    pub acknowledged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckRequest {
    pub device_msisdn: Msisdn,
    pub caller: Msisdn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DuplicateRecord {
    pub from: Msisdn,
    pub seq: u64,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RejectRecord {
    pub from: Msisdn,
    pub error: DecodeErrorKind,
    pub detail: String,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EntryBody {
    Stat(InventoryRecord),
    Alert(AlertRecord),
    CheckRequested(CheckRequest),
    Duplicate(DuplicateRecord),
    Reject(RejectRecord),
}

/// One line of the event log: `{"id":..,"tMs":..,"kind":..,"payload":{..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventLogEntry {
    pub id: u64,
    pub t_ms: u64,
    #[serde(flatten)]
    pub body: EntryBody,
}

impl EventLogEntry {
    pub fn kind(&self) -> &'static str {
        match self.body {
            EntryBody::Stat(_) => "stat",
            EntryBody::Alert(_) => "alert",
            EntryBody::CheckRequested(_) => "check_requested",
            EntryBody::Duplicate(_) => "duplicate",
            EntryBody::Reject(_) => "reject",
        }
    }
}

/// An alert as served by the query API, tagged with its log entry id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertView {
    pub id: u64,
    #[serde(flatten)]
    pub record: AlertRecord,
}

/// Everything derivable from the log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GatewayState {
    entries: Vec<EventLogEntry>,
    latest: Option<InventoryRecord>,
    alerts: Vec<AlertView>,
    seen: HashSet<(Msisdn, u64)>,
}

impl GatewayState {
    pub fn next_id(&self) -> u64 {
        self.entries.len() as u64 + 1
    }

    /// Folds one entry in. Ids must be dense from 1.
    pub fn apply(&mut self, entry: EventLogEntry) -> Result<(), String> {
        if entry.id != self.next_id() {
            return Err(format!("expected id {}, found {}", self.next_id(), entry.id));
        }
        match &entry.body {
            EntryBody::Stat(rec) => {
                self.seen.insert((rec.device_msisdn.clone(), rec.seq));
                if self.latest.as_ref().is_none_or(|l| rec.seq > l.seq) {
                    self.latest = Some(rec.clone());
                }
            }
            EntryBody::Alert(rec) => {
                self.seen.insert((rec.device_msisdn.clone(), rec.seq));
                self.alerts.push(AlertView {
                    id: entry.id,
                    record: rec.clone(),
                });
            }
            EntryBody::CheckRequested(_) | EntryBody::Duplicate(_) | EntryBody::Reject(_) => {}
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn is_seen(&self, from: &Msisdn, seq: u64) -> bool {
        self.seen.contains(&(from.clone(), seq))
    }

    pub fn latest(&self) -> Option<&InventoryRecord> {
        self.latest.as_ref()
    }

    pub fn alerts_since(&self, since_id: u64) -> Vec<AlertView> {
        self.alerts
            .iter()
            .filter(|a| a.id > since_id)
            .cloned()
            .collect()
    }

    pub fn events_after(&self, after_id: u64, limit: usize) -> Vec<EventLogEntry> {
        // ids are dense, so entry `id` sits at index `id - 1`
        let start = usize::try_from(after_id)
            .unwrap_or(usize::MAX)
            .min(self.entries.len());
        self.entries[start..].iter().take(limit).cloned().collect()
    }

    pub fn entries(&self) -> &[EventLogEntry] {
        &self.entries
    }
}

/// Decides the log entry for one delivered SMS against the current state.
pub fn classify(state: &GatewayState, msg: &SmsMessage, now_ms: u64) -> EntryBody {
    let from = msg.from().clone();
    let payload = match decode(msg.payload()) {
        Ok(p) => p,
        Err(err) => {
            return EntryBody::Reject(RejectRecord {
                from,
                error: err.kind,
                detail: err.detail,
                payload: msg.payload().to_owned(),
            })
        }
    };
    if state.is_seen(&from, payload.seq()) {
        return EntryBody::Duplicate(DuplicateRecord {
            from,
            seq: payload.seq(),
            payload: msg.payload().to_owned(),
        });
    }
    match payload {
        Payload::Status(ws) => EntryBody::Stat(InventoryRecord {
            device_msisdn: from,
            seq: ws.seq,
            received_at_ms: now_ms,
            elev_kg: ws.elev_kg.to_f64(),
            main_kg: ws.main_kg.to_f64(),
            c_elev: ws.c_elev,
            c_main: ws.c_main,
            temp_c: ws.temp_c.to_f64(),
        }),
        Payload::Alert(wa) => EntryBody::Alert(AlertRecord {
            device_msisdn: from,
            seq: wa.seq,
            received_at_ms: now_ms,
            platform: wa.platform,
            kg: wa.kg.to_f64(),
            limit_kg: wa.limit_kg.to_f64(),
            acknowledged: false,
        }),
    }
}

/// Reads a log file, truncating a torn final line.
///
/// A missing or empty file is a fresh log. A malformed line that is not the
/// last one is reported as corruption.
pub fn load_log(path: &Path) -> Result<GatewayState, GatewayError> {
    let text = match std::fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(GatewayState::default()),
        Err(e) => return Err(e.into()),
    };
    let mut state = GatewayState::default();
    let mut good_len = 0usize;
    let lines: Vec<&[u8]> = text.split_inclusive(|&b| b == b'\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let is_last = i + 1 == lines.len();
        let parsed = std::str::from_utf8(line)
            .map_err(|e| e.to_string())
            .and_then(|s| {
                if !s.ends_with('\n') {
                    return Err("line is not terminated".to_owned());
                }
                serde_json::from_str::<EventLogEntry>(s.trim_end()).map_err(|e| e.to_string())
            })
            .and_then(|entry| state.apply(entry));
        match parsed {
            Ok(()) => good_len += line.len(),
            Err(message) if is_last => {
                warn!(
                    "{}: dropping torn final line {} ({message})",
                    path.display(),
                    i + 1
                );
                let file = OpenOptions::new().write(true).open(path)?;
                file.set_len(good_len as u64)?;
                break;
            }
            Err(message) => return Err(GatewayError::Corrupt { line: i + 1, message }),
        }
    }
    Ok(state)
}

/// The gateway service: single writer over the log and derived state.
#[derive(Debug)]
pub struct Gateway {
    own_msisdn: Msisdn,
    device_msisdn: Option<Msisdn>,
    state: GatewayState,
    log: Option<(PathBuf, File)>,
}

impl Gateway {
    /// An in-memory gateway.
    pub fn new(own_msisdn: Msisdn, device_msisdn: Option<Msisdn>) -> Self {
        Gateway {
            own_msisdn,
            device_msisdn,
            state: GatewayState::default(),
            log: None,
        }
    }

    /// A gateway backed by a log file, rebuilt from whatever the file holds.
    pub fn open(
        own_msisdn: Msisdn,
        device_msisdn: Option<Msisdn>,
        path: impl Into<PathBuf>,
    ) -> Result<Self, GatewayError> {
        let path = path.into();
        let state = load_log(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Gateway {
            own_msisdn,
            device_msisdn,
            state,
            log: Some((path, file)),
        })
    }

    pub fn own_msisdn(&self) -> &Msisdn {
        &self.own_msisdn
    }

    pub fn device_msisdn(&self) -> Option<&Msisdn> {
        self.device_msisdn.as_ref()
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn state(&self) -> &GatewayState {
        &self.state
    }

    fn append(&mut self, t_ms: u64, body: EntryBody) -> Result<EventLogEntry, GatewayError> {
        let entry = EventLogEntry {
            id: self.state.next_id(),
            t_ms,
            body,
        };
        if let Some((_, file)) = &mut self.log {
            let mut line = serde_json::to_string(&entry).map_err(io::Error::from)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.state
            .apply(entry.clone())
            .expect("appended id is always next");
        Ok(entry)
    }

    /// Logs a delivered SMS. Every message yields exactly one entry.
    pub fn ingest_sms(
        &mut self,
        msg: &SmsMessage,
        now_ms: u64,
    ) -> Result<EventLogEntry, GatewayError> {
        let body = classify(&self.state, msg, now_ms);
        self.append(now_ms, body)
    }

    /// Rings the device so it reports back. Returns the request id.
    pub fn trigger_check(
        &mut self,
        network: &mut GsmNetwork,
        now_ms: u64,
    ) -> Result<u64, GatewayError> {
        let device = self.device_msisdn.clone().ok_or(GatewayError::Unconfigured)?;
        network.place_call(self.own_msisdn.clone(), device.clone(), now_ms);
        let entry = self.append(
            now_ms,
            EntryBody::CheckRequested(CheckRequest {
                device_msisdn: device,
                caller: self.own_msisdn.clone(),
            }),
        )?;
        Ok(entry.id)
    }

    pub fn query_latest(&self) -> Option<InventoryRecord> {
        self.state.latest().cloned()
    }

    pub fn query_alerts(&self, since_id: u64) -> Vec<AlertView> {
        self.state.alerts_since(since_id)
    }

    pub fn query_events(&self, after_id: u64, limit: usize) -> Vec<EventLogEntry> {
        self.state.events_after(after_id, limit)
    }
}
