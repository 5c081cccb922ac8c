//! Simulated freezer inventory monitor.
//!
//! Two load-cell platforms and a thermometer sit inside a chest freezer. A
//! controller samples them, texts the owner when a platform goes over its
//! weight limit, and answers a phone call from an authorized number with a
//! status SMS. A gateway turns the delivered texts into stock counts and an
//! alert feed.
//!
//! - [`sensing`]: calibration, ADC and thermometer models, error metrics
//! - [`device`]: controller state machine
//! - [`gsmlink`]: SMS wire format and the simulated cellular link
//! - [`plant`] and [`scenario`]: the physical freezer and scripted events
//! - [`gateway`]: event log, dedup and inventory queries
//! - [`sim`]: the loop that runs them together

pub mod device;
pub mod gateway;
pub mod gsmlink;
pub mod plant;
pub mod scenario;
pub mod sensing;
pub mod sim;
pub mod tables;
