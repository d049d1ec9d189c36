//! Discrete-event model of a multi-link (MLO) Wi-Fi MAC with per-series
//! channel bitmaps in the transmit descriptor.

pub mod channel;
pub mod descriptor;
pub mod mac;
pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod steering;
pub mod trace;
pub mod types;
