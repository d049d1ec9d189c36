//! Discrete-event kernel, traffic sources and random streams.

pub mod engine;
pub mod rng;
pub mod traffic;

pub use engine::{run, Event, EventKind, RunError, RunOutput};
pub use rng::{RngPlan, StreamRng};
pub use traffic::{generate_arrivals, ArrivalProcess, FlowSpec, SizeDist};
