//! Traffic sources: arrival processes, size distributions and fragment
//! expansion.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::types::{AccessCategory, FragmentTag, Micros, Packet, PacketId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeDist {
    Fixed(u32),
    Uniform { min: u32, max: u32 },
}

impl SizeDist {
    pub fn min(&self) -> u32 {
        match *self {
            SizeDist::Fixed(s) => s,
            SizeDist::Uniform { min, .. } => min,
        }
    }

    /// Fixed sizes consume no draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            SizeDist::Fixed(s) => s,
            SizeDist::Uniform { min, max } => rng.random_range(min..=max),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        match *self {
            SizeDist::Fixed(0) => vec!["size must be positive".into()],
            SizeDist::Uniform { min, max } if min == 0 || min > max => {
                vec![format!("uniform size needs 0 < min <= max, got {min}..{max}")]
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// `rate_pps` packets per second, exponential gaps.
    Poisson { rate_pps: f64 },
    /// Fixed period, each arrival shifted by a uniform draw in
    /// `[-jitter_us, jitter_us]`.
    Cbr {
        period_us: Micros,
        #[serde(default)]
        jitter_us: Micros,
    },
    /// `burst_size` back-to-back arrivals every `period_us`.
    Bursty { burst_size: u32, period_us: Micros },
}

impl ArrivalProcess {
    pub fn violations(&self) -> Vec<String> {
        match *self {
            ArrivalProcess::Poisson { rate_pps } if !(rate_pps > 0.0 && rate_pps.is_finite()) => {
                vec![format!("poisson rate must be positive, got {rate_pps}")]
            }
            ArrivalProcess::Cbr { period_us: 0, .. } | ArrivalProcess::Bursty { period_us: 0, .. } => {
                vec!["period must be positive".into()]
            }
            ArrivalProcess::Cbr { period_us, jitter_us } if 2 * jitter_us > period_us => {
                vec![format!("cbr jitter {jitter_us} exceeds half the period {period_us}")]
            }
            ArrivalProcess::Bursty { burst_size: 0, .. } => vec!["burst size must be positive".into()],
            _ => Vec::new(),
        }
    }
}

fn is_zero(v: &Micros) -> bool {
    *v == 0
}

fn is_one(v: &u16) -> bool {
    *v == 1
}

fn one() -> u16 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: u32,
    pub ac: AccessCategory,
    #[serde(default)]
    pub tid: u8,
    #[serde(default)]
    pub receiver: u32,
    #[serde(default)]
    pub tos: u8,
    #[serde(default)]
    pub port: u16,
    pub size: SizeDist,
    pub arrival: ArrivalProcess,
    /// Relative to arrival.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_us: Option<Micros>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub fragments: u16,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub start_us: Micros,
    /// Defaults to the scenario duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_us: Option<Micros>,
}

impl FlowSpec {
    pub fn stop(&self, duration: Micros) -> Micros {
        self.stop_us.unwrap_or(duration)
    }

    pub fn violations(&self, duration: Micros) -> Vec<String> {
        let mut v = self.size.violations();
        v.extend(self.arrival.violations());
        if self.tid > 7 {
            v.push(format!("tid {} out of range 0..7", self.tid));
        }
        if self.fragments == 0 {
            v.push("fragment count must be at least 1".into());
        } else if (self.fragments as u32) > self.size.min().max(1) {
            v.push(format!("{} fragments do not fit the minimum size {}", self.fragments, self.size.min()));
        }
        if self.stop(duration) <= self.start_us {
            v.push(format!("stop {} must be after start {}", self.stop(duration), self.start_us));
        }
        if self.deadline_us == Some(0) {
            v.push("deadline must be positive".into());
        }
        v
    }
}

/// Lazily yields arrival timestamps in `[start, stop)`, non-decreasing.
#[derive(Debug, Clone)]
pub struct ArrivalGen<R> {
    process: ArrivalProcess,
    start: Micros,
    stop: Micros,
    rng: R,
    k: u64,
    clock: f64,
    in_burst: u32,
}

impl<R: Rng> ArrivalGen<R> {
    pub fn new(process: ArrivalProcess, start: Micros, stop: Micros, rng: R) -> Self {
        Self {
            process,
            start,
            stop,
            rng,
            k: 0,
            clock: start as f64,
            in_burst: 0,
        }
    }
}

impl<R: Rng> Iterator for ArrivalGen<R> {
    type Item = Micros;

    fn next(&mut self) -> Option<Micros> {
        let t = match self.process {
            ArrivalProcess::Poisson { rate_pps } => {
                let exp = Exp::new(rate_pps / 1e6).expect("validated rate");
                self.clock += exp.sample(&mut self.rng);
                if self.clock >= self.stop as f64 {
                    return None;
                }
                self.clock.floor() as Micros
            }
            ArrivalProcess::Cbr { period_us, jitter_us } => {
                let nominal = self.start.checked_add(self.k.checked_mul(period_us)?)?;
                if nominal >= self.stop {
                    return None;
                }
                self.k += 1;
                if jitter_us == 0 {
                    nominal
                } else {
                    let j = jitter_us as i64;
                    let shift = self.rng.random_range(-j..=j);
                    nominal
                        .saturating_add_signed(shift)
                        .clamp(self.start, self.stop - 1)
                }
            }
            ArrivalProcess::Bursty { burst_size, period_us } => {
                let t = self.start.checked_add(self.k.checked_mul(period_us)?)?;
                if t >= self.stop {
                    return None;
                }
                self.in_burst += 1;
                if self.in_burst == burst_size {
                    self.in_burst = 0;
                    self.k += 1;
                }
                t
            }
        };
        Some(t)
    }
}

pub fn generate_arrivals<R: Rng>(flow: &FlowSpec, duration: Micros, rng: R) -> Vec<Micros> {
    ArrivalGen::new(flow.arrival, flow.start_us, flow.stop(duration), rng).collect()
}

/// Splits one arrival of `size` bytes into the flow's fragments. The first
/// id becomes the fragment group; ids are consecutive from `first_id`.
pub fn expand(flow: &FlowSpec, first_id: u64, at: Micros, size: u32) -> Vec<Packet> {
    let n = flow.fragments.max(1);
    let base = size / n as u32;
    let extra = size % n as u32;
    (0..n)
        .map(|i| Packet {
            id: PacketId(first_id + i as u64),
            flow_id: flow.id,
            tid: flow.tid,
            ac: flow.ac,
            receiver: flow.receiver,
            tos: flow.tos,
            port: flow.port,
            size_bytes: base + u32::from((i as u32) < extra),
            arrival_time: at,
            deadline: flow.deadline_us.map(|d| at + d),
            fragment: (n > 1).then_some(FragmentTag { group: first_id, index: i, count: n }),
        })
        .collect()
}
