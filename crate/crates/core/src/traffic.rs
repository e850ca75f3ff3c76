//! Seeded traffic generators.
//!
//! Every (station, stream) pair draws from its own xorshift64* stream (see
//! [`crate::rng`]), so changing one station's traffic never perturbs
//! another's arrivals.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::{Cell, ClassDeadlines, Request, Scenario, ServiceClass, StationConfig, StationId};
use crate::rng::{stream_seed, XorShift64Star};
use crate::schedulers::PolicyKind;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficPattern {
    ConstantRate,
    Poisson,
}

fn default_true() -> bool {
    true
}

/// One packet stream of a station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub class: ServiceClass,
    pub pattern: TrafficPattern,
    pub rate_bits_per_s: f64,
    pub packet_size_bits: u64,
    #[serde(rename = "start_time_ms", default)]
    pub start_time: SimTime,
    /// End of the stream (exclusive); the run horizon when absent.
    #[serde(rename = "stop_time_ms", default, skip_serializing_if = "Option::is_none")]
    pub stop_time: Option<SimTime>,
    /// Offset a constant-rate stream by a seeded phase in `[0, interval)`.
    /// Ignored for Poisson streams.
    #[serde(default = "default_true")]
    pub random_phase: bool,
}

impl TrafficSpec {
    /// Mean packet inter-arrival time in microseconds.
    pub fn mean_interarrival_us(&self) -> f64 {
        self.packet_size_bits as f64 / self.rate_bits_per_s * 1_000_000.0
    }

    pub(crate) fn validate(&self, path: &str, errors: &mut Vec<ConfigError>) {
        if !(self.rate_bits_per_s > 0.0 && self.rate_bits_per_s.is_finite()) {
            errors.push(ConfigError::new(format!("{path}.rate_bits_per_s"), "must be finite and > 0"));
        }
        if self.packet_size_bits == 0 {
            errors.push(ConfigError::new(format!("{path}.packet_size_bits"), "must be > 0"));
        }
        if let Some(stop) = self.stop_time {
            if self.start_time >= stop {
                errors.push(ConfigError::new(format!("{path}.stop_time_ms"), "start_time_ms must be < stop_time_ms"));
            }
        }
    }
}

/// Generates the time-ordered requests of one stream with arrival times in
/// `[start_time, min(stop_time, horizon))`.
///
/// Returned ids are the packet index within the stream; [`scenario_arrivals`]
/// renumbers them globally.
pub fn generate(
    spec: &TrafficSpec,
    station: StationId,
    stream: u32,
    seed: u64,
    horizon: SimTime,
    deadlines: &ClassDeadlines,
) -> Vec<Request> {
    let end = spec.stop_time.map_or(horizon, |s| s.min(horizon));
    let mut out = Vec::new();
    if spec.start_time >= end {
        return out;
    }
    let mut rng = XorShift64Star::new(stream_seed(seed, u64::from(station), u64::from(stream)));
    let mean = spec.mean_interarrival_us();
    let start = spec.start_time.as_micros() as f64;
    let end_us = end.as_micros();

    let push = |t_us: f64, out: &mut Vec<Request>| -> bool {
        let t = libm::round(t_us) as u64;
        if t >= end_us {
            return false;
        }
        let id = out.len() as u64;
        out.push(Request::new(id, station, spec.class, SimTime(t), spec.packet_size_bits, deadlines));
        true
    };

    match spec.pattern {
        TrafficPattern::ConstantRate => {
            let phase = if spec.random_phase { (1.0 - rng.next_open01()) * mean } else { 0.0 };
            // k-th packet at start + phase + k * interval, computed without
            // accumulating rounding error.
            let mut k: u64 = 0;
            while push(start + phase + k as f64 * mean, &mut out) {
                k += 1;
            }
        }
        TrafficPattern::Poisson => {
            let mut t = start;
            loop {
                t += rng.next_exp(mean);
                if !push(t, &mut out) {
                    break;
                }
            }
        }
    }
    out
}

/// All arrivals of a scenario, merged, sorted by (arrival, station, stream,
/// packet index) and given globally unique ids in that order.
///
/// Arrivals depend only on the scenario's traffic and seed, never on the
/// scheduling policy.
pub fn scenario_arrivals(scenario: &Scenario) -> Vec<Request> {
    let horizon = scenario.horizon();
    let mut tagged: Vec<(SimTime, StationId, u32, u64, Request)> = Vec::new();
    for st in &scenario.stations {
        for (k, spec) in st.traffic.iter().enumerate() {
            for r in generate(spec, st.id, k as u32, scenario.seed, horizon, &scenario.class_deadlines) {
                tagged.push((r.arrival, st.id, k as u32, r.id, r));
            }
        }
    }
    tagged.sort_by_key(|(t, st, k, idx, _)| (*t, *st, *k, *idx));
    tagged
        .into_iter()
        .enumerate()
        .map(|(i, (.., mut r))| {
            r.id = i as u64;
            r
        })
        .collect()
}

/// Load of station A relative to the cell capacity in [`starvation_scenario`].
pub const STARVATION_OVERLOAD: f64 = 1.2;

/// Cell capacity of [`starvation_scenario`], bits per 5 ms frame (200 kbit/s).
pub const STARVATION_CELL_CAPACITY: u64 = 1_000;

/// One cell, two stations. Station 0 ("A") sends constant-rate rtPS traffic
/// at [`STARVATION_OVERLOAD`] times the cell capacity; station 1 ("B") sends
/// Poisson best-effort traffic. The class deadlines differ by 980 ms.
pub fn starvation_scenario() -> Scenario {
    let frame = SimTime::from_millis(5);
    let frames_per_s = 1_000_000 / frame.as_micros();
    let cell_rate = (STARVATION_CELL_CAPACITY * frames_per_s) as f64;
    let station = |id: StationId, spec: TrafficSpec| StationConfig {
        id,
        cell_id: 0,
        capacity_c: STARVATION_CELL_CAPACITY,
        historical_throughput: 0.0,
        wrr_weight: None,
        traffic: vec![spec],
    };
    Scenario {
        name: String::from("starvation"),
        frame_duration: frame,
        total_frames: 12_000,
        seed: 1,
        scheduler: PolicyKind::Edf,
        ewma_alpha: 0.1,
        drop_on_miss: false,
        class_deadlines: ClassDeadlines::default(),
        cells: vec![Cell { id: 0, base_station_capacity: STARVATION_CELL_CAPACITY, station_ids: vec![0, 1] }],
        stations: vec![
            station(
                0,
                TrafficSpec {
                    class: ServiceClass::RtPs,
                    pattern: TrafficPattern::ConstantRate,
                    rate_bits_per_s: STARVATION_OVERLOAD * cell_rate,
                    packet_size_bits: 800,
                    start_time: SimTime::ZERO,
                    stop_time: None,
                    random_phase: false,
                },
            ),
            station(
                1,
                TrafficSpec {
                    class: ServiceClass::Be,
                    pattern: TrafficPattern::Poisson,
                    rate_bits_per_s: 32_000.0,
                    packet_size_bits: 1_600,
                    start_time: SimTime::ZERO,
                    stop_time: None,
                    random_phase: true,
                },
            ),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cbr(random_phase: bool) -> TrafficSpec {
        TrafficSpec {
            class: ServiceClass::RtPs,
            pattern: TrafficPattern::ConstantRate,
            rate_bits_per_s: 64_000.0,
            packet_size_bits: 800,
            start_time: SimTime::ZERO,
            stop_time: None,
            random_phase,
        }
    }

    #[test]
    fn constant_rate_spacing() {
        let d = ClassDeadlines::default();
        let reqs = generate(&cbr(false), 3, 0, 9, SimTime::from_millis(1_000), &d);
        assert_eq!(reqs.len(), 80);
        for (k, r) in reqs.iter().enumerate() {
            assert_eq!(r.arrival, SimTime(k as u64 * 12_500));
            assert_eq!(r.size_bits, 800);
            assert_eq!(r.station, 3);
        }
        // Any phase in [0, 12.5 ms) still yields 80 packets in 1 s.
        for seed in 0..20 {
            assert_eq!(generate(&cbr(true), 3, 0, seed, SimTime::from_millis(1_000), &d).len(), 80);
        }
    }

    #[test]
    fn zero_horizon_is_empty() {
        let d = ClassDeadlines::default();
        assert!(generate(&cbr(true), 0, 0, 1, SimTime::ZERO, &d).is_empty());
    }

    #[test]
    fn poisson_mean_interarrival() {
        let spec = TrafficSpec {
            class: ServiceClass::Be,
            pattern: TrafficPattern::Poisson,
            rate_bits_per_s: 32_000.0,
            packet_size_bits: 1_600,
            start_time: SimTime::ZERO,
            stop_time: None,
            random_phase: true,
        };
        // 10^4 arrivals at a 50 ms mean need about 500 s.
        let reqs = generate(&spec, 0, 0, 7, SimTime::from_millis(600_000), &ClassDeadlines::default());
        let reqs = &reqs[..10_000];
        let span = (reqs[9_999].arrival.as_micros() - reqs[0].arrival.as_micros()) as f64;
        let mean = span / 9_999.0;
        assert!((mean / 50_000.0 - 1.0).abs() < 0.05, "mean inter-arrival {mean} us");
    }

    #[test]
    fn deadline_law_and_ordering() {
        let s = crate::model::canonical_scenario();
        let arrivals = scenario_arrivals(&s);
        assert!(!arrivals.is_empty());
        for (i, r) in arrivals.iter().enumerate() {
            assert_eq!(r.id, i as u64);
            assert_eq!(r.deadline, r.arrival + s.class_deadlines.offset(r.class));
        }
        assert!(arrivals.windows(2).all(|w| w[0].arrival <= w[1].arrival));
    }

    #[test]
    fn streams_are_independent() {
        let s = crate::model::canonical_scenario();
        let mut t = s.clone();
        t.stations[0].traffic[1].rate_bits_per_s = 10_000.0;
        let pick = |sc: &Scenario, id| {
            scenario_arrivals(sc)
                .into_iter()
                .filter(|r| r.station == id)
                .map(|r| (r.arrival, r.class, r.size_bits))
                .collect::<Vec<_>>()
        };
        assert_eq!(pick(&s, 5), pick(&t, 5));
        assert_ne!(pick(&s, 0), pick(&t, 0));
    }

    #[test]
    fn starvation_scenario_shape() {
        let s = starvation_scenario();
        assert_eq!(s.stations.len(), 2);
        assert_eq!(s.stations[1].traffic[0].class, ServiceClass::Be);
        let a = &s.stations[0].traffic[0];
        assert_eq!(a.class, ServiceClass::RtPs);
        let cell_rate = STARVATION_CELL_CAPACITY as f64 * 200.0;
        assert!((a.rate_bits_per_s / cell_rate - 1.2).abs() < 1e-12);
        let gap = s.class_deadlines.offset(ServiceClass::Be) - s.class_deadlines.offset(ServiceClass::RtPs);
        assert_eq!(gap, SimTime::from_millis(980));
        assert_eq!(s.validate(), Ok(()));
    }
}
