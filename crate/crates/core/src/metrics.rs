//! Run metrics, computed purely from an [`EventLog`].
//!
//! * throughput: size of completed requests per second of simulated time
//! * delay: frame-end departure minus arrival, per completed request;
//!   percentiles use the nearest-rank method
//! * deadline-miss ratio: requests flagged missed (late completion, or still
//!   pending past the deadline at the last frame end) over all arrivals
//! * starvation window: longest run of consecutive frames in which a station
//!   had backlog at the frame start but received no grant
//! * context switches: see [`crate::schedulers::context_switches`]

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::engine::{EventKind, EventLog};
use crate::model::{CellId, RequestId, ServiceClass, StationId};
use crate::schedulers::{context_switches, TraceEntry};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayStats {
    pub count: u64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl DelayStats {
    /// `None` for an empty sample.
    pub fn from_micros(mut samples: Vec<u64>) -> Option<DelayStats> {
        if samples.is_empty() {
            return None;
        }
        samples.sort_unstable();
        let n = samples.len();
        let rank = |pct: usize| samples[(pct * n).div_ceil(100) - 1];
        let sum: u128 = samples.iter().map(|&s| u128::from(s)).sum();
        let ms = |us: u64| SimTime(us).as_millis_f64();
        Some(DelayStats {
            count: n as u64,
            mean_ms: sum as f64 / n as f64 / 1_000.0,
            p50_ms: ms(rank(50)),
            p95_ms: ms(rank(95)),
            max_ms: ms(samples[n - 1]),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationMetrics {
    pub throughput_bps: f64,
    pub offered_load_bps: f64,
    pub max_starvation_window_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub duration_s: f64,
    pub arrivals: u64,
    pub completions: u64,
    pub deadline_misses: u64,
    pub drops: u64,
    pub throughput_bps: f64,
    pub offered_load_bps: f64,
    pub delay: Option<DelayStats>,
    /// Needs the class tags of the in-memory log; empty for logs read back
    /// from CSV.
    pub class_delay: BTreeMap<ServiceClass, DelayStats>,
    pub deadline_miss_ratio: f64,
    pub context_switch_count: u64,
    pub stations: BTreeMap<StationId, StationMetrics>,
}

impl MetricsRecord {
    /// Largest starvation window over all stations, ms.
    pub fn max_starvation_window_ms(&self) -> f64 {
        self.stations.values().map(|s| s.max_starvation_window_ms).fold(0.0, f64::max)
    }
}

/// Completed bits per second over the log's duration.
pub fn throughput(log: &EventLog) -> f64 {
    let bits: u64 = log.of_kind(EventKind::Completion).map(|e| e.bits).sum();
    per_second(bits, log)
}

fn per_second(bits: u64, log: &EventLog) -> f64 {
    let secs = log.duration().as_secs_f64();
    if secs == 0.0 {
        0.0
    } else {
        bits as f64 / secs
    }
}

/// Delay statistics over all completed requests, and per service class
/// where arrivals carry a class tag.
pub fn end_to_end_delay(log: &EventLog) -> (Option<DelayStats>, BTreeMap<ServiceClass, DelayStats>) {
    let mut arrival: BTreeMap<RequestId, (SimTime, Option<ServiceClass>)> = BTreeMap::new();
    let mut all = Vec::new();
    let mut by_class: BTreeMap<ServiceClass, Vec<u64>> = BTreeMap::new();
    for e in &log.events {
        match e.kind {
            EventKind::Arrival => {
                arrival.insert(e.request, (e.time, e.class));
            }
            EventKind::Completion => {
                if let Some(&(t, class)) = arrival.get(&e.request) {
                    let d = (e.time - t).as_micros();
                    all.push(d);
                    if let Some(c) = class {
                        by_class.entry(c).or_default().push(d);
                    }
                }
            }
            _ => {}
        }
    }
    let per_class = by_class.into_iter().filter_map(|(c, v)| DelayStats::from_micros(v).map(|s| (c, s))).collect();
    (DelayStats::from_micros(all), per_class)
}

/// Longest interval during which `station` was backlogged and received no
/// grant, at frame granularity.
pub fn starvation_window(log: &EventLog, station: StationId) -> SimTime {
    starvation_windows(log).get(&station).copied().unwrap_or(SimTime::ZERO)
}

fn starvation_windows(log: &EventLog) -> BTreeMap<StationId, SimTime> {
    #[derive(Default)]
    struct Track {
        // frame -> (arrivals, departures, granted)
        frames: BTreeMap<u64, (u64, u64, bool)>,
    }
    let mut tracks: BTreeMap<StationId, Track> = BTreeMap::new();
    for e in &log.events {
        let t = tracks.entry(e.station).or_default();
        let f = t.frames.entry(e.frame).or_default();
        match e.kind {
            EventKind::Arrival => f.0 += 1,
            EventKind::Completion | EventKind::Drop => f.1 += 1,
            EventKind::Grant => f.2 = true,
            _ => {}
        }
    }
    tracks
        .into_iter()
        .map(|(station, track)| {
            let mut outstanding: u64 = 0;
            let mut run: u64 = 0;
            let mut best: u64 = 0;
            let mut frames = track.frames.into_iter().peekable();
            for frame in 0..log.total_frames {
                let (arr, dep, granted) = match frames.peek() {
                    Some(&(f, v)) if f == frame => {
                        frames.next();
                        v
                    }
                    _ => (0, 0, false),
                };
                outstanding += arr;
                if outstanding > 0 && !granted {
                    run += 1;
                    best = best.max(run);
                } else {
                    run = 0;
                }
                outstanding -= dep;
            }
            (station, SimTime(best * log.frame_duration.as_micros()))
        })
        .collect()
}

/// Context switches summed over cells, recomputed from grants, completions
/// and drops.
pub fn context_switch_count(log: &EventLog) -> u64 {
    let mut size: BTreeMap<RequestId, u64> = BTreeMap::new();
    let mut got: BTreeMap<RequestId, u64> = BTreeMap::new();
    let mut traces: BTreeMap<CellId, Vec<TraceEntry>> = BTreeMap::new();
    for e in &log.events {
        match e.kind {
            EventKind::Arrival => {
                size.insert(e.request, e.bits);
            }
            EventKind::Grant => {
                let g = got.entry(e.request).or_insert(0);
                *g += e.bits;
                let completes = size.get(&e.request) == Some(g);
                traces.entry(e.cell).or_default().push(TraceEntry::Grant { request: e.request, completes });
            }
            EventKind::Drop => traces.entry(e.cell).or_default().push(TraceEntry::Dropped { request: e.request }),
            _ => {}
        }
    }
    traces.into_values().map(context_switches).sum()
}

pub fn compute(log: &EventLog) -> MetricsRecord {
    let count = |k| log.of_kind(k).count() as u64;
    let arrivals = count(EventKind::Arrival);
    let deadline_misses = count(EventKind::DeadlineMiss);

    let mut per_station: BTreeMap<StationId, (u64, u64)> = BTreeMap::new();
    for e in &log.events {
        let s = per_station.entry(e.station).or_default();
        match e.kind {
            EventKind::Arrival => s.0 += e.bits,
            EventKind::Completion => s.1 += e.bits,
            _ => {}
        }
    }
    let windows = starvation_windows(log);
    let stations = per_station
        .into_iter()
        .map(|(id, (offered, done))| {
            (
                id,
                StationMetrics {
                    throughput_bps: per_second(done, log),
                    offered_load_bps: per_second(offered, log),
                    max_starvation_window_ms: windows.get(&id).copied().unwrap_or_default().as_millis_f64(),
                },
            )
        })
        .collect();

    let (delay, class_delay) = end_to_end_delay(log);
    MetricsRecord {
        duration_s: log.duration().as_secs_f64(),
        arrivals,
        completions: count(EventKind::Completion),
        deadline_misses,
        drops: count(EventKind::Drop),
        throughput_bps: throughput(log),
        offered_load_bps: per_second(log.of_kind(EventKind::Arrival).map(|e| e.bits).sum(), log),
        delay,
        class_delay,
        deadline_miss_ratio: if arrivals == 0 { 0.0 } else { deadline_misses as f64 / arrivals as f64 },
        context_switch_count: context_switch_count(log),
        stations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Event;
    use alloc::vec;

    fn ev(frame: u64, time_ms: u64, kind: EventKind, station: StationId, request: RequestId, bits: u64) -> Event {
        Event {
            frame,
            time: SimTime::from_millis(time_ms),
            kind,
            cell: 0,
            station,
            request,
            bits,
            class: if kind == EventKind::Arrival { Some(ServiceClass::RtPs) } else { None },
        }
    }

    fn log(total_frames: u64, events: Vec<Event>) -> EventLog {
        EventLog { frame_duration: SimTime::from_millis(5), total_frames, events }
    }

    #[test]
    fn throughput_examples() {
        // 200 frames of 5 ms = 1 s
        let mut events = Vec::new();
        for i in 0..10 {
            events.push(ev(i, 5 * i, EventKind::Arrival, 0, i, 1_000));
            events.push(ev(i, 5 * i + 5, EventKind::Completion, 0, i, 1_000));
        }
        assert_eq!(throughput(&log(200, events)), 10_000.0);
        assert_eq!(throughput(&log(200, Vec::new())), 0.0);
    }

    #[test]
    fn delay_example() {
        let l = log(10, vec![ev(2, 10, EventKind::Arrival, 0, 0, 8), ev(4, 25, EventKind::Completion, 0, 0, 8)]);
        let (d, per_class) = end_to_end_delay(&l);
        let d = d.unwrap();
        assert_eq!(d.mean_ms, 15.0);
        assert_eq!(d.max_ms, 15.0);
        assert_eq!(per_class[&ServiceClass::RtPs].count, 1);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let d = DelayStats::from_micros((1..=100).map(|x| x * 1_000).collect()).unwrap();
        assert_eq!(d.p50_ms, 50.0);
        assert_eq!(d.p95_ms, 95.0);
        assert_eq!(d.max_ms, 100.0);
        assert_eq!(d.mean_ms, 50.5);
        assert!(DelayStats::from_micros(Vec::new()).is_none());
    }

    #[test]
    fn starvation_window_examples() {
        // served every frame while backlogged
        let mut events = Vec::new();
        for f in 0..10 {
            events.push(ev(f, 5 * f, EventKind::Arrival, 0, f, 10));
            events.push(ev(f, 5 * f + 5, EventKind::Grant, 0, f, 10));
            events.push(ev(f, 5 * f + 5, EventKind::Completion, 0, f, 10));
        }
        assert!(starvation_window(&log(10, events), 0) <= SimTime::from_millis(5));

        // backlogged for 100 frames (500 ms), never served
        let l = log(100, vec![ev(0, 0, EventKind::Arrival, 1, 0, 10)]);
        assert_eq!(starvation_window(&l, 1), SimTime::from_millis(500));
        assert_eq!(starvation_window(&l, 7), SimTime::ZERO);
    }

    #[test]
    fn starvation_window_ends_with_backlog() {
        // arrival in frame 0, granted in frame 3, completes in frame 4
        let l = log(
            10,
            vec![
                ev(0, 0, EventKind::Arrival, 0, 0, 10),
                ev(3, 20, EventKind::Grant, 0, 0, 5),
                ev(4, 25, EventKind::Grant, 0, 0, 5),
                ev(4, 25, EventKind::Completion, 0, 0, 10),
            ],
        );
        assert_eq!(starvation_window(&l, 0), SimTime::from_millis(15));
    }

    #[test]
    fn switch_count_from_log() {
        let l = log(
            10,
            vec![
                ev(0, 0, EventKind::Arrival, 0, 0, 10),
                ev(0, 1, EventKind::Arrival, 1, 1, 10),
                ev(0, 5, EventKind::Grant, 0, 0, 5),
                ev(1, 10, EventKind::Grant, 1, 1, 10),
                ev(1, 10, EventKind::Completion, 1, 1, 10),
                ev(2, 15, EventKind::Grant, 0, 0, 5),
                ev(2, 15, EventKind::Completion, 0, 0, 10),
            ],
        );
        assert_eq!(context_switch_count(&l), 1);
    }

    #[test]
    fn miss_ratio_counts_flagged_requests() {
        let l = log(
            10,
            vec![
                ev(0, 0, EventKind::Arrival, 0, 0, 10),
                ev(0, 0, EventKind::Arrival, 0, 1, 10),
                ev(5, 30, EventKind::DeadlineMiss, 0, 1, 10),
            ],
        );
        assert_eq!(compute(&l).deadline_miss_ratio, 0.5);
    }
}
