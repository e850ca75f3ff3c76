//! Deterministic frame-stepped simulation loop.
//!
//! Per frame, for every cell in ascending id order:
//!
//! 1. requests whose arrival time falls inside the frame are injected at the
//!    frame start,
//! 2. the cell's policy allocates the frame capacity,
//! 3. grants are checked and applied,
//! 4. completions (departure = frame end) and deadline misses are recorded,
//! 5. every station's historical throughput is updated.
//!
//! Grant, context-switch, completion, miss and drop records are stamped with
//! the frame end time; arrival records carry the true arrival time. The log
//! is therefore time-ordered.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{ConfigError, SimError};
use crate::metrics::{self, MetricsRecord};
use crate::model::{CellId, Request, RequestId, Scenario, ServiceClass, StationId, SubscriberStation};
use crate::schedulers::{update_historical_throughput, FrameContext, SchedulerPolicy, SwitchDetector};
use crate::time::SimTime;
use crate::traffic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Arrival,
    Grant,
    Completion,
    DeadlineMiss,
    ContextSwitch,
    Drop,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Arrival,
        EventKind::Grant,
        EventKind::Completion,
        EventKind::DeadlineMiss,
        EventKind::ContextSwitch,
        EventKind::Drop,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Grant => "grant",
            EventKind::Completion => "completion",
            EventKind::DeadlineMiss => "deadline_miss",
            EventKind::ContextSwitch => "context_switch",
            EventKind::Drop => "drop",
        }
    }

    pub fn from_name(s: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One log record.
///
/// `bits` is the request size for arrivals and completions, the granted
/// amount for grants and the remaining amount for misses, drops and context
/// switches. A context switch names the preempted request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub frame: u64,
    pub time: SimTime,
    pub kind: EventKind,
    pub cell: CellId,
    pub station: StationId,
    pub request: RequestId,
    pub bits: u64,
    /// Service class, recorded on arrivals only. Not part of the CSV export.
    pub class: Option<ServiceClass>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub frame_duration: SimTime,
    pub total_frames: u64,
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn new(frame_duration: SimTime, total_frames: u64) -> Self {
        EventLog { frame_duration, total_frames, events: Vec::new() }
    }

    /// Simulated duration covered by the log.
    pub fn duration(&self) -> SimTime {
        SimTime(self.frame_duration.as_micros() * self.total_frames)
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub log: EventLog,
    pub metrics: MetricsRecord,
    /// Final state of every request, in id order.
    pub requests: Vec<Request>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeadlineStatus {
    Pending,
    Missed,
}

/// A request is missed once the clock is strictly past its deadline.
pub fn deadline_policy(r: &Request, now: SimTime) -> DeadlineStatus {
    if now > r.deadline {
        DeadlineStatus::Missed
    } else {
        DeadlineStatus::Pending
    }
}

/// Runs a scenario with the traffic its own generators produce.
pub fn run(scenario: &Scenario) -> Result<SimOutput, SimError> {
    scenario.validate().map_err(SimError::InvalidScenario)?;
    simulate(scenario, traffic::scenario_arrivals(scenario))
}

struct CellState {
    id: CellId,
    capacity: u64,
    stations: Vec<SubscriberStation>,
    policy: alloc::boxed::Box<dyn SchedulerPolicy>,
    switches: SwitchDetector,
}

/// Runs a scenario on an explicit, arrival-ordered request list. The
/// scenario's own traffic specs are ignored.
pub fn simulate(scenario: &Scenario, arrivals: Vec<Request>) -> Result<SimOutput, SimError> {
    simulate_with(scenario, arrivals, || scenario.scheduler.build())
}

/// As [`simulate`], with one policy instance per cell built by `make_policy`
/// instead of the scenario's named scheduler.
pub fn simulate_with<F>(scenario: &Scenario, arrivals: Vec<Request>, mut make_policy: F) -> Result<SimOutput, SimError>
where
    F: FnMut() -> alloc::boxed::Box<dyn SchedulerPolicy>,
{
    scenario.validate().map_err(SimError::InvalidScenario)?;

    let mut cell_ids: Vec<_> = scenario.cells.iter().collect();
    cell_ids.sort_by_key(|c| c.id);
    let mut cells: Vec<CellState> = cell_ids
        .iter()
        .map(|c| CellState {
            id: c.id,
            capacity: c.base_station_capacity,
            stations: Vec::new(),
            policy: make_policy(),
            switches: SwitchDetector::new(),
        })
        .collect();
    let cell_pos: BTreeMap<CellId, usize> = cells.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    let mut states = scenario.station_states();
    states.sort_by_key(|s| s.id);
    for st in states {
        cells[cell_pos[&st.cell_id]].stations.push(st);
    }
    let mut locate: BTreeMap<StationId, (usize, usize)> = BTreeMap::new();
    for (ci, c) in cells.iter().enumerate() {
        for (si, s) in c.stations.iter().enumerate() {
            locate.insert(s.id, (ci, si));
        }
    }

    check_arrivals(&arrivals, &locate)?;

    let fd = scenario.frame_duration;
    let mut log = EventLog::new(fd, scenario.total_frames);
    let mut finished: Vec<Request> = Vec::with_capacity(arrivals.len());
    let mut missed: BTreeSet<RequestId> = BTreeSet::new();
    let mut arrivals = arrivals.into_iter().peekable();

    for frame in 0..scenario.total_frames {
        let start = SimTime(fd.as_micros() * frame);
        let end = start + fd;

        let mut injected = vec![0usize; cells.len()];
        while let Some(r) = arrivals.next_if(|r| r.arrival < end) {
            let (ci, si) = locate[&r.station];
            log.events.push(Event {
                frame,
                time: r.arrival,
                kind: EventKind::Arrival,
                cell: cells[ci].id,
                station: r.station,
                request: r.id,
                bits: r.size_bits,
                class: Some(r.class),
            });
            injected[ci] += 1;
            cells[ci].stations[si].queue.push(r);
        }

        for (ci, cell) in cells.iter_mut().enumerate() {
            let ctx = FrameContext {
                frame_index: frame,
                now: start,
                frame_duration: fd,
                capacity: cell.capacity,
                arrivals: injected[ci],
            };
            let grants = cell.policy.allocate_frame(&ctx, &cell.stations);

            let total: u64 = grants.iter().map(|g| g.granted_bits).sum();
            if total > cell.capacity {
                return Err(breach(
                    frame,
                    format!("cell {} granted {total} bits with capacity {}", cell.id, cell.capacity),
                ));
            }
            let mut served = vec![0u64; cell.stations.len()];
            for g in &grants {
                let si = cell.stations.iter().position(|s| s.id == g.station_id).ok_or_else(|| {
                    breach(frame, format!("grant to station {} outside cell {}", g.station_id, cell.id))
                })?;
                let st = &mut cell.stations[si];
                let req = st.queue.iter_mut().find(|r| r.id == g.request_id).ok_or_else(|| {
                    breach(frame, format!("grant to request {} not pending at station {}", g.request_id, g.station_id))
                })?;
                apply_grant(req, g.granted_bits).map_err(|detail| breach(frame, detail))?;
                served[si] += g.granted_bits;
                if served[si] > st.capacity_c {
                    return Err(breach(
                        frame,
                        format!(
                            "station {} granted {} bits with transmission capacity {}",
                            st.id, served[si], st.capacity_c
                        ),
                    ));
                }
                if let Some(prev) = cell.switches.grant(req.id, req.is_complete()) {
                    let preempted = cell
                        .stations
                        .iter()
                        .flat_map(|s| s.queue.iter())
                        .find(|r| r.id == prev)
                        .ok_or_else(|| breach(frame, format!("preempted request {prev} vanished")))?;
                    log.events.push(Event {
                        frame,
                        time: end,
                        kind: EventKind::ContextSwitch,
                        cell: cell.id,
                        station: preempted.station,
                        request: prev,
                        bits: preempted.remaining_bits(),
                        class: None,
                    });
                }
                log.events.push(Event {
                    frame,
                    time: end,
                    kind: EventKind::Grant,
                    cell: cell.id,
                    station: g.station_id,
                    request: g.request_id,
                    bits: g.granted_bits,
                    class: None,
                });
            }

            for (si, st) in cell.stations.iter_mut().enumerate() {
                let mut keep = Vec::with_capacity(st.queue.len());
                for r in st.queue.drain(..) {
                    let ev = |kind, bits| Event {
                        frame,
                        time: end,
                        kind,
                        cell: cell.id,
                        station: r.station,
                        request: r.id,
                        bits,
                        class: None,
                    };
                    if r.is_complete() {
                        log.events.push(ev(EventKind::Completion, r.size_bits));
                        if deadline_policy(&r, end) == DeadlineStatus::Missed && missed.insert(r.id) {
                            log.events.push(ev(EventKind::DeadlineMiss, 0));
                        }
                        finished.push(r);
                        continue;
                    }
                    if deadline_policy(&r, end) == DeadlineStatus::Missed && missed.insert(r.id) {
                        log.events.push(ev(EventKind::DeadlineMiss, r.remaining_bits()));
                        if scenario.drop_on_miss {
                            log.events.push(ev(EventKind::Drop, r.remaining_bits()));
                            cell.switches.dropped(r.id);
                            finished.push(r);
                            continue;
                        }
                    }
                    keep.push(r);
                }
                st.queue = keep;
                st.historical_throughput =
                    update_historical_throughput(st.historical_throughput, served[si] as f64, scenario.ewma_alpha);
            }
        }
    }

    for cell in cells {
        for st in cell.stations {
            finished.extend(st.queue);
        }
    }
    // Arrivals past the horizon were never injected.
    finished.extend(arrivals);
    finished.sort_by_key(|r| r.id);

    let metrics = metrics::compute(&log);
    Ok(SimOutput { log, metrics, requests: finished })
}

/// Advances `served_bits`; refuses to over-grant.
pub fn apply_grant(r: &mut Request, bits: u64) -> Result<(), alloc::string::String> {
    if bits == 0 || bits > r.remaining_bits() {
        return Err(format!("grant of {bits} bits to request {} with {} bits remaining", r.id, r.remaining_bits()));
    }
    r.served_bits += bits;
    Ok(())
}

fn breach(frame: u64, detail: alloc::string::String) -> SimError {
    SimError::InvariantBreach { frame, detail }
}

fn check_arrivals(arrivals: &[Request], locate: &BTreeMap<StationId, (usize, usize)>) -> Result<(), SimError> {
    let mut errors = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, r) in arrivals.iter().enumerate() {
        let path = format!("arrivals[{i}]");
        if !locate.contains_key(&r.station) {
            errors.push(ConfigError::new(format!("{path}.station"), format!("unknown station {}", r.station)));
        }
        if !ids.insert(r.id) {
            errors.push(ConfigError::new(format!("{path}.id"), format!("duplicate request id {}", r.id)));
        }
        if r.size_bits == 0 {
            errors.push(ConfigError::new(format!("{path}.size_bits"), "must be > 0"));
        }
        if r.served_bits != 0 {
            errors.push(ConfigError::new(format!("{path}.served_bits"), "must start at 0"));
        }
        if i > 0 && arrivals[i - 1].arrival > r.arrival {
            errors.push(ConfigError::new(format!("{path}.arrival"), "arrivals must be time-ordered"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(SimError::InvalidScenario(errors))
    }
}
