//! Domain types shared by the schedulers and the engine.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::schedulers::PolicyKind;
use crate::time::SimTime;
use crate::traffic::{TrafficPattern, TrafficSpec};

pub type StationId = u32;
pub type CellId = u32;
pub type RequestId = u64;

/// IEEE 802.16 scheduling service classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ServiceClass {
    #[serde(rename = "UGS")]
    Ugs,
    #[serde(rename = "ertPS")]
    ErtPs,
    #[serde(rename = "rtPS")]
    RtPs,
    #[serde(rename = "nrtPS")]
    NrtPs,
    #[serde(rename = "BE")]
    Be,
}

impl ServiceClass {
    pub const ALL: [ServiceClass; 5] =
        [ServiceClass::Ugs, ServiceClass::ErtPs, ServiceClass::RtPs, ServiceClass::NrtPs, ServiceClass::Be];

    pub const fn name(self) -> &'static str {
        match self {
            ServiceClass::Ugs => "UGS",
            ServiceClass::ErtPs => "ertPS",
            ServiceClass::RtPs => "rtPS",
            ServiceClass::NrtPs => "nrtPS",
            ServiceClass::Be => "BE",
        }
    }
}

impl fmt::Display for ServiceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Static relative deadline of each service class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDeadlines {
    #[serde(rename = "UGS")]
    pub ugs: SimTime,
    #[serde(rename = "ertPS")]
    pub ertps: SimTime,
    #[serde(rename = "rtPS")]
    pub rtps: SimTime,
    #[serde(rename = "nrtPS")]
    pub nrtps: SimTime,
    #[serde(rename = "BE")]
    pub be: SimTime,
}

impl Default for ClassDeadlines {
    fn default() -> Self {
        ClassDeadlines {
            ugs: SimTime::from_millis(10),
            ertps: SimTime::from_millis(15),
            rtps: SimTime::from_millis(20),
            nrtps: SimTime::from_millis(200),
            be: SimTime::from_millis(1_000),
        }
    }
}

impl ClassDeadlines {
    pub fn offset(&self, class: ServiceClass) -> SimTime {
        match class {
            ServiceClass::Ugs => self.ugs,
            ServiceClass::ErtPs => self.ertps,
            ServiceClass::RtPs => self.rtps,
            ServiceClass::NrtPs => self.nrtps,
            ServiceClass::Be => self.be,
        }
    }
}

/// A deadline-tagged uplink bandwidth demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub id: RequestId,
    pub station: StationId,
    pub class: ServiceClass,
    pub arrival: SimTime,
    pub size_bits: u64,
    pub deadline: SimTime,
    pub served_bits: u64,
}

impl Request {
    /// Creates a request whose deadline is `arrival` plus the class offset.
    pub fn new(
        id: RequestId,
        station: StationId,
        class: ServiceClass,
        arrival: SimTime,
        size_bits: u64,
        deadlines: &ClassDeadlines,
    ) -> Self {
        Request::with_deadline(id, station, class, arrival, size_bits, arrival + deadlines.offset(class))
    }

    /// Creates a request with an explicit absolute deadline. Used for
    /// hand-built task sets that are not produced by the traffic generators.
    pub fn with_deadline(
        id: RequestId,
        station: StationId,
        class: ServiceClass,
        arrival: SimTime,
        size_bits: u64,
        deadline: SimTime,
    ) -> Self {
        Request { id, station, class, arrival, size_bits, deadline, served_bits: 0 }
    }

    pub fn remaining_bits(&self) -> u64 {
        self.size_bits - self.served_bits
    }

    pub fn is_complete(&self) -> bool {
        self.served_bits == self.size_bits
    }

    /// EDF ordering key: deadline, then arrival, then id.
    pub fn edf_key(&self) -> (SimTime, SimTime, RequestId) {
        (self.deadline, self.arrival, self.id)
    }
}

/// Station description as it appears in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    pub id: StationId,
    pub cell_id: CellId,
    /// Transmission capacity c(i), bits per frame.
    pub capacity_c: u64,
    /// Initial historical throughput th(i), bits per frame.
    #[serde(default)]
    pub historical_throughput: f64,
    /// WRR weight; derived from `capacity_c` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrr_weight: Option<u32>,
    #[serde(default)]
    pub traffic: Vec<TrafficSpec>,
}

/// Runtime state of a subscriber station.
#[derive(Clone, Debug, PartialEq)]
pub struct SubscriberStation {
    pub id: StationId,
    pub cell_id: CellId,
    pub capacity_c: u64,
    pub historical_throughput: f64,
    pub wrr_weight: u32,
    /// Pending (incomplete) requests in arrival order.
    pub queue: Vec<Request>,
}

impl SubscriberStation {
    pub fn new(id: StationId, cell_id: CellId, capacity_c: u64) -> Self {
        SubscriberStation { id, cell_id, capacity_c, historical_throughput: 0.0, wrr_weight: 1, queue: Vec::new() }
    }

    pub fn backlog_bits(&self) -> u64 {
        self.queue.iter().map(Request::remaining_bits).sum()
    }

    pub fn is_backlogged(&self) -> bool {
        !self.queue.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub id: CellId,
    /// Uplink capacity pooled per frame, bits.
    pub base_station_capacity: u64,
    pub station_ids: Vec<StationId>,
}

/// Allocation of frame capacity to one request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grant {
    pub frame_index: u64,
    pub station_id: StationId,
    pub request_id: RequestId,
    pub granted_bits: u64,
}

fn default_alpha() -> f64 {
    0.1
}

fn default_frame_duration() -> SimTime {
    SimTime::from_millis(5)
}

/// Complete description of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "frame_duration_ms", default = "default_frame_duration")]
    pub frame_duration: SimTime,
    pub total_frames: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheduler: PolicyKind,
    #[serde(default = "default_alpha")]
    pub ewma_alpha: f64,
    #[serde(default)]
    pub drop_on_miss: bool,
    #[serde(rename = "class_deadlines_ms", default)]
    pub class_deadlines: ClassDeadlines,
    pub cells: Vec<Cell>,
    pub stations: Vec<StationConfig>,
}

impl Scenario {
    /// Total simulated time, `total_frames × frame_duration`.
    pub fn horizon(&self) -> SimTime {
        SimTime(self.frame_duration.0 * self.total_frames)
    }

    /// Checks every model invariant and returns all violations found.
    pub fn validate(&self) -> Result<(), Vec<ConfigError>> {
        let mut errors = Vec::new();

        if self.frame_duration == SimTime::ZERO {
            errors.push(ConfigError::new("frame_duration_ms", "must be > 0"));
        }
        if self.total_frames == 0 {
            errors.push(ConfigError::new("total_frames", "must be > 0"));
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            errors.push(ConfigError::new("ewma_alpha", format!("must lie in (0, 1], got {}", self.ewma_alpha)));
        }
        for class in ServiceClass::ALL {
            if self.class_deadlines.offset(class) == SimTime::ZERO {
                errors.push(ConfigError::new(format!("class_deadlines_ms.{}", class.name()), "must be > 0"));
            }
        }
        if self.cells.is_empty() {
            errors.push(ConfigError::new("cells", "at least one cell is required"));
        }

        let mut cell_index: BTreeMap<CellId, usize> = BTreeMap::new();
        for (i, cell) in self.cells.iter().enumerate() {
            if let Some(&first) = cell_index.get(&cell.id) {
                errors.push(ConfigError::new(
                    format!("cells[{i}].id"),
                    format!("duplicate cell id {} (also defined at cells[{first}].id)", cell.id),
                ));
            } else {
                cell_index.insert(cell.id, i);
            }
            if cell.base_station_capacity == 0 {
                errors.push(ConfigError::new(format!("cells[{i}].base_station_capacity"), "must be > 0"));
            }
        }

        let mut station_index: BTreeMap<StationId, usize> = BTreeMap::new();
        for (i, st) in self.stations.iter().enumerate() {
            let path = format!("stations[{i}]");
            if let Some(&first) = station_index.get(&st.id) {
                errors.push(ConfigError::new(
                    format!("{path}.id"),
                    format!("duplicate station id {} (also defined at stations[{first}].id)", st.id),
                ));
            } else {
                station_index.insert(st.id, i);
            }
            if st.capacity_c == 0 {
                errors.push(ConfigError::new(format!("{path}.capacity_c"), "must be > 0"));
            }
            if !(st.historical_throughput >= 0.0 && st.historical_throughput.is_finite()) {
                errors.push(ConfigError::new(format!("{path}.historical_throughput"), "must be finite and >= 0"));
            }
            if st.wrr_weight == Some(0) {
                errors.push(ConfigError::new(format!("{path}.wrr_weight"), "must be >= 1"));
            }
            match cell_index.get(&st.cell_id) {
                None => {
                    errors.push(ConfigError::new(format!("{path}.cell_id"), format!("unknown cell {}", st.cell_id)))
                }
                Some(&ci) => {
                    if !self.cells[ci].station_ids.contains(&st.id) {
                        errors.push(ConfigError::new(
                            format!("{path}.cell_id"),
                            format!("cell {} does not list station {}", st.cell_id, st.id),
                        ));
                    }
                }
            }
            for (j, spec) in st.traffic.iter().enumerate() {
                spec.validate(&format!("{path}.traffic[{j}]"), &mut errors);
            }
        }

        let mut listed: BTreeMap<StationId, CellId> = BTreeMap::new();
        for (i, cell) in self.cells.iter().enumerate() {
            for (k, sid) in cell.station_ids.iter().enumerate() {
                let path = format!("cells[{i}].station_ids[{k}]");
                if let Some(other) = listed.insert(*sid, cell.id) {
                    errors
                        .push(ConfigError::new(path.clone(), format!("station {sid} already listed by cell {other}")));
                }
                match station_index.get(sid) {
                    None => errors.push(ConfigError::new(path, format!("unknown station {sid}"))),
                    Some(&si) if self.stations[si].cell_id != cell.id => errors.push(ConfigError::new(
                        path,
                        format!("station {sid} declares cell_id {}, not {}", self.stations[si].cell_id, cell.id),
                    )),
                    Some(_) => {}
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Builds runtime station states, resolving WRR weights.
    ///
    /// A station without an explicit weight gets `round(c / c_min)` (at least
    /// 1), where `c_min` is the smallest capacity in its cell.
    pub fn station_states(&self) -> Vec<SubscriberStation> {
        let mut min_cap: BTreeMap<CellId, u64> = BTreeMap::new();
        for st in &self.stations {
            let e = min_cap.entry(st.cell_id).or_insert(u64::MAX);
            *e = (*e).min(st.capacity_c);
        }
        self.stations
            .iter()
            .map(|st| {
                let weight = st.wrr_weight.unwrap_or_else(|| {
                    let base = min_cap[&st.cell_id].max(1) as f64;
                    (libm::round(st.capacity_c as f64 / base) as u32).max(1)
                });
                SubscriberStation {
                    id: st.id,
                    cell_id: st.cell_id,
                    capacity_c: st.capacity_c,
                    historical_throughput: st.historical_throughput,
                    wrr_weight: weight,
                    queue: Vec::new(),
                }
            })
            .collect()
    }
}

/// Capacity of every canonical cell, bits per 5 ms frame (320 kbit/s).
pub const CANONICAL_CELL_CAPACITY: u64 = 1_600;

/// Seven cells, each with one base station and two subscriber stations, all
/// carrying rtPS traffic plus best-effort background load. 5 ms frames,
/// 12 000 frames (60 s).
pub fn canonical_scenario() -> Scenario {
    let horizon = SimTime::from_millis(60_000);
    let mut cells = Vec::new();
    let mut stations = Vec::new();
    for cell in 0..7u32 {
        let ids = [2 * cell, 2 * cell + 1];
        cells.push(Cell { id: cell, base_station_capacity: CANONICAL_CELL_CAPACITY, station_ids: ids.to_vec() });
        for (k, &id) in ids.iter().enumerate() {
            stations.push(StationConfig {
                id,
                cell_id: cell,
                capacity_c: if k == 0 { 1_200 } else { 800 },
                historical_throughput: 0.0,
                wrr_weight: None,
                traffic: vec![
                    TrafficSpec {
                        class: ServiceClass::RtPs,
                        pattern: TrafficPattern::ConstantRate,
                        rate_bits_per_s: 64_000.0,
                        packet_size_bits: 800,
                        start_time: SimTime::ZERO,
                        stop_time: Some(horizon),
                        random_phase: true,
                    },
                    TrafficSpec {
                        class: ServiceClass::Be,
                        pattern: TrafficPattern::Poisson,
                        rate_bits_per_s: 32_000.0,
                        packet_size_bits: 1_600,
                        start_time: SimTime::ZERO,
                        stop_time: Some(horizon),
                        random_phase: true,
                    },
                ],
            });
        }
    }
    Scenario {
        name: String::from("canonical"),
        frame_duration: SimTime::from_millis(5),
        total_frames: 12_000,
        seed: 1,
        scheduler: PolicyKind::Hedf,
        ewma_alpha: 0.1,
        drop_on_miss: false,
        class_deadlines: ClassDeadlines::default(),
        cells,
        stations,
    }
}
