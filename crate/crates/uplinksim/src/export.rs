//! CSV formats.
//!
//! Event file, one row per log record:
//!
//! ```text
//! frame,time_ms,event,cell,station,request,bits
//! ```
//!
//! `time_ms` has exactly three decimals. `event` is one of `arrival`,
//! `grant`, `completion`, `deadline_miss`, `context_switch`, `drop`.
//!
//! Summary file, one row per (scenario, policy, seed); columns in
//! [`SUMMARY_HEADER`] order. Per-class delay columns are empty when the class
//! had no completions. Per-station columns hold `id:value` pairs joined by
//! `;`. Floating-point values are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use uplinksim_core::{
    DelayStats, Event, EventKind, EventLog, MetricsRecord, PolicyKind, ServiceClass, SimTime, StationId, StationMetrics,
};

use crate::error::CliError;

pub const EVENT_HEADER: [&str; 7] = ["frame", "time_ms", "event", "cell", "station", "request", "bits"];

const CLASS_PREFIX: [(ServiceClass, &str); 5] = [
    (ServiceClass::Ugs, "ugs"),
    (ServiceClass::ErtPs, "ertps"),
    (ServiceClass::RtPs, "rtps"),
    (ServiceClass::NrtPs, "nrtps"),
    (ServiceClass::Be, "be"),
];

const STAT_SUFFIX: [&str; 5] = ["delay_count", "delay_mean_ms", "delay_p50_ms", "delay_p95_ms", "delay_max_ms"];

const LEADING: [&str; 14] = [
    "scenario",
    "policy",
    "seed",
    "frames",
    "duration_s",
    "arrivals",
    "completions",
    "deadline_misses",
    "drops",
    "throughput_bps",
    "offered_load_bps",
    "deadline_miss_ratio",
    "context_switches",
    "max_starvation_window_ms",
];

const TRAILING: [&str; 3] = ["station_throughput_bps", "station_offered_load_bps", "station_starvation_ms"];

/// Full summary header.
pub static SUMMARY_HEADER: std::sync::LazyLock<Vec<String>> = std::sync::LazyLock::new(|| {
    let mut h: Vec<String> = LEADING.iter().map(|s| s.to_string()).collect();
    h.extend(STAT_SUFFIX.iter().map(|s| s.to_string()));
    for (_, p) in CLASS_PREFIX {
        h.extend(STAT_SUFFIX.iter().map(|s| format!("{p}_{s}")));
    }
    h.extend(TRAILING.iter().map(|s| s.to_string()));
    h
});

pub fn write_events<W: Write>(log: &EventLog, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_HEADER)?;
    for e in &log.events {
        w.write_record([
            e.frame.to_string(),
            e.time.to_string(),
            e.kind.name().to_string(),
            e.cell.to_string(),
            e.station.to_string(),
            e.request.to_string(),
            e.bits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn events_to_bytes(log: &EventLog) -> Vec<u8> {
    let mut buf = Vec::new();
    write_events(log, &mut buf).expect("writing to memory");
    buf
}

fn parse_millis(s: &str) -> Option<SimTime> {
    let (whole, frac) = s.split_once('.')?;
    if frac.len() != 3 {
        return None;
    }
    let whole: u64 = whole.parse().ok()?;
    let frac: u64 = frac.parse().ok()?;
    Some(SimTime(whole * 1_000 + frac))
}

/// Reads an event file back into a log. The CSV carries neither the frame
/// duration nor the run length, so the caller supplies them. Service classes
/// are not part of the file.
pub fn read_events<R: Read>(
    input: R,
    frame_duration: SimTime,
    total_frames: u64,
    path: &Path,
) -> Result<EventLog, CliError> {
    let malformed = |message: String| CliError::Malformed { path: path.to_path_buf(), message };
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?;
    if header.iter().ne(EVENT_HEADER) {
        return Err(malformed(format!("unexpected header {header:?}")));
    }
    let mut log = EventLog::new(frame_duration, total_frames);
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?;
        let bad = || malformed(format!("bad record {} ({rec:?})", line + 2));
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<u64>().ok());
        log.events.push(Event {
            frame: num(0).ok_or_else(bad)?,
            time: rec.get(1).and_then(parse_millis).ok_or_else(bad)?,
            kind: rec.get(2).and_then(EventKind::from_name).ok_or_else(bad)?,
            cell: num(3).and_then(|v| u32::try_from(v).ok()).ok_or_else(bad)?,
            station: num(4).and_then(|v| u32::try_from(v).ok()).ok_or_else(bad)?,
            request: num(5).ok_or_else(bad)?,
            bits: num(6).ok_or_else(bad)?,
            class: None,
        });
    }
    Ok(log)
}

/// One line of the summary file.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub frames: u64,
    pub metrics: MetricsRecord,
}

impl SummaryRow {
    pub fn record(&self) -> Vec<String> {
        let m = &self.metrics;
        let mut v = vec![
            self.scenario.clone(),
            self.policy.name().to_string(),
            self.seed.to_string(),
            self.frames.to_string(),
            m.duration_s.to_string(),
            m.arrivals.to_string(),
            m.completions.to_string(),
            m.deadline_misses.to_string(),
            m.drops.to_string(),
            m.throughput_bps.to_string(),
            m.offered_load_bps.to_string(),
            m.deadline_miss_ratio.to_string(),
            m.context_switch_count.to_string(),
            m.max_starvation_window_ms().to_string(),
        ];
        push_stats(&mut v, m.delay.as_ref());
        for (class, _) in CLASS_PREFIX {
            push_stats(&mut v, m.class_delay.get(&class));
        }
        let join = |f: fn(&StationMetrics) -> f64| {
            m.stations.iter().map(|(id, s)| format!("{id}:{}", f(s))).collect::<Vec<_>>().join(";")
        };
        v.push(join(|s| s.throughput_bps));
        v.push(join(|s| s.offered_load_bps));
        v.push(join(|s| s.max_starvation_window_ms));
        v
    }

    pub fn parse(rec: &csv::StringRecord) -> Result<SummaryRow, String> {
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(format!("expected {} columns, found {}", SUMMARY_HEADER.len(), rec.len()));
        }
        let col = |i: usize| rec.get(i).unwrap_or_default();
        let int = |i: usize| col(i).parse::<u64>().map_err(|e| format!("{}: {e}", SUMMARY_HEADER[i]));
        let float = |i: usize| col(i).parse::<f64>().map_err(|e| format!("{}: {e}", SUMMARY_HEADER[i]));

        let stats = |at: usize| -> Result<Option<DelayStats>, String> {
            if col(at).is_empty() {
                return Ok(None);
            }
            Ok(Some(DelayStats {
                count: int(at)?,
                mean_ms: float(at + 1)?,
                p50_ms: float(at + 2)?,
                p95_ms: float(at + 3)?,
                max_ms: float(at + 4)?,
            }))
        };
        let base = LEADING.len();
        let delay = stats(base)?;
        let mut class_delay = BTreeMap::new();
        for (k, (class, _)) in CLASS_PREFIX.iter().enumerate() {
            if let Some(s) = stats(base + STAT_SUFFIX.len() * (k + 1))? {
                class_delay.insert(*class, s);
            }
        }
        let tail = base + STAT_SUFFIX.len() * (CLASS_PREFIX.len() + 1);
        let pairs = |i: usize| -> Result<BTreeMap<StationId, f64>, String> {
            col(i)
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|p| {
                    let (id, v) = p.split_once(':').ok_or_else(|| format!("bad pair `{p}`"))?;
                    Ok((id.parse().map_err(|e| format!("{p}: {e}"))?, v.parse().map_err(|e| format!("{p}: {e}"))?))
                })
                .collect()
        };
        let thr = pairs(tail)?;
        let off = pairs(tail + 1)?;
        let starve = pairs(tail + 2)?;
        let stations = thr
            .iter()
            .map(|(id, &t)| {
                Ok((
                    *id,
                    StationMetrics {
                        throughput_bps: t,
                        offered_load_bps: *off.get(id).ok_or_else(|| format!("station {id} lacks offered load"))?,
                        max_starvation_window_ms: *starve
                            .get(id)
                            .ok_or_else(|| format!("station {id} lacks starvation window"))?,
                    },
                ))
            })
            .collect::<Result<_, String>>()?;

        Ok(SummaryRow {
            scenario: col(0).to_string(),
            policy: col(1).parse().map_err(|e| format!("{e}"))?,
            seed: int(2)?,
            frames: int(3)?,
            metrics: MetricsRecord {
                duration_s: float(4)?,
                arrivals: int(5)?,
                completions: int(6)?,
                deadline_misses: int(7)?,
                drops: int(8)?,
                throughput_bps: float(9)?,
                offered_load_bps: float(10)?,
                delay,
                class_delay,
                deadline_miss_ratio: float(11)?,
                context_switch_count: int(12)?,
                stations,
            },
        })
    }

    /// Base name of this run's event file.
    pub fn events_file_name(&self) -> String {
        events_file_name(&self.scenario, self.policy, self.seed)
    }
}

pub fn events_file_name(scenario: &str, policy: PolicyKind, seed: u64) -> String {
    let safe: String =
        scenario.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("events_{safe}_{}_seed{seed}.csv", policy.name())
}

fn push_stats(v: &mut Vec<String>, s: Option<&DelayStats>) {
    match s {
        Some(s) => v.extend([
            s.count.to_string(),
            s.mean_ms.to_string(),
            s.p50_ms.to_string(),
            s.p95_ms.to_string(),
            s.max_ms.to_string(),
        ]),
        None => v.extend(std::iter::repeat_n(String::new(), STAT_SUFFIX.len())),
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER.iter())?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R, path: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?;
    if header.iter().ne(SUMMARY_HEADER.iter().map(String::as_str)) {
        return Err(CliError::Malformed { path: path.to_path_buf(), message: "unexpected summary header".into() });
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?;
            SummaryRow::parse(&rec).map_err(|message| CliError::Malformed {
                path: path.to_path_buf(),
                message: format!("row {}: {message}", i + 2),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use uplinksim_core::{canonical_scenario, run};

    #[test]
    fn empty_log_is_header_only() {
        let log = EventLog::new(SimTime::from_millis(5), 10);
        let bytes = events_to_bytes(&log);
        assert_eq!(String::from_utf8(bytes).unwrap(), "frame,time_ms,event,cell,station,request,bits\n");
    }

    #[test]
    fn row_count_is_events_plus_header() {
        let mut s = canonical_scenario();
        s.total_frames = 200;
        let out = run(&s).unwrap();
        let text = String::from_utf8(events_to_bytes(&out.log)).unwrap();
        assert_eq!(text.lines().count(), out.log.events.len() + 1);
    }

    #[test]
    fn event_csv_reload_matches_log() {
        let mut s = canonical_scenario();
        s.total_frames = 400;
        let out = run(&s).unwrap();
        let bytes = events_to_bytes(&out.log);
        let back = read_events(&bytes[..], s.frame_duration, s.total_frames, Path::new("mem")).unwrap();
        assert_eq!(back.events.len(), out.log.events.len());
        for (a, b) in back.events.iter().zip(&out.log.events) {
            assert_eq!(Event { class: None, ..*b }, *a);
        }
    }

    #[test]
    fn summary_round_trip_is_exact() {
        let mut s = canonical_scenario();
        s.total_frames = 400;
        let out = run(&s).unwrap();
        let row = SummaryRow {
            scenario: s.name.clone(),
            policy: s.scheduler,
            seed: s.seed,
            frames: s.total_frames,
            metrics: out.metrics,
        };
        let mut buf = Vec::new();
        write_summary(std::slice::from_ref(&row), &mut buf).unwrap();
        let back = read_summary(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, vec![row]);
    }

    #[test]
    fn millis_parser() {
        assert_eq!(parse_millis("12.500"), Some(SimTime(12_500)));
        assert_eq!(parse_millis("0.007"), Some(SimTime(7)));
        assert_eq!(parse_millis("12.5"), None);
        assert_eq!(parse_millis("12"), None);
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(events_file_name("my run/1", PolicyKind::Edf, 3), "events_my_run_1_edf_seed3.csv");
    }
}
