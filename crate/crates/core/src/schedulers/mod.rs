//! Uplink scheduling policies.
//!
//! Every policy maps the backlog of one cell to a list of grants for the
//! current frame. A station never sends more than its transmission capacity
//! `c(i)` in one frame. Policies are work conserving: they stop granting only
//! when the frame capacity or the servable backlog (per station, the smaller
//! of its backlog and `c(i)`) is exhausted. Each grant covers
//! `min(remaining, cell capacity left, station capacity left)` bits, so a
//! request receives at most one grant per frame.

mod edf;
mod hedf;
mod round_robin;
mod ssbpf;

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Grant, Request, RequestId, SubscriberStation};
use crate::time::SimTime;

pub use edf::Edf;
pub use hedf::Hedf;
pub use round_robin::{RoundRobin, WeightedRoundRobin};
pub use ssbpf::{ssbpf_order, SsbpfEdf};

/// Per-frame inputs handed to a policy.
#[derive(Clone, Copy, Debug)]
pub struct FrameContext {
    pub frame_index: u64,
    /// Start of the frame.
    pub now: SimTime,
    pub frame_duration: SimTime,
    /// Cell capacity for this frame, bits.
    pub capacity: u64,
    /// Requests injected into this cell at the start of this frame.
    pub arrivals: usize,
}

pub trait SchedulerPolicy: Send {
    fn name(&self) -> &'static str;

    /// Grants for one frame of one cell. `stations` are the cell's stations
    /// in ascending id order, with their pending queues.
    fn allocate_frame(&mut self, ctx: &FrameContext, stations: &[SubscriberStation]) -> Vec<Grant>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Rr,
    Wrr,
    Edf,
    SsbpfEdf,
    #[default]
    Hedf,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] =
        [PolicyKind::Rr, PolicyKind::Wrr, PolicyKind::Edf, PolicyKind::SsbpfEdf, PolicyKind::Hedf];

    pub const fn name(self) -> &'static str {
        match self {
            PolicyKind::Rr => "rr",
            PolicyKind::Wrr => "wrr",
            PolicyKind::Edf => "edf",
            PolicyKind::SsbpfEdf => "ssbpf_edf",
            PolicyKind::Hedf => "hedf",
        }
    }

    pub fn build(self) -> Box<dyn SchedulerPolicy> {
        match self {
            PolicyKind::Rr => Box::new(RoundRobin::new()),
            PolicyKind::Wrr => Box::new(WeightedRoundRobin::new()),
            PolicyKind::Edf => Box::new(Edf),
            PolicyKind::SsbpfEdf => Box::new(SsbpfEdf),
            PolicyKind::Hedf => Box::new(Hedf::new()),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownPolicy(pub alloc::string::String);

impl fmt::Display for UnknownPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown policy `{}` (expected one of rr, wrr, edf, ssbpf_edf, hedf)", self.0)
    }
}

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| UnknownPolicy(s.into()))
    }
}

/// Subscriber-station proportional-fairness priority `c / (1 + th)`.
pub fn ssbpf_priority(capacity_c: f64, historical_throughput: f64) -> f64 {
    capacity_c / (1.0 + historical_throughput)
}

/// Exponentially smoothed throughput, `(1 - alpha) * th + alpha * served`.
///
/// Evaluated as `th + alpha * (served - th)` so that `served == th` is an
/// exact fixed point.
pub fn update_historical_throughput(th: f64, served_this_frame: f64, alpha: f64) -> f64 {
    th + alpha * (served_this_frame - th)
}

/// Earliest-deadline request; ties go to the earlier arrival, then the lower
/// id. `None` only for an empty candidate list.
pub fn edf_select<'a, I>(candidates: I) -> Option<&'a Request>
where
    I: IntoIterator<Item = &'a Request>,
{
    candidates.into_iter().min_by_key(|r| r.edf_key())
}

/// Service time of `bits` at `capacity_c` bits per frame, rounded up to
/// whole microseconds.
pub fn service_time(bits: u64, capacity_c: u64, frame_duration: SimTime) -> SimTime {
    let num = u128::from(bits) * u128::from(frame_duration.as_micros());
    let den = u128::from(capacity_c.max(1));
    SimTime(num.div_ceil(den) as u64)
}

/// Claim value: the time at which the next task would finish if the current
/// task first runs to completion.
///
/// `burst_next + (total_current - elapsed_current) + now`.
///
/// # Panics
///
/// If `elapsed_current > total_current`.
pub fn claim_value(burst_next: SimTime, total_current: SimTime, elapsed_current: SimTime, now: SimTime) -> SimTime {
    assert!(elapsed_current <= total_current, "claim_value: elapsed {elapsed_current} exceeds total {total_current}");
    burst_next + (total_current - elapsed_current) + now
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecisionOutcome {
    /// The current task keeps the channel.
    Continue,
    /// Preempt the current task and serve the next one.
    Switch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchedulerDecision {
    pub claim_value: SimTime,
    pub next_deadline: SimTime,
    pub outcome: DecisionOutcome,
}

/// Continue iff the claim value does not exceed the next task's deadline.
pub fn hedf_decide(claim_value: SimTime, next_deadline: SimTime) -> SchedulerDecision {
    let outcome = if claim_value <= next_deadline { DecisionOutcome::Continue } else { DecisionOutcome::Switch };
    SchedulerDecision { claim_value, next_deadline, outcome }
}

/// One entry of a cell's service trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEntry {
    /// A grant to `request`; `completes` if it finished the request.
    Grant { request: RequestId, completes: bool },
    /// The request left the queue without completing (dropped on a miss).
    Dropped { request: RequestId },
}

/// Incremental context-switch counter for one cell.
///
/// A switch is a grant to a different request while the previously granted
/// request is still unfinished. Completions and drops are not switches.
#[derive(Clone, Debug, Default)]
pub struct SwitchDetector {
    open: Option<RequestId>,
}

impl SwitchDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the preempted request when this grant is a context switch.
    pub fn grant(&mut self, request: RequestId, completes: bool) -> Option<RequestId> {
        let preempted = match self.open {
            Some(prev) if prev != request => Some(prev),
            _ => None,
        };
        self.open = if completes { None } else { Some(request) };
        preempted
    }

    pub fn dropped(&mut self, request: RequestId) {
        if self.open == Some(request) {
            self.open = None;
        }
    }
}

/// Number of context switches in a single cell's trace.
pub fn context_switches<I: IntoIterator<Item = TraceEntry>>(trace: I) -> u64 {
    let mut det = SwitchDetector::new();
    let mut count = 0;
    for entry in trace {
        match entry {
            TraceEntry::Grant { request, completes } => {
                if det.grant(request, completes).is_some() {
                    count += 1;
                }
            }
            TraceEntry::Dropped { request } => det.dropped(request),
        }
    }
    count
}

/// Accumulates grants for one frame, enforcing the cell capacity and each
/// station's transmission capacity `c(i)`.
pub(crate) struct FrameBudget {
    frame_index: u64,
    left: u64,
    station_left: Vec<u64>,
    grants: Vec<Grant>,
}

impl FrameBudget {
    pub(crate) fn new(ctx: &FrameContext, stations: &[SubscriberStation]) -> Self {
        FrameBudget {
            frame_index: ctx.frame_index,
            left: ctx.capacity,
            station_left: stations.iter().map(|s| s.capacity_c).collect(),
            grants: Vec::new(),
        }
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.left == 0
    }

    /// Station `si` (index into the cell's station slice) can still send.
    pub(crate) fn open(&self, si: usize) -> bool {
        self.station_left[si] > 0
    }

    /// Grants as much of `r` (queued at station `si`) as fits. Returns true
    /// if `r` completes.
    pub(crate) fn serve(&mut self, si: usize, r: &Request) -> bool {
        let bits = r.remaining_bits().min(self.left).min(self.station_left[si]);
        if bits == 0 {
            return false;
        }
        self.left -= bits;
        self.station_left[si] -= bits;
        self.grants.push(Grant {
            frame_index: self.frame_index,
            station_id: r.station,
            request_id: r.id,
            granted_bits: bits,
        });
        bits == r.remaining_bits()
    }

    pub(crate) fn into_grants(self) -> Vec<Grant> {
        self.grants
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassDeadlines, ServiceClass};
    use alloc::vec;
    use proptest::prelude::*;

    fn req(id: u64, arrival_ms: u64, deadline_ms: u64) -> Request {
        Request::with_deadline(
            id,
            0,
            ServiceClass::RtPs,
            SimTime::from_millis(arrival_ms),
            100,
            SimTime::from_millis(deadline_ms),
        )
    }

    #[test]
    fn priority_examples() {
        assert_eq!(ssbpf_priority(10.0, 4.0), 2.0);
        assert_eq!(ssbpf_priority(5.0, 0.0), 5.0);
        assert_eq!(ssbpf_priority(0.0, 100.0), 0.0);
    }

    #[test]
    fn ewma_examples() {
        assert_eq!(update_historical_throughput(100.0, 100.0, 0.1), 100.0);
        assert_eq!(update_historical_throughput(0.0, 500.0, 1.0), 500.0);
        assert_eq!(update_historical_throughput(200.0, 0.0, 0.25), 150.0);
    }

    #[test]
    fn edf_select_examples() {
        let rs = [req(0, 0, 30), req(1, 0, 20), req(2, 0, 25)];
        assert_eq!(edf_select(&rs).unwrap().id, 1);
        let tie = [req(0, 5, 20), req(1, 3, 20)];
        assert_eq!(edf_select(&tie).unwrap().id, 1);
        let same = [req(7, 3, 20), req(4, 3, 20)];
        assert_eq!(edf_select(&same).unwrap().id, 4);
        assert!(edf_select(&[] as &[Request]).is_none());
    }

    #[test]
    fn claim_value_examples() {
        let ms = SimTime::from_millis;
        assert_eq!(claim_value(ms(5), ms(10), ms(3), ms(12)), ms(24));
        assert_eq!(claim_value(ms(3), ms(0), ms(0), ms(0)), ms(3));
    }

    #[test]
    #[should_panic(expected = "exceeds total")]
    fn claim_value_rejects_overrun() {
        claim_value(SimTime(1), SimTime(2), SimTime(3), SimTime(0));
    }

    #[test]
    fn decide_examples() {
        let ms = SimTime::from_millis;
        assert_eq!(hedf_decide(ms(24), ms(30)).outcome, DecisionOutcome::Continue);
        assert_eq!(hedf_decide(ms(24), ms(20)).outcome, DecisionOutcome::Switch);
        assert_eq!(hedf_decide(ms(24), ms(24)).outcome, DecisionOutcome::Continue);
    }

    #[test]
    fn service_time_rounds_up() {
        let f = SimTime::from_millis(5);
        assert_eq!(service_time(800, 1_000, f), SimTime(4_000));
        assert_eq!(service_time(1, 3, f), SimTime(1_667));
        assert_eq!(service_time(0, 3, f), SimTime::ZERO);
    }

    #[test]
    fn context_switch_examples() {
        use TraceEntry::Grant as G;
        // single request served to completion over three frames
        let single =
            [G { request: 1, completes: false }, G { request: 1, completes: false }, G { request: 1, completes: true }];
        assert_eq!(context_switches(single), 0);
        // sequential completions
        let seq = [G { request: 1, completes: true }, G { request: 2, completes: true }];
        assert_eq!(context_switches(seq), 0);
        // A part-served, then B, then A
        let pre =
            [G { request: 1, completes: false }, G { request: 2, completes: false }, G { request: 1, completes: true }];
        assert_eq!(context_switches(pre), 2);
        // a drop is not a preemption
        let dropped =
            [G { request: 1, completes: false }, TraceEntry::Dropped { request: 1 }, G { request: 2, completes: true }];
        assert_eq!(context_switches(dropped), 0);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
            assert_eq!(p.build().name(), p.name());
        }
        assert!("wfq".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn budget_serves_at_most_remaining() {
        let ctx = FrameContext {
            frame_index: 0,
            now: SimTime::ZERO,
            frame_duration: SimTime::from_millis(5),
            capacity: 150,
            arrivals: 0,
        };
        let stations = [SubscriberStation::new(0, 0, 1_000), SubscriberStation::new(1, 0, 30)];
        let mut b = FrameBudget::new(&ctx, &stations);
        let r = Request::new(0, 0, ServiceClass::Be, SimTime::ZERO, 100, &ClassDeadlines::default());
        assert!(b.serve(0, &r));
        let r1 = Request::new(1, 1, ServiceClass::Be, SimTime::ZERO, 100, &ClassDeadlines::default());
        assert!(!b.serve(1, &r1));
        assert!(!b.open(1));
        let r2 = Request::new(2, 0, ServiceClass::Be, SimTime::ZERO, 100, &ClassDeadlines::default());
        assert!(!b.serve(0, &r2));
        assert!(b.exhausted());
        let g = b.into_grants();
        assert_eq!(g.iter().map(|g| g.granted_bits).collect::<alloc::vec::Vec<_>>(), vec![100, 30, 20]);
    }

    proptest! {
        #[test]
        fn edf_select_matches_linear_scan(keys in proptest::collection::vec((0u64..50, 0u64..50), 1..200)) {
            let rs: Vec<Request> = keys
                .iter()
                .enumerate()
                .map(|(i, &(a, slack))| req(i as u64, a, a + slack))
                .collect();
            let mut best = &rs[0];
            for r in &rs[1..] {
                let better = r.deadline < best.deadline
                    || (r.deadline == best.deadline && r.arrival < best.arrival)
                    || (r.deadline == best.deadline && r.arrival == best.arrival && r.id < best.id);
                if better {
                    best = r;
                }
            }
            prop_assert_eq!(edf_select(&rs).unwrap().id, best.id);
        }

        #[test]
        fn priority_monotone(c in 0.001f64..1e6, th1 in 0.0f64..1e6, d in 0.001f64..1e6) {
            prop_assert!(ssbpf_priority(c, th1) > ssbpf_priority(c, th1 + d));
            prop_assert!(ssbpf_priority(c + d, th1) > ssbpf_priority(c, th1));
        }

        #[test]
        fn ewma_matches_convex_combination(th in 0.0f64..1e5, served in 0.0f64..1e5, alpha in 0.001f64..=1.0) {
            let a = update_historical_throughput(th, served, alpha);
            let b = (1.0 - alpha) * th + alpha * served;
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            prop_assert!(a >= th.min(served) - 1e-9 && a <= th.max(served) + 1e-9);
        }

        // Two-task replay: the claim value is the completion time of the next
        // task when the current one runs first, stepping one microsecond at a
        // time.
        #[test]
        fn claim_value_is_run_to_completion_time(
            total in 0u64..3_000, frac in 0.0f64..=1.0, burst in 0u64..3_000, now in 0u64..100_000
        ) {
            let elapsed = (total as f64 * frac) as u64;
            let mut t = now;
            let mut left = total - elapsed;
            while left > 0 { left -= 1; t += 1; }
            let mut next = burst;
            while next > 0 { next -= 1; t += 1; }
            prop_assert_eq!(claim_value(SimTime(burst), SimTime(total), SimTime(elapsed), SimTime(now)), SimTime(t));
        }
    }
}
