use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{
    claim_value, hedf_decide, service_time, ssbpf_order, ssbpf_priority, DecisionOutcome, FrameBudget, FrameContext,
    SchedulerDecision, SchedulerPolicy,
};
use crate::model::{Grant, Request, RequestId, SubscriberStation};

/// Heuristic EDF.
///
/// The policy keeps a current task that persists across frames. When new
/// requests enter the cell, the earliest-deadline waiting request `j` is the
/// next candidate and the claim value
///
/// ```text
/// mu = burst(j) + (total(current) - elapsed(current)) + now
/// ```
///
/// is compared with its deadline `D(j)`: `mu <= D(j)` keeps the current task,
/// otherwise `j` preempts it. Service times are `bits / c(i) × frame`.
///
/// When the current task completes (or none exists) the next one is taken
/// from the station with the highest SSBPF priority `c / (1 + th)`, in EDF
/// order within that station. Equal-deadline candidates are ordered by that
/// same priority.
#[derive(Clone, Debug, Default)]
pub struct Hedf {
    current: Option<RequestId>,
    continues: u64,
    switches: u64,
    last_decision: Option<SchedulerDecision>,
}

impl Hedf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current(&self) -> Option<RequestId> {
        self.current
    }

    /// (Continue, Switch) decisions taken so far.
    pub fn decision_counts(&self) -> (u64, u64) {
        (self.continues, self.switches)
    }

    pub fn last_decision(&self) -> Option<SchedulerDecision> {
        self.last_decision
    }
}

fn find(stations: &[SubscriberStation], id: RequestId) -> Option<(usize, &Request)> {
    stations.iter().enumerate().find_map(|(i, s)| s.queue.iter().find(|r| r.id == id).map(|r| (i, r)))
}

impl SchedulerPolicy for Hedf {
    fn name(&self) -> &'static str {
        "hedf"
    }

    fn allocate_frame(&mut self, ctx: &FrameContext, stations: &[SubscriberStation]) -> Vec<Grant> {
        let priority: Vec<f64> =
            stations.iter().map(|s| ssbpf_priority(s.capacity_c as f64, s.historical_throughput)).collect();

        let mut current = self.current.and_then(|id| find(stations, id));

        if ctx.arrivals > 0 {
            if let Some((ci, cur)) = current {
                let next = stations
                    .iter()
                    .enumerate()
                    .flat_map(|(i, s)| s.queue.iter().map(move |r| (i, r)))
                    .filter(|(_, r)| r.id != cur.id)
                    .min_by(|a, b| candidate_order(a, b, &priority));
                if let Some((ni, next)) = next {
                    let c_cur = stations[ci].capacity_c;
                    let total = service_time(cur.size_bits, c_cur, ctx.frame_duration);
                    let elapsed = service_time(cur.served_bits, c_cur, ctx.frame_duration);
                    let burst = service_time(next.remaining_bits(), stations[ni].capacity_c, ctx.frame_duration);
                    let decision = hedf_decide(claim_value(burst, total, elapsed, ctx.now), next.deadline);
                    self.last_decision = Some(decision);
                    match decision.outcome {
                        DecisionOutcome::Continue => self.continues += 1,
                        DecisionOutcome::Switch => {
                            self.switches += 1;
                            current = Some((ni, next));
                        }
                    }
                }
            }
        }

        let mut budget = FrameBudget::new(ctx, stations);
        let mut done: BTreeSet<RequestId> = BTreeSet::new();
        while !budget.exhausted() {
            let (i, r) = match current.filter(|&(i, _)| budget.open(i)) {
                Some(c) => c,
                None => match fresh_pick(stations, &done, &budget) {
                    Some(c) => c,
                    None => break,
                },
            };
            if budget.serve(i, r) {
                done.insert(r.id);
                current = None;
            } else {
                // Out of cell capacity, or the station reached c(i).
                current = Some((i, r));
            }
        }
        self.current = current.map(|(_, r)| r.id);
        budget.into_grants()
    }
}

/// Deadline, then higher station priority, then arrival, then id.
fn candidate_order(a: &(usize, &Request), b: &(usize, &Request), priority: &[f64]) -> Ordering {
    a.1.deadline
        .cmp(&b.1.deadline)
        .then_with(|| priority[b.0].total_cmp(&priority[a.0]))
        .then_with(|| a.1.arrival.cmp(&b.1.arrival))
        .then_with(|| a.1.id.cmp(&b.1.id))
}

/// Highest-priority station that has unserved work and can still send; its
/// earliest-deadline request.
fn fresh_pick<'a>(
    stations: &'a [SubscriberStation],
    done: &BTreeSet<RequestId>,
    budget: &FrameBudget,
) -> Option<(usize, &'a Request)> {
    ssbpf_order(stations).into_iter().filter(|&i| budget.open(i)).find_map(|i| {
        stations[i].queue.iter().filter(|r| !done.contains(&r.id)).min_by_key(|r| r.edf_key()).map(|r| (i, r))
    })
}
