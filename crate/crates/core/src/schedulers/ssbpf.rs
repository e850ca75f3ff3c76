use alloc::vec::Vec;

use super::{ssbpf_priority, FrameBudget, FrameContext, SchedulerPolicy};
use crate::model::{Grant, Request, SubscriberStation};

/// Indices of the backlogged stations in descending SSBPF priority
/// `c / (1 + th)`; equal priorities go to the lower station id.
pub fn ssbpf_order(stations: &[SubscriberStation]) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = stations
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_backlogged())
        .map(|(i, s)| (i, ssbpf_priority(s.capacity_c as f64, s.historical_throughput)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(stations[a.0].id.cmp(&stations[b.0].id)));
    ranked.into_iter().map(|(i, _)| i).collect()
}

/// Stations in descending proportional-fairness priority; each station's
/// requests in EDF order. Priorities are recomputed every frame from the
/// historical throughput the engine maintains.
#[derive(Clone, Copy, Debug, Default)]
pub struct SsbpfEdf;

impl SchedulerPolicy for SsbpfEdf {
    fn name(&self) -> &'static str {
        "ssbpf_edf"
    }

    fn allocate_frame(&mut self, ctx: &FrameContext, stations: &[SubscriberStation]) -> Vec<Grant> {
        let mut budget = FrameBudget::new(ctx, stations);
        for idx in ssbpf_order(stations) {
            let mut queue: Vec<&Request> = stations[idx].queue.iter().collect();
            queue.sort_unstable_by_key(|r| r.edf_key());
            for r in queue {
                if budget.exhausted() {
                    return budget.into_grants();
                }
                if !budget.open(idx) {
                    break;
                }
                budget.serve(idx, r);
            }
        }
        budget.into_grants()
    }
}
