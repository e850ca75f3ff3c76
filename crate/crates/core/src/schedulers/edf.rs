use alloc::vec::Vec;

use super::{FrameBudget, FrameContext, SchedulerPolicy};
use crate::model::{Grant, Request, SubscriberStation};

/// Earliest deadline first over the pooled requests of the cell.
///
/// Fully preemptive: every frame starts again from the earliest deadline, so
/// a newly arrived request with an earlier deadline displaces a partially
/// served one.
#[derive(Clone, Copy, Debug, Default)]
pub struct Edf;

impl SchedulerPolicy for Edf {
    fn name(&self) -> &'static str {
        "edf"
    }

    fn allocate_frame(&mut self, ctx: &FrameContext, stations: &[SubscriberStation]) -> Vec<Grant> {
        let mut pool: Vec<(usize, &Request)> =
            stations.iter().enumerate().flat_map(|(i, s)| s.queue.iter().map(move |r| (i, r))).collect();
        // Keys are unique (they end in the request id), so this is the order
        // repeated edf_select calls would produce.
        pool.sort_unstable_by_key(|(_, r)| r.edf_key());
        let mut budget = FrameBudget::new(ctx, stations);
        for (si, r) in pool {
            if budget.exhausted() {
                break;
            }
            budget.serve(si, r);
        }
        budget.into_grants()
    }
}
