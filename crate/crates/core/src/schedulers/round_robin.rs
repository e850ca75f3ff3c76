use alloc::vec;
use alloc::vec::Vec;

use super::{FrameBudget, FrameContext, SchedulerPolicy};
use crate::model::{Grant, SubscriberStation};

/// Shared cycle state: the station being visited and the shares it has
/// left in this visit. One share is one head-of-queue grant.
#[derive(Clone, Debug, Default)]
struct Cycle {
    pointer: usize,
    credit: Option<u32>,
}

impl Cycle {
    fn advance(&mut self, n: usize) {
        self.pointer = (self.pointer + 1) % n;
        self.credit = None;
    }

    fn allocate(
        &mut self,
        ctx: &FrameContext,
        stations: &[SubscriberStation],
        weight: impl Fn(&SubscriberStation) -> u32,
    ) -> Vec<Grant> {
        let n = stations.len();
        let mut budget = FrameBudget::new(ctx, stations);
        if n == 0 {
            return budget.into_grants();
        }
        self.pointer %= n;
        // Requests completed earlier in this frame, per station.
        let mut taken = vec![0usize; n];
        let servable =
            |taken: &[usize], budget: &FrameBudget, i: usize| taken[i] < stations[i].queue.len() && budget.open(i);
        while !budget.exhausted() && (0..n).any(|i| servable(&taken, &budget, i)) {
            let i = self.pointer;
            let st = &stations[i];
            if !servable(&taken, &budget, i) {
                self.advance(n);
                continue;
            }
            let credit = self.credit.get_or_insert_with(|| weight(st).max(1));
            *credit -= 1;
            let exhausted_visit = *credit == 0;
            if budget.serve(i, &st.queue[taken[i]]) {
                taken[i] += 1;
            }
            if exhausted_visit {
                self.advance(n);
            }
        }
        budget.into_grants()
    }
}

/// Round robin: each backlogged station in turn gets its head-of-queue
/// request served, the pointer persisting across frames.
#[derive(Clone, Debug, Default)]
pub struct RoundRobin {
    cycle: Cycle,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SchedulerPolicy for RoundRobin {
    fn name(&self) -> &'static str {
        "rr"
    }

    fn allocate_frame(&mut self, ctx: &FrameContext, stations: &[SubscriberStation]) -> Vec<Grant> {
        self.cycle.allocate(ctx, stations, |_| 1)
    }
}

/// Weighted round robin: as [`RoundRobin`] but a visit lasts up to the
/// station's `wrr_weight` head-of-queue grants.
#[derive(Clone, Debug, Default)]
pub struct WeightedRoundRobin {
    cycle: Cycle,
}

impl WeightedRoundRobin {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SchedulerPolicy for WeightedRoundRobin {
    fn name(&self) -> &'static str {
        "wrr"
    }

    fn allocate_frame(&mut self, ctx: &FrameContext, stations: &[SubscriberStation]) -> Vec<Grant> {
        self.cycle.allocate(ctx, stations, |s| s.wrr_weight)
    }
}
