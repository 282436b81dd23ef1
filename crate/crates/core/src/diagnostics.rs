use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Rejection-sampler bookkeeping, summed over all samples of an estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Candidates proposed by the outer (target-level) rejection step.
    pub proposals: u64,
    /// Candidates accepted by the outer step.
    pub accepted: u64,
    /// Rejections inside per-term envelope samplers.
    pub inner_rejections: u64,
    /// Resamples triggered by a vanishing characteristic function.
    pub zero_guard: u64,
}

impl Counters {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

impl AddAssign for Counters {
    fn add_assign(&mut self, rhs: Self) {
        self.proposals += rhs.proposals;
        self.accepted += rhs.accepted;
        self.inner_rejections += rhs.inner_rejections;
        self.zero_guard += rhs.zero_guard;
    }
}
