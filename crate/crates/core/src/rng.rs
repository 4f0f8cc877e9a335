//! SplitMix64 stream used for every random decision in the engine.
//!
//! The generator is a plain value: advancing it returns a new state, so a
//! stream can be copied, replayed, or handed to a worker without sharing.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngState {
    pub state: u64,
}

impl RngState {
    pub const fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream for one episode of a run. Distinct indices give distinct streams
    /// because the index is spread by an odd multiplier before the xor.
    pub fn for_stream(seed: u64, index: u64) -> Self {
        Self::new(seed ^ index.wrapping_mul(GOLDEN_GAMMA))
    }

    /// Pure step: returns the successor state and the output word.
    #[must_use]
    pub fn step(self) -> (Self, u64) {
        let state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
        z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
        (Self { state }, z ^ (z >> 31))
    }

    /// Pure step yielding a real in [0, 1) from the top 53 bits.
    #[must_use]
    pub fn step_unit(self) -> (Self, f64) {
        let (next, word) = self.step();
        (next, (word >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        let (next, word) = self.step();
        *self = next;
        word
    }

    pub fn next_unit(&mut self) -> f64 {
        let (next, u) = self.step_unit();
        *self = next;
        u
    }

    /// Uniform index in `0..n` by rejection-free multiply-shift.
    pub fn next_below(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_below requires n > 0");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard logistic draw via the inverse CDF.
    pub fn next_logistic(&mut self) -> f64 {
        // (0, 1) open interval keeps the logit finite
        let u = (self.next_unit() * ((1u64 << 53) as f64 - 1.0) + 0.5) / (1u64 << 53) as f64;
        (u / (1.0 - u)).ln()
    }

    /// Fisher-Yates shuffle in place.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}
