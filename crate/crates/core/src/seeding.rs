//! Deterministic seed derivation.
//!
//! Every Monte-Carlo trial owns an independent RNG stream derived from the
//! experiment master seed and the trial's position, so trials can run in any
//! order (or in parallel) and still reproduce bit-identically.

/// SplitMix64 finalizer; a bijective avalanche over `u64`.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of the `index`-th child stream of `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Derives a per-(sweep point, trial) seed from the experiment master seed.
pub fn trial_seed(master: u64, point: u64, trial: u64) -> u64 {
    child_seed(child_seed(master, point.wrapping_add(0x5eed_0000)), trial)
}

/// Purpose tags keeping the channel draw, the optimizer starts, and the BER
/// bit stream of one trial statistically independent.
pub mod tag {
    pub const CHANNEL: u64 = 0x01;
    pub const FIT: u64 = 0x02;
    pub const BER: u64 = 0x03;
    pub const BASELINE: u64 = 0x04;
}
