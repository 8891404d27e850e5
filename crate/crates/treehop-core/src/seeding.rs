//! Deterministic derivation of per-purpose RNG seeds from one run seed.
//!
//! Each consumer (init, shuffling, per-example dropout, negative sampling)
//! gets its own stream so that, say, changing the number of epochs never
//! shifts which negatives a dataset loader samples.

pub(crate) const SALT_SHUFFLE: u64 = 0x7375_666c;
pub(crate) const SALT_DROPOUT: u64 = 0x6472_6f70;
pub(crate) const SALT_NEGATIVES: u64 = 0x6e65_6773;
pub(crate) const SALT_TRIAL: u64 = 0x7472_6961;

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn derive(base: u64, salt: u64, a: u64, b: u64) -> u64 {
    mix(base ^ mix(salt ^ mix(a ^ mix(b))))
}
