//! Portable seeding. Every random stream in the workbench is a ChaCha8
//! generator keyed by a seed derived from (root seed, purpose, index), so
//! results are reproducible byte-for-byte across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Rng = ChaCha8Rng;

/// Environment variable selecting the RNG algorithm version.
pub const RNG_VERSION_VAR: &str = "XIL_RNG_VERSION";
pub const RNG_VERSION: u32 = 1;

/// Checks `XIL_RNG_VERSION`; only version 1 (ChaCha8 + FNV-1a seed
/// derivation) exists.
pub fn check_rng_version() -> Result<u32> {
    match std::env::var(RNG_VERSION_VAR) {
        Err(_) => Ok(RNG_VERSION),
        Ok(v) if v.trim() == "1" => Ok(RNG_VERSION),
        Ok(v) => Err(Error::Config(format!(
            "{RNG_VERSION_VAR}={v} is not supported (available: 1)"
        ))),
    }
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stable seed for a named sub-stream.
pub fn derive(seed: u64, purpose: &str, index: u64) -> u64 {
    let h = fnv1a(seed.to_le_bytes(), 0xcbf2_9ce4_8422_2325);
    let h = fnv1a(purpose.bytes(), h);
    let mut z = fnv1a(index.to_le_bytes(), h);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive(7, "scene", 3), derive(7, "scene", 3));
        assert_ne!(derive(7, "scene", 3), derive(7, "scene", 4));
        assert_ne!(derive(7, "scene", 3), derive(7, "search", 3));
        // frozen value guards against accidental algorithm changes
        assert_eq!(derive(0, "", 0), 7_526_961_181_645_162_559);
        let mut a = rng(derive(1, "x", 0));
        let mut b = rng(derive(1, "x", 0));
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }
}
