//! Counter-based random streams.
//!
//! Every random quantity in a simulation is addressed by a tuple
//! `(seed, domain, stream, counter)` and drawn from a ChaCha8 generator
//! positioned at that address:
//!
//! - the 256-bit key holds `seed` and `domain` (little endian), so different
//!   purposes (runtime draws, column permutations, configuration sampling)
//!   never share a keystream;
//! - the 64-bit ChaCha stream id is `stream` (a configuration or arm id);
//! - the word position is `counter << 20` (an instance or draw index), giving
//!   each counter 2^20 words of private keystream.
//!
//! Because a value depends only on its address, adding arms or instances
//! never perturbs the values already drawn for existing ones.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Synthetic runtime of `(config, instance)`.
pub const DOMAIN_RUNTIME: u64 = 0x5255_4e54_494d_4531;
/// Column permutation of a runtime-matrix dataset.
pub const DOMAIN_INSTANCE_ORDER: u64 = 0x494e_5354_4f52_4431;
/// Configuration draws of a COUP sampler.
pub const DOMAIN_CONFIG_SAMPLE: u64 = 0x434f_4e46_4947_5331;
/// Parameter θ of the k-th configuration of a parametric family.
pub const DOMAIN_PARAMETER: u64 = 0x5041_5241_4d45_5431;

const COUNTER_SHIFT: u32 = 20;

/// Generator positioned at the address `(seed, domain, stream, counter)`.
pub fn stream(seed: u64, domain: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(b"coupstrm");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(counter) << COUNTER_SHIFT);
    rng
}

/// Uniform draw in `[0, 1)` at the given address.
pub fn unit(seed: u64, domain: u64, stream_id: u64, counter: u64) -> f64 {
    stream(seed, domain, stream_id, counter).random::<f64>()
}

/// Uniform index in `0..n` at the given address.
pub fn index(seed: u64, domain: u64, stream_id: u64, counter: u64, n: usize) -> usize {
    debug_assert!(n > 0);
    stream(seed, domain, stream_id, counter).random_range(0..n)
}

/// Seeded uniform permutation of `0..n`.
pub fn permutation(seed: u64, domain: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, domain, 0, 0));
    order
}

/// Mix two seeds into one, e.g. a family seed with an experiment seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
