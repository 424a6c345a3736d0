//! Seed derivation for reproducible, independently named random streams.
//!
//! Every source of randomness in the crate draws from a stream derived from
//! one master seed and a stream name (`"init"`, `"encode/train"`,
//! `"sweep/direct/30"`, ...). Streams with different names are statistically
//! independent, and adding a new consumer never perturbs existing ones, so
//! results stay byte-identical across runs and across code that merely adds
//! unrelated randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 output permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit seed of the stream `name` under `master`.
///
/// The master seed and the bytes of the name are folded through splitmix64,
/// which is a bijective mixer, so distinct names give unrelated seeds and
/// no name can cancel the master seed back out.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    let mut acc = splitmix64(master);
    for &b in name.as_bytes() {
        acc = splitmix64(acc ^ u64::from(b));
    }
    acc
}

/// Builds the generator for the stream `name` under `master`.
pub fn stream_rng(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::RngCore;

    #[test]
    fn same_name_same_stream() {
        let a = stream_rng(42, "encode/train").next_u64();
        let b = stream_rng(42, "encode/train").next_u64();
        assert_eq!(a, b);
    }

    #[test]
    fn different_names_diverge() {
        assert_ne!(
            stream_seed(42, "encode/train"),
            stream_seed(42, "encode/infer")
        );
        assert_ne!(stream_seed(42, "init"), stream_seed(43, "init"));
    }

    #[test]
    fn name_is_not_a_suffix_trick() {
        // "ab" + "c" folded as a name must differ from "a" + "bc": each byte
        // is mixed separately, so concatenation boundaries matter only via
        // the byte sequence, which is identical here — these two ARE equal.
        assert_eq!(stream_seed(7, "abc"), stream_seed(7, "abc"));
        // But a name that is a prefix of another yields a different seed.
        assert_ne!(stream_seed(7, "ab"), stream_seed(7, "abc"));
    }
}
