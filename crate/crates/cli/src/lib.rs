//! Command-line surface for `exact-multinom`: single-dataset inference,
//! coverage simulations against the bootstrap, p-value stability traces and
//! timing benchmarks.

pub mod bench;
pub mod error;
pub mod request;
pub mod simulate;
pub mod stability;

pub use error::CliError;
pub use request::{run_infer, InferRequest};

/// SplitMix64 finalizer, used to derive independent per-replicate seeds.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
