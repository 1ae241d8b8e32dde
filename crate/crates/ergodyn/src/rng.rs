use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stamps a 64-bit value with splitmix64. Used to derive independent
/// substreams from a base seed.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for substream `stream` of `seed`.
///
/// All random work in the crate draws from (seed, stream index) pairs, so
/// results do not depend on thread count or scheduling: a parallel loop
/// assigns stream indices by task position, not by execution order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream.wrapping_add(0x51_7C_C1_B7_27_22_0A_95))))
}

/// Substream ids for the pipeline stages, kept in one place so reruns with
/// the same seed touch identical streams.
pub mod streams {
    pub const CLOUD: u64 = 1;
    pub const PANEL: u64 = 2;
    pub const LYAPUNOV: u64 = 3;
    pub const GIBBS: u64 = 4;
    /// Ball-volume batches use `VOLUME_BASE + batch_index`.
    pub const VOLUME_BASE: u64 = 1 << 20;
    /// Tangent-ball batches use `TANGENT_BASE + batch_index`.
    pub const TANGENT_BASE: u64 = 2 << 20;
}
