use rand::SeedableRng;

/// Generator behind every synthetic dataset: PCG XSL-RR 128/64, seeded from
/// a `u64` through the PCG32 seed expansion of `rand_core`.
pub type SeededRng = rand_pcg::Pcg64;

pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}
