use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every stochastic step in the crate draws from this generator so that runs
/// are reproducible across platforms.
pub(crate) type DetRng = ChaCha8Rng;

pub(crate) fn seeded(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream from a base seed and a tag.
pub(crate) fn derived(seed: u64, tag: u64) -> DetRng {
    seeded(splitmix64(seed ^ splitmix64(tag)))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fisher-Yates shuffle of `0..n`.
pub(crate) fn permutation(n: usize, rng: &mut DetRng) -> Vec<usize> {
    use rand::Rng;
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
