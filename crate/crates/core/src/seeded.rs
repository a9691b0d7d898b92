//! Portable seeded randomness for splits and example selection.
//!
//! Everything that decides which items land where goes through this module so
//! that another implementation can reproduce the same partitions bit for bit:
//!
//! * generator: SplitMix64 (state advanced by `0x9E3779B97F4A7C15`, output
//!   mixed with the `0xBF58476D1CE4E5B9` / `0x94D049BB133111EB` finalizer);
//! * bounded draw in `[0, n)`: take the next output `x`, reject while
//!   `x >= (u64::MAX / n) * n`, return `x % n`;
//! * shuffle: Fisher-Yates from the last index down, `j = bounded(i + 1)`.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, n)`. `n` must be non-zero.
    pub fn bounded(&mut self, n: u64) -> u64 {
        assert!(n > 0, "bounded draw over an empty range");
        let limit = (u64::MAX / n) * n;
        loop {
            let x = self.next_u64();
            if x < limit {
                return x % n;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.bounded(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Sorts `ids` by byte order, shuffles them with `seed` and returns the result.
pub fn seeded_order(ids: &[String], seed: u64) -> Vec<String> {
    let mut sorted = ids.to_vec();
    sorted.sort();
    SplitMix64::new(seed).shuffle(&mut sorted);
    sorted
}

/// `floor(fraction * n)`, tolerant of representation error in `fraction`
/// (0.29 * 100 is 28.999999999999996 in binary floating point).
pub fn floor_fraction(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Per-split seeds derived from one master seed: the first `count` outputs
/// of `SplitMix64::new(master)`.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = SplitMix64::new(master);
    (0..count).map(|_| rng.next_u64()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_outputs() {
        // Reference values of SplitMix64 seeded with 0.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut v: Vec<u32> = (0..100).collect();
        SplitMix64::new(42).shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }

    #[test]
    fn seeded_order_ignores_input_order() {
        let a: Vec<String> = ["c", "a", "b", "d"].iter().map(|s| s.to_string()).collect();
        let mut b = a.clone();
        b.reverse();
        assert_eq!(seeded_order(&a, 9), seeded_order(&b, 9));
    }

    #[test]
    fn floor_fraction_matches_table_counts() {
        assert_eq!(floor_fraction(0.25, 2109), 527);
        assert_eq!(floor_fraction(0.25, 2500), 625);
        assert_eq!(floor_fraction(0.25, 4), 1);
        assert_eq!(floor_fraction(0.29, 100), 29);
    }
}
