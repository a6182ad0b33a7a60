//! Self-contained deterministic PRNG used for every random decision in the
//! pipeline (splits, trigger placement, mixing, mock fidelity draws).
//!
//! Seeded outputs must stay bit-stable across releases, so the generators
//! are defined here instead of depending on an RNG crate whose streams may
//! change between versions.

/// SplitMix64 generator (Steele, Lea & Flood). Passes BigCrush for the
/// statistical quality needed here and has a trivially stable definition.
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

    /// Uniform integer in `[0, bound)` via rejection sampling (no modulo bias).
    pub fn next_below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "next_below requires a positive bound");
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }

    /// Uniform float in `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }

    /// `count` distinct indices drawn from `[0, n)`, returned in ascending
    /// order. Partial Fisher-Yates over the index vector.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot sample {count} of {n}");
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.next_below(n - i);
            idx.swap(i, j);
        }
        let mut picked = idx[..count].to_vec();
        picked.sort_unstable();
        picked
    }
}

/// FNV-1a over the id, mixed with the global seed. Poisoning a corpus in
/// parallel stays order-independent because each example's stream depends
/// only on `(global_seed, id)`.
pub fn derive_seed(global_seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    // one SplitMix64 scramble so similar ids do not yield correlated streams
    let mut mix = SplitMix64::new(h ^ global_seed);
    mix.next_u64()
}
