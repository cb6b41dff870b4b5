//! Deterministic 64-bit PRNG used everywhere randomness is needed.
//!
//! This is SplitMix64 (Steele, Lea & Flood) with its standard constants:
//! increment 0x9E3779B97F4A7C15, mixers 0xBF58476D1CE4E5B9 and
//! 0x94D049BB133111EB. Output is platform-independent, so any `(seed,
//! config)` pair reproduces byte-identical datasets and training runs.
//! Independent streams are derived by folding a path of indices into the
//! seed, which keeps per-split/per-example generation order-free.

#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derives an independent stream from `seed` and a path such as
    /// `[split_index, example_index]`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut rng = Self::new(seed);
        for &p in path {
            let folded = rng.next_u64() ^ p.wrapping_mul(0x9E3779B97F4A7C15);
            rng = Self::new(folded);
        }
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. `bound` must be positive.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "below(0)");
        (self.next_f64() * bound as f64) as usize % bound
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Picks one item uniformly.
    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    /// Picks an index with probability proportional to `weights`.
    pub fn choose_weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0, "weights must not all be zero");
        let mut x = self.next_f64() * total;
        for (i, &w) in weights.iter().enumerate() {
            x -= w;
            if x < 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }

    /// Uniform in `(-scale, scale)`.
    pub fn uniform_symmetric(&mut self, scale: f64) -> f64 {
        (self.next_f64() * 2.0 - 1.0) * scale
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = (1.0 - self.next_f64()).max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Samples `k` distinct indices from `0..n` (k <= n), in random order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        self.shuffle(&mut pool);
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..8).map(|_| Rng::new(42).next_u64()).collect();
        let mut rng = Rng::new(42);
        let first = rng.next_u64();
        assert!(a.iter().all(|&x| x == first));
        let b: Vec<u64> = {
            let mut r = Rng::new(42);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = Rng::new(42);
            (0..8).map(|_| r.next_u64()).collect()
        };
        assert_eq!(b, c);
    }

    #[test]
    fn known_splitmix_values() {
        // Reference values for seed 1234567 from the published algorithm.
        let mut r = Rng::new(1234567);
        assert_eq!(r.next_u64(), 6457827717110365317);
        assert_eq!(r.next_u64(), 3203168211198807973);
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = Rng::derive(7, &[0, 0]);
        let mut b = Rng::derive(7, &[0, 1]);
        let mut c = Rng::derive(7, &[1, 0]);
        let x = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_ne!(x.0, x.1);
        assert_ne!(x.0, x.2);
        assert_ne!(x.1, x.2);
    }

    #[test]
    fn f64_stays_in_unit_interval() {
        let mut r = Rng::new(99);
        for _ in 0..10_000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn weighted_choice_respects_zero_weights() {
        let mut r = Rng::new(5);
        for _ in 0..1000 {
            let i = r.choose_weighted(&[0.0, 1.0, 0.0]);
            assert_eq!(i, 1);
        }
    }
}
