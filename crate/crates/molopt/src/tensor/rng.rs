//! Deterministic splittable RNG: SplitMix64 with the reference constants,
//! plus Box-Muller Gaussian sampling. Identical seeds give identical streams
//! on every platform.

#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

const GAMMA: u64 = 0x9E3779B97F4A7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng { state: seed }
    }

    /// Keyed derivation: one stream per (seed, part...) tuple without
    /// collisions between neighbouring indices.
    pub fn derive(seed: u64, parts: &[u64]) -> Rng {
        let mut s = mix64(seed ^ GAMMA);
        for &p in parts {
            s = mix64(s.wrapping_add(GAMMA).wrapping_add(p.wrapping_mul(0xD1342543DE82EF95)));
        }
        Rng { state: s }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn restore(state: u64) -> Rng {
        Rng { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller (the second value is discarded so the
    /// stream position depends only on the draw count).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derive_separates_streams() {
        let a = Rng::derive(1, &[0, 1]).next_u64_once();
        let b = Rng::derive(1, &[1, 0]).next_u64_once();
        assert_ne!(a, b);
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(42);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let x = rng.next_gaussian();
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    impl Rng {
        fn next_u64_once(mut self) -> u64 {
            self.next_u64()
        }
    }
}
