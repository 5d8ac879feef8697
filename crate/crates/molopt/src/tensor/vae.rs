//! Gaussian latent helpers: KL to the standard normal and the
//! reparameterized sample.

use super::rng::Rng;
use super::tape::{Tape, TapeError, Tensor};

/// Diagonal Gaussian given by mean and log variance rows of equal shape.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian {
    pub mu: Tensor,
    pub logvar: Tensor,
}

/// KL(N(mu, exp(logvar)) || N(0, I)) = 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar).
pub fn kl_normal(tape: &Tape, g: &Gaussian) -> Result<Tensor, TapeError> {
    let mu2 = tape.mul(g.mu, g.mu)?;
    let ev = tape.exp(g.logvar);
    let neg = tape.affine(g.logvar, -1.0, -1.0);
    let s = tape.add(tape.add(mu2, ev)?, neg)?;
    Ok(tape.scale(tape.sum_all(s), 0.5))
}

/// mu + exp(logvar / 2) * eps with eps ~ N(0, I); differentiable through
/// both mu and logvar.
pub fn reparam_sample(tape: &Tape, g: &Gaussian, rng: &mut Rng) -> Result<Tensor, TapeError> {
    let n = g.mu.len();
    let eps: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
    let eps = tape.leaf(g.mu.rows, g.mu.cols, eps);
    let std = tape.exp(tape.affine(g.logvar, 0.5, 0.0));
    tape.add(g.mu, tape.mul(std, eps)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(tape: &Tape, mu: Vec<f64>, logvar: Vec<f64>) -> Gaussian {
        let n = mu.len();
        Gaussian {
            mu: tape.leaf(1, n, mu),
            logvar: tape.leaf(1, n, logvar),
        }
    }

    #[test]
    fn kl_reference_points() {
        let t = Tape::new();
        let g = gaussian(&t, vec![0.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(t.scalar_value(kl_normal(&t, &g).unwrap()), 0.0);

        let g = gaussian(&t, vec![1.0], vec![0.0]);
        assert!((t.scalar_value(kl_normal(&t, &g).unwrap()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_nonnegative_on_random_inputs() {
        let mut rng = Rng::new(5);
        let t = Tape::new();
        for _ in 0..100 {
            let mu: Vec<f64> = (0..4).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let lv: Vec<f64> = (0..4).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let g = gaussian(&t, mu, lv);
            assert!(t.scalar_value(kl_normal(&t, &g).unwrap()) >= 0.0);
        }
    }

    #[test]
    fn reparam_collapses_to_mean_for_tiny_variance() {
        let t = Tape::new();
        let g = gaussian(&t, vec![2.5, -1.0], vec![-100.0, -100.0]);
        let mut rng = Rng::new(1);
        let z = reparam_sample(&t, &g, &mut rng).unwrap();
        let v = t.value(z);
        assert!((v[0] - 2.5).abs() < 1e-10);
        assert!((v[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn reparam_seeded_determinism_and_moments() {
        let draw = |seed: u64| {
            let t = Tape::new();
            let g = gaussian(&t, vec![1.0], vec![0.0]);
            let mut rng = Rng::new(seed);
            let z = reparam_sample(&t, &g, &mut rng).unwrap();
            t.value(z)[0]
        };
        assert_eq!(draw(9).to_bits(), draw(9).to_bits());

        // Monte-Carlo mean within 3 sigma / sqrt(n) of mu.
        let t = Tape::new();
        let g = gaussian(&t, vec![1.0], vec![0.0]);
        let mut rng = Rng::new(123);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z = reparam_sample(&t, &g, &mut rng).unwrap();
            sum += t.value(z)[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
    }
}
