//! Finite-difference gradient verification.

use super::optim::ParamStore;
use super::rng::Rng;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub worst_param: String,
}

/// Compares analytic gradients against central differences.
///
/// `backward` must populate `store` gradients for the same loss that `value`
/// evaluates; both must be deterministic given the store. Up to
/// `samples_per_param` entries per parameter are probed (seeded choice), and
/// the error is |analytic - numeric| / max(1, |analytic|).
pub fn grad_check(
    store: &mut ParamStore,
    value: impl Fn(&ParamStore) -> f64,
    backward: impl FnOnce(&mut ParamStore),
    samples_per_param: usize,
    h: f64,
    seed: u64,
) -> GradCheckReport {
    store.zero_grad();
    backward(store);

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        worst_param: String::new(),
    };
    for name in store.names().to_vec() {
        let n = store.get(&name).data.len();
        let mut idxs: Vec<usize> = (0..n).collect();
        if n > samples_per_param {
            let mut rng = Rng::derive(seed, &[fnv(name.as_bytes())]);
            rng.shuffle(&mut idxs);
            idxs.truncate(samples_per_param);
        }
        for &i in &idxs {
            let analytic = store.get(&name).grad[i];
            let orig = store.get(&name).data[i];
            store.get_mut(&name).data[i] = orig + h;
            let plus = value(store);
            store.get_mut(&name).data[i] = orig - h;
            let minus = value(store);
            store.get_mut(&name).data[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(1.0);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = name.clone();
            }
            report.checked += 1;
        }
    }
    report
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::tape::Tape;

    /// f(W) = 0.5 * ||W x||^2 for a fixed x.
    fn quadratic_loss(store: &ParamStore) -> f64 {
        let t = Tape::new();
        let w = store.leaf_on(&t, "w");
        let x = t.leaf(1, 3, vec![0.5, -1.0, 2.0]);
        let y = t.matmul_t(x, w).unwrap();
        let y2 = t.mul(y, y).unwrap();
        t.scalar_value(t.scale(t.sum_all(y2), 0.5))
    }

    #[test]
    fn quadratic_grads_are_exact() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(3);
        store.insert_random("w", 2, 3, &mut rng, 0.5);
        let report = grad_check(
            &mut store,
            quadratic_loss,
            |s| {
                let t = Tape::new();
                let w = s.leaf_on(&t, "w");
                let x = t.leaf(1, 3, vec![0.5, -1.0, 2.0]);
                let y = t.matmul_t(x, w).unwrap();
                let y2 = t.mul(y, y).unwrap();
                let loss = t.scale(t.sum_all(y2), 0.5);
                t.backward(loss).unwrap();
                s.accumulate_grad(&t, "w", w, 1.0);
            },
            16,
            1e-5,
            7,
        );
        assert!(report.max_rel_err < 1e-8, "err {}", report.max_rel_err);
        assert_eq!(report.checked, 6);
    }

    #[test]
    fn zero_function_reports_zero_error() {
        let mut store = ParamStore::new();
        store.insert("w", 1, 4, vec![1.0, 2.0, 3.0, 4.0]);
        let report = grad_check(&mut store, |_| 0.0, |_| {}, 8, 1e-5, 0);
        assert_eq!(report.max_rel_err, 0.0);
    }
}
