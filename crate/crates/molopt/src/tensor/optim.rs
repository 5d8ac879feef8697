//! Named parameter store with AMSGrad state.

use std::collections::HashMap;

use super::rng::Rng;
use super::tape::{Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub vhat: Vec<f64>,
}

impl ParamEntry {
    fn new(rows: usize, cols: usize, data: Vec<f64>) -> ParamEntry {
        let n = rows * cols;
        assert_eq!(data.len(), n);
        ParamEntry {
            rows,
            cols,
            data,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
            vhat: vec![0.0; n],
        }
    }
}

/// All learnable parameters, iterated in insertion order so every pass over
/// the store is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    entries: HashMap<String, ParamEntry>,
    pub step: u64,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) {
        assert!(
            !self.entries.contains_key(name),
            "duplicate parameter {name}"
        );
        self.names.push(name.to_string());
        self.entries
            .insert(name.to_string(), ParamEntry::new(rows, cols, data));
    }

    /// Uniform init in [-scale, scale] drawn from the given stream.
    pub fn insert_random(&mut self, name: &str, rows: usize, cols: usize, rng: &mut Rng, scale: f64) {
        let data = (0..rows * cols).map(|_| rng.uniform(-scale, scale)).collect();
        self.insert(name, rows, cols, data);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> &ParamEntry {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut ParamEntry {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn param_count(&self) -> usize {
        self.names.len()
    }

    pub fn value_count(&self) -> usize {
        self.names.iter().map(|n| self.get(n).data.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for name in self.names.clone() {
            for g in self.get_mut(&name).grad.iter_mut() {
                *g = 0.0;
            }
        }
    }

    /// Puts a parameter on a tape as a leaf and returns the handle.
    pub fn leaf_on(&self, tape: &Tape, name: &str) -> Tensor {
        let e = self.get(name);
        tape.leaf(e.rows, e.cols, e.data.clone())
    }

    /// Adds tape gradients into the store's accumulators, scaled.
    pub fn accumulate_grad(&mut self, tape: &Tape, name: &str, t: Tensor, scale: f64) {
        let g = tape.grad(t);
        let e = self.get_mut(name);
        for (acc, gi) in e.grad.iter_mut().zip(g) {
            *acc += scale * gi;
        }
    }

    /// One AMSGrad update over every parameter:
    /// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2; vhat <- max(vhat, v);
    /// theta <- theta - lr * m / (sqrt(vhat) + eps). No bias correction.
    pub fn amsgrad_step(&mut self, lr: f64, beta1: f64, beta2: f64, eps: f64) {
        for name in self.names.clone() {
            let e = self.get_mut(&name);
            for i in 0..e.data.len() {
                let g = e.grad[i];
                e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g;
                e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g * g;
                if e.v[i] > e.vhat[i] {
                    e.vhat[i] = e.v[i];
                }
                e.data[i] -= lr * e.m[i] / (e.vhat[i].sqrt() + eps);
            }
        }
        self.step += 1;
    }
}

pub const AMSGRAD_BETA1: f64 = 0.9;
pub const AMSGRAD_BETA2: f64 = 0.999;
pub const AMSGRAD_EPS: f64 = 1e-8;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_matches_hand_evaluation() {
        let mut store = ParamStore::new();
        store.insert("w", 1, 1, vec![1.0]);
        store.get_mut("w").grad[0] = 1.0;
        let lr = 0.01;
        store.amsgrad_step(lr, 0.9, 0.999, 1e-8);
        // m = 0.1, v = 0.001, vhat = 0.001.
        let want = 1.0 - lr * 0.1 / (0.001f64.sqrt() + 1e-8);
        let got = store.get("w").data[0];
        assert!((got - want).abs() < 1e-15, "got {got}, want {want}");
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut store = ParamStore::new();
        store.insert("w", 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        store.amsgrad_step(0.01, 0.9, 0.999, 1e-8);
        assert_eq!(store.get("w").data, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn vhat_monotone_nondecreasing() {
        let mut store = ParamStore::new();
        store.insert("w", 1, 1, vec![0.0]);
        let mut prev = 0.0;
        for g in [1.0, 0.5, 0.1, 0.01, 2.0, 0.0] {
            store.get_mut("w").grad[0] = g;
            store.amsgrad_step(0.001, 0.9, 0.999, 1e-8);
            let vhat = store.get("w").vhat[0];
            assert!(vhat >= prev);
            prev = vhat;
        }
    }

    #[test]
    fn lr_zero_is_identity() {
        let mut store = ParamStore::new();
        store.insert("w", 1, 3, vec![1.0, -1.0, 0.5]);
        store.get_mut("w").grad.copy_from_slice(&[5.0, -3.0, 2.0]);
        store.amsgrad_step(0.0, 0.9, 0.999, 1e-8);
        assert_eq!(store.get("w").data, vec![1.0, -1.0, 0.5]);
    }
}
