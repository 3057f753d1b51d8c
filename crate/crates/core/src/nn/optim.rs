use serde::{Deserialize, Serialize};

use super::tensor::Module;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adaptive-moment optimiser with bias correction. Moment buffers are keyed
/// by parameter visiting order, so one instance must always be stepped with
/// the same module and the same filter.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    pub cfg: AdamConfig,
    step: u64,
    first: Vec<Vec<S>>,
    second: Vec<Vec<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter accepted by `trainable`, using
    /// its accumulated gradient multiplied by `grad_scale`.
    pub fn step<M: Module<S> + ?Sized>(&mut self, module: &mut M, grad_scale: S, trainable: &dyn Fn(&str) -> bool) {
        self.step += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let lr = S::of(self.cfg.lr * c2.sqrt() / c1);
        let eps = S::of(self.cfg.eps * c2.sqrt());
        let (sb1, sb2) = (S::of(b1), S::of(b2));
        let (ob1, ob2) = (S::one() - sb1, S::one() - sb2);
        let mut idx = 0;
        let first = &mut self.first;
        let second = &mut self.second;
        module.visit_mut("", &mut |name, t| {
            if !trainable(name) {
                return;
            }
            if first.len() <= idx {
                first.push(vec![S::zero(); t.numel()]);
                second.push(vec![S::zero(); t.numel()]);
            }
            let (m, v) = (&mut first[idx], &mut second[idx]);
            assert_eq!(m.len(), t.numel(), "optimiser state does not match parameter {name}");
            let (w, g) = t.parts_mut();
            for i in 0..w.len() {
                let gi = g[i] * grad_scale;
                m[i] = sb1 * m[i] + ob1 * gi;
                v[i] = sb2 * v[i] + ob2 * gi * gi;
                w[i] -= lr * m[i] / (v[i].sqrt() + eps);
            }
            idx += 1;
        });
    }
}

/// Accepts every parameter.
pub fn all_params(_: &str) -> bool {
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    struct Quadratic {
        w: Tensor<f64>,
    }

    impl Module<f64> for Quadratic {
        fn visit(&self, p: &str, f: &mut dyn FnMut(&str, &Tensor<f64>)) {
            f(&crate::nn::tensor::join(p, "w"), &self.w);
        }
        fn visit_mut(&mut self, p: &str, f: &mut dyn FnMut(&str, &mut Tensor<f64>)) {
            f(&crate::nn::tensor::join(p, "w"), &mut self.w);
        }
    }

    impl Quadratic {
        fn loss(&self) -> f64 {
            self.w.data().iter().map(|w| w * w).sum()
        }
        fn backprop(&mut self) {
            let (w, g) = self.w.parts_mut();
            for i in 0..w.len() {
                g[i] = 2.0 * w[i];
            }
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut q = Quadratic { w: Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap().tracked() };
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut q, 1.0, &all_params);
        assert_eq!(q.w.data(), &[1.0, -2.0]);
    }

    #[test]
    fn one_step_descends() {
        let mut q = Quadratic { w: Tensor::from_vec(&[1], vec![1.0]).unwrap().tracked() };
        let mut opt = Adam::new(AdamConfig::default());
        q.backprop();
        opt.step(&mut q, 1.0, &all_params);
        assert!(q.w.data()[0].abs() < 1.0);
    }

    #[test]
    fn ten_steps_monotone() {
        let mut q = Quadratic { w: Tensor::from_vec(&[3], vec![0.5, -1.5, 2.0]).unwrap().tracked() };
        let mut opt = Adam::new(AdamConfig { lr: 0.05, ..AdamConfig::default() });
        let mut prev = q.loss();
        for _ in 0..10 {
            q.zero_grad();
            q.backprop();
            opt.step(&mut q, 1.0, &all_params);
            let l = q.loss();
            assert!(l < prev, "{l} !< {prev}");
            prev = l;
        }
    }

    #[test]
    fn filtered_params_untouched() {
        let mut q = Quadratic { w: Tensor::from_vec(&[1], vec![1.0]).unwrap().tracked() };
        let mut opt = Adam::new(AdamConfig::default());
        q.backprop();
        opt.step(&mut q, 1.0, &|n: &str| n != "w");
        assert_eq!(q.w.data(), &[1.0]);
    }
}
