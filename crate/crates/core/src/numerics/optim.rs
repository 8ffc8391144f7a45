use super::graph::ParamStore;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for one [`ParamStore`], index-aligned with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, store: &ParamStore<T>) -> Self {
        let zeros = || store.iter().map(|p| Tensor::zeros(p.value.shape())).collect::<Vec<_>>();
        Self {
            config,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    /// Applies one bias-corrected update from the gradients held in `store`.
    ///
    /// Fails without touching any parameter if a gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        if store.len() != self.first_moment.len() {
            return Err(Error::InvalidArgument(format!(
                "optimizer tracks {} parameters, store has {}",
                self.first_moment.len(),
                store.len()
            )));
        }
        if let Some(p) = store.iter().find(|p| !p.grad.all_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let bias1 = 1.0 - c.beta1.powi(self.step as i32);
        let bias2 = 1.0 - c.beta2.powi(self.step as i32);
        let lr = T::from_f64(c.learning_rate);
        let eps = T::from_f64(c.epsilon);
        let (inv1, inv2) = (T::from_f64(1.0 / bias1), T::from_f64(1.0 / bias2));
        for ((p, m), v) in store
            .iter_mut()
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for (((w, &g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(p.grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m * inv1;
                let v_hat = *v * inv2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(store: &mut ParamStore<T>, max_norm: f64) -> f64 {
    let norm = store
        .iter()
        .flat_map(|p| p.grad.data().iter())
        .map(|g| g.as_f64() * g.as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = T::from_f64(max_norm / norm);
        for p in store.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g = *g * s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[f64], grads: &[f64]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::from_f64(&[values.len()], values).unwrap());
        s.get_mut(id).grad = Tensor::from_f64(&[grads.len()], grads).unwrap();
        s
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = store(&[0.5, -1.0], &[0.0, 0.0]);
        let before = s.iter().next().unwrap().value.clone();
        let mut adam = Adam::new(AdamConfig::default(), &s);
        for _ in 0..5 {
            adam.step(&mut s).unwrap();
        }
        assert_eq!(s.iter().next().unwrap().value, before);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let mut s = store(&[0.5], &[0.0]);
        let mut adam = Adam::new(AdamConfig::default(), &s);
        adam.first_moment[0] = Tensor::from_f64(&[1], &[0.2]).unwrap();
        adam.second_moment[0] = Tensor::from_f64(&[1], &[0.1]).unwrap();
        adam.step(&mut s).unwrap();
        assert!((adam.first_moment[0].data()[0] - 0.18).abs() < 1e-12);
        assert!((adam.second_moment[0].data()[0] - 0.0999).abs() < 1e-12);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        let mut s = store(&[1.0, 1.0, 1.0], &[3.0, -0.01, 250.0]);
        let mut adam = Adam::new(AdamConfig::with_learning_rate(0.01), &s);
        adam.step(&mut s).unwrap();
        let v = s.iter().next().unwrap().value.to_f64_vec();
        assert!((v[0] - 0.99).abs() < 1e-6);
        assert!((v[1] - 1.01).abs() < 1e-5);
        assert!((v[2] - 0.99).abs() < 1e-6);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = store(&[1.0], &[f64::NAN]);
        let mut adam = Adam::new(AdamConfig::default(), &s);
        let err = adam.step(&mut s).unwrap_err();
        assert!(err.to_string().contains("`w`"));
        assert_eq!(adam.step, 0);
    }

    #[test]
    fn identical_streams_give_identical_trajectories() {
        let run = || {
            let mut s = store(&[0.1, 0.2], &[0.0, 0.0]);
            let mut adam = Adam::new(AdamConfig::default(), &s);
            for i in 0..20 {
                let g = [(i as f64 * 0.3).sin(), (i as f64).cos()];
                s.iter_mut().next().unwrap().grad = Tensor::from_f64(&[2], &g).unwrap();
                adam.step(&mut s).unwrap();
            }
            let out = s.iter().next().unwrap().value.clone();
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut s = store(&[0.0, 0.0], &[30.0, 40.0]);
        let before = clip_grad_norm(&mut s, 10.0);
        assert_eq!(before, 50.0);
        let g = s.iter().next().unwrap().grad.to_f64_vec();
        assert!((g[0] - 6.0).abs() < 1e-12 && (g[1] - 8.0).abs() < 1e-12);
    }
}
