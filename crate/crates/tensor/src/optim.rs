//! Adam with the inverse-square-root warmup schedule.

use std::collections::BTreeMap;

use crate::error::TensorError;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// `lr(step) = model_dim^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LrSchedule {
    pub model_dim: usize,
    pub warmup_steps: u64,
}

impl LrSchedule {
    pub fn new(model_dim: usize) -> Self {
        Self {
            model_dim,
            warmup_steps: 2000,
        }
    }

    pub fn with_warmup(model_dim: usize, warmup_steps: u64) -> Self {
        assert!(warmup_steps >= 1, "warmup_steps must be at least 1");
        Self {
            model_dim,
            warmup_steps,
        }
    }

    pub fn lr(&self, step: u64) -> f64 {
        let s = step.max(1) as f64;
        let w = self.warmup_steps as f64;
        (self.model_dim as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5))
    }
}

/// First/second moment buffers plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    m: BTreeMap<String, Tensor<S>>,
    v: BTreeMap<String, Tensor<S>>,
    pub step: u64,
}

impl<S: Scalar> Default for AdamState<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> AdamState<S> {
    pub fn new() -> Self {
        Self {
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            step: 0,
        }
    }
}

/// One Adam update over every parameter in the store, with bias
/// correction and the scheduled learning rate. Every parameter must have
/// a gradient; gradients are cleared and the step counter advances.
pub fn adam_step<S: Scalar>(
    store: &mut ParamStore<S>,
    state: &mut AdamState<S>,
    schedule: &LrSchedule,
) -> Result<(), TensorError> {
    state.step += 1;
    let lr = S::lit(schedule.lr(state.step));
    let beta1 = S::lit(ADAM_BETA1);
    let beta2 = S::lit(ADAM_BETA2);
    let eps = S::lit(ADAM_EPS);
    let one = S::one();
    let bias1 = one - S::lit(ADAM_BETA1.powi(state.step as i32));
    let bias2 = one - S::lit(ADAM_BETA2.powi(state.step as i32));

    let names: Vec<String> = store.names().cloned().collect();
    for name in &names {
        let grad = store
            .grad(name)
            .ok_or_else(|| TensorError::MissingGrad(name.clone()))?
            .clone();
        let param = store.get(name)?;
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(param.rows(), param.cols()));
        *m = m.zip_map(&grad, |mi, gi| beta1 * mi + (one - beta1) * gi);
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(param.rows(), param.cols()));
        *v = v.zip_map(&grad, |vi, gi| beta2 * vi + (one - beta2) * gi * gi);

        let m_hat = m.map(|mi| mi / bias1);
        let v_hat = v.map(|vi| vi / bias2);
        let update = m_hat.zip_map(&v_hat, |mi, vi| lr * mi / (vi.sqrt() + eps));
        let param = store.get_mut(name)?;
        for (p, u) in param.data_mut().iter_mut().zip(update.data()) {
            *p = *p - *u;
        }
    }
    store.zero_grads();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Gradients;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_identity_at_step_one() {
        // lr(1) = lr(warmup) / warmup, exactly, for any dim
        for (dim, warmup) in [(512usize, 2000u64), (64, 100), (8, 4)] {
            let s = LrSchedule::with_warmup(dim, warmup);
            assert_eq!(s.lr(1), s.lr(warmup) / warmup as f64);
        }
    }

    #[test]
    fn schedule_peaks_at_warmup() {
        let s = LrSchedule::new(512);
        let peak = s.lr(2000);
        assert!(s.lr(1999) < peak || (s.lr(1999) - peak).abs() < 1e-15);
        assert!(s.lr(2001) < peak);
        assert!(s.lr(100) < peak);
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut store: ParamStore<f64> = ParamStore::new();
        store.insert("w", Tensor::row(vec![1.0, -2.0, 3.0]));
        let before = store.get("w").unwrap().clone();
        let mut grads = Gradients::new();
        grads.insert_or_add("w", Tensor::zeros(1, 3));
        store.accumulate(&grads);
        let mut state = AdamState::new();
        adam_step(&mut store, &mut state, &LrSchedule::new(4)).unwrap();
        assert_eq!(store.get("w").unwrap(), &before);
        assert_eq!(state.step, 1);
        assert!(store.grad("w").is_none(), "gradients must be cleared");
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut store: ParamStore<f64> = ParamStore::new();
        store.insert("w", Tensor::scalar(1.0));
        let mut state = AdamState::new();
        let err = adam_step(&mut store, &mut state, &LrSchedule::new(4)).unwrap_err();
        assert_eq!(err, TensorError::MissingGrad("w".to_string()));
    }

    #[test]
    fn two_steps_of_constant_unit_gradient_match_hand_trace() {
        // With g = 1 always, bias correction makes m_hat = v_hat = 1
        // exactly, so each step subtracts lr(t) / (1 + eps).
        let dim = 1;
        let warmup = 4;
        let schedule = LrSchedule::with_warmup(dim, warmup);
        let mut store: ParamStore<f64> = ParamStore::new();
        store.insert("theta", Tensor::scalar(0.0));
        let mut state = AdamState::new();
        for _ in 0..2 {
            let mut g = Gradients::new();
            g.insert_or_add("theta", Tensor::scalar(1.0));
            store.accumulate(&g);
            adam_step(&mut store, &mut state, &schedule).unwrap();
        }
        let expected = -(schedule.lr(1) + schedule.lr(2)) / (1.0 + ADAM_EPS);
        let got = store.get("theta").unwrap().item().unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-12);
        // frozen: lr(1) = min(1, 4^-1.5) = 0.125, lr(2) = min(2^-0.5, 0.25) = 0.25
        assert_relative_eq!(got, -(0.125 + 0.25) / (1.0 + 1e-8), epsilon = 1e-12);
    }
}
