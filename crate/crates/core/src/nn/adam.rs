use serde::{Deserialize, Serialize};

use super::params::Parameters;
use crate::error::{Error, Result};

/// Bias-corrected Adam. Moment buffers are allocated on the first step and
/// must match the parameter layout on every later step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step<P: Parameters + ?Sized>(
    state: &mut AdamState,
    params: &mut P,
    grads: &P,
) -> Result<()> {
    let mut grad_segments: Vec<(String, Vec<f64>)> = Vec::new();
    grads.visit("", &mut |name, g| grad_segments.push((name.to_string(), g.to_vec())));
    let layout = params.layout();
    if layout.len() != grad_segments.len()
        || layout
            .iter()
            .zip(&grad_segments)
            .any(|((_, n), (_, g))| *n != g.len())
    {
        return Err(Error::domain("adam_step: gradient layout does not match parameters"));
    }
    for (name, g) in &grad_segments {
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("adam_step: non-finite gradient at {name}[{i}]")));
        }
    }
    if state.first.is_empty() {
        state.first = grad_segments.iter().map(|(_, g)| vec![0.0; g.len()]).collect();
        state.second = state.first.clone();
    } else if state.first.len() != grad_segments.len()
        || state.first.iter().zip(&grad_segments).any(|(m, (_, g))| m.len() != g.len())
    {
        return Err(Error::domain("adam_step: optimizer state does not match parameters"));
    }

    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);
    let mut seg = 0;
    let (first, second) = (&mut state.first, &mut state.second);
    params.visit_mut("", &mut |_, p| {
        let g = &grad_segments[seg].1;
        let m = &mut first[seg];
        let v = &mut second[seg];
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        seg += 1;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use approx::assert_abs_diff_eq;

    struct Scalar(Tensor);

    impl Parameters for Scalar {
        fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
            f(&crate::nn::params::join(prefix, "theta"), self.0.data());
        }
        fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
            f(&crate::nn::params::join(prefix, "theta"), self.0.data_mut());
        }
    }

    fn scalar(v: f64) -> Scalar {
        Scalar(Tensor::vector(vec![v]))
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = AdamState::default();
        let mut p = scalar(0.7);
        for _ in 0..5 {
            adam_step(&mut s, &mut p, &scalar(0.0)).unwrap();
        }
        assert_eq!(p.0.data()[0], 0.7);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // mpmath: 0.99900000000999999990
        let mut s = AdamState::default();
        let mut p = scalar(1.0);
        adam_step(&mut s, &mut p, &scalar(1.0)).unwrap();
        assert_abs_diff_eq!(p.0.data()[0], 0.99900000001, epsilon = 1e-15);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn two_unit_steps_differ_from_one_doubled_step() {
        let mut s = AdamState::default();
        let mut twice = scalar(1.0);
        adam_step(&mut s, &mut twice, &scalar(1.0)).unwrap();
        adam_step(&mut s, &mut twice, &scalar(1.0)).unwrap();
        let mut s = AdamState::default();
        let mut once = scalar(1.0);
        adam_step(&mut s, &mut once, &scalar(2.0)).unwrap();
        assert_abs_diff_eq!(twice.0.data()[0], 1.0 - 0.002, epsilon = 1e-10);
        assert_abs_diff_eq!(once.0.data()[0], 1.0 - 0.001, epsilon = 1e-10);
    }

    #[test]
    fn nan_gradient_reports_path() {
        let mut s = AdamState::default();
        let mut p = scalar(1.0);
        let bad = Scalar(Tensor::zeros(&[1]));
        let mut bad = bad;
        bad.0.data_mut()[0] = f64::NAN;
        let err = adam_step(&mut s, &mut p, &bad).unwrap_err();
        assert!(err.to_string().contains("theta[0]"), "{err}");
        assert_eq!(p.0.data()[0], 1.0);
    }
}
