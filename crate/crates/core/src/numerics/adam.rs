use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

impl<T: Real> AdamConfig<T> {
    pub fn with_lr(lr: T) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// First/second moment accumulators, one buffer per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(group_sizes: &[usize]) -> Self {
        Self {
            first: group_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: group_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, group: usize) -> &[T] {
        &self.first[group]
    }

    pub fn second_moment(&self, group: usize) -> &[T] {
        &self.second[group]
    }
}

/// A named, mutable parameter buffer.
pub struct ParamSlot<'a, T> {
    pub name: String,
    pub values: &'a mut [T],
}

/// One bias-corrected Adam update applied in place.
///
/// Gradients are validated before anything is touched, so a rejected step
/// leaves both parameters and state unchanged.
pub fn adam_step<T: Real>(
    params: &mut [ParamSlot<'_, T>],
    grads: &[&[T]],
    state: &mut AdamState<T>,
    cfg: &AdamConfig<T>,
) -> Result<()> {
    if cfg.lr <= T::zero() {
        return Err(Error::Domain("learning rate must be positive".into()));
    }
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Shape(format!(
            "{} parameter groups, {} gradient groups, {} state groups",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((slot, g), m) in params.iter().zip(grads).zip(&state.first) {
        if slot.values.len() != g.len() || g.len() != m.len() {
            return Err(Error::Shape(format!(
                "group `{}`: {} params, {} grads, {} state entries",
                slot.name,
                slot.values.len(),
                g.len(),
                m.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                name: slot.name.clone(),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let one = T::one();
    let bc1 = one - cfg.beta1.powi(t);
    let bc2 = one - cfg.beta2.powi(t);

    for (gi, (slot, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first[gi];
        let v = &mut state.second[gi];
        for k in 0..g.len() {
            m[k] = cfg.beta1 * m[k] + (one - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (one - cfg.beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            slot.values[k] = slot.values[k] - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(params: &mut Vec<f64>, grads: &[f64], state: &mut AdamState<f64>) -> Result<()> {
        let mut slots = [ParamSlot {
            name: "w".into(),
            values: params.as_mut_slice(),
        }];
        adam_step(&mut slots, &[grads], state, &AdamConfig::default())
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.5, -1.5, 2.0];
        let mut st = AdamState::new(&[3]);
        run(&mut p, &[0.0; 3], &mut st).unwrap();
        assert_eq!(p, vec![0.5, -1.5, 2.0]);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let g = [0.3, -2.0, 1e-3];
        let mut p = vec![0.0; 3];
        let mut st = AdamState::new(&[3]);
        run(&mut p, &g, &mut st).unwrap();
        // m_hat = g, v_hat = g^2 after bias correction
        for (pk, gk) in p.iter().zip(g) {
            let expected = -1e-3 * gk / (gk.abs() + 1e-8);
            assert!((pk - expected).abs() < 1e-15, "{pk} vs {expected}");
            assert!((pk + 1e-3 * gk.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let g = [0.1, -0.2];
        let mut a = vec![1.0, 2.0];
        let mut b = a.clone();
        let mut sa = AdamState::new(&[2]);
        let mut sb = AdamState::new(&[2]);
        for _ in 0..5 {
            run(&mut a, &g, &mut sa).unwrap();
            run(&mut b, &g, &mut sb).unwrap();
        }
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(sa, sb);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = vec![1.0, 1.0];
        let mut st = AdamState::new(&[2]);
        let err = run(&mut p, &[0.0, f64::NAN], &mut st).unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref name } if name == "w"));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(st.step(), 0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![1.0, 1.0];
        let mut st = AdamState::new(&[2]);
        assert!(matches!(run(&mut p, &[0.0], &mut st), Err(Error::Shape(_))));
    }
}
