use crate::error::{shape_err, Error, Result};
use crate::train::{Gradients, ParamStore};

/// Optimiser and loop settings shared by the training tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            epochs: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::InvalidArgument(format!(
                "Adam betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument("Adam epsilon must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update. Parameters without an entry in `grads`
/// are left untouched; the step counter advances once per call.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    for (name, g) in grads {
        let slot = store
            .slots
            .iter()
            .find(|s| &s.name == name)
            .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
        if slot.value.shape() != g.shape() {
            return Err(shape_err(
                "adam_step",
                format!("{name}: {:?}", slot.value.shape()),
                format!("{:?}", g.shape()),
            ));
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }

    store.step += 1;
    let t = store.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    for slot in &mut store.slots {
        let Some(g) = grads.get(&slot.name) else {
            continue;
        };
        let (m, v, w) = (slot.m.data_mut(), slot.v.data_mut(), slot.value.data_mut());
        for (i, &gi) in g.data().iter().enumerate() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            w[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::Tensor;

    fn store_with(value: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::scalar(value)).unwrap();
        s
    }

    fn grad(g: f64) -> Gradients {
        [("w".to_string(), Tensor::scalar(g))].into_iter().collect()
    }

    #[test]
    fn zero_gradient_keeps_value_and_decays_moments() {
        let cfg = TrainConfig::default();
        let mut s = store_with(0.5);
        adam_step(&mut s, &grad(1.0), &cfg).unwrap();
        let before = s.get("w").unwrap().as_scalar().unwrap();
        let (m0, v0) = s.moments("w").map(|(m, v)| (m.data()[0], v.data()[0])).unwrap();
        adam_step(&mut s, &grad(0.0), &cfg).unwrap();
        let (m1, v1) = s.moments("w").map(|(m, v)| (m.data()[0], v.data()[0])).unwrap();
        assert!((m1 - 0.9 * m0).abs() < 1e-15 && (v1 - 0.999 * v0).abs() < 1e-15);
        // The decayed first moment still moves the parameter; a fresh store does not.
        assert!(s.get("w").unwrap().as_scalar().unwrap() < before);

        let mut fresh = store_with(0.5);
        adam_step(&mut fresh, &grad(0.0), &cfg).unwrap();
        assert_eq!(fresh.get("w").unwrap().as_scalar().unwrap(), 0.5);
        assert_eq!(fresh.step(), 1);
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let cfg = TrainConfig { lr: 0.01, ..Default::default() };
        let mut s = store_with(0.0);
        let mut prev = 0.0;
        let mut last_step = 0.0;
        for _ in 0..2000 {
            adam_step(&mut s, &grad(3.0), &cfg).unwrap();
            let w = s.get("w").unwrap().as_scalar().unwrap();
            last_step = w - prev;
            assert!(last_step < 0.0);
            prev = w;
        }
        // m̂ = g and v̂ = g² exactly for a constant gradient.
        assert!((last_step + cfg.lr).abs() < 1e-9, "{last_step}");
    }

    #[test]
    fn pure_function_of_store() {
        let cfg = TrainConfig::default();
        let mut a = store_with(1.0);
        let mut b = a.clone();
        adam_step(&mut a, &grad(-0.3), &cfg).unwrap();
        adam_step(&mut b, &grad(-0.3), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let cfg = TrainConfig::default();
        let mut s = store_with(1.0);
        let unknown: Gradients = [("x".to_string(), Tensor::scalar(1.0))].into_iter().collect();
        assert!(matches!(adam_step(&mut s, &unknown, &cfg), Err(Error::UnknownParameter(_))));
        assert!(matches!(
            adam_step(&mut s, &grad(f64::NAN), &cfg),
            Err(Error::NonFiniteGradient(_))
        ));
        assert_eq!(s.step(), 0);
        let bad = TrainConfig { beta1: 1.0, ..Default::default() };
        assert!(adam_step(&mut s, &grad(1.0), &bad).is_err());
    }
}
