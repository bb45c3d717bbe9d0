use super::{Element, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Adam with bias correction and decoupled weight decay.
///
/// Update per element: `θ -= lr * (m̂ / (sqrt(v̂) + eps) + weight_decay * θ)`.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    moments: Vec<Option<(Tensor<F>, Tensor<F>)>>,
}

impl<F: Element> Adam<F> {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to every trainable parameter. Parameters without a
    /// gradient are treated as having a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore<F>) -> Result<()> {
        self.step += 1;
        if self.moments.len() < store.len() {
            self.moments.resize_with(store.len(), || None);
        }
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let (lr, eps, wd) = (F::of(self.lr), F::of(self.eps), F::of(self.weight_decay));
        let (bc1, bc2) = (F::of(bc1), F::of(bc2));
        for (id, p) in store.iter_mut() {
            if !p.trainable {
                continue;
            }
            if let Some(g) = &p.grad {
                if g.shape() != p.value.shape() {
                    return Err(Error::dim(
                        "adam",
                        format!("{}: grad {:?} vs value {:?}", p.name, g.shape(), p.value.shape()),
                    ));
                }
            }
            let (m, v) = self.moments[id.index()]
                .get_or_insert_with(|| (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())));
            if m.shape() != p.value.shape() {
                return Err(Error::dim("adam", format!("{}: moment shape changed", p.name)));
            }
            let grad = p.grad.as_ref().map(|g| g.data());
            let values = p.value.data_mut();
            for i in 0..values.len() {
                let gi = grad.map_or(F::zero(), |g| g[i]);
                let mi = &mut m.data_mut()[i];
                *mi = b1 * *mi + (F::one() - b1) * gi;
                let mi = *mi;
                let vi = &mut v.data_mut()[i];
                *vi = b2 * *vi + (F::one() - b2) * gi * gi;
                let vi = *vi;
                let update = (mi / bc1) / ((vi / bc2).sqrt() + eps) + wd * values[i];
                values[i] -= lr * update;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(theta: f64, grad: f64, lr: f64, wd: f64) -> f64 {
        let mut store = ParamStore::<f64>::new();
        let id = store.add_param("w", Tensor::scalar(theta));
        store.get_mut(id).grad = Some(Tensor::scalar(grad));
        let mut adam = Adam::new(lr, wd);
        adam.step(&mut store).unwrap();
        store.value(id).item()
    }

    #[test]
    fn first_step_moves_by_lr() {
        assert!((single(0.0, 1.0, 0.1, 0.0) + 0.1).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        assert_eq!(single(0.7, 0.0, 0.1, 0.0), 0.7);
    }

    #[test]
    fn decoupled_decay_only() {
        assert!((single(1.0, 0.0, 0.1, 0.5) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn buffers_are_not_updated() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add_buffer("running", Tensor::scalar(1.0));
        let mut adam = Adam::new(0.1, 0.5);
        adam.step(&mut store).unwrap();
        assert_eq!(store.value(id).item(), 1.0);
        assert_eq!(adam.steps(), 1);
    }
}
