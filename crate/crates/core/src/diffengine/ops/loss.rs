use std::rc::Rc;

use crate::diffengine::{Element, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

impl<F: Element> Tape<F> {
    /// Mean binary cross-entropy of probabilities against 0/1 targets.
    pub fn bce_loss(&mut self, probs: Var, targets: &[F]) -> Result<Var> {
        let n = self.value(probs).numel();
        if n != targets.len() || n == 0 {
            return Err(Error::dim(
                "bce_loss",
                format!("{n} probabilities, {} targets", targets.len()),
            ));
        }
        let lo = F::of(PROB_CLAMP);
        let hi = F::one() - lo;
        let p = self.value_rc(probs);
        let y: Rc<Vec<F>> = Rc::new(targets.to_vec());
        let nf = F::of(n as f64);
        let total: F = p
            .data()
            .iter()
            .zip(y.iter())
            .map(|(&p, &y)| {
                let pc = p.max(lo).min(hi);
                -(y * pc.ln() + (F::one() - y) * (F::one() - pc).ln())
            })
            .sum();
        let shape = p.shape().to_vec();
        Ok(self.push_op(
            Tensor::scalar(total / nf),
            &[probs],
            Box::new(move |g, _| {
                let scale = g.item() / nf;
                let d: Vec<F> = p
                    .data()
                    .iter()
                    .zip(y.iter())
                    .map(|(&p, &y)| {
                        if p < lo || p > hi {
                            F::zero()
                        } else {
                            scale * (p - y) / (p * (F::one() - p))
                        }
                    })
                    .collect();
                vec![Some(Tensor::new(shape.clone(), d).unwrap())]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use crate::diffengine::{Mode, Tape, Tensor};

    #[test]
    fn half_probability_costs_ln2() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let p = tape.constant(Tensor::from_vec(vec![0.5]));
        let l = tape.bce_loss(p, &[1.0]).unwrap();
        assert!((tape.value(l).item() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn exact_predictions_cost_nearly_nothing() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let p = tape.constant(Tensor::from_vec(vec![1.0, 0.0]));
        let l = tape.bce_loss(p, &[1.0, 0.0]).unwrap();
        assert!(tape.value(l).item() < 1e-6);
    }
}
