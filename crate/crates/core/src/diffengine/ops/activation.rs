use std::rc::Rc;

use rand::Rng;

use crate::diffengine::{Element, Tape, Tensor, Var};
use crate::error::{Error, Result};

impl<F: Element> Tape<F> {
    pub fn relu(&mut self, a: Var) -> Var {
        let va = self.value_rc(a);
        let out = va.map(|x| x.max(F::zero()));
        self.push_op(
            out,
            &[a],
            Box::new(move |g, _| {
                vec![Some(g.zip_map(&va, |g, x| if x > F::zero() { g } else { F::zero() }))]
            }),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let y = Rc::new(out.clone());
        self.push_op(
            out,
            &[a],
            Box::new(move |g, _| vec![Some(g.zip_map(&y, |g, y| g * y * (F::one() - y)))]),
        )
    }

    /// Softmax over the last axis.
    pub fn softmax_last(&mut self, a: Var) -> Result<Var> {
        let width = *self
            .shape(a)
            .last()
            .ok_or_else(|| Error::dim("softmax", "scalar input"))?;
        let mut out = self.value(a).clone();
        for row in out.data_mut().chunks_mut(width) {
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let mut total = F::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let y = Rc::new(out.clone());
        Ok(self.push_op(
            out,
            &[a],
            Box::new(move |g, _| {
                let mut gx = g.clone();
                for (gr, yr) in gx.data_mut().chunks_mut(width).zip(y.data().chunks(width)) {
                    let dot: F = gr.iter().zip(yr).map(|(&g, &y)| g * y).sum();
                    for (gv, &yv) in gr.iter_mut().zip(yr) {
                        *gv = yv * (*gv - dot);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Inverted dropout: active only in train mode, survivors scaled by 1/(1-rate).
    pub fn dropout(&mut self, a: Var, rate: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !self.is_train() || rate == 0.0 {
            return Ok(a);
        }
        let keep = F::of(1.0 / (1.0 - rate));
        let n = self.value(a).numel();
        let mask: Vec<F> = {
            let rng = self.rng();
            (0..n)
                .map(|_| if rng.gen::<f64>() < rate { F::zero() } else { keep })
                .collect()
        };
        let mask = Rc::new(Tensor::new(self.shape(a).to_vec(), mask)?);
        let out = self.value(a).zip_map(&mask, |x, m| x * m);
        Ok(self.push_op(
            out,
            &[a],
            Box::new(move |g, _| vec![Some(g.zip_map(&mask, |g, m| g * m))]),
        ))
    }
}

pub(crate) fn sigmoid<F: Element>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use crate::diffengine::{Mode, Tape, Tensor};

    #[test]
    fn relu_values() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let x = tape.constant(Tensor::from_vec(vec![-1.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 2.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let x = tape.constant(Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap());
        let y = tape.softmax_last(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn dropout_zero_rate_is_identity() {
        let mut tape = Tape::<f64>::new(Mode::Train, 0);
        let x = tape.constant(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
        let y = tape.dropout(x, 0.0).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn dropout_is_inactive_in_eval() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let x = tape.constant(Tensor::from_vec(vec![1.0; 100]));
        let y = tape.dropout(x, 0.7).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut tape = Tape::<f64>::new(Mode::Train, 3);
        let x = tape.constant(Tensor::from_vec(vec![1.0; 1000]));
        let y = tape.dropout(x, 0.5).unwrap();
        let vals = tape.value(y).data();
        assert!(vals.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = vals.iter().filter(|&&v| v > 0.0).count();
        assert!((400..600).contains(&kept));
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(super::sigmoid(-1000.0f64), 0.0);
        assert_eq!(super::sigmoid(1000.0f64), 1.0);
        assert_eq!(super::sigmoid(0.0f32), 0.5);
    }
}
