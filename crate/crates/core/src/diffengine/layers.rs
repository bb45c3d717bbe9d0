//! Parameterized building blocks. Each layer holds ids into a [`ParamStore`].

use rand::Rng;

use super::{Conv1dGeometry, Element, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::Result;

/// Standard deviation of the normal initializer for convolution weights.
pub const CONV_INIT_STD: f64 = 0.01;

/// Fully connected layer, weight stored `[out, in]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    /// Weights uniform in `±1/sqrt(in)`, bias zero.
    pub fn new<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_features: usize,
        out_features: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (in_features.max(1) as f64).sqrt();
        let weight = store.add_param(
            format!("{name}.weight"),
            Tensor::uniform(&[out_features, in_features], bound, rng),
        );
        let bias = store.add_param(format!("{name}.bias"), Tensor::zeros(&[out_features]));
        Linear {
            weight,
            bias,
            in_features,
            out_features,
        }
    }

    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &ParamStore<F>,
        x: Var,
    ) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        tape.linear(x, w, Some(b))
    }
}

#[derive(Clone, Debug)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub geometry: Conv1dGeometry,
    pub kernel: usize,
}

impl Conv1d {
    /// Weights drawn from `N(0, 0.01²)`, bias zero.
    pub fn new<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        geometry: Conv1dGeometry,
        rng: &mut R,
    ) -> Self {
        let weight = store.add_param(
            format!("{name}.weight"),
            Tensor::randn(&[out_channels, in_channels, kernel], CONV_INIT_STD, rng),
        );
        let bias = store.add_param(format!("{name}.bias"), Tensor::zeros(&[out_channels]));
        Conv1d {
            weight,
            bias,
            geometry,
            kernel,
        }
    }

    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &ParamStore<F>,
        x: Var,
    ) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        tape.conv1d(x, w, Some(b), self.geometry)
    }
}

/// Convolution whose kernel is reparameterized as `gain * direction / ‖direction‖`,
/// one gain per output channel.
#[derive(Clone, Debug)]
pub struct WeightNormConv1d {
    pub direction: ParamId,
    pub gain: ParamId,
    pub bias: ParamId,
    pub geometry: Conv1dGeometry,
    pub kernel: usize,
}

impl WeightNormConv1d {
    /// Direction from `N(0, 0.01²)`; gains start at the row norms so the
    /// effective kernel equals the direction.
    pub fn new<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        geometry: Conv1dGeometry,
        rng: &mut R,
    ) -> Self {
        let dir: Tensor<F> = Tensor::randn(&[out_channels, in_channels, kernel], CONV_INIT_STD, rng);
        let gains: Vec<F> = dir
            .data()
            .chunks(in_channels * kernel)
            .map(|r| r.iter().map(|&v| v * v).sum::<F>().sqrt())
            .collect();
        let direction = store.add_param(format!("{name}.weight_v"), dir);
        let gain = store.add_param(format!("{name}.weight_g"), Tensor::from_vec(gains));
        let bias = store.add_param(format!("{name}.bias"), Tensor::zeros(&[out_channels]));
        WeightNormConv1d {
            direction,
            gain,
            bias,
            geometry,
            kernel,
        }
    }

    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &ParamStore<F>,
        x: Var,
    ) -> Result<Var> {
        let v = tape.param(store, self.direction);
        let g = tape.param(store, self.gain);
        let w = tape.weight_norm(v, g)?;
        let b = tape.param(store, self.bias);
        tape.conv1d(x, w, Some(b), self.geometry)
    }
}

/// Per-channel batch normalization over `[B, C, L]`.
#[derive(Clone, Debug)]
pub struct BatchNorm1d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm1d {
    pub fn new<F: Element>(store: &mut ParamStore<F>, name: &str, channels: usize) -> Self {
        BatchNorm1d {
            gamma: store.add_param(format!("{name}.weight"), Tensor::full(&[channels], F::one())),
            beta: store.add_param(format!("{name}.bias"), Tensor::zeros(&[channels])),
            running_mean: store.add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[channels])),
            running_var: store.add_buffer(
                format!("{name}.running_var"),
                Tensor::full(&[channels], F::one()),
            ),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    /// Train mode normalizes with batch statistics and folds them into the
    /// running estimates (unbiased variance); eval mode uses the running estimates.
    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &mut ParamStore<F>,
        x: Var,
    ) -> Result<Var> {
        let g = tape.param(store, self.gamma);
        let b = tape.param(store, self.beta);
        if tape.is_train() {
            let (y, stats) = tape.batchnorm_train(x, g, b, self.eps)?;
            let m = F::of(self.momentum);
            let keep = F::one() - m;
            let unbias = F::of(stats.count as f64 / (stats.count as f64 - 1.0));
            for (r, &v) in store
                .get_mut(self.running_mean)
                .value
                .data_mut()
                .iter_mut()
                .zip(&stats.mean)
            {
                *r = keep * *r + m * v;
            }
            for (r, &v) in store
                .get_mut(self.running_var)
                .value
                .data_mut()
                .iter_mut()
                .zip(&stats.var)
            {
                *r = keep * *r + m * v * unbias;
            }
            Ok(y)
        } else {
            let mean = store.value(self.running_mean).data().to_vec();
            let var = store.value(self.running_var).data().to_vec();
            tape.batchnorm_eval(x, g, b, &mean, &var, self.eps)
        }
    }
}
