//! Central finite-difference verification of recorded gradients.
//!
//! The output of the function under test is reduced to a scalar with a fixed
//! random projection, so every output entry contributes to the check.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mode, ParamStore, Tape, Tensor, Var};
use crate::error::Result;

/// Floor on the denominator of [`relative_error`].
pub const REL_ERROR_FLOOR: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, 1e-3)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// (input or parameter name, flat index, analytic, numeric) at the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheck {
    fn record(&mut self, name: &str, index: usize, analytic: f64, numeric: f64) {
        self.checked += 1;
        let err = relative_error(analytic, numeric);
        if err > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(err);
            self.worst = Some((name.to_string(), index, analytic, numeric));
        }
    }

    fn new() -> Self {
        GradCheck {
            max_rel_error: 0.0,
            checked: 0,
            worst: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    pub mode: Mode,
    /// Seed for the projection, the entry sampling and every tape RNG.
    pub seed: u64,
    /// Entries checked per tensor; `None` checks all of them.
    pub max_entries: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            mode: Mode::Train,
            seed: 0,
            max_entries: None,
        }
    }
}

fn project(tape: &mut Tape<f64>, out: Var, seed: u64) -> Result<Var> {
    let shape = tape.shape(out).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let weights = Tensor::from_fn(&shape, |_| rng.gen_range(-1.0..1.0));
    let w = tape.constant(weights);
    let prod = tape.mul(out, w)?;
    Ok(tape.sum_all(prod))
}

fn entries(len: usize, cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match cfg.max_entries {
        Some(k) if k < len => {
            let mut idx = sample(rng, len, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

/// Checks gradients with respect to plain input tensors.
pub fn check_inputs<Fwd>(inputs: &[Tensor<f64>], cfg: GradCheckConfig, forward: Fwd) -> Result<GradCheck>
where
    Fwd: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new(cfg.mode, cfg.seed);
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = forward(&mut tape, &vars)?;
        let loss = project(&mut tape, out, cfg.seed)?;
        Ok(tape.value(loss).item())
    };

    let mut tape = Tape::new(cfg.mode, cfg.seed);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = forward(&mut tape, &vars)?;
    let loss = project(&mut tape, out, cfg.seed)?;
    let grads = tape.backward(loss)?;

    let mut report = GradCheck::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let zero = Tensor::zeros(inputs[k].shape());
        let analytic = grads.var(*var).unwrap_or(&zero).clone();
        for i in entries(inputs[k].numel(), &cfg, &mut rng) {
            let orig = work[k].data()[i];
            work[k].data_mut()[i] = orig + cfg.step;
            let plus = eval(&work)?;
            work[k].data_mut()[i] = orig - cfg.step;
            let minus = eval(&work)?;
            work[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            report.record(&format!("input{k}"), i, analytic.data()[i], numeric);
        }
    }
    Ok(report)
}

/// Checks gradients with respect to every trainable parameter in `store`.
pub fn check_params<Fwd>(store: &mut ParamStore<f64>, cfg: GradCheckConfig, forward: Fwd) -> Result<GradCheck>
where
    Fwd: Fn(&mut Tape<f64>, &mut ParamStore<f64>) -> Result<Var>,
{
    let eval = |store: &mut ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new(cfg.mode, cfg.seed);
        let out = forward(&mut tape, store)?;
        let loss = project(&mut tape, out, cfg.seed)?;
        Ok(tape.value(loss).item())
    };

    let mut tape = Tape::new(cfg.mode, cfg.seed);
    let out = forward(&mut tape, store)?;
    let loss = project(&mut tape, out, cfg.seed)?;
    let grads = tape.backward(loss)?;

    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    let mut report = GradCheck::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    for id in ids {
        let numel = store.value(id).numel();
        let zero = Tensor::zeros(store.value(id).shape());
        let analytic = grads.param(id).unwrap_or(&zero).clone();
        let name = store.get(id).name.clone();
        for i in entries(numel, &cfg, &mut rng) {
            let orig = store.value(id).data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + cfg.step;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig - cfg.step;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            report.record(&name, i, analytic.data()[i], numeric);
        }
    }
    Ok(report)
}
