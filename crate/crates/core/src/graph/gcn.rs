use nalgebra::DMatrix;
use rand::Rng;

use crate::diffengine::{Element, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` holds the row sums of `A + I`.
pub fn gcn_operator(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::dim("gcn_operator", format!("{:?}", a.shape())));
    }
    let n = a.nrows();
    for i in 0..n {
        if a[(i, i)] != 0.0 {
            return Err(Error::Contract(format!("adjacency has a self-loop at node {i}")));
        }
        for j in i + 1..n {
            if a[(i, j)] != a[(j, i)] {
                return Err(Error::Contract(format!("adjacency is asymmetric at ({i}, {j})")));
            }
        }
    }
    let tilde = a + DMatrix::identity(n, n);
    let inv_sqrt: Vec<f64> = tilde.row_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * tilde[(i, j)] * inv_sqrt[j]))
}

/// Graph convolution `relu(Â H W + b)` with a precomputed normalized operator `Â`.
#[derive(Clone, Debug)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl GcnLayer {
    pub fn new<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_features: usize,
        out_features: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (in_features as f64).sqrt();
        GcnLayer {
            weight: store.add_param(
                format!("{name}.weight"),
                Tensor::uniform(&[out_features, in_features], bound, rng),
            ),
            bias: store.add_param(format!("{name}.bias"), Tensor::zeros(&[out_features])),
            in_features,
            out_features,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_features * self.out_features + self.out_features
    }

    /// `h: [B, N, F_in]`, `operator: [B, N, N]` → `[B, N, F_out]`.
    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &ParamStore<F>,
        h: Var,
        operator: Var,
    ) -> Result<Var> {
        let pre = self.forward_linear(tape, store, h, operator)?;
        Ok(tape.relu(pre))
    }

    /// Same as [`forward`](Self::forward) without the rectifier.
    pub fn forward_linear<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &ParamStore<F>,
        h: Var,
        operator: Var,
    ) -> Result<Var> {
        let s = tape.shape(h).to_vec();
        if s.len() != 3 || s[2] != self.in_features {
            return Err(Error::dim("gcn", format!("features {:?}, expected [B, N, {}]", s, self.in_features)));
        }
        let (b, n) = (s[0], s[1]);
        if tape.shape(operator) != [b, n, n] {
            return Err(Error::dim("gcn", format!("operator {:?} for features {:?}", tape.shape(operator), s)));
        }
        let w = tape.param(store, self.weight);
        let bias = tape.param(store, self.bias);
        let flat = tape.reshape(h, &[b * n, self.in_features])?;
        let hw = tape.linear(flat, w, None)?;
        let hw = tape.reshape(hw, &[b, n, self.out_features])?;
        let mixed = tape.bmm(operator, hw, false, false)?;
        tape.add_bias(mixed, bias)
    }
}
