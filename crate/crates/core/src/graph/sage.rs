use rand::Rng;

use crate::diffengine::{Element, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Mean-aggregator GraphSAGE: `relu(W_self h_v + W_neigh mean_{u~v} h_u + b)`.
#[derive(Clone, Debug)]
pub struct SageLayer {
    pub w_self: ParamId,
    pub w_neigh: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl SageLayer {
    pub fn new<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_features: usize,
        out_features: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (in_features as f64).sqrt();
        SageLayer {
            w_self: store.add_param(
                format!("{name}.lin_root"),
                Tensor::uniform(&[out_features, in_features], bound, rng),
            ),
            w_neigh: store.add_param(
                format!("{name}.lin_rel"),
                Tensor::uniform(&[out_features, in_features], bound, rng),
            ),
            bias: store.add_param(format!("{name}.bias"), Tensor::zeros(&[out_features])),
            in_features,
            out_features,
        }
    }

    /// `h: [B, n, F_in]`; `neighbor_mean: [B, n, n]` is the row-normalized
    /// adjacency (see `Tape::row_normalize_clamped`).
    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &ParamStore<F>,
        h: Var,
        neighbor_mean: Var,
    ) -> Result<Var> {
        let s = tape.shape(h).to_vec();
        if s.len() != 3 || s[2] != self.in_features {
            return Err(Error::dim("graphsage", format!("features {:?}, expected [B, n, {}]", s, self.in_features)));
        }
        let (b, n) = (s[0], s[1]);
        if tape.shape(neighbor_mean) != [b, n, n] {
            return Err(Error::dim("graphsage", format!("operator {:?}", tape.shape(neighbor_mean))));
        }
        let agg = tape.bmm(neighbor_mean, h, false, false)?;
        let h_flat = tape.reshape(h, &[b * n, self.in_features])?;
        let agg_flat = tape.reshape(agg, &[b * n, self.in_features])?;
        let ws = tape.param(store, self.w_self);
        let wn = tape.param(store, self.w_neigh);
        let bias = tape.param(store, self.bias);
        let own = tape.linear(h_flat, ws, None)?;
        let neigh = tape.linear(agg_flat, wn, Some(bias))?;
        let sum = tape.add(own, neigh)?;
        let out = tape.relu(sum);
        tape.reshape(out, &[b, n, self.out_features])
    }
}
