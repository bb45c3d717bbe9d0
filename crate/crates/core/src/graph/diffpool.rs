use rand::Rng;

use crate::diffengine::layers::{BatchNorm1d, Linear};
use crate::diffengine::{Element, ParamStore, Tape, Var};
use crate::error::{Error, Result};

use super::sage::SageLayer;

/// Entropy regularizer offset inside the logarithm.
pub const ENTROPY_EPS: f64 = 1e-15;

/// Clusters kept at a pooling level: `ceil(n / 4)`.
pub fn cluster_count(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Config("cannot pool an empty graph".into()));
    }
    Ok(n.div_ceil(4))
}

/// Three GraphSAGE layers, each followed by batch norm, with the three
/// outputs concatenated and projected to `out_features`.
#[derive(Clone, Debug)]
pub struct DiffPoolGnn {
    pub sage: Vec<SageLayer>,
    pub norms: Vec<BatchNorm1d>,
    pub proj: Linear,
    pub hidden: usize,
}

impl DiffPoolGnn {
    pub fn new<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_features: usize,
        hidden: usize,
        out_features: usize,
        rng: &mut R,
    ) -> Self {
        let mut sage = Vec::with_capacity(3);
        let mut norms = Vec::with_capacity(3);
        for i in 0..3 {
            let fin = if i == 0 { in_features } else { hidden };
            sage.push(SageLayer::new(store, &format!("{name}.conv{}", i + 1), fin, hidden, rng));
            norms.push(BatchNorm1d::new(store, &format!("{name}.bn{}", i + 1), hidden));
        }
        let proj = Linear::new(store, &format!("{name}.lin"), 3 * hidden, out_features, rng);
        DiffPoolGnn { sage, norms, proj, hidden }
    }

    /// `x: [B, n, F]`, `neighbor_mean: [B, n, n]` → `[B, n, out]`.
    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &mut ParamStore<F>,
        x: Var,
        neighbor_mean: Var,
    ) -> Result<Var> {
        let s = tape.shape(x).to_vec();
        let (b, n) = (s[0], s[1]);
        let mut h = x;
        let mut outs = Vec::with_capacity(3);
        for (layer, bn) in self.sage.iter().zip(&self.norms) {
            let y = layer.forward(tape, store, h, neighbor_mean)?;
            let y = tape.reshape(y, &[b * n, self.hidden, 1])?;
            let y = bn.forward(tape, store, y)?;
            h = tape.reshape(y, &[b, n, self.hidden])?;
            outs.push(h);
        }
        let cat = tape.concat_last(&outs)?;
        let flat = tape.reshape(cat, &[b * n, 3 * self.hidden])?;
        let out = self.proj.forward(tape, store, flat)?;
        tape.reshape(out, &[b, n, self.proj.out_features])
    }
}

/// Coarsened graph plus the auxiliary losses of one pooling level.
#[derive(Clone, Copy, Debug)]
pub struct DiffPoolOutput {
    /// Cluster features `[B, k, F]`.
    pub x: Var,
    /// Coarsened weighted adjacency `[B, k, k]`.
    pub adjacency: Var,
    /// Soft assignment `[B, n, k]`, rows sum to one.
    pub assignment: Var,
    pub link_loss: Var,
    pub entropy: Var,
}

/// One differentiable pooling step from `n_in` nodes to `n_out` clusters.
#[derive(Clone, Debug)]
pub struct DiffPoolLevel {
    pub embed: DiffPoolGnn,
    pub pool: DiffPoolGnn,
    pub n_in: usize,
    pub n_out: usize,
}

impl DiffPoolLevel {
    pub fn new<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        n_in: usize,
        features: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n_out = cluster_count(n_in)?;
        Ok(Self::with_clusters(store, name, n_in, n_out, features, rng))
    }

    pub fn with_clusters<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        n_in: usize,
        n_out: usize,
        features: usize,
        rng: &mut R,
    ) -> Self {
        let pool = DiffPoolGnn::new(store, &format!("{name}.gnn_pool"), features, features, n_out, rng);
        let embed = DiffPoolGnn::new(store, &format!("{name}.gnn_embed"), features, features, features, rng);
        DiffPoolLevel { embed, pool, n_in, n_out }
    }

    /// `x: [B, n, F]`, `adjacency: [B, n, n]` (binary or weighted, symmetric).
    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &mut ParamStore<F>,
        x: Var,
        adjacency: Var,
    ) -> Result<DiffPoolOutput> {
        let s = tape.shape(x).to_vec();
        if s.len() != 3 || s[1] != self.n_in {
            return Err(Error::dim("diffpool", format!("features {:?}, expected [B, {}, F]", s, self.n_in)));
        }
        let b = s[0];
        if tape.shape(adjacency) != [b, self.n_in, self.n_in] {
            return Err(Error::dim("diffpool", format!("adjacency {:?}", tape.shape(adjacency))));
        }
        let mean_op = tape.row_normalize_clamped(adjacency)?;
        let logits = self.pool.forward(tape, store, x, mean_op)?;
        let assignment = tape.softmax_last(logits)?;
        let z = self.embed.forward(tape, store, x, mean_op)?;

        let pooled = tape.bmm(assignment, z, true, false)?;
        let as_ = tape.bmm(adjacency, assignment, false, false)?;
        let coarse = tape.bmm(assignment, as_, true, false)?;

        let sst = tape.bmm(assignment, assignment, false, true)?;
        let diff = tape.sub(adjacency, sst)?;
        let sq = tape.sum_squares(diff);
        let norm = tape.sqrt(sq);
        let link_loss = tape.scale(norm, F::of(1.0 / (b * self.n_in * self.n_in) as f64));

        let shifted = tape.add_scalar(assignment, F::of(ENTROPY_EPS));
        let logs = tape.ln(shifted);
        let plogp = tape.mul(assignment, logs)?;
        let total = tape.sum_all(plogp);
        let entropy = tape.scale(total, F::of(-1.0 / (b * self.n_in) as f64));

        Ok(DiffPoolOutput { x: pooled, adjacency: coarse, assignment, link_loss, entropy })
    }
}

/// Summed auxiliary losses across pooling levels.
#[derive(Clone, Copy, Debug)]
pub struct PoolAux {
    pub link_loss: Var,
    pub entropy: Var,
}

/// Stacked pooling levels followed by a mean over the final clusters.
#[derive(Clone, Debug)]
pub struct DiffPoolStack {
    pub levels: Vec<DiffPoolLevel>,
}

impl DiffPoolStack {
    /// `n_levels` successive quarterings starting from `n_nodes`.
    pub fn new<F: Element, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        n_nodes: usize,
        features: usize,
        n_levels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut levels = Vec::with_capacity(n_levels);
        let mut n = n_nodes;
        for i in 0..n_levels {
            let level = DiffPoolLevel::new(store, &format!("{name}.level{}", i + 1), n, features, rng)?;
            n = level.n_out;
            levels.push(level);
        }
        Ok(DiffPoolStack { levels })
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.levels.first().map(|l| vec![l.n_in]).unwrap_or_default();
        out.extend(self.levels.iter().map(|l| l.n_out));
        out
    }

    /// Returns the graph readout `[B, F]` and the summed auxiliary losses.
    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &mut ParamStore<F>,
        x: Var,
        adjacency: Var,
    ) -> Result<(Var, PoolAux)> {
        let mut x = x;
        let mut a = adjacency;
        let mut link: Option<Var> = None;
        let mut ent: Option<Var> = None;
        for level in &self.levels {
            let out = level.forward(tape, store, x, a)?;
            x = out.x;
            a = out.adjacency;
            link = Some(match link {
                Some(l) => tape.add(l, out.link_loss)?,
                None => out.link_loss,
            });
            ent = Some(match ent {
                Some(e) => tape.add(e, out.entropy)?,
                None => out.entropy,
            });
        }
        let zero = || crate::diffengine::Tensor::scalar(F::zero());
        let link_loss = match link {
            Some(l) => l,
            None => tape.constant(zero()),
        };
        let entropy = match ent {
            Some(e) => e,
            None => tape.constant(zero()),
        };
        let readout = tape.mean_axis(x, 1)?;
        Ok((readout, PoolAux { link_loss, entropy }))
    }
}
