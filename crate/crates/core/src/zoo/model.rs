use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::name::Pooling;
use super::spec::{ModelSpec, DIFFPOOL_LEVELS};
use crate::diffengine::layers::Linear;
use crate::diffengine::{Adam, Element, Mode, ParamStore, Tape, Tensor, Var};
use crate::encoders::TemporalEncoder;
use crate::error::{Error, Result};
use crate::graph::{gcn_operator, DiffPoolStack, GcnLayer, PoolAux};
use crate::prep::GraphSample;

/// Weights of the DiffPool auxiliary terms in the training objective. They are
/// still computed and reported.
pub const LINK_LOSS_WEIGHT: f64 = 0.0;
pub const ENTROPY_LOSS_WEIGHT: f64 = 0.0;

/// Dense, row-major copy of a batch of graph samples.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch {
    pub n_graphs: usize,
    pub n_nodes: usize,
    pub length: usize,
    /// `[B, N, T]`
    pub features: Vec<f64>,
    /// `[B, N, N]`, binary
    pub adjacency: Vec<f64>,
    pub labels: Vec<f64>,
}

impl GraphBatch {
    pub fn from_samples(samples: &[&GraphSample]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Batch("empty batch".into()))?;
        let (n, t) = (first.n_nodes(), first.length());
        let b = samples.len();
        let mut features = Vec::with_capacity(b * n * t);
        let mut adjacency = Vec::with_capacity(b * n * n);
        let mut labels = Vec::with_capacity(b);
        for s in samples {
            if s.n_nodes() != n || s.length() != t || s.adjacency.n_nodes() != n {
                return Err(Error::Batch(format!(
                    "sample {}/{}/{} has shape {}x{}, batch expects {n}x{t}",
                    s.window.subject_id,
                    s.window.scan_index,
                    s.window.window_index,
                    s.n_nodes(),
                    s.length()
                )));
            }
            for i in 0..n {
                features.extend(s.window.features.row(i).iter());
            }
            let dense: DMatrix<f64> = s.adjacency.to_dense_f64();
            for i in 0..n {
                adjacency.extend(dense.row(i).iter());
            }
            labels.push(s.label().as_f64());
        }
        Ok(GraphBatch {
            n_graphs: b,
            n_nodes: n,
            length: t,
            features,
            adjacency,
            labels,
        })
    }

    fn gcn_operators(&self) -> Result<Vec<f64>> {
        let n = self.n_nodes;
        let mut out = Vec::with_capacity(self.adjacency.len());
        for block in self.adjacency.chunks(n * n) {
            let op = gcn_operator(&DMatrix::from_row_slice(n, n, block))?;
            for i in 0..n {
                out.extend(op.row(i).iter());
            }
        }
        Ok(out)
    }
}

/// Dropout followed by a single linear unit and a sigmoid.
#[derive(Clone, Debug)]
pub struct PredictionHead {
    pub linear: Linear,
    pub dropout: f64,
}

impl PredictionHead {
    pub fn param_count(&self) -> usize {
        self.linear.in_features * self.linear.out_features + self.linear.out_features
    }

    /// `[B, F] -> [B]` probabilities.
    pub fn forward<F: Element>(&self, tape: &mut Tape<F>, store: &ParamStore<F>, h: Var) -> Result<Var> {
        let b = tape.shape(h)[0];
        let h = tape.dropout(h, self.dropout)?;
        let logit = self.linear.forward(tape, store, h)?;
        let p = tape.sigmoid(logit);
        tape.reshape(p, &[b])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ForwardOutput {
    pub probs: Var,
    pub aux: Option<PoolAux>,
}

/// Loss breakdown of one optimization step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub bce: f64,
    pub link_loss: Option<f64>,
    pub entropy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Model<F: Element> {
    spec: ModelSpec,
    store: ParamStore<F>,
    encoder: TemporalEncoder,
    gcn: Option<GcnLayer>,
    pool: Option<DiffPoolStack>,
    head: PredictionHead,
}

impl<F: Element> Model<F> {
    /// Builds and initializes a model; the same spec always yields the same parameters.
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut store = ParamStore::new();
        let encoder = TemporalEncoder::build(&spec.encoder_spec(), spec.dropout, &mut store, &mut rng)?;
        let width = spec.embed_dim;
        let gcn = spec
            .use_gcn
            .then(|| GcnLayer::new(&mut store, "gcn", width, width, &mut rng));
        let pool = match spec.pooling {
            Pooling::Mean => None,
            Pooling::DiffPool => Some(DiffPoolStack::new(
                &mut store,
                "diffpool",
                spec.n_nodes,
                width,
                DIFFPOOL_LEVELS,
                &mut rng,
            )?),
        };
        let head = PredictionHead {
            linear: Linear::new(&mut store, "head", width, 1, &mut rng),
            dropout: spec.dropout,
        };
        Ok(Model {
            spec: spec.clone(),
            store,
            encoder,
            gcn,
            pool,
            head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParamStore<F> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.store
    }

    pub fn head(&self) -> &PredictionHead {
        &self.head
    }

    pub fn gcn(&self) -> Option<&GcnLayer> {
        self.gcn.as_ref()
    }

    pub fn diffpool(&self) -> Option<&DiffPoolStack> {
        self.pool.as_ref()
    }

    /// Trainable scalars, including weight-norm gains and batch-norm affine
    /// parameters but not running statistics.
    pub fn parameter_count(&self) -> usize {
        self.store.trainable_count()
    }

    pub fn forward(&mut self, tape: &mut Tape<F>, batch: &GraphBatch) -> Result<ForwardOutput> {
        let (b, n, t) = (batch.n_graphs, batch.n_nodes, batch.length);
        if n != self.spec.n_nodes || t != self.spec.input_length {
            return Err(Error::Batch(format!(
                "batch is {n} nodes x {t} steps, model expects {} x {}",
                self.spec.n_nodes, self.spec.input_length
            )));
        }
        let x = tape.constant(Tensor::from_f64(&[b * n, 1, t], &batch.features)?);
        let emb = self.encoder.forward(tape, &mut self.store, x)?;
        let mut h = tape.reshape(emb, &[b, n, self.spec.embed_dim])?;
        if let Some(gcn) = &self.gcn {
            let op = tape.constant(Tensor::from_f64(&[b, n, n], &batch.gcn_operators()?)?);
            h = gcn.forward(tape, &self.store, h, op)?;
        }
        let (readout, aux) = match &self.pool {
            None => (tape.mean_axis(h, 1)?, None),
            Some(stack) => {
                let a = tape.constant(Tensor::from_f64(&[b, n, n], &batch.adjacency)?);
                let (r, aux) = stack.forward(tape, &mut self.store, h, a)?;
                (r, Some(aux))
            }
        };
        let probs = self.head.forward(tape, &self.store, readout)?;
        Ok(ForwardOutput { probs, aux })
    }

    /// Mean binary cross-entropy plus the weighted auxiliary pooling terms.
    pub fn objective(&mut self, tape: &mut Tape<F>, batch: &GraphBatch) -> Result<(Var, Var, ForwardOutput)> {
        let out = self.forward(tape, batch)?;
        let targets: Vec<F> = batch.labels.iter().map(|&y| F::of(y)).collect();
        let bce = tape.bce_loss(out.probs, &targets)?;
        let mut loss = bce;
        if let Some(aux) = out.aux {
            for (term, w) in [(aux.link_loss, LINK_LOSS_WEIGHT), (aux.entropy, ENTROPY_LOSS_WEIGHT)] {
                if w != 0.0 {
                    let scaled = tape.scale(term, F::of(w));
                    loss = tape.add(loss, scaled)?;
                }
            }
        }
        Ok((loss, bce, out))
    }

    /// Forward in train mode, backward, one Adam update.
    pub fn train_step(&mut self, adam: &mut Adam<F>, batch: &GraphBatch, tape_seed: u64) -> Result<StepStats> {
        let mut tape = Tape::new(Mode::Train, tape_seed);
        let (loss, bce, out) = self.objective(&mut tape, batch)?;
        let stats = StepStats {
            loss: tape.value(loss).item().as_f64(),
            bce: tape.value(bce).item().as_f64(),
            link_loss: out.aux.map(|a| tape.value(a.link_loss).item().as_f64()),
            entropy: out.aux.map(|a| tape.value(a.entropy).item().as_f64()),
        };
        if !stats.loss.is_finite() {
            return Ok(stats);
        }
        tape.backward(loss)?.write_to(&mut self.store);
        adam.step(&mut self.store)?;
        Ok(stats)
    }

    /// Eval-mode probabilities.
    pub fn predict(&mut self, batch: &GraphBatch) -> Result<Vec<f64>> {
        let mut tape = Tape::new(Mode::Eval, 0);
        let out = self.forward(&mut tape, batch)?;
        Ok(tape.value(out.probs).to_f64_vec())
    }

    /// Eval-mode objective value.
    pub fn eval_loss(&mut self, batch: &GraphBatch) -> Result<f64> {
        let mut tape = Tape::new(Mode::Eval, 0);
        let (loss, _, _) = self.objective(&mut tape, batch)?;
        Ok(tape.value(loss).item().as_f64())
    }
}
