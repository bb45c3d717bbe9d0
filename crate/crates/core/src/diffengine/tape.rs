//! Reverse-mode differentiation over a linear record of operations.
//!
//! Every operation appends a node holding its output value and a closure that
//! maps the output gradient to gradients for its parents. `backward` walks the
//! record in reverse. Nodes that cannot reach a trainable leaf are skipped.

use std::collections::HashMap;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Element, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Computes parent gradients from the output gradient. The flag slice says
/// which parents need one; entries for the others may be `None`.
pub(crate) type BackwardFn<F> = Box<dyn Fn(&Tensor<F>, &[bool]) -> Vec<Option<Tensor<F>>>>;

struct Node<F> {
    value: Rc<Tensor<F>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<F>>,
    needs_grad: bool,
    param: Option<ParamId>,
}

pub struct Tape<F> {
    nodes: Vec<Node<F>>,
    param_vars: HashMap<ParamId, Var>,
    mode: Mode,
    rng: ChaCha8Rng,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Gradients<F> {
    params: HashMap<ParamId, Tensor<F>>,
    leaves: HashMap<Var, Tensor<F>>,
}

impl<F: Element> Gradients<F> {
    pub fn param(&self, id: ParamId) -> Option<&Tensor<F>> {
        self.params.get(&id)
    }

    pub fn var(&self, v: Var) -> Option<&Tensor<F>> {
        self.leaves.get(&v)
    }

    /// Moves parameter gradients into the store so each trainable parameter
    /// reachable from the loss carries its gradient.
    pub fn write_to(self, store: &mut ParamStore<F>) {
        store.zero_grads();
        for (id, g) in self.params {
            store.get_mut(id).grad = Some(g);
        }
    }
}

impl<F: Element> Tape<F> {
    pub fn new(mode: Mode, seed: u64) -> Self {
        Tape {
            nodes: Vec::new(),
            param_vars: HashMap::new(),
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_train(&self) -> bool {
        self.mode == Mode::Train
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push_leaf(value, false, None)
    }

    /// Records an input whose gradient is reported through [`Gradients::var`].
    pub fn leaf(&mut self, value: Tensor<F>) -> Var {
        self.push_leaf(value, true, None)
    }

    /// Records a parameter leaf. Repeated calls for the same id share one node.
    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let p = store.get(id);
        let v = self.push_leaf(p.value.clone(), p.trainable, Some(id));
        self.param_vars.insert(id, v);
        v
    }

    fn push_leaf(&mut self, value: Tensor<F>, needs_grad: bool, param: Option<ParamId>) -> Var {
        self.nodes.push(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            needs_grad,
            param,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub(crate) fn value_rc(&self, v: Var) -> Rc<Tensor<F>> {
        Rc::clone(&self.nodes[v.0].value)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub(crate) fn push_op(
        &mut self,
        value: Tensor<F>,
        parents: &[Var],
        backward: BackwardFn<F>,
    ) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value: Rc::new(value),
            parents: parents.iter().map(|p| p.0).collect(),
            backward: if needs_grad { Some(backward) } else { None },
            needs_grad,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Back-propagates from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        let root = &self.nodes[loss.0];
        if root.value.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<F>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(root.value.shape(), F::one()));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            if let Some(backward) = &node.backward {
                let flags: Vec<bool> = node
                    .parents
                    .iter()
                    .map(|&p| self.nodes[p].needs_grad)
                    .collect();
                let parent_grads = backward(&g, &flags);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for ((&p, pg), &flag) in node.parents.iter().zip(parent_grads).zip(&flags) {
                    let Some(pg) = pg else { continue };
                    if !flag {
                        continue;
                    }
                    debug_assert_eq!(pg.shape(), self.nodes[p].value.shape());
                    match &mut grads[p] {
                        Some(acc) => acc.add_assign(&pg),
                        slot => *slot = Some(pg),
                    }
                }
            } else if let Some(id) = node.param {
                out.params.insert(id, g);
            } else {
                out.leaves.insert(Var(idx), g);
            }
        }
        Ok(out)
    }
}
