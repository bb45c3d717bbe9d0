//! Message passing and pooling over dense node-feature batches `[B, N, F]`.
//!
//! Adjacency enters as a batched dense tensor `[B, N, N]`, one block per
//! graph, so messages never cross samples.

mod diffpool;
mod gcn;
mod sage;

pub use diffpool::{cluster_count, DiffPoolGnn, DiffPoolLevel, DiffPoolOutput, DiffPoolStack, PoolAux};
pub use gcn::{gcn_operator, GcnLayer};
pub use sage::SageLayer;

use crate::diffengine::{Element, Tape, Var};
use crate::error::{Error, Result};

/// Column means over nodes: `[B, N, F] -> [B, F]`.
pub fn global_mean_pool<F: Element>(tape: &mut Tape<F>, h: Var) -> Result<Var> {
    if tape.shape(h).len() != 3 {
        return Err(Error::dim("global_mean_pool", format!("{:?}", tape.shape(h))));
    }
    tape.mean_axis(h, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffengine::{Mode, Tensor};

    #[test]
    fn column_means() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let h = tape.constant(Tensor::new(vec![1, 2, 2], vec![1.0, 3.0, 3.0, 5.0]).unwrap());
        let p = global_mean_pool(&mut tape, h).unwrap();
        assert_eq!(tape.value(p).data(), &[2.0, 4.0]);
    }

    #[test]
    fn single_node_is_identity() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let h = tape.constant(Tensor::new(vec![1, 1, 3], vec![1.0, -2.0, 0.5]).unwrap());
        let p = global_mean_pool(&mut tape, h).unwrap();
        assert_eq!(tape.value(p).data(), &[1.0, -2.0, 0.5]);
    }
}
