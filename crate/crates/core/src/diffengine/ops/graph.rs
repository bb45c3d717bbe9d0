use crate::diffengine::{Element, Tape, Var};
use crate::error::{Error, Result};

impl<F: Element> Tape<F> {
    /// Divides each row of `[.., N, N]` by `max(row_sum, 1)`.
    ///
    /// On a binary adjacency without self-loops this is the neighbour-mean
    /// operator; isolated nodes get an all-zero row.
    pub fn row_normalize_clamped(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() < 2 {
            return Err(Error::dim("row_normalize", format!("{:?}", s)));
        }
        let width = s[s.len() - 1];
        let va = self.value_rc(a);
        let sums: Vec<F> = va.data().chunks(width).map(|r| r.iter().copied().sum()).collect();
        let mut out = va.as_ref().clone();
        for (row, &rs) in out.data_mut().chunks_mut(width).zip(&sums) {
            let d = rs.max(F::one());
            row.iter_mut().for_each(|v| *v /= d);
        }
        Ok(self.push_op(
            out,
            &[a],
            Box::new(move |g, _| {
                let mut ga = g.clone();
                for ((gr, ar), &rs) in ga
                    .data_mut()
                    .chunks_mut(width)
                    .zip(va.data().chunks(width))
                    .zip(&sums)
                {
                    if rs > F::one() {
                        let dot: F = gr.iter().zip(ar).map(|(&g, &a)| g * a).sum();
                        let corr = dot / (rs * rs);
                        for gv in gr.iter_mut() {
                            *gv = *gv / rs - corr;
                        }
                    }
                }
                vec![Some(ga)]
            }),
        ))
    }
}

