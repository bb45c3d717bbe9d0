use std::rc::Rc;

use crate::diffengine::{Element, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Per-channel statistics observed by a train-mode batch norm.
#[derive(Clone, Debug)]
pub struct BatchStats<F> {
    pub mean: Vec<F>,
    /// Biased (divisor `count`) variance used for normalization.
    pub var: Vec<F>,
    pub count: usize,
}

/// Guard added to a weight-norm row norm.
pub const WEIGHT_NORM_EPS: f64 = 1e-12;

fn bn_shapes<F: Element>(
    tape: &Tape<F>,
    x: Var,
    gamma: Var,
    beta: Var,
) -> Result<(usize, usize, usize)> {
    let s = tape.shape(x);
    if s.len() != 3 {
        return Err(Error::dim("batchnorm1d", format!("input {:?} is not [B, C, L]", s)));
    }
    let (b, c, l) = (s[0], s[1], s[2]);
    if tape.shape(gamma) != [c] || tape.shape(beta) != [c] {
        return Err(Error::dim(
            "batchnorm1d",
            format!("{c} channels, gamma {:?}, beta {:?}", tape.shape(gamma), tape.shape(beta)),
        ));
    }
    Ok((b, c, l))
}

impl<F: Element> Tape<F> {
    /// Normalizes each channel of `[B, C, L]` with statistics over batch and
    /// time, then applies `gamma * x̂ + beta`.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats<F>)> {
        let (b, c, l) = bn_shapes(self, x, gamma, beta)?;
        let count = b * l;
        if count < 2 {
            return Err(Error::DegenerateBatch(format!(
                "batch norm in train mode needs at least 2 values per channel, got {count}"
            )));
        }
        let xv = self.value(x).data();
        let n = F::of(count as f64);
        let mut mean = vec![F::zero(); c];
        let mut var = vec![F::zero(); c];
        for ch in 0..c {
            let mut s = F::zero();
            for bi in 0..b {
                s += xv[(bi * c + ch) * l..(bi * c + ch + 1) * l].iter().copied().sum::<F>();
            }
            let m = s / n;
            let mut ss = F::zero();
            for bi in 0..b {
                for &v in &xv[(bi * c + ch) * l..(bi * c + ch + 1) * l] {
                    ss += (v - m) * (v - m);
                }
            }
            mean[ch] = m;
            var[ch] = ss / n;
        }
        let inv_std: Vec<F> = var.iter().map(|&v| F::one() / (v + F::of(eps)).sqrt()).collect();
        let mut xhat = vec![F::zero(); xv.len()];
        for bi in 0..b {
            for ch in 0..c {
                let o = (bi * c + ch) * l;
                for t in 0..l {
                    xhat[o + t] = (xv[o + t] - mean[ch]) * inv_std[ch];
                }
            }
        }
        let g = self.value(gamma).data().to_vec();
        let be = self.value(beta).data().to_vec();
        let mut out = xhat.clone();
        for bi in 0..b {
            for ch in 0..c {
                let o = (bi * c + ch) * l;
                for v in &mut out[o..o + l] {
                    *v = g[ch] * *v + be[ch];
                }
            }
        }
        let xhat = Rc::new(xhat);
        let shape = vec![b, c, l];
        let stats = BatchStats {
            mean,
            var,
            count,
        };
        let y = self.push_op(
            Tensor::new(shape.clone(), out)?,
            &[x, gamma, beta],
            Box::new(move |gr, need| {
                let gd = gr.data();
                let mut dgamma = vec![F::zero(); c];
                let mut dbeta = vec![F::zero(); c];
                for bi in 0..b {
                    for ch in 0..c {
                        let o = (bi * c + ch) * l;
                        for t in 0..l {
                            dgamma[ch] += gd[o + t] * xhat[o + t];
                            dbeta[ch] += gd[o + t];
                        }
                    }
                }
                let dx = need[0].then(|| {
                    let mut dx = vec![F::zero(); gd.len()];
                    for ch in 0..c {
                        let mean_dy = dbeta[ch] / n;
                        let mean_dy_xhat = dgamma[ch] / n;
                        let k = g[ch] * inv_std[ch];
                        for bi in 0..b {
                            let o = (bi * c + ch) * l;
                            for t in 0..l {
                                dx[o + t] = k * (gd[o + t] - mean_dy - xhat[o + t] * mean_dy_xhat);
                            }
                        }
                    }
                    Tensor::new(shape.clone(), dx).unwrap()
                });
                vec![
                    dx,
                    need[1].then(|| Tensor::from_vec(dgamma)),
                    need[2].then(|| Tensor::from_vec(dbeta)),
                ]
            }),
        );
        Ok((y, stats))
    }

    /// Batch norm with fixed statistics: a per-channel affine map.
    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[F],
        running_var: &[F],
        eps: f64,
    ) -> Result<Var> {
        let (b, c, l) = bn_shapes(self, x, gamma, beta)?;
        if running_mean.len() != c || running_var.len() != c {
            return Err(Error::dim("batchnorm1d", "running statistics length"));
        }
        let inv_std: Vec<F> = running_var
            .iter()
            .map(|&v| F::one() / (v + F::of(eps)).sqrt())
            .collect();
        let xv = self.value(x).data();
        let mut xhat = vec![F::zero(); xv.len()];
        for bi in 0..b {
            for ch in 0..c {
                let o = (bi * c + ch) * l;
                for t in 0..l {
                    xhat[o + t] = (xv[o + t] - running_mean[ch]) * inv_std[ch];
                }
            }
        }
        let g = self.value(gamma).data().to_vec();
        let be = self.value(beta).data().to_vec();
        let mut out = xhat.clone();
        for bi in 0..b {
            for ch in 0..c {
                let o = (bi * c + ch) * l;
                for v in &mut out[o..o + l] {
                    *v = g[ch] * *v + be[ch];
                }
            }
        }
        let shape = vec![b, c, l];
        Ok(self.push_op(
            Tensor::new(shape.clone(), out)?,
            &[x, gamma, beta],
            Box::new(move |gr, need| {
                let gd = gr.data();
                let mut dx = vec![F::zero(); gd.len()];
                let mut dgamma = vec![F::zero(); c];
                let mut dbeta = vec![F::zero(); c];
                for bi in 0..b {
                    for ch in 0..c {
                        let o = (bi * c + ch) * l;
                        for t in 0..l {
                            dx[o + t] = gd[o + t] * g[ch] * inv_std[ch];
                            dgamma[ch] += gd[o + t] * xhat[o + t];
                            dbeta[ch] += gd[o + t];
                        }
                    }
                }
                vec![
                    need[0].then(|| Tensor::new(shape.clone(), dx).unwrap()),
                    need[1].then(|| Tensor::from_vec(dgamma)),
                    need[2].then(|| Tensor::from_vec(dbeta)),
                ]
            }),
        ))
    }

    /// `gain[o] * v[o, ..] / (‖v[o, ..]‖ + 1e-12)` for every output row `o`.
    pub fn weight_norm(&mut self, direction: Var, gain: Var) -> Result<Var> {
        let sv = self.shape(direction).to_vec();
        let rows = *sv.first().ok_or_else(|| Error::dim("weight_norm", "scalar direction"))?;
        if self.shape(gain) != [rows] {
            return Err(Error::dim(
                "weight_norm",
                format!("direction {:?}, gain {:?}", sv, self.shape(gain)),
            ));
        }
        let width = sv.iter().skip(1).product::<usize>();
        let v = self.value_rc(direction);
        let gv = self.value(gain).data().to_vec();
        let eps = F::of(WEIGHT_NORM_EPS);
        let norms: Vec<F> = v
            .data()
            .chunks(width)
            .map(|r| r.iter().map(|&x| x * x).sum::<F>().sqrt())
            .collect();
        let mut out = v.as_ref().clone();
        for ((row, &nrm), &g) in out.data_mut().chunks_mut(width).zip(&norms).zip(&gv) {
            let s = g / (nrm + eps);
            row.iter_mut().for_each(|x| *x *= s);
        }
        Ok(self.push_op(
            out,
            &[direction, gain],
            Box::new(move |gr, need| {
                let mut dv = vec![F::zero(); v.numel()];
                let mut dg = vec![F::zero(); rows];
                for o in 0..rows {
                    let vr = &v.data()[o * width..(o + 1) * width];
                    let gr = &gr.data()[o * width..(o + 1) * width];
                    let nrm = norms[o];
                    let denom = nrm + eps;
                    let dot: F = gr.iter().zip(vr).map(|(&a, &b)| a * b).sum();
                    dg[o] = dot / denom;
                    let a = gv[o] / denom;
                    let bcoef = if nrm > F::zero() {
                        gv[o] * dot / (nrm * denom * denom)
                    } else {
                        F::zero()
                    };
                    for i in 0..width {
                        dv[o * width + i] = a * gr[i] - bcoef * vr[i];
                    }
                }
                vec![
                    need[0].then(|| Tensor::new(v.shape().to_vec(), dv).unwrap()),
                    need[1].then(|| Tensor::from_vec(dg)),
                ]
            }),
        ))
    }
}
