use std::rc::Rc;

use crate::diffengine::element::{gemm, MatRef};
use crate::diffengine::{Element, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Stride, padding and dilation of a 1-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv1dGeometry {
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub dilation: usize,
}

impl Conv1dGeometry {
    pub fn symmetric(stride: usize, padding: usize, dilation: usize) -> Self {
        Conv1dGeometry {
            stride,
            pad_left: padding,
            pad_right: padding,
            dilation,
        }
    }

    /// All padding on the left, `(kernel - 1) * dilation` wide.
    pub fn causal(kernel: usize, stride: usize, dilation: usize) -> Self {
        Conv1dGeometry {
            stride,
            pad_left: kernel.saturating_sub(1) * dilation,
            pad_right: 0,
            dilation,
        }
    }

    pub fn output_len(&self, input_len: usize, kernel: usize) -> Result<usize> {
        conv_output_len(
            input_len,
            kernel,
            self.stride,
            self.pad_left + self.pad_right,
            self.dilation,
        )
    }
}

/// `floor((L + padding - dilation*(K-1) - 1) / stride) + 1`, rejecting empty outputs.
pub fn conv_output_len(
    input_len: usize,
    kernel: usize,
    stride: usize,
    total_padding: usize,
    dilation: usize,
) -> Result<usize> {
    if kernel == 0 || stride == 0 || dilation == 0 {
        return Err(Error::Geometry(format!(
            "kernel {kernel}, stride {stride}, dilation {dilation} must all be >= 1"
        )));
    }
    let span = dilation * (kernel - 1) + 1;
    let padded = input_len + total_padding;
    if padded < span {
        return Err(Error::Geometry(format!(
            "input length {input_len} (+{total_padding} padding) shorter than receptive span {span}"
        )));
    }
    Ok((padded - span) / stride + 1)
}

impl<F: Element> Tape<F> {
    /// `[B, C_in, L] ⊛ [C_out, C_in, K] (+ bias[C_out]) -> [B, C_out, L_out]`.
    pub fn conv1d(
        &mut self,
        x: Var,
        weight: Var,
        bias: Option<Var>,
        geom: Conv1dGeometry,
    ) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(weight).to_vec());
        if sx.len() != 3 || sw.len() != 3 {
            return Err(Error::dim("conv1d", format!("input {:?}, weight {:?}", sx, sw)));
        }
        let (batch, c_in, len) = (sx[0], sx[1], sx[2]);
        let (c_out, w_in, kernel) = (sw[0], sw[1], sw[2]);
        if c_in != w_in {
            return Err(Error::dim(
                "conv1d",
                format!("input has {c_in} channels, weight expects {w_in}"),
            ));
        }
        if let Some(b) = bias {
            if self.shape(b) != [c_out] {
                return Err(Error::dim("conv1d", format!("bias {:?} for {c_out} outputs", self.shape(b))));
            }
        }
        let out_len = geom.output_len(len, kernel)?;
        let patch = c_in * kernel;
        let rows = batch * out_len;

        // Input offset of each (output position, tap); None inside padding.
        let taps: Rc<Vec<Option<usize>>> = Rc::new(
            (0..out_len)
                .flat_map(|t| {
                    (0..kernel).map(move |k| {
                        let pos = (t * geom.stride + k * geom.dilation) as isize - geom.pad_left as isize;
                        (pos >= 0 && (pos as usize) < len).then_some(pos as usize)
                    })
                })
                .collect(),
        );

        let xv = self.value(x).data();
        let mut cols = vec![F::zero(); rows * patch];
        for b in 0..batch {
            for t in 0..out_len {
                let row = &mut cols[(b * out_len + t) * patch..(b * out_len + t + 1) * patch];
                for c in 0..c_in {
                    let src = &xv[(b * c_in + c) * len..(b * c_in + c + 1) * len];
                    for k in 0..kernel {
                        if let Some(p) = taps[t * kernel + k] {
                            row[c * kernel + k] = src[p];
                        }
                    }
                }
            }
        }

        let wv = self.value_rc(weight);
        let mut out_mat = vec![F::zero(); rows * c_out];
        gemm(
            MatRef::new(&cols, rows, patch),
            MatRef::new(wv.data(), c_out, patch).t(),
            &mut out_mat,
            false,
        );
        let bias_vals = bias.map(|b| self.value(b).data().to_vec());
        let mut out = vec![F::zero(); batch * c_out * out_len];
        for b in 0..batch {
            for t in 0..out_len {
                let r = &out_mat[(b * out_len + t) * c_out..(b * out_len + t + 1) * c_out];
                for co in 0..c_out {
                    let bv = bias_vals.as_ref().map_or(F::zero(), |bv| bv[co]);
                    out[(b * c_out + co) * out_len + t] = r[co] + bv;
                }
            }
        }

        let cols = Rc::new(cols);
        let mut parents = vec![x, weight];
        parents.extend(bias);
        let has_bias = bias.is_some();
        Ok(self.push_op(
            Tensor::new(vec![batch, c_out, out_len], out)?,
            &parents,
            Box::new(move |g, need| {
                let gd = g.data();
                // [B, C_out, L_out] -> [(B·L_out), C_out]
                let mut g_mat = vec![F::zero(); rows * c_out];
                for b in 0..batch {
                    for co in 0..c_out {
                        let src = &gd[(b * c_out + co) * out_len..(b * c_out + co + 1) * out_len];
                        for (t, &v) in src.iter().enumerate() {
                            g_mat[(b * out_len + t) * c_out + co] = v;
                        }
                    }
                }
                let gm = MatRef::new(&g_mat, rows, c_out);

                let gx = need[0].then(|| {
                    let mut dcols = vec![F::zero(); rows * patch];
                    gemm(gm, MatRef::new(wv.data(), c_out, patch), &mut dcols, false);
                    let mut dx = vec![F::zero(); batch * c_in * len];
                    for b in 0..batch {
                        for t in 0..out_len {
                            let row = &dcols[(b * out_len + t) * patch..(b * out_len + t + 1) * patch];
                            for c in 0..c_in {
                                let dst = &mut dx[(b * c_in + c) * len..(b * c_in + c + 1) * len];
                                for k in 0..kernel {
                                    if let Some(p) = taps[t * kernel + k] {
                                        dst[p] += row[c * kernel + k];
                                    }
                                }
                            }
                        }
                    }
                    Tensor::new(vec![batch, c_in, len], dx).unwrap()
                });
                let gw = need[1].then(|| {
                    let mut dw = vec![F::zero(); c_out * patch];
                    gemm(gm.t(), MatRef::new(&cols, rows, patch), &mut dw, false);
                    Tensor::new(vec![c_out, c_in, kernel], dw).unwrap()
                });
                let mut grads = vec![gx, gw];
                if has_bias {
                    grads.push(need[2].then(|| {
                        let mut db = vec![F::zero(); c_out];
                        for r in g_mat.chunks(c_out) {
                            for (d, &v) in db.iter_mut().zip(r) {
                                *d += v;
                            }
                        }
                        Tensor::from_vec(db)
                    }));
                }
                grads
            }),
        ))
    }
}
