use std::rc::Rc;

use crate::diffengine::element::{gemm, MatRef};
use crate::diffengine::{Element, Tape, Tensor, Var};
use crate::error::{Error, Result};

fn same_shape<F: Element>(tape: &Tape<F>, op: &'static str, a: Var, b: Var) -> Result<()> {
    if tape.shape(a) != tape.shape(b) {
        return Err(Error::dim(
            op,
            format!("{:?} vs {:?}", tape.shape(a), tape.shape(b)),
        ));
    }
    Ok(())
}

impl<F: Element> Tape<F> {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push_op(
            out,
            &[a, b],
            Box::new(|g, _| vec![Some(g.clone()), Some(g.clone())]),
        ))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push_op(
            out,
            &[a, b],
            Box::new(|g, _| vec![Some(g.clone()), Some(g.map(|v| -v))]),
        ))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "mul", a, b)?;
        let (va, vb) = (self.value_rc(a), self.value_rc(b));
        let out = va.zip_map(&vb, |x, y| x * y);
        Ok(self.push_op(
            out,
            &[a, b],
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.zip_map(&vb, |g, y| g * y)),
                    need[1].then(|| g.zip_map(&va, |g, x| g * x)),
                ]
            }),
        ))
    }

    pub fn scale(&mut self, a: Var, factor: F) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push_op(out, &[a], Box::new(move |g, _| vec![Some(g.map(|v| v * factor))]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let from = self.shape(a).to_vec();
        let out = self.value(a).clone().reshape(shape)?;
        Ok(self.push_op(
            out,
            &[a],
            Box::new(move |g, _| vec![Some(g.clone().reshape(&from).expect("same numel"))]),
        ))
    }

    /// Collapses every axis after the first.
    pub fn flatten(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a);
        let rows = shape.first().copied().unwrap_or(1);
        let cols = shape.iter().skip(1).product();
        self.reshape(a, &[rows, cols])
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let out = Tensor::scalar(self.value(a).sum());
        self.push_op(
            out,
            &[a],
            Box::new(move |g, _| vec![Some(Tensor::full(&shape, g.item()))]),
        )
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = F::of(self.value(a).numel().max(1) as f64);
        let s = self.sum_all(a);
        self.scale(s, F::one() / n)
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let va = self.value_rc(a);
        let out = Tensor::scalar(va.data().iter().map(|&x| x * x).sum());
        self.push_op(
            out,
            &[a],
            Box::new(move |g, _| {
                let two_g = g.item() + g.item();
                vec![Some(va.map(|x| x * two_g))]
            }),
        )
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.sqrt());
        let y = Rc::new(out.clone());
        self.push_op(
            out,
            &[a],
            Box::new(move |g, _| {
                let two = F::of(2.0);
                vec![Some(g.zip_map(&y, |g, y| {
                    if y > F::zero() {
                        g / (two * y)
                    } else {
                        F::zero()
                    }
                }))]
            }),
        )
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let va = self.value_rc(a);
        let out = va.map(|x| x.ln());
        self.push_op(
            out,
            &[a],
            Box::new(move |g, _| vec![Some(g.zip_map(&va, |g, x| g / x))]),
        )
    }

    pub fn add_scalar(&mut self, a: Var, c: F) -> Var {
        let out = self.value(a).map(|x| x + c);
        self.push_op(out, &[a], Box::new(|g, _| vec![Some(g.clone())]))
    }

    /// `[.., F] + bias[F]`, broadcasting over leading axes.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let features = *self.shape(x).last().unwrap_or(&1);
        if self.shape(bias) != [features] {
            return Err(Error::dim(
                "add_bias",
                format!("x {:?}, bias {:?}", self.shape(x), self.shape(bias)),
            ));
        }
        let mut out = self.value(x).clone();
        let b = self.value(bias).data().to_vec();
        for row in out.data_mut().chunks_mut(features) {
            for (v, &bv) in row.iter_mut().zip(&b) {
                *v += bv;
            }
        }
        Ok(self.push_op(
            out,
            &[x, bias],
            Box::new(move |g, need| {
                let gb = need[1].then(|| {
                    let mut acc = vec![F::zero(); features];
                    for row in g.data().chunks(features) {
                        for (a, &v) in acc.iter_mut().zip(row) {
                            *a += v;
                        }
                    }
                    Tensor::from_vec(acc)
                });
                vec![Some(g.clone()), gb]
            }),
        ))
    }

    /// `[M, K] · [K, N]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::dim("matmul", format!("{:?} · {:?}", sa, sb)));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (va, vb) = (self.value_rc(a), self.value_rc(b));
        let mut out = vec![F::zero(); m * n];
        gemm(MatRef::new(va.data(), m, k), MatRef::new(vb.data(), k, n), &mut out, false);
        Ok(self.push_op(
            Tensor::new(vec![m, n], out)?,
            &[a, b],
            Box::new(move |g, need| {
                let gm = MatRef::new(g.data(), m, n);
                let ga = need[0].then(|| {
                    let mut buf = vec![F::zero(); m * k];
                    gemm(gm, MatRef::new(vb.data(), k, n).t(), &mut buf, false);
                    Tensor::new(vec![m, k], buf).unwrap()
                });
                let gb = need[1].then(|| {
                    let mut buf = vec![F::zero(); k * n];
                    gemm(MatRef::new(va.data(), m, k).t(), gm, &mut buf, false);
                    Tensor::new(vec![k, n], buf).unwrap()
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Affine map `x · wᵀ + b` with `w` stored as `[out, in]`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(weight).to_vec());
        if sx.len() != 2 || sw.len() != 2 || sx[1] != sw[1] {
            return Err(Error::dim("linear", format!("x {:?}, weight {:?}", sx, sw)));
        }
        let (m, k, n) = (sx[0], sx[1], sw[0]);
        let (vx, vw) = (self.value_rc(x), self.value_rc(weight));
        let mut out = vec![F::zero(); m * n];
        gemm(MatRef::new(vx.data(), m, k), MatRef::new(vw.data(), n, k).t(), &mut out, false);
        let y = self.push_op(
            Tensor::new(vec![m, n], out)?,
            &[x, weight],
            Box::new(move |g, need| {
                let gm = MatRef::new(g.data(), m, n);
                let gx = need[0].then(|| {
                    let mut buf = vec![F::zero(); m * k];
                    gemm(gm, MatRef::new(vw.data(), n, k), &mut buf, false);
                    Tensor::new(vec![m, k], buf).unwrap()
                });
                let gw = need[1].then(|| {
                    let mut buf = vec![F::zero(); n * k];
                    gemm(gm.t(), MatRef::new(vx.data(), m, k), &mut buf, false);
                    Tensor::new(vec![n, k], buf).unwrap()
                });
                vec![gx, gw]
            }),
        );
        match bias {
            Some(b) => self.add_bias(y, b),
            None => Ok(y),
        }
    }

    /// Batched product `[B, M, K] · [B, K, N]`, with optional transposition of
    /// either operand's last two axes.
    pub fn bmm(&mut self, a: Var, b: Var, transpose_a: bool, transpose_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(Error::dim("bmm", format!("{:?} · {:?}", sa, sb)));
        }
        let batch = sa[0];
        let (ar, ac) = (sa[1], sa[2]);
        let (br, bc) = (sb[1], sb[2]);
        let (m, k) = if transpose_a { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if transpose_b { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(Error::dim(
                "bmm",
                format!("{:?}{} · {:?}{}", sa, if transpose_a { "ᵀ" } else { "" }, sb, if transpose_b { "ᵀ" } else { "" }),
            ));
        }
        let (va, vb) = (self.value_rc(a), self.value_rc(b));
        let mut out = vec![F::zero(); batch * m * n];
        for i in 0..batch {
            gemm(
                view(va.data(), ar, ac, transpose_a, i),
                view(vb.data(), br, bc, transpose_b, i),
                &mut out[i * m * n..(i + 1) * m * n],
                false,
            );
        }
        Ok(self.push_op(
            Tensor::new(vec![batch, m, n], out)?,
            &[a, b],
            Box::new(move |g, need| {
                // C = op(A)·op(B); dop(A) = G·op(B)ᵀ, dop(B) = op(A)ᵀ·G.
                let ga = need[0].then(|| {
                    let mut buf = vec![F::zero(); batch * ar * ac];
                    for i in 0..batch {
                        let gi = view(g.data(), m, n, false, i);
                        let bi = view(vb.data(), br, bc, transpose_b, i);
                        let dst = &mut buf[i * ar * ac..(i + 1) * ar * ac];
                        if transpose_a {
                            // dA = (G·op(B)ᵀ)ᵀ = op(B)·Gᵀ
                            gemm(bi, gi.t(), dst, false);
                        } else {
                            gemm(gi, bi.t(), dst, false);
                        }
                    }
                    Tensor::new(vec![batch, ar, ac], buf).unwrap()
                });
                let gb = need[1].then(|| {
                    let mut buf = vec![F::zero(); batch * br * bc];
                    for i in 0..batch {
                        let gi = view(g.data(), m, n, false, i);
                        let ai = view(va.data(), ar, ac, transpose_a, i);
                        let dst = &mut buf[i * br * bc..(i + 1) * br * bc];
                        if transpose_b {
                            // dB = (op(A)ᵀ·G)ᵀ = Gᵀ·op(A)
                            gemm(gi.t(), ai, dst, false);
                        } else {
                            gemm(ai.t(), gi, dst, false);
                        }
                    }
                    Tensor::new(vec![batch, br, bc], buf).unwrap()
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Mean over one axis, removing it.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(Error::dim("mean_axis", format!("axis {axis} of {:?}", shape)));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let inv = F::one() / F::of(len as f64);
        let src = self.value(a).data();
        let mut out = vec![F::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    out[o * inner + i] += src[base + i];
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        Ok(self.push_op(
            Tensor::new(out_shape, out)?,
            &[a],
            Box::new(move |g, _| {
                let mut buf = vec![F::zero(); outer * len * inner];
                for o in 0..outer {
                    for l in 0..len {
                        let base = (o * len + l) * inner;
                        for i in 0..inner {
                            buf[base + i] = g.data()[o * inner + i] * inv;
                        }
                    }
                }
                vec![Some(Tensor::new(shape.clone(), buf).unwrap())]
            }),
        ))
    }

    /// Concatenates along the last axis; all leading axes must agree.
    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self
            .shape(*parts.first().ok_or_else(|| Error::dim("concat_last", "no inputs"))?)
            .to_vec();
        let lead = &first[..first.len() - 1];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != first.len() || &s[..s.len() - 1] != lead {
                return Err(Error::dim("concat_last", format!("{:?} vs {:?}", first, s)));
            }
            widths.push(*s.last().unwrap());
        }
        let rows: usize = lead.iter().product();
        let total: usize = widths.iter().sum();
        let mut out = vec![F::zero(); rows * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p).data();
            for r in 0..rows {
                out[r * total + offset..r * total + offset + w]
                    .copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        let lead = lead.to_vec();
        Ok(self.push_op(
            Tensor::new(shape, out)?,
            parts,
            Box::new(move |g, need| {
                let mut offset = 0;
                widths
                    .iter()
                    .zip(need)
                    .map(|(&w, &needed)| {
                        let o = offset;
                        offset += w;
                        needed.then(|| {
                            let mut buf = Vec::with_capacity(rows * w);
                            for r in 0..rows {
                                buf.extend_from_slice(&g.data()[r * total + o..r * total + o + w]);
                            }
                            let mut s = lead.clone();
                            s.push(w);
                            Tensor::new(s, buf).unwrap()
                        })
                    })
                    .collect()
            }),
        ))
    }
}

fn view<F>(data: &[F], r: usize, c: usize, t: bool, i: usize) -> MatRef<'_, F> {
    let m = MatRef::new(&data[i * r * c..(i + 1) * r * c], r, c);
    if t {
        m.t()
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use crate::diffengine::{Mode, Tape, Tensor};

    #[test]
    fn matmul_values() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let a = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = tape.constant(Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn bmm_transposes() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let a = tape.constant(Tensor::new(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        // aᵀ·a is 3×3
        let c = tape.bmm(a, a, true, false).unwrap();
        assert_eq!(tape.shape(c), &[1, 3, 3]);
        assert_eq!(tape.value(c).at(&[0, 0, 0]), 17.0);
        assert_eq!(tape.value(c).at(&[0, 1, 2]), 2.0 * 3.0 + 5.0 * 6.0);
        let d = tape.bmm(a, a, false, true).unwrap();
        assert_eq!(tape.value(d).at(&[0, 1, 1]), 77.0);
    }

    #[test]
    fn mean_axis_middle() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let h = tape.constant(Tensor::new(vec![1, 2, 2], vec![1.0, 3.0, 3.0, 5.0]).unwrap());
        let m = tape.mean_axis(h, 1).unwrap();
        assert_eq!(tape.value(m).data(), &[2.0, 4.0]);
    }

    #[test]
    fn concat_last_interleaves_rows() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let a = tape.constant(Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap());
        let b = tape.constant(Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let c = tape.concat_last(&[a, b]).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let mut tape = Tape::<f64>::new(Mode::Eval, 0);
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        assert!(tape.matmul(a, b).is_err());
    }
}
