use crate::error::{Error, Result};
use crate::tensor::{Backward, Graph, Scalar, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output size `ceil(H / stride)`, zero padding split as evenly as
    /// possible with any extra row/column at the bottom/right.
    Same,
    Valid,
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    stride: usize,
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
}

impl Geometry {
    fn new(x: &[usize], k: &[usize], stride: usize, padding: Padding) -> Result<Self> {
        if x.len() != 4 {
            return Err(Error::shape("[N, H, W, C] input", x));
        }
        if k.len() != 4 {
            return Err(Error::shape("[kh, kw, Cin, Cout] kernel", k));
        }
        if stride == 0 {
            return Err(Error::Config("convolution stride must be at least 1".into()));
        }
        let (n, h, w, cin) = (x[0], x[1], x[2], x[3]);
        let (kh, kw, kcin, cout) = (k[0], k[1], k[2], k[3]);
        if cin != kcin {
            return Err(Error::ChannelMismatch {
                expected: kcin,
                got: cin,
            });
        }
        let (oh, ow, pad_top, pad_left) = match padding {
            Padding::Same => {
                let oh = h.div_ceil(stride);
                let ow = w.div_ceil(stride);
                let ph = ((oh - 1) * stride + kh).saturating_sub(h);
                let pw = ((ow - 1) * stride + kw).saturating_sub(w);
                (oh, ow, ph / 2, pw / 2)
            }
            Padding::Valid => {
                if h < kh || w < kw {
                    return Err(Error::SpatialUnderflow { h, w, kh, kw });
                }
                ((h - kh) / stride + 1, (w - kw) / stride + 1, 0, 0)
            }
        };
        Ok(Geometry {
            n,
            h,
            w,
            cin,
            kh,
            kw,
            cout,
            stride,
            oh,
            ow,
            pad_top,
            pad_left,
        })
    }

    /// A 1×1 stride-1 kernel reads the input directly as the column matrix.
    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1
    }

    fn patch(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Calls `f(col_offset, input_offset)` for every in-bounds kernel tap of
    /// one sample; each copies `cin` contiguous values.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize)) {
        let patch = self.patch();
        for oy in 0..self.oh {
            for ox in 0..self.ow {
                let row = (oy * self.ow + ox) * patch;
                for dy in 0..self.kh {
                    let iy = (oy * self.stride + dy) as isize - self.pad_top as isize;
                    if iy < 0 || iy >= self.h as isize {
                        continue;
                    }
                    for dx in 0..self.kw {
                        let ix = (ox * self.stride + dx) as isize - self.pad_left as isize;
                        if ix < 0 || ix >= self.w as isize {
                            continue;
                        }
                        let src = (iy as usize * self.w + ix as usize) * self.cin;
                        f(row + (dy * self.kw + dx) * self.cin, src);
                    }
                }
            }
        }
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        cols.fill(T::zero());
        let c = self.cin;
        self.for_each_tap(|dst, src| cols[dst..dst + c].copy_from_slice(&x[src..src + c]));
    }

    fn col2im<T: Scalar>(&self, cols: &[T], gx: &mut [T]) {
        let c = self.cin;
        self.for_each_tap(|dst, src| {
            for i in 0..c {
                gx[src + i] = gx[src + i] + cols[dst + i];
            }
        });
    }
}

struct Conv2dOp {
    geo: Geometry,
}

impl<T: Scalar> Backward<T> for Conv2dOp {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let geo = &self.geo;
        let (x, w) = (inputs[0].data(), inputs[1].data());
        let (k, p, cout) = (geo.patch(), geo.positions(), geo.cout);
        let x_len = geo.h * geo.w * geo.cin;
        let g_len = p * cout;

        let mut gx = needs[0].then(|| vec![T::zero(); x.len()]);
        let mut gw = needs[1].then(|| vec![T::zero(); w.len()]);

        if geo.pointwise() {
            let rows = geo.n * p;
            if let Some(gx) = &mut gx {
                T::gemm(rows, cout, k, grad, false, w, true, T::zero(), gx);
            }
            if let Some(gw) = &mut gw {
                T::gemm(k, rows, cout, x, true, grad, false, T::zero(), gw);
            }
        } else {
            let mut cols = vec![T::zero(); p * k];
            let mut dcols = vec![T::zero(); if gx.is_some() { p * k } else { 0 }];
            for s in 0..geo.n {
                let gs = &grad[s * g_len..(s + 1) * g_len];
                if let Some(gw) = &mut gw {
                    geo.im2col(&x[s * x_len..(s + 1) * x_len], &mut cols);
                    T::gemm(k, p, cout, &cols, true, gs, false, T::one(), gw);
                }
                if let Some(gx) = &mut gx {
                    T::gemm(p, cout, k, gs, false, w, true, T::zero(), &mut dcols);
                    geo.col2im(&dcols, &mut gx[s * x_len..(s + 1) * x_len]);
                }
            }
        }

        let gb = needs[2].then(|| {
            let mut gb = vec![T::zero(); cout];
            for row in grad.chunks_exact(cout) {
                gb.iter_mut().zip(row).for_each(|(a, &b)| *a = *a + b);
            }
            gb
        });
        vec![gx, gw, gb]
    }
}

impl<T: Scalar> Graph<T> {
    /// Cross-correlation of `x: [N,H,W,Cin]` with `weight: [kh,kw,Cin,Cout]`
    /// plus `bias: [Cout]`. For a 1×1 kernel every output pixel is the
    /// affine map `Σ_k w[k]·x[k] + b` of the same input pixel.
    pub fn conv2d(&mut self, x: Var, weight: Var, bias: Var, stride: usize, padding: Padding) -> Result<Var> {
        let geo = Geometry::new(self.shape(x), self.shape(weight), stride, padding)?;
        if self.shape(bias) != [geo.cout] {
            return Err(Error::shape([geo.cout], self.shape(bias)));
        }
        let (tx, tw, tb) = (self.value(x).data(), self.value(weight).data(), self.value(bias).data());
        let (k, p, cout) = (geo.patch(), geo.positions(), geo.cout);

        let mut out = vec![T::zero(); geo.n * p * cout];
        for row in out.chunks_exact_mut(cout) {
            row.copy_from_slice(tb);
        }
        if geo.pointwise() {
            T::gemm(geo.n * p, k, cout, tx, false, tw, false, T::one(), &mut out);
        } else {
            let x_len = geo.h * geo.w * geo.cin;
            let mut cols = vec![T::zero(); p * k];
            for (s, os) in out.chunks_exact_mut(p * cout).enumerate() {
                geo.im2col(&tx[s * x_len..(s + 1) * x_len], &mut cols);
                T::gemm(p, k, cout, &cols, false, tw, false, T::one(), os);
            }
        }
        let value = Tensor::raw(vec![geo.n, geo.oh, geo.ow, cout], out);
        self.push(value, &[x, weight, bias], Conv2dOp { geo })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, ReduceKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct nested-loop cross-correlation, same padding only.
    fn naive_conv_same(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, stride: usize) -> Vec<f64> {
        let [n, h, wd, cin] = x.shape().try_into().unwrap();
        let [kh, kw, _, cout] = w.shape().try_into().unwrap();
        let oh = h.div_ceil(stride);
        let ow = wd.div_ceil(stride);
        let pt = (((oh - 1) * stride + kh).saturating_sub(h) / 2) as isize;
        let pl = (((ow - 1) * stride + kw).saturating_sub(wd) / 2) as isize;
        let mut out = Vec::new();
        for s in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for co in 0..cout {
                        let mut acc = b.data()[co];
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let iy = (oy * stride + dy) as isize - pt;
                                let ix = (ox * stride + dx) as isize - pl;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                for ci in 0..cin {
                                    acc += x.at(&[s, iy as usize, ix as usize, ci]).unwrap()
                                        * w.at(&[dy, dx, ci, co]).unwrap();
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn one_by_one_is_per_pixel_sum() {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(Tensor::from_vec(&[1, 1, 1, 2], vec![0.5, 0.25]).unwrap());
        let w = g.leaf(Tensor::from_vec(&[1, 1, 2, 1], vec![1.0, 2.0]).unwrap());
        let b = g.leaf(Tensor::zeros(&[1]).unwrap());
        let y = g.conv2d(x, w, b, 1, Padding::Same).unwrap();
        assert_eq!(g.value(y).data(), &[1.0]);
    }

    #[test]
    fn center_delta_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xt = rand_tensor(&[2, 5, 4, 3], &mut rng);
        let mut wt = vec![0.0; 3 * 3 * 3 * 3];
        for c in 0..3 {
            wt[(4 * 3 + c) * 3 + c] = 1.0;
        }
        let mut g = Graph::<f64>::new();
        let x = g.leaf(xt.clone());
        let w = g.leaf(Tensor::from_vec(&[3, 3, 3, 3], wt).unwrap());
        let b = g.leaf(Tensor::zeros(&[3]).unwrap());
        let y = g.conv2d(x, w, b, 1, Padding::Same).unwrap();
        assert_eq!(g.value(y).data(), xt.data());
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (shape, kshape, stride) in [
            ([1, 6, 6, 3], [3, 3, 3, 4], 1),
            ([2, 7, 5, 2], [3, 3, 2, 3], 2),
            ([1, 6, 6, 2], [7, 7, 2, 1], 1),
            ([2, 4, 4, 5], [1, 1, 5, 3], 1),
        ] {
            let xt = rand_tensor(&shape, &mut rng);
            let wt = rand_tensor(&kshape, &mut rng);
            let bt = rand_tensor(&[kshape[3]], &mut rng);
            let expect = naive_conv_same(&xt, &wt, &bt, stride);
            let mut g = Graph::<f64>::new();
            let (x, w, b) = (g.leaf(xt), g.leaf(wt), g.leaf(bt));
            let y = g.conv2d(x, w, b, stride, Padding::Same).unwrap();
            assert_eq!(g.value(y).len(), expect.len());
            for (a, e) in g.value(y).data().iter().zip(&expect) {
                assert!((a - e).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn valid_padding_and_errors() {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(Tensor::zeros(&[1, 4, 4, 2]).unwrap());
        let w = g.leaf(Tensor::zeros(&[3, 3, 2, 1]).unwrap());
        let b = g.leaf(Tensor::zeros(&[1]).unwrap());
        let y = g.conv2d(x, w, b, 1, Padding::Valid).unwrap();
        assert_eq!(g.shape(y), &[1, 2, 2, 1]);

        let big = g.leaf(Tensor::zeros(&[5, 5, 2, 1]).unwrap());
        assert!(matches!(
            g.conv2d(x, big, b, 1, Padding::Valid),
            Err(Error::SpatialUnderflow { .. })
        ));
        let wrong = g.leaf(Tensor::zeros(&[3, 3, 3, 1]).unwrap());
        assert!(matches!(
            g.conv2d(x, wrong, b, 1, Padding::Same),
            Err(Error::ChannelMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (shape, kshape, stride, padding) in [
            ([2, 5, 6, 2], [3, 3, 2, 3], 1, Padding::Same),
            ([1, 6, 5, 3], [3, 2, 3, 2], 2, Padding::Same),
            ([1, 5, 5, 2], [3, 3, 2, 2], 1, Padding::Valid),
            ([2, 3, 3, 4], [1, 1, 4, 3], 1, Padding::Same),
        ] {
            let params = vec![
                rand_tensor(&shape, &mut rng),
                rand_tensor(&kshape, &mut rng),
                rand_tensor(&[kshape[3]], &mut rng),
            ];
            let err = grad_check(
                |g, p| {
                    let y = g.conv2d(p[0], p[1], p[2], stride, padding)?;
                    let y2 = g.mul(y, y)?;
                    g.reduce(y2, &[0, 1, 2, 3], ReduceKind::Mean, false)
                },
                &params,
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-6, "{shape:?} {kshape:?}: {err}");
        }
    }
}
