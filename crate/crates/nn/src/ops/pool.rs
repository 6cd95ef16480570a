use crate::error::NnError;
use crate::ops::conv::{conv_output_size, Padding};
use crate::scalar::Scalar;
use crate::tensor::{Shape4, Tensor4};

/// Output length and leading pad of a same-padded max-pool axis.
pub fn pool_output_size(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    conv_output_size(input, kernel, stride, Padding::Same).expect("same padding always fits")
}

/// Argmax memo of a max-pool forward pass: for every output element, the
/// flat index of the winning input element.
#[derive(Clone, Debug)]
pub struct PoolCache {
    input_shape: Shape4,
    argmax: Vec<u32>,
}

/// Same-padded max pooling. Padding cells never win; among equal maxima the
/// first in row-major window order wins.
pub fn maxpool_forward<T: Scalar>(x: &Tensor4<T>, kernel: usize, stride: usize) -> Result<(Tensor4<T>, PoolCache), NnError> {
    if kernel == 0 || stride == 0 {
        return Err(NnError::InvalidSpec(format!("pool kernel {kernel} stride {stride}")));
    }
    let [n, c, h, w] = x.shape();
    let (oh, pt) = pool_output_size(h, kernel, stride);
    let (ow, pl) = pool_output_size(w, kernel, stride);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let src = x.data();
    let dst = out.data_mut();
    let mut o = 0;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            let y0 = (oy * stride) as isize - pt as isize;
            for ox in 0..ow {
                let x0 = (ox * stride) as isize - pl as isize;
                let mut best = T::neg_infinity();
                let mut best_i = usize::MAX;
                for ky in 0..kernel as isize {
                    let iy = y0 + ky;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kernel as isize {
                        let ix = x0 + kx;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i = base + iy as usize * w + ix as usize;
                        if best_i == usize::MAX || src[i] > best {
                            best = src[i];
                            best_i = i;
                        }
                    }
                }
                dst[o] = best;
                argmax.push(best_i as u32);
                o += 1;
            }
        }
    }
    Ok((out, PoolCache { input_shape: x.shape(), argmax }))
}

/// Routes each output gradient to its memoized argmax.
pub fn maxpool_backward<T: Scalar>(cache: &PoolCache, grad_out: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
    if grad_out.len() != cache.argmax.len() {
        return Err(NnError::Shape(format!("pool grad {:?} does not match forward", grad_out.shape())));
    }
    let mut gx = Tensor4::zeros(cache.input_shape);
    let dst = gx.data_mut();
    for (&i, &g) in cache.argmax.iter().zip(grad_out.data()) {
        dst[i as usize] += g;
    }
    Ok(gx)
}
