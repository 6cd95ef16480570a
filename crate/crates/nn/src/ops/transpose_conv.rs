use crate::error::NnError;
use crate::ops::conv::ConvGeometry;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Uncropped output length of a transpose convolution along one axis.
pub fn transpose_full_size(input: usize, kernel: usize, stride: usize) -> usize {
    (input - 1) * stride + kernel
}

/// Offset of the target window inside the full output; negative when the
/// target is larger and gets zero padding.
fn window_offset(full: usize, target: usize) -> isize {
    (full as isize - target as isize).div_euclid(2)
}

fn geometry(cout: usize, h: usize, w: usize, k: usize, s: usize) -> ConvGeometry {
    ConvGeometry {
        channels: cout,
        in_h: transpose_full_size(h, k, s),
        in_w: transpose_full_size(w, k, s),
        kernel: k,
        stride: s,
        pad_top: 0,
        pad_left: 0,
        out_h: h,
        out_w: w,
    }
}

fn check<T: Scalar>(x: &Tensor4<T>, weights: &Tensor4<T>, stride: usize, target: (usize, usize)) -> Result<(), NnError> {
    let [cin, _, kh, kw] = weights.shape();
    if kh != kw || stride == 0 {
        return Err(NnError::Shape(format!("bad transpose kernel {kh}x{kw} stride {stride}")));
    }
    if cin != x.channels() {
        return Err(NnError::Shape(format!("transpose conv expects {cin} channels, got {}", x.channels())));
    }
    if target.0 == 0 || target.1 == 0 {
        return Err(NnError::Shape("transpose conv target must be non-empty".into()));
    }
    Ok(())
}

/// Copies `src` (full-size planes) into `dst` (target-size planes) through
/// the centered window, or the reverse when `to_full` is set.
fn window_copy<T: Scalar>(full: &mut [T], fh: usize, fw: usize, out: &mut [T], th: usize, tw: usize, channels: usize, to_full: bool) {
    let (oy, ox) = (window_offset(fh, th), window_offset(fw, tw));
    for c in 0..channels {
        for ty in 0..th {
            let fy = ty as isize + oy;
            if fy < 0 || fy >= fh as isize {
                continue;
            }
            for tx in 0..tw {
                let fx = tx as isize + ox;
                if fx < 0 || fx >= fw as isize {
                    continue;
                }
                let fi = (c * fh + fy as usize) * fw + fx as usize;
                let ti = (c * th + ty) * tw + tx;
                if to_full {
                    full[fi] = out[ti];
                } else {
                    out[ti] += full[fi];
                }
            }
        }
    }
}

/// Transpose convolution (fractionally strided), output cropped or
/// zero-padded around its center to `target = (height, width)`. `weights` is
/// `(in_channels, out_channels, k, k)`.
pub fn transpose_conv_forward<T: Scalar>(
    x: &Tensor4<T>,
    weights: &Tensor4<T>,
    bias: &[T],
    stride: usize,
    target: (usize, usize),
) -> Result<Tensor4<T>, NnError> {
    check(x, weights, stride, target)?;
    let [cin, cout, k, _] = weights.shape();
    if bias.len() != cout {
        return Err(NnError::Shape(format!("bias has {} entries for {cout} filters", bias.len())));
    }
    let g = geometry(cout, x.height(), x.width(), k, stride);
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let (th, tw) = target;
    let mut out = Tensor4::zeros([x.batch(), cout, th, tw]);
    let mut col = vec![T::zero(); rows * cols];
    let mut full = vec![T::zero(); cout * g.in_h * g.in_w];
    for n in 0..x.batch() {
        T::gemm(rows, cin, cols, T::one(), weights.data(), 1, rows as isize, x.item(n), cols as isize, 1, T::zero(), &mut col, cols as isize, 1);
        full.fill(T::zero());
        g.col2im(&col, &mut full);
        let dst = out.item_mut(n);
        for (c, &b) in bias.iter().enumerate() {
            dst[c * th * tw..(c + 1) * th * tw].fill(b);
        }
        window_copy(&mut full, g.in_h, g.in_w, dst, th, tw, cout, false);
    }
    Ok(out)
}

/// Gradients of [`transpose_conv_forward`].
pub fn transpose_conv_backward<T: Scalar>(
    x: &Tensor4<T>,
    weights: &Tensor4<T>,
    grad_out: &Tensor4<T>,
    stride: usize,
) -> Result<(Tensor4<T>, Tensor4<T>, Vec<T>), NnError> {
    let target = (grad_out.height(), grad_out.width());
    check(x, weights, stride, target)?;
    let [cin, cout, k, _] = weights.shape();
    if grad_out.batch() != x.batch() || grad_out.channels() != cout {
        return Err(NnError::Shape(format!("transpose conv grad {:?} does not match forward", grad_out.shape())));
    }
    let g = geometry(cout, x.height(), x.width(), k, stride);
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let (th, tw) = target;
    let mut gx = Tensor4::zeros(x.shape());
    let mut gw = Tensor4::zeros(weights.shape());
    let mut gb = vec![T::zero(); cout];
    let mut full = vec![T::zero(); cout * g.in_h * g.in_w];
    let mut gcol = vec![T::zero(); rows * cols];
    for n in 0..x.batch() {
        let go = grad_out.item(n);
        for (c, b) in gb.iter_mut().enumerate() {
            *b += go[c * th * tw..(c + 1) * th * tw].iter().copied().sum::<T>();
        }
        full.fill(T::zero());
        let mut go_owned = go.to_vec();
        window_copy(&mut full, g.in_h, g.in_w, &mut go_owned, th, tw, cout, true);
        g.im2col(&full, &mut gcol);
        // gx = W · gcol
        T::gemm(cin, rows, cols, T::one(), weights.data(), rows as isize, 1, &gcol, cols as isize, 1, T::zero(), gx.item_mut(n), cols as isize, 1);
        // gW += x · gcolᵀ
        T::gemm(cin, cols, rows, T::one(), x.item(n), cols as isize, 1, &gcol, 1, cols as isize, T::one(), gw.data_mut(), rows as isize, 1);
    }
    Ok((gx, gw, gb))
}
