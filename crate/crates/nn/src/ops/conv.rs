use crate::error::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding so that the output is `ceil(in / stride)`; any odd
    /// padding surplus goes to the bottom/right edge.
    Same,
    /// No padding.
    Valid,
}

/// Output length and leading pad along one axis.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Some((out, total / 2))
        }
        Padding::Valid => (input >= kernel).then(|| ((input - kernel) / stride + 1, 0)),
    }
}

/// Sliding-window layout shared by convolution, its adjoint and the
/// transpose convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(
        channels: usize,
        in_h: usize,
        in_w: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<Self, NnError> {
        if kernel == 0 || stride == 0 {
            return Err(NnError::InvalidSpec(format!("kernel {kernel} and stride {stride} must be positive")));
        }
        let (out_h, pad_top) = conv_output_size(in_h, kernel, stride, padding)
            .ok_or_else(|| NnError::Shape(format!("height {in_h} smaller than kernel {kernel}")))?;
        let (out_w, pad_left) = conv_output_size(in_w, kernel, stride, padding)
            .ok_or_else(|| NnError::Shape(format!("width {in_w} smaller than kernel {kernel}")))?;
        Ok(Self { channels, in_h, in_w, kernel, stride, pad_top, pad_left, out_h, out_w })
    }

    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// True when the column matrix is the input itself.
    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad_top == 0 && self.pad_left == 0
    }

    /// Range of output positions whose tap `k` lands inside an input axis
    /// of length `len`, given the leading pad.
    fn valid_range(&self, k: usize, pad: usize, len: usize, out: usize) -> (usize, usize) {
        let s = self.stride;
        // o*s + k - pad in [0, len)
        let lo = if pad > k { (pad - k).div_ceil(s) } else { 0 };
        let hi = if len + pad > k { (len + pad - k).div_ceil(s).min(out) } else { 0 };
        (lo.min(hi), hi)
    }

    /// Unfolds one CHW image into a `(C·K·K) × (OH·OW)` matrix.
    pub fn im2col<T: Scalar>(&self, x: &[T], col: &mut [T]) {
        let (k, s) = (self.kernel, self.stride);
        let plane = self.out_h * self.out_w;
        for c in 0..self.channels {
            let src = &x[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ki in 0..k {
                let (y0, y1) = self.valid_range(ki, self.pad_top, self.in_h, self.out_h);
                for kj in 0..k {
                    let (x0, x1) = self.valid_range(kj, self.pad_left, self.in_w, self.out_w);
                    let row = (c * k + ki) * k + kj;
                    let dst = &mut col[row * plane..(row + 1) * plane];
                    for oy in 0..self.out_h {
                        let line = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        if oy < y0 || oy >= y1 {
                            line.fill(T::zero());
                            continue;
                        }
                        let iy = oy * s + ki - self.pad_top;
                        let srow = &src[iy * self.in_w..(iy + 1) * self.in_w];
                        line[..x0].fill(T::zero());
                        line[x1..].fill(T::zero());
                        if s == 1 {
                            let ix0 = x0 + kj - self.pad_left;
                            line[x0..x1].copy_from_slice(&srow[ix0..ix0 + (x1 - x0)]);
                        } else {
                            for ox in x0..x1 {
                                line[ox] = srow[ox * s + kj - self.pad_left];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`im2col`](Self::im2col): scatters-and-adds columns back
    /// into a CHW image.
    pub fn col2im<T: Scalar>(&self, col: &[T], x: &mut [T]) {
        let (k, s) = (self.kernel, self.stride);
        let plane = self.out_h * self.out_w;
        for c in 0..self.channels {
            let dst = &mut x[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ki in 0..k {
                let (y0, y1) = self.valid_range(ki, self.pad_top, self.in_h, self.out_h);
                for kj in 0..k {
                    let (x0, x1) = self.valid_range(kj, self.pad_left, self.in_w, self.out_w);
                    let row = (c * k + ki) * k + kj;
                    let src = &col[row * plane..(row + 1) * plane];
                    for oy in y0..y1 {
                        let iy = oy * s + ki - self.pad_top;
                        let drow = &mut dst[iy * self.in_w..(iy + 1) * self.in_w];
                        let line = &src[oy * self.out_w..(oy + 1) * self.out_w];
                        for ox in x0..x1 {
                            drow[ox * s + kj - self.pad_left] += line[ox];
                        }
                    }
                }
            }
        }
    }
}

fn check_conv_shapes<T: Scalar>(x: &Tensor4<T>, weights: &Tensor4<T>, bias: &[T]) -> Result<(), NnError> {
    let [o, c, kh, kw] = weights.shape();
    if kh != kw {
        return Err(NnError::Shape(format!("non-square kernel {kh}x{kw}")));
    }
    if c != x.channels() {
        return Err(NnError::Shape(format!("conv expects {c} input channels, got {}", x.channels())));
    }
    if bias.len() != o {
        return Err(NnError::Shape(format!("bias has {} entries for {o} filters", bias.len())));
    }
    Ok(())
}

/// 2-D cross-correlation. `weights` is `(filters, in_channels, k, k)`.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor4<T>,
    weights: &Tensor4<T>,
    bias: &[T],
    stride: usize,
    padding: Padding,
) -> Result<Tensor4<T>, NnError> {
    check_conv_shapes(x, weights, bias)?;
    let [o, _, k, _] = weights.shape();
    let g = ConvGeometry::new(x.channels(), x.height(), x.width(), k, stride, padding)?;
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let mut out = Tensor4::zeros([x.batch(), o, g.out_h, g.out_w]);
    let mut col = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); rows * cols] };
    for n in 0..x.batch() {
        let dst = out.item_mut(n);
        for (f, &b) in bias.iter().enumerate() {
            dst[f * cols..(f + 1) * cols].fill(b);
        }
        let src = if g.is_pointwise() {
            x.item(n)
        } else {
            g.im2col(x.item(n), &mut col);
            &col
        };
        T::gemm(o, rows, cols, T::one(), weights.data(), rows as isize, 1, src, cols as isize, 1, T::one(), dst, cols as isize, 1);
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor4<T>,
    weights: &Tensor4<T>,
    grad_out: &Tensor4<T>,
    stride: usize,
    padding: Padding,
) -> Result<(Tensor4<T>, Tensor4<T>, Vec<T>), NnError> {
    let [o, _, k, _] = weights.shape();
    check_conv_shapes(x, weights, &vec![T::zero(); o])?;
    let g = ConvGeometry::new(x.channels(), x.height(), x.width(), k, stride, padding)?;
    if grad_out.shape() != [x.batch(), o, g.out_h, g.out_w] {
        return Err(NnError::Shape(format!("conv grad {:?} does not match forward output", grad_out.shape())));
    }
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let mut gx = Tensor4::zeros(x.shape());
    let mut gw = Tensor4::zeros(weights.shape());
    let mut gb = vec![T::zero(); o];
    let pointwise = g.is_pointwise();
    let mut col = if pointwise { Vec::new() } else { vec![T::zero(); rows * cols] };
    let mut gcol = if pointwise { Vec::new() } else { vec![T::zero(); rows * cols] };
    for n in 0..x.batch() {
        let go = grad_out.item(n);
        for (f, b) in gb.iter_mut().enumerate() {
            *b += go[f * cols..(f + 1) * cols].iter().copied().sum::<T>();
        }
        let src = if pointwise {
            x.item(n)
        } else {
            g.im2col(x.item(n), &mut col);
            &col
        };
        // gw += go · colᵀ
        T::gemm(o, cols, rows, T::one(), go, cols as isize, 1, src, 1, cols as isize, T::one(), gw.data_mut(), rows as isize, 1);
        // gcol = wᵀ · go
        if pointwise {
            T::gemm(rows, o, cols, T::one(), weights.data(), 1, rows as isize, go, cols as isize, 1, T::zero(), gx.item_mut(n), cols as isize, 1);
        } else {
            T::gemm(rows, o, cols, T::one(), weights.data(), 1, rows as isize, go, cols as isize, 1, T::zero(), &mut gcol, cols as isize, 1);
            g.col2im(&gcol, gx.item_mut(n));
        }
    }
    Ok((gx, gw, gb))
}
