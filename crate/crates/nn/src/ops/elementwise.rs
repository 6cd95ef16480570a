use crate::error::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub fn relu_forward<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU given its forward output (or input; both share signs).
pub fn relu_backward<T: Scalar>(y: &Tensor4<T>, grad_out: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
    same_shape(y, grad_out)?;
    let mut g = grad_out.clone();
    for (d, &v) in g.data_mut().iter_mut().zip(y.data()) {
        if v <= T::zero() {
            *d = T::zero();
        }
    }
    Ok(g)
}

fn same_shape<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<(), NnError> {
    if a.shape() != b.shape() {
        return Err(NnError::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn add<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
    same_shape(a, b)?;
    let mut out = a.clone();
    out.add_assign(b);
    Ok(out)
}

pub fn subtract<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
    same_shape(a, b)?;
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o -= v;
    }
    Ok(out)
}

/// Concatenates along the channel axis.
pub fn concat_channels<T: Scalar>(parts: &[&Tensor4<T>]) -> Result<Tensor4<T>, NnError> {
    let first = parts.first().ok_or_else(|| NnError::Shape("concat of nothing".into()))?;
    let [n, _, h, w] = first.shape();
    if parts.iter().any(|p| p.batch() != n || p.height() != h || p.width() != w) {
        let shapes: Vec<_> = parts.iter().map(|p| p.shape()).collect();
        return Err(NnError::Shape(format!("cannot concat {shapes:?}")));
    }
    let c: usize = parts.iter().map(|p| p.channels()).sum();
    let mut data = Vec::with_capacity(n * c * h * w);
    for b in 0..n {
        for p in parts {
            data.extend_from_slice(p.item(b));
        }
    }
    Tensor4::from_vec([n, c, h, w], data)
}

/// Inverse of [`concat_channels`]: splits a gradient into per-part pieces.
pub fn split_channels<T: Scalar>(g: &Tensor4<T>, channels: &[usize]) -> Result<Vec<Tensor4<T>>, NnError> {
    if channels.iter().sum::<usize>() != g.channels() {
        return Err(NnError::Shape(format!("cannot split {} channels into {channels:?}", g.channels())));
    }
    let [n, _, h, w] = g.shape();
    let plane = h * w;
    let mut outs: Vec<Vec<T>> = channels.iter().map(|c| Vec::with_capacity(n * c * plane)).collect();
    for b in 0..n {
        let item = g.item(b);
        let mut off = 0;
        for (o, &c) in outs.iter_mut().zip(channels) {
            o.extend_from_slice(&item[off..off + c * plane]);
            off += c * plane;
        }
    }
    outs.into_iter().zip(channels).map(|(d, &c)| Tensor4::from_vec([n, c, h, w], d)).collect()
}
