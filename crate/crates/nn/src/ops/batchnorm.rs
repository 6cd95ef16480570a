use crate::error::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub const BN_MOMENTUM: f64 = 0.9997;
pub const BN_EPSILON: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-channel affine parameters and running statistics.
///
/// Running statistics are kept as bias-corrected exponential averages:
/// after `t` updates they equal `EMA_t / (1 - momentum^t)` of a zero-started
/// average, so short runs are not dominated by the initial value.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T> {
    pub scale: Vec<T>,
    pub shift: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub updates: u64,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            scale: vec![T::one(); channels],
            shift: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            updates: 0,
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    fn update_running(&mut self, mean: &[f64], var: &[f64]) {
        let m = BN_MOMENTUM;
        let t = self.updates as i32 + 1;
        let prev_w = m * (1.0 - m.powi(t - 1));
        let norm = 1.0 - m.powi(t);
        for c in 0..self.channels() {
            let rm = (prev_w * self.running_mean[c].as_f64() + (1.0 - m) * mean[c]) / norm;
            let rv = (prev_w * self.running_var[c].as_f64() + (1.0 - m) * var[c]) / norm;
            self.running_mean[c] = T::from_f64(rm);
            self.running_var[c] = T::from_f64(rv.max(0.0));
        }
        self.updates += 1;
    }
}

/// Values saved by a train-mode forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    xhat: Tensor4<T>,
    inv_std: Vec<T>,
}

fn channel_stats<T: Scalar>(x: &Tensor4<T>) -> (Vec<f64>, Vec<f64>) {
    let [n, c, h, w] = x.shape();
    let plane = h * w;
    let count = (n * plane) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut s = 0.0;
        for b in 0..n {
            s += x.item(b)[ch * plane..(ch + 1) * plane].iter().map(|v| v.as_f64()).sum::<f64>();
        }
        let mu = s / count;
        let mut q = 0.0;
        for b in 0..n {
            q += x.item(b)[ch * plane..(ch + 1) * plane].iter().map(|v| (v.as_f64() - mu).powi(2)).sum::<f64>();
        }
        mean[ch] = mu;
        var[ch] = q / count;
    }
    (mean, var)
}

/// `y = scale·(x−μ)/√(σ²+ε) + shift` per channel. Train mode normalizes with
/// batch statistics, updates the running averages and returns a cache;
/// infer mode uses the running averages.
pub fn batchnorm_forward<T: Scalar>(
    x: &Tensor4<T>,
    state: &mut BatchNormState<T>,
    mode: Mode,
) -> Result<(Tensor4<T>, Option<BatchNormCache<T>>), NnError> {
    if x.channels() != state.channels() {
        return Err(NnError::Shape(format!("batchnorm over {} channels got {}", state.channels(), x.channels())));
    }
    match mode {
        Mode::Infer => Ok((batchnorm_infer(x, state), None)),
        Mode::Train => {
            let (mean, var) = channel_stats(x);
            let inv_std: Vec<T> = var.iter().map(|v| T::from_f64(1.0 / (v + BN_EPSILON).sqrt())).collect();
            let mut xhat = Tensor4::zeros(x.shape());
            let mut y = Tensor4::zeros(x.shape());
            let plane = x.height() * x.width();
            for b in 0..x.batch() {
                let src = x.item(b);
                let xh = xhat.item_mut(b);
                for c in 0..x.channels() {
                    let mu = T::from_f64(mean[c]);
                    for i in c * plane..(c + 1) * plane {
                        xh[i] = (src[i] - mu) * inv_std[c];
                    }
                }
                let dst = y.item_mut(b);
                let xh = xhat.item(b);
                for c in 0..x.channels() {
                    let (g, s) = (state.scale[c], state.shift[c]);
                    for i in c * plane..(c + 1) * plane {
                        dst[i] = g * xh[i] + s;
                    }
                }
            }
            state.update_running(&mean, &var);
            Ok((y, Some(BatchNormCache { xhat, inv_std })))
        }
    }
}

fn batchnorm_infer<T: Scalar>(x: &Tensor4<T>, state: &BatchNormState<T>) -> Tensor4<T> {
    let plane = x.height() * x.width();
    let mut y = x.clone();
    for b in 0..x.batch() {
        let dst = y.item_mut(b);
        for c in 0..x.channels() {
            let k = state.scale[c] / (state.running_var[c] + T::from_f64(BN_EPSILON)).sqrt();
            let off = state.shift[c] - k * state.running_mean[c];
            for v in &mut dst[c * plane..(c + 1) * plane] {
                *v = k * *v + off;
            }
        }
    }
    y
}

/// Train-mode gradients: `(grad_x, grad_scale, grad_shift)`.
pub fn batchnorm_backward<T: Scalar>(
    cache: &BatchNormCache<T>,
    state: &BatchNormState<T>,
    grad_out: &Tensor4<T>,
) -> Result<(Tensor4<T>, Vec<T>, Vec<T>), NnError> {
    if grad_out.shape() != cache.xhat.shape() {
        return Err(NnError::Shape(format!("batchnorm grad {:?} does not match forward", grad_out.shape())));
    }
    let [n, c, h, w] = grad_out.shape();
    let plane = h * w;
    let count = (n * plane) as f64;
    let mut g_scale = vec![T::zero(); c];
    let mut g_shift = vec![T::zero(); c];
    let mut gx = Tensor4::zeros(grad_out.shape());
    for ch in 0..c {
        let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
        for b in 0..n {
            let dy = &grad_out.item(b)[ch * plane..(ch + 1) * plane];
            let xh = &cache.xhat.item(b)[ch * plane..(ch + 1) * plane];
            for (d, x) in dy.iter().zip(xh) {
                sum_dy += d.as_f64();
                sum_dy_xhat += d.as_f64() * x.as_f64();
            }
        }
        g_shift[ch] = T::from_f64(sum_dy);
        g_scale[ch] = T::from_f64(sum_dy_xhat);
        let k = state.scale[ch] * cache.inv_std[ch];
        let mean_dy = T::from_f64(sum_dy / count);
        let mean_dy_xhat = T::from_f64(sum_dy_xhat / count);
        for b in 0..n {
            let dy = &grad_out.item(b)[ch * plane..(ch + 1) * plane];
            let xh = &cache.xhat.item(b)[ch * plane..(ch + 1) * plane];
            let dst = &mut gx.item_mut(b)[ch * plane..(ch + 1) * plane];
            for i in 0..plane {
                dst[i] = k * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
            }
        }
    }
    Ok((gx, g_scale, g_shift))
}

/// Infer-mode gradient with respect to the input (statistics are constants).
pub fn batchnorm_infer_backward<T: Scalar>(state: &BatchNormState<T>, grad_out: &Tensor4<T>) -> Tensor4<T> {
    let plane = grad_out.height() * grad_out.width();
    let mut gx = grad_out.clone();
    for b in 0..gx.batch() {
        let dst = gx.item_mut(b);
        for c in 0..state.channels() {
            let k = state.scale[c] / (state.running_var[c] + T::from_f64(BN_EPSILON)).sqrt();
            for v in &mut dst[c * plane..(c + 1) * plane] {
                *v *= k;
            }
        }
    }
    gx
}
