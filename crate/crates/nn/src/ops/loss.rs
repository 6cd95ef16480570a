use crate::error::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Mean squared error over all elements, with its gradient `2(p−t)/N`.
pub fn mse_loss<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<(f64, Tensor4<T>), NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::Shape(format!("mse of {:?} vs {:?}", pred.shape(), target.shape())));
    }
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let mut grad = pred.clone();
    let k = T::from_f64(2.0 / n);
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        sum += d.as_f64() * d.as_f64();
        *g = k * d;
    }
    Ok((sum / n, grad))
}
