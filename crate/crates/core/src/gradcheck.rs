//! Central finite differences, the independent oracle for every adjoint.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `(f(x + eps·e_i) − f(x − eps·e_i)) / (2·eps)` for every element `i`.
///
/// `f` must return a one-element tensor.
pub fn finite_diff_grad<T: Scalar>(
    mut f: impl FnMut(&Tensor<T>) -> Result<Tensor<T>>,
    x: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    if !(eps > 0.0) {
        return Err(Error::contract("finite difference step must be positive"));
    }
    let h = T::from_f64(eps);
    let two_h = T::from_f64(2.0 * eps);
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = scalar_of(f(&probe)?)?;
        probe.data_mut()[i] = orig - h;
        let down = scalar_of(f(&probe)?)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / two_h;
    }
    Ok(grad)
}

fn scalar_of<T: Scalar>(t: Tensor<T>) -> Result<T> {
    if !t.is_scalar() {
        return Err(Error::contract("finite difference target must be scalar"));
    }
    Ok(t.data()[0])
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, zero when both vanish.
pub fn relative_error<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let (mut num, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        num += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    let den = libm::sqrt(na.max(nb));
    if den == 0.0 {
        0.0
    } else {
        libm::sqrt(num) / den
    }
}
