//! Pointwise activations and their derivatives expressed through the outputs.

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// `dL/dx` for `y = sigmoid(x)` given `y` and `dL/dy`.
#[inline]
pub fn sigmoid_backward(y: f64, grad: f64) -> f64 {
    grad * y * (1.0 - y)
}

/// `dL/dx` for `y = tanh(x)` given `y` and `dL/dy`.
#[inline]
pub fn tanh_backward(y: f64, grad: f64) -> f64 {
    grad * (1.0 - y * y)
}
