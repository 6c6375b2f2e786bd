//! Central finite-difference gradient verification.

/// Step used for central differences.
pub const FD_EPSILON: f64 = 1e-4;

/// Magnitude below which gradients are compared absolutely rather than relatively.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + FD_EPSILON;
        let plus = f(&probe);
        probe[i] = orig - FD_EPSILON;
        let minus = f(&probe);
        probe[i] = orig;
        out.push((plus - minus) / (2.0 * FD_EPSILON));
    }
    out
}

/// Central-difference gradient restricted to the given coordinates.
pub fn numeric_grad_at(x: &[f64], indices: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    indices
        .iter()
        .map(|&i| {
            let orig = probe[i];
            probe[i] = orig + FD_EPSILON;
            let plus = f(&probe);
            probe[i] = orig - FD_EPSILON;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * FD_EPSILON)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}
