//! Central-difference gradient oracle, independent of [`super::graph`].

use super::graph::{ParamId, ParamStore};
use super::tensor::{Real, Tensor};

/// Floor on the denominator of [`relative_error`], so entries whose true
/// gradient is ~0 are compared on an absolute scale.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every element `i`.
pub fn finite_diff_gradient<T: Real>(mut f: impl FnMut(&Tensor<T>) -> f64, x: &Tensor<T>, h: f64) -> Tensor<T> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = T::from_f64(orig.as_f64() + h);
        let plus = f(&probe);
        probe.data_mut()[i] = T::from_f64(orig.as_f64() - h);
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = T::from_f64((plus - minus) / (2.0 * h));
    }
    out
}

/// Finite differences of a loss with respect to one stored parameter.
pub fn finite_diff_param<T: Real>(
    store: &ParamStore<T>,
    id: ParamId,
    mut loss: impl FnMut(&ParamStore<T>) -> f64,
    h: f64,
) -> Tensor<T> {
    let mut scratch = store.clone();
    let x = store.value(id).clone();
    finite_diff_gradient(
        |probe| {
            *scratch.value_mut(id) = probe.clone();
            loss(&scratch)
        },
        &x,
        h,
    )
}

/// Largest elementwise `|a − b| / max(|a|, |b|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let (x, y) = (x.as_f64(), y.as_f64());
            (x - y).abs() / x.abs().max(y.abs()).max(RELATIVE_ERROR_FLOOR)
        })
        .fold(0.0, f64::max)
}
