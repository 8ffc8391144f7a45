use rand::Rng;

use super::tensor::{Real, Tensor};

/// Kernel `[Cout, Cin, k, k]` drawn uniformly from ±1/√(Cin·k²).
pub fn uniform_kernel<T: Real, R: Rng + ?Sized>(rng: &mut R, shape: [usize; 4]) -> Tensor<T> {
    let fan_in = (shape[1] * shape[2] * shape[3]) as f64;
    let bound = 1.0 / fan_in.sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect();
    Tensor::from_vec(&shape, data).expect("length matches shape")
}
