/// Central mixed partial derivative `∂^d F / ∂u₁⋯∂u_d` at `u` with step `h`.
pub(crate) fn mixed_difference(f: &dyn Fn(&[f64]) -> f64, u: &[f64], h: f64) -> f64 {
    let d = u.len();
    let mut x = u.to_vec();
    let mut acc = 0.0;
    for mask in 0u32..(1 << d) {
        let mut sign = 1.0;
        for (j, xj) in x.iter_mut().enumerate() {
            if mask & (1 << j) != 0 {
                *xj = u[j] + h;
            } else {
                *xj = u[j] - h;
                sign = -sign;
            }
        }
        acc += sign * f(&x);
    }
    acc / (2.0 * h).powi(d as i32)
}
