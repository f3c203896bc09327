//! Analytic test functions on the unit square, used by tests and examples.

use std::f64::consts::PI;

/// Branin-Hoo function with `u, v` in `[0, 1]` mapped to `x1 in [-5, 10]`, `x2 in [0, 15]`.
pub fn branin(u: f64, v: f64) -> f64 {
    let x1 = -5.0 + 15.0 * u;
    let x2 = 15.0 * v;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branin_global_minima() {
        // Three global minima of value 0.397887 at (-pi, 12.275), (pi, 2.275), (9.42478, 2.475).
        for (x1, x2) in [(-PI, 12.275), (PI, 2.275), (9.42478, 2.475)] {
            let f = branin((x1 + 5.0) / 15.0, x2 / 15.0);
            assert!((f - 0.397887).abs() < 1e-5, "{f}");
        }
    }
}
