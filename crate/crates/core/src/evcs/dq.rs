use std::f64::consts::PI;

const SHIFT: [f64; 3] = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];

/// Amplitude-invariant Park transform. A balanced set
/// `V̂ cos(angle − k·2π/3)` maps to `(V̂, 0)`.
pub fn dq_forward(abc: [f64; 3], angle: f64) -> (f64, f64) {
    let mut d = 0.0;
    let mut q = 0.0;
    for (v, s) in abc.iter().zip(SHIFT) {
        d += v * (angle - s).cos();
        q -= v * (angle - s).sin();
    }
    (2.0 / 3.0 * d, 2.0 / 3.0 * q)
}

/// Inverse of [`dq_forward`] (zero-sequence free).
pub fn dq_inverse(dq: (f64, f64), angle: f64) -> [f64; 3] {
    let (d, q) = dq;
    SHIFT.map(|s| d * (angle - s).cos() - q * (angle - s).sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_set_is_constant() {
        for k in 0..50 {
            let t = k as f64 * 0.37;
            let abc = SHIFT.map(|s| 326.6 * (t - s).cos());
            let (d, q) = dq_forward(abc, t);
            assert!((d - 326.6).abs() < 1e-10 && q.abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let (d, q) = dq_forward(dq_inverse((3.0, -2.0), 1.1), 1.1);
        assert!((d - 3.0).abs() < 1e-12 && (q + 2.0).abs() < 1e-12);
    }
}
